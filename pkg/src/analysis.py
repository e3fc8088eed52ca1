"""
InfoMarket Panel Analysis
Momentum/reversal profits, return-volume life-cycle quadrants, event-aligned
trade-size imbalance paths and serial correlation of simulated or ingested panels
"""

import json
import logging
import os
from dataclasses import dataclass
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy import stats

from errors import (
    DegenerateSeriesError,
    EmptyResultError,
    InsufficientHistoryError,
    ValidationError,
)

logger = logging.getLogger(__name__)

LARGE_CLASS = "newswatcher"
SMALL_CLASS = "momentum"


@dataclass(frozen=True)
class SortSpec:
    """Formation J and holding K periods plus return/volume bin counts"""

    J: int
    K: int
    return_bins: int = 2
    volume_bins: int = 2

    def __post_init__(self):
        if self.J < 1 or self.K < 1:
            raise ValidationError(f"formation and holding periods must be >= 1, got J={self.J}, K={self.K}")
        if self.return_bins < 2 or self.volume_bins < 2:
            raise ValidationError(
                f"need at least 2 bins, got {self.return_bins}x{self.volume_bins}"
            )


@dataclass
class QuadrantTable:
    """
    Mean future K-period return per (return bin x volume bin) cell

    Bin 0 is the lowest (losers / low volume). mean_return and counts are
    DataFrames indexed by return bin with volume bins as columns.
    """

    spec: SortSpec
    mean_return: pd.DataFrame
    counts: pd.DataFrame
    n_dates: int

    @property
    def wml(self) -> pd.Series:
        """Winner-minus-loser spread per volume bin"""
        top, bottom = self.spec.return_bins - 1, 0
        return self.mean_return.loc[top] - self.mean_return.loc[bottom]

    def cell(self, winner: bool, high_volume: bool) -> float:
        r = self.spec.return_bins - 1 if winner else 0
        v = self.spec.volume_bins - 1 if high_volume else 0
        return float(self.mean_return.loc[r, v])


def _pivot(panel: pd.DataFrame, column: str, warmup: int = 0) -> pd.DataFrame:
    missing = {"period", "stock_id", column} - set(panel.columns)
    if missing:
        raise ValidationError(f"panel is missing columns: {sorted(missing)}")
    duplicated = panel.duplicated(subset=["period", "stock_id"])
    if duplicated.any():
        first = panel.loc[duplicated, ["period", "stock_id"]].iloc[0]
        raise ValidationError(
            f"panel has {int(duplicated.sum())} duplicate (period, stock_id) rows, "
            f"first at period {first['period']}, stock {first['stock_id']}"
        )
    wide = panel.pivot(index="period", columns="stock_id", values=column).sort_index()
    return wide.loc[wide.index >= warmup]


def _is_constant(values: np.ndarray) -> bool:
    """Spread within rounding of the mean's magnitude"""
    return bool(np.ptp(values) <= 1e-12 * max(1.0, abs(float(np.mean(values)))))


def _assign_bins(x: np.ndarray, k: int) -> np.ndarray:
    """Quantile bins over the cross-section; values equal to an edge go to the lower bin"""
    if k == 2:
        edges = np.array([np.median(x)])
    else:
        edges = np.quantile(x, np.arange(1, k) / k)
    return np.searchsorted(edges, x, side="left")


def _formation_arrays(panel: pd.DataFrame, J: int, K: int, warmup: int):
    returns = _pivot(panel, "return", warmup)
    turnover = _pivot(panel, "turnover", warmup).reindex_like(returns)
    T = len(returns)
    if T < J + K + 1:
        raise InsufficientHistoryError(required=J + K + 1, available=T)
    log_gross = np.log1p(returns.to_numpy(dtype=float))
    cum = np.vstack([np.zeros(log_gross.shape[1]), np.cumsum(log_gross, axis=0)])
    turn_cum = np.vstack([np.zeros(log_gross.shape[1]), np.cumsum(turnover.to_numpy(dtype=float), axis=0)])

    dates = np.arange(J - 1, T - K)
    past = np.expm1(cum[dates + 1] - cum[dates + 1 - J])
    future = np.expm1(cum[dates + 1 + K] - cum[dates + 1])
    mean_turnover = (turn_cum[dates + 1] - turn_cum[dates + 1 - J]) / J
    return past, future, mean_turnover


def portfolio_sort(panel: pd.DataFrame, spec: SortSpec, warmup: int = 0) -> QuadrantTable:
    """
    Double sort on trailing-J return and trailing-J mean turnover

    At every formation date stocks are binned independently by both keys; the
    future K-period return is averaged per cell and then across dates with equal
    weight (calendar-time aggregation of overlapping holding periods)
    """
    past, future, mean_turnover = _formation_arrays(panel, spec.J, spec.K, warmup)
    R, V = spec.return_bins, spec.volume_bins
    sums = np.zeros((R, V))
    dates_present = np.zeros((R, V))
    counts = np.zeros((R, V), dtype=np.int64)

    for t in range(past.shape[0]):
        r_bin = _assign_bins(past[t], R)
        v_bin = _assign_bins(mean_turnover[t], V)
        cell = r_bin * V + v_bin
        n_cell = np.bincount(cell, minlength=R * V).reshape(R, V)
        total = np.bincount(cell, weights=future[t], minlength=R * V).reshape(R, V)
        present = n_cell > 0
        sums[present] += total[present] / n_cell[present]
        dates_present += present
        counts += n_cell

    with np.errstate(invalid="ignore", divide="ignore"):
        means = np.where(dates_present > 0, sums / np.maximum(dates_present, 1), np.nan)
    return QuadrantTable(
        spec=spec,
        mean_return=pd.DataFrame(means, index=pd.RangeIndex(R, name="return_bin"),
                                 columns=pd.RangeIndex(V, name="volume_bin")),
        counts=pd.DataFrame(counts, index=pd.RangeIndex(R, name="return_bin"),
                            columns=pd.RangeIndex(V, name="volume_bin")),
        n_dates=int(past.shape[0]),
    )


def momentum_profit(panel: pd.DataFrame, J: int, K: int, return_bins: int = 2, warmup: int = 0) -> float:
    """Mean future K-period return of the top trailing-J return bin minus the bottom bin"""
    SortSpec(J, K, return_bins, 2)
    past, future, _ = _formation_arrays(panel, J, K, warmup)
    spreads = []
    for t in range(past.shape[0]):
        bins = _assign_bins(past[t], return_bins)
        winners = future[t][bins == return_bins - 1]
        losers = future[t][bins == 0]
        if winners.size and losers.size:
            spreads.append(winners.mean() - losers.mean())
    if not spreads:
        raise EmptyResultError("no formation date had both winners and losers")
    return float(np.mean(spreads))


def momentum_profit_tstat(spreads: Sequence[float]) -> Tuple[float, float]:
    """Mean and one-sample t-statistic of per-seed spreads"""
    values = np.asarray(spreads, dtype=float)
    if values.size < 2:
        raise ValidationError("t-statistic needs at least 2 spreads")
    if _is_constant(values):
        raise DegenerateSeriesError("spreads have zero variance")
    t = stats.ttest_1samp(values, 0.0).statistic
    return float(values.mean()), float(t)


def return_autocorrelation(panel: pd.DataFrame, lag: int, warmup: int = 0) -> float:
    """Pooled cross-stock Pearson correlation of r_t with r_{t+lag}"""
    if lag < 1:
        raise ValidationError(f"lag must be >= 1, got {lag}")
    returns = _pivot(panel, "return", warmup).to_numpy(dtype=float)
    T = returns.shape[0]
    if T < lag + 2:
        raise InsufficientHistoryError(required=lag + 2, available=T)
    x = returns[:-lag].ravel()
    y = returns[lag:].ravel()
    if _is_constant(x) or _is_constant(y):
        raise DegenerateSeriesError("returns have zero variance; autocorrelation undefined")
    return float(np.corrcoef(x, y)[0, 1])


@dataclass
class ImbalancePaths:
    """Event-time mean order imbalance per trade-size class, normalized by shares outstanding"""

    table: pd.DataFrame
    n_events: int

    @property
    def large(self) -> pd.Series:
        return self.table.set_index("offset")["large_mean"]

    @property
    def small(self) -> pd.Series:
        return self.table.set_index("offset")["small_mean"]


def _class_grid(trades: pd.DataFrame, agent_class: str, shape: Tuple[int, int]) -> np.ndarray:
    grid = np.zeros(shape)
    rows = trades[trades["agent_class"] == agent_class]
    if len(rows):
        summed = rows.groupby(["period", "stock_id"])["signed_shares"].sum()
        periods = summed.index.get_level_values(0).to_numpy()
        stocks = summed.index.get_level_values(1).to_numpy()
        keep = (periods < shape[0]) & (stocks < shape[1])
        grid[periods[keep], stocks[keep]] = summed.to_numpy()[keep]
    return grid


def event_aligned_imbalance(trades: pd.DataFrame, events: pd.DataFrame, window: int,
                            shares_outstanding: float = 1_000_000.0,
                            n_periods: Optional[int] = None) -> ImbalancePaths:
    """
    Mean signed shares per class over event time -window..+window

    Negative-jump events are sign-flipped before averaging (large_mean, small_mean);
    the unflipped means are kept as large_raw, small_raw. Offsets falling outside
    the sample are left out of that offset's average.
    """
    if events is None or len(events) == 0:
        raise EmptyResultError("no events to align on")
    if window < 0:
        raise ValidationError(f"window must be >= 0, got {window}")
    if not shares_outstanding > 0:
        raise ValidationError("shares_outstanding must be > 0")

    last_period = int(events["period"].max())
    n_stocks = int(events["stock_id"].max()) + 1
    if len(trades):
        last_period = max(last_period, int(trades["period"].max()))
        n_stocks = max(n_stocks, int(trades["stock_id"].max()) + 1)
    if n_periods is None:
        n_periods = last_period + 1

    shape = (n_periods, n_stocks)
    large = _class_grid(trades, LARGE_CLASS, shape) / shares_outstanding
    small = _class_grid(trades, SMALL_CLASS, shape) / shares_outstanding

    offsets = np.arange(-window, window + 1)
    ev_period = events["period"].to_numpy(dtype=np.int64)
    ev_stock = events["stock_id"].to_numpy(dtype=np.int64)
    ev_sign = np.where(events["jump"].to_numpy(dtype=float) > 0, 1.0, -1.0)

    when = ev_period[:, None] + offsets[None, :]
    inside = (when >= 0) & (when < n_periods)
    safe = np.clip(when, 0, n_periods - 1)
    stock_idx = np.repeat(ev_stock[:, None], offsets.size, axis=1)
    n_inside = np.maximum(inside.sum(axis=0), 1)

    def mean_path(grid: np.ndarray, flip: bool) -> np.ndarray:
        values = np.where(inside, grid[safe, stock_idx], 0.0)
        if flip:
            values = values * ev_sign[:, None]
        return values.sum(axis=0) / n_inside

    table = pd.DataFrame({
        "offset": offsets,
        "large_mean": mean_path(large, True),
        "small_mean": mean_path(small, True),
        "large_raw": mean_path(large, False),
        "small_raw": mean_path(small, False),
    })
    return ImbalancePaths(table=table, n_events=int(len(events)))


def turn_negative_offset(series: pd.Series, start: int = 1) -> Optional[int]:
    """
    First offset >= start at which the series is negative after having been positive
    at an earlier offset >= start; None if it never turns
    """
    after = series[series.index >= start]
    positive = np.flatnonzero(after.to_numpy() > 0)
    if not positive.size:
        return None
    rest = after.iloc[positive[0]:]
    negative = rest[rest < 0]
    return int(negative.index[0]) if len(negative) else None


def event_overshoot(panel: pd.DataFrame, events: pd.DataFrame, horizon: int) -> pd.DataFrame:
    """
    Largest signed mispricing in the event's direction over the next `horizon` periods

    overshoot = max_k sign * (price - fundamental) / fundamental; positive values mean
    the price went beyond the fundamental in the direction of the news
    """
    price = _pivot(panel, "price").to_numpy(dtype=float)
    fundamental = _pivot(panel, "fundamental").to_numpy(dtype=float)
    T = price.shape[0]
    rows = []
    for e in events.itertuples(index=False):
        start, stop = int(e.period), min(int(e.period) + horizon + 1, T)
        if start >= T:
            continue
        sign = 1.0 if e.jump > 0 else -1.0
        s = int(e.stock_id)
        mispricing = sign * (price[start:stop, s] - fundamental[start:stop, s]) / fundamental[start:stop, s]
        rows.append((int(e.period), s, float(e.jump), float(mispricing.max())))
    return pd.DataFrame(rows, columns=["period", "stock_id", "jump", "overshoot"])


def event_price_path(panel: pd.DataFrame, events: pd.DataFrame, window: int,
                     positive_only: bool = True, isolated: bool = False) -> pd.DataFrame:
    """
    Event-aligned mean of price and fundamental relative to the pre-event price

    Values are sign-flipped log changes from price at period - 1, offsets 0..window;
    events at period 0 or running past the sample end are skipped. With isolated,
    so is any event sharing its stock with another event within window periods
    either side
    """
    ev_period = events["period"].to_numpy(dtype=np.int64)
    ev_stock = events["stock_id"].to_numpy(dtype=np.int64)
    price = _pivot(panel, "price").to_numpy(dtype=float)
    fundamental = _pivot(panel, "fundamental").to_numpy(dtype=float)
    T = price.shape[0]
    paths_p, paths_f = [], []
    for e in events.itertuples(index=False):
        t0 = int(e.period)
        if t0 < 1 or t0 + window >= T or (positive_only and e.jump <= 0):
            continue
        if isolated:
            near = (ev_stock == e.stock_id) & (np.abs(ev_period - t0) <= window)
            if near.sum() > 1:
                continue
        sign = 1.0 if e.jump > 0 else -1.0
        s = int(e.stock_id)
        ref = price[t0 - 1, s]
        paths_p.append(sign * np.log(price[t0:t0 + window + 1, s] / ref))
        paths_f.append(sign * np.log(fundamental[t0:t0 + window + 1, s] / ref))
    if not paths_p:
        raise EmptyResultError("no events with a complete window")
    return pd.DataFrame({
        "offset": np.arange(window + 1),
        "price": np.mean(paths_p, axis=0),
        "fundamental": np.mean(paths_f, axis=0),
    })


def lifecycle_crossover(panel: pd.DataFrame, J: int, horizons: Sequence[int], warmup: int = 0,
                        return_bins: int = 2, volume_bins: int = 2) -> Dict[str, Optional[int]]:
    """
    First holding horizon at which low-volume winners beat high-volume winners,
    and the same for losers; None when it never happens within `horizons`
    """
    winner_k: Optional[int] = None
    loser_k: Optional[int] = None
    for K in sorted(horizons):
        try:
            table = portfolio_sort(panel, SortSpec(J, K, return_bins, volume_bins), warmup)
        except InsufficientHistoryError:
            break
        if winner_k is None and table.cell(True, False) > table.cell(True, True):
            winner_k = K
        if loser_k is None and table.cell(False, False) > table.cell(False, True):
            loser_k = K
        if winner_k is not None and loser_k is not None:
            break
    return {"winner_horizon": winner_k, "loser_horizon": loser_k}


class PanelAnalyzer:
    """Runs the standard diagnostics with horizons and bins from config/analysis_defaults.json"""

    def __init__(self, config_path: str = None):
        if config_path is None:
            config_path = os.path.join(os.path.dirname(__file__), '..', 'config', 'analysis_defaults.json')

        with open(config_path, 'r', encoding='utf-8') as f:
            config = json.load(f)

        self.momentum = config['momentum']
        self.lifecycle = config['lifecycle']
        self.imbalance = config['imbalance']
        self.overshoot = config['overshoot']

    def short_spec(self) -> SortSpec:
        return SortSpec(self.momentum['formation'], self.momentum['holding'],
                        self.lifecycle['return_bins'], self.lifecycle['volume_bins'])

    def long_holding(self, T_diff: int) -> int:
        return int(self.momentum['long_holding_multiple_of_T_diff'] * T_diff)

    def reversal_formation(self, T_diff: int) -> int:
        return int(self.momentum['reversal_formation_multiple_of_T_diff'] * T_diff)

    def summarize(self, panel: pd.DataFrame, trades: pd.DataFrame, events: pd.DataFrame,
                  T_diff: int, warmup: int = 0, shares_outstanding: float = None) -> Dict[str, object]:
        """
        Momentum, reversal, autocorrelation, life-cycle and imbalance lead-lag for one run

        Returns a flat dict; entries that cannot be computed on this panel are None
        """
        J = self.momentum['formation']
        out: Dict[str, object] = {}

        def attempt(key, fn):
            try:
                out[key] = fn()
            except ValidationError as exc:
                logger.warning("diagnostic skipped", extra={"diagnostic": key, "reason": str(exc)})
                out[key] = None

        attempt('momentum_profit', lambda: momentum_profit(panel, J, self.momentum['holding'], warmup=warmup))
        attempt('reversal_profit', lambda: momentum_profit(
            panel, self.reversal_formation(T_diff), self.long_holding(T_diff), warmup=warmup))
        attempt('autocorrelation_lag1', lambda: return_autocorrelation(panel, 1, warmup))
        attempt('lifecycle', lambda: lifecycle_crossover(panel, self.lifecycle['formation'],
                                                         self.lifecycle['horizons'], warmup))

        def lead_lag():
            shares = shares_outstanding or self.imbalance['shares_outstanding']
            paths = event_aligned_imbalance(trades, events, self.imbalance['window'], shares)
            return {"large": turn_negative_offset(paths.large), "small": turn_negative_offset(paths.small)}

        attempt('imbalance_turn', lead_lag)
        return out
