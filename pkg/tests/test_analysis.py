"""Panel diagnostics on hand-built panels"""

import numpy as np
import pandas as pd
import pytest

from analysis import (
    PanelAnalyzer,
    SortSpec,
    event_aligned_imbalance,
    event_overshoot,
    event_price_path,
    lifecycle_crossover,
    momentum_profit,
    momentum_profit_tstat,
    portfolio_sort,
    return_autocorrelation,
    turn_negative_offset,
)
from conftest import make_panel
from errors import DegenerateSeriesError, EmptyResultError, InsufficientHistoryError, ValidationError


def trades_frame(rows):
    return pd.DataFrame(rows, columns=["period", "stock_id", "agent_class", "signed_shares", "fill_price"])


def events_frame(rows):
    return pd.DataFrame(rows, columns=["period", "stock_id", "jump"])


class TestPortfolioSort:
    def test_hand_built_quadrants(self, hand_panel):
        table = portfolio_sort(hand_panel, SortSpec(1, 1))
        assert table.n_dates == 5
        assert table.cell(winner=True, high_volume=True) == pytest.approx(0.005, abs=1e-12)
        assert table.cell(winner=True, high_volume=False) == pytest.approx(-0.03, abs=1e-12)
        assert table.cell(winner=False, high_volume=True) == pytest.approx(0.03, abs=1e-12)
        assert table.cell(winner=False, high_volume=False) == pytest.approx(0.016, abs=1e-12)
        assert table.counts.to_numpy().tolist() == [[8, 2], [2, 8]]
        assert table.wml.to_numpy() == pytest.approx([-0.046, -0.025], abs=1e-12)

    def test_hand_built_momentum_profit(self, hand_panel):
        assert momentum_profit(hand_panel, 1, 1) == pytest.approx(-0.025, abs=1e-12)

    def test_insufficient_history(self, hand_panel):
        with pytest.raises(InsufficientHistoryError) as info:
            portfolio_sort(hand_panel, SortSpec(3, 3))
        assert info.value.required == 7 and info.value.available == 6

    def test_warmup_drops_periods(self, hand_panel):
        with pytest.raises(InsufficientHistoryError):
            momentum_profit(hand_panel, 1, 1, warmup=4)

    def test_spec_validation(self):
        with pytest.raises(ValidationError):
            SortSpec(0, 1)
        with pytest.raises(ValidationError):
            SortSpec(1, 1, return_bins=1)

    def test_finer_bins(self):
        rng = np.random.default_rng(3)
        panel = make_panel(rng.normal(0, 0.01, (40, 30)), rng.uniform(0.001, 0.05, (40, 30)))
        table = portfolio_sort(panel, SortSpec(5, 5, 5, 3))
        assert table.mean_return.shape == (5, 3)
        assert int(table.counts.to_numpy().sum()) == table.n_dates * 30

    def test_missing_column(self, hand_panel):
        with pytest.raises(ValidationError):
            portfolio_sort(hand_panel.drop(columns=["turnover"]), SortSpec(1, 1))

    def test_duplicate_rows_rejected(self, hand_panel):
        doubled = pd.concat([hand_panel, hand_panel.iloc[[7]]], ignore_index=True)
        with pytest.raises(ValidationError, match="duplicate"):
            portfolio_sort(doubled, SortSpec(1, 1))
        with pytest.raises(ValidationError, match="duplicate"):
            return_autocorrelation(doubled, 1)


class TestMomentumStatistics:
    def test_iid_panels_show_no_momentum(self):
        spreads = []
        for seed in range(20):
            rng = np.random.default_rng(seed)
            spreads.append(momentum_profit(make_panel(rng.normal(0, 0.02, (120, 40))), 5, 5))
        _, t = momentum_profit_tstat(spreads)
        assert abs(t) < 2

    def test_tstat_of_known_values(self):
        mean, t = momentum_profit_tstat([1.0, 2.0, 3.0])
        assert mean == 2.0
        assert t == pytest.approx(2.0 / (1.0 / np.sqrt(3)))

    def test_tstat_degenerate(self):
        with pytest.raises(DegenerateSeriesError):
            momentum_profit_tstat([0.1, 0.1, 0.1])
        with pytest.raises(ValidationError):
            momentum_profit_tstat([0.1])

    def test_tstat_rounding_noise_is_degenerate(self):
        with pytest.raises(DegenerateSeriesError):
            momentum_profit_tstat([0.1 + 0.2, 0.3, 0.3])


class TestAutocorrelation:
    def test_alternating_series(self):
        returns = np.array([[0.01 if t % 2 == 0 else -0.01] for t in range(20)])
        assert return_autocorrelation(make_panel(returns), 1) == pytest.approx(-1.0)

    def test_constant_prices(self):
        with pytest.raises(DegenerateSeriesError):
            return_autocorrelation(make_panel(np.zeros((20, 3))), 1)

    def test_rounding_noise_is_degenerate(self):
        returns = np.array([[0.1 + 0.2 if t % 2 else 0.3] * 3 for t in range(20)])
        with pytest.raises(DegenerateSeriesError):
            return_autocorrelation(make_panel(returns), 1)

    def test_iid_near_zero(self):
        rng = np.random.default_rng(11)
        assert abs(return_autocorrelation(make_panel(rng.normal(0, 0.01, (200, 50))), 1)) < 0.05

    def test_lag_validation(self):
        with pytest.raises(ValidationError):
            return_autocorrelation(make_panel(np.zeros((5, 1))), 0)


class TestImbalance:
    def test_hand_built_event(self):
        trades = trades_frame([
            (4, 0, "newswatcher", 300.0, 10.0),
            (5, 0, "newswatcher", 600.0, 10.5),
            (5, 0, "momentum", 100.0, 10.5),
            (6, 0, "newswatcher", -900.0, 10.4),
        ])
        paths = event_aligned_imbalance(trades, events_frame([(5, 0, 0.1)]), 1, shares_outstanding=1000)
        assert paths.table["offset"].tolist() == [-1, 0, 1]
        assert paths.large.tolist() == pytest.approx([0.3, 0.6, -0.9])
        assert paths.small.tolist() == pytest.approx([0.0, 0.1, 0.0])
        assert turn_negative_offset(paths.large, start=0) == 1
        assert turn_negative_offset(paths.large) is None
        assert turn_negative_offset(paths.small, start=0) is None

    def test_negative_events_are_flipped(self):
        trades = trades_frame([(2, 0, "newswatcher", -50.0, 9.0), (2, 1, "newswatcher", 30.0, 11.0)])
        events = events_frame([(2, 0, -0.1), (2, 1, 0.1)])
        paths = event_aligned_imbalance(trades, events, 0, shares_outstanding=100)
        assert paths.large.loc[0] == pytest.approx(0.4)
        assert paths.table["large_raw"].iloc[0] == pytest.approx(-0.1)

    def test_no_trades_gives_zero_paths(self):
        paths = event_aligned_imbalance(trades_frame([]), events_frame([(3, 0, 0.1)]), 2)
        assert np.all(paths.table[["large_mean", "small_mean"]].to_numpy() == 0)

    def test_no_events(self):
        with pytest.raises(EmptyResultError):
            event_aligned_imbalance(trades_frame([]), events_frame([]), 5)

    def test_offsets_outside_sample_are_skipped(self):
        trades = trades_frame([(0, 0, "newswatcher", 10.0, 10.0), (0, 1, "newswatcher", 20.0, 10.0)])
        events = events_frame([(0, 0, 0.1), (1, 1, 0.1)])
        paths = event_aligned_imbalance(trades, events, 1, shares_outstanding=1)
        # offset -1 exists only for the second event
        assert paths.large.loc[-1] == pytest.approx(20.0)


class TestTurnNegative:
    def test_dip_before_buying_is_ignored(self):
        series = pd.Series([-0.1, 0.5, 0.2, -0.3, 0.1], index=[1, 2, 3, 4, 5])
        assert turn_negative_offset(series) == 4

    def test_start_offset(self):
        series = pd.Series([0.4, -0.2, 0.3, -0.1], index=[-1, 0, 1, 2])
        assert turn_negative_offset(series, start=-1) == 0
        assert turn_negative_offset(series) == 2

    def test_never_turns(self):
        assert turn_negative_offset(pd.Series([0.1, 0.2], index=[1, 2])) is None
        assert turn_negative_offset(pd.Series([-0.1, -0.2], index=[1, 2])) is None


class TestEventPaths:
    def _panel(self):
        price = np.array([10.0, 10.0, 10.5, 11.2, 11.0, 11.0])
        fundamental = np.array([10.0, 10.0, 11.0, 11.0, 11.0, 11.0])
        returns = np.concatenate([[0.0], price[1:] / price[:-1] - 1.0])
        panel = make_panel(returns[:, None])
        panel["price"] = price
        panel["fundamental"] = fundamental
        return panel

    def test_overshoot(self):
        frame = event_overshoot(self._panel(), events_frame([(2, 0, 0.1)]), 3)
        assert frame["overshoot"].iloc[0] == pytest.approx(0.2 / 11.0)

    def test_price_path(self):
        path = event_price_path(self._panel(), events_frame([(2, 0, 0.1)]), 2)
        assert path["price"].tolist() == pytest.approx(np.log([1.05, 1.12, 1.10]).tolist())
        assert path["fundamental"].iloc[0] == pytest.approx(np.log(1.1))

    def test_isolated_skips_crowded_events(self):
        events = events_frame([(2, 0, 0.1), (3, 0, 0.05)])
        crowded = event_price_path(self._panel(), events, 2)
        assert crowded["price"].iloc[0] == pytest.approx((np.log(1.05) + np.log(1.12 / 1.05)) / 2)
        with pytest.raises(EmptyResultError):
            event_price_path(self._panel(), events, 2, isolated=True)

    def test_price_path_needs_complete_window(self):
        with pytest.raises(EmptyResultError):
            event_price_path(self._panel(), events_frame([(2, 0, 0.1)]), 10)


class TestLifecycle:
    def test_crossover_on_hand_panel(self, hand_panel):
        out = lifecycle_crossover(hand_panel, 1, [1, 2, 3, 10])
        assert set(out) == {"winner_horizon", "loser_horizon"}
        # at K=1 high-volume winners (0.005) beat low-volume winners (-0.03)
        assert out["winner_horizon"] != 1


class TestPanelAnalyzer:
    def test_loads_defaults(self):
        analyzer = PanelAnalyzer()
        assert analyzer.short_spec() == SortSpec(5, 5, 2, 2)
        assert analyzer.long_holding(10) == 50
        assert analyzer.reversal_formation(10) == 20
        assert analyzer.imbalance["window"] > 0

    def test_summarize_skips_what_cannot_be_computed(self, hand_panel):
        out = PanelAnalyzer().summarize(hand_panel, trades_frame([]), events_frame([]), T_diff=1)
        assert out["momentum_profit"] is None
        assert out["imbalance_turn"] is None
        assert out["autocorrelation_lag1"] is not None
