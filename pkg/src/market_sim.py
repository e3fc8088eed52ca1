"""
InfoMarket Market Simulator
Heterogeneous-agent market: fundamental news diffuses through noisy channels
to newswatchers while momentum traders chase trailing returns; a proportional
price-impact market maker clears every order each period
"""

import logging
import math
from dataclasses import dataclass, field, fields, replace
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from channels import learning_update_array
from decision import CostModel, choose_fidelity, info_value
from errors import ConfigError, DomainError

logger = logging.getLogger(__name__)

NEWSWATCHER = "newswatcher"
MOMENTUM = "momentum"
LARGE = "LARGE"
SMALL = "SMALL"
TAG_BY_CLASS = {NEWSWATCHER: LARGE, MOMENTUM: SMALL}

PRICE_FLOOR = 1e-6
MAX_DOWN_JUMP = 0.9  # negative jumps are capped so that jump > -1

# substream purposes
_EVENTS, _AGENTS, _NEWS, _JUMPS = 1, 2, 3, 4


def _opt(default, doc: str):
    return field(default=default, metadata={"doc": doc, "optional": True})


def _req(doc: str):
    return field(metadata={"doc": doc, "optional": False})


@dataclass(frozen=True)
class MarketConfig:
    """Every free parameter of a run; all fields are scalars so configs stay flat"""

    n_stocks: int = _req("number of stocks")
    n_periods: int = _req("number of trading periods")
    n_newswatchers: int = _req("number of newswatchers (large, informed investors), >= 1")
    n_momentum: int = _req("number of momentum traders (small investors), >= 0")
    event_rate: float = _req("probability of a fundamental event per stock-period, in [0, 1]")
    T_diff: int = _req("periods for news to reach every newswatcher, >= 1")
    seed: int = _req("master 64-bit seed")

    event_scale: float = _opt(0.10, "median absolute fractional jump of an event")
    event_scale_sigma: float = _opt(0.5, "lognormal sigma of the jump magnitude")
    impact_kappa: float = _opt(1.0, "price impact per unit net flow / shares outstanding, > 0")
    momentum_window: int = _opt(5, "trailing-return window of momentum traders, periods")
    momentum_gain: float = _opt(1.0, "momentum order size per unit trailing return")
    short_sale_newswatcher: bool = _opt(True, "newswatchers may hold negative positions")
    short_sale_momentum: bool = _opt(False, "momentum traders may hold negative positions")
    value_erosion: float = _opt(0.9, "fraction of a positive event's value eroded as it diffuses, >= 0")
    cost_alpha: float = _opt(100.0, "information cost per squared nat, wealth units")
    budget_share: float = _opt(0.001, "share of wealth a newswatcher spends on its channel, in [0, 1]")
    budget_cap_at_stake: bool = _opt(False, "cap the channel budget at wealth * event_scale")
    shares_outstanding: float = _opt(1_000_000.0, "shares outstanding per stock")
    initial_price: float = _opt(10.0, "starting price and fundamental of every stock")
    newswatcher_wealth: float = _opt(100_000.0, "mean newswatcher capital at the initial price")
    momentum_wealth: float = _opt(10_000.0, "mean momentum-trader capital at the initial price")
    wealth_dispersion: float = _opt(0.5, "lognormal sigma of capital within a class, >= 0")
    base_aggressiveness: float = _opt(0.25, "newswatcher aggressiveness once news is public, in [0, 1]")
    fidelity_learning: bool = _opt(False, "informed newswatchers' fidelity rises with time since informed")
    learning_rate: float = _opt(0.1, "per-period learning rate when fidelity_learning is on, >= 0")
    insider_lead: int = _opt(0, "periods before an event at which insiders learn of it, >= 0")
    insider_fraction: float = _opt(0.05, "fraction of newswatchers who are insiders, in [0, 1]")
    informed_weighting: str = _opt("headcount", "informed fraction for aggressiveness: headcount or wealth")

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if f.type in (int, "int"):
                if isinstance(value, bool) or int(value) != value:
                    raise ConfigError(f"expected an integer, got {value!r}", key=f.name)
                object.__setattr__(self, f.name, int(value))
            elif f.type in (float, "float"):
                if isinstance(value, bool) or not math.isfinite(float(value)):
                    raise ConfigError(f"expected a finite real, got {value!r}", key=f.name)
                object.__setattr__(self, f.name, float(value))
            elif f.type in (bool, "bool") and not isinstance(value, bool):
                raise ConfigError(f"expected true/false, got {value!r}", key=f.name)
        self._check_ranges()

    def _check_ranges(self):
        def need(ok: bool, key: str, rule: str):
            if not ok:
                raise ConfigError(f"value {getattr(self, key)!r} out of range ({rule})", key=key)

        need(self.n_stocks >= 1, "n_stocks", ">= 1")
        need(self.n_periods >= 1, "n_periods", ">= 1")
        need(self.n_newswatchers >= 1, "n_newswatchers", ">= 1")
        need(self.n_momentum >= 0, "n_momentum", ">= 0")
        need(0.0 <= self.event_rate <= 1.0, "event_rate", "in [0, 1]")
        need(self.T_diff >= 1, "T_diff", ">= 1")
        need(0 <= self.seed < 2 ** 64, "seed", "0 <= seed < 2^64")
        need(self.event_scale > 0, "event_scale", "> 0")
        need(self.event_scale_sigma >= 0, "event_scale_sigma", ">= 0")
        need(self.impact_kappa > 0, "impact_kappa", "> 0")
        need(self.momentum_window >= 1, "momentum_window", ">= 1")
        need(self.momentum_gain >= 0, "momentum_gain", ">= 0")
        need(self.value_erosion >= 0, "value_erosion", ">= 0")
        need(self.cost_alpha > 0, "cost_alpha", "> 0")
        need(0.0 <= self.budget_share <= 1.0, "budget_share", "in [0, 1]")
        need(self.shares_outstanding > 0, "shares_outstanding", "> 0")
        need(self.initial_price > 0, "initial_price", "> 0")
        need(self.newswatcher_wealth > 0, "newswatcher_wealth", "> 0")
        need(self.momentum_wealth > 0, "momentum_wealth", "> 0")
        need(self.wealth_dispersion >= 0, "wealth_dispersion", ">= 0")
        need(0.0 <= self.base_aggressiveness <= 1.0, "base_aggressiveness", "in [0, 1]")
        need(self.learning_rate >= 0, "learning_rate", ">= 0")
        need(self.insider_lead >= 0, "insider_lead", ">= 0")
        need(0.0 <= self.insider_fraction <= 1.0, "insider_fraction", "in [0, 1]")
        need(self.informed_weighting in ("headcount", "wealth"), "informed_weighting", "headcount or wealth")

    @classmethod
    def field_docs(cls) -> List[Tuple[str, bool, object, str]]:
        """(name, optional, default, doc) for every field, in declaration order"""
        rows = []
        for f in fields(cls):
            optional = f.metadata.get("optional", False)
            rows.append((f.name, optional, f.default if optional else None, f.metadata.get("doc", "")))
        return rows


@dataclass(frozen=True)
class EventRecord:
    """A fundamental jump for one stock; jump is a signed fractional change > -1"""

    period: int
    stock_id: int
    jump: float

    def __post_init__(self):
        if not self.jump > -1.0:
            raise DomainError(f"event jump must be > -1, got {self.jump!r}")

    @property
    def sign(self) -> int:
        return 1 if self.jump > 0 else -1


@dataclass
class AgentState:
    """Snapshot view of one agent"""

    id: int
    agent_class: str
    wealth: float
    fidelity: float
    position: np.ndarray
    informed_since: Dict[int, int] = field(default_factory=dict)


@dataclass
class AgentPool:
    """
    Both agent classes as arrays; newswatchers occupy the first n_newswatchers rows

    wealth is capital at the initial price. Orders are sized with it marked to
    each stock's current price (see capital), so an agent's stake in a stock is a
    fixed share of that stock's market value. Cash moves with fills
    """

    wealth: np.ndarray
    fidelity: np.ndarray
    positions: np.ndarray
    cash: np.ndarray
    n_newswatchers: int

    @property
    def n_agents(self) -> int:
        return int(self.wealth.size)

    @property
    def newswatchers(self) -> slice:
        return slice(0, self.n_newswatchers)

    @property
    def momentum(self) -> slice:
        return slice(self.n_newswatchers, self.n_agents)

    def capital(self, rows: slice, price: np.ndarray, initial_price: float) -> np.ndarray:
        """Sizing capital of each agent in rows for each stock, agents x stocks"""
        return self.wealth[rows][:, None] * (price[None, :] / initial_price)

    def agent_class(self, agent_id: int) -> str:
        return NEWSWATCHER if agent_id < self.n_newswatchers else MOMENTUM

    def equity(self, prices: np.ndarray) -> np.ndarray:
        return self.cash + self.positions @ prices

    def apply_fills(self, orders: "Orders", fill_price: np.ndarray) -> None:
        rows = self.newswatchers if orders.agent_class == NEWSWATCHER else self.momentum
        self.positions[rows] += orders.shares
        self.cash[rows] -= orders.shares @ fill_price

    def states(self, news: Sequence["NewsItem"] = ()) -> List[AgentState]:
        out = []
        for i in range(self.n_agents):
            since = {}
            if i < self.n_newswatchers:
                for item in news:
                    if item.informed_since[i] >= 0:
                        since[item.index] = int(item.informed_since[i])
            out.append(
                AgentState(
                    id=i,
                    agent_class=self.agent_class(i),
                    wealth=float(self.wealth[i]),
                    fidelity=float(self.fidelity[i]),
                    position=self.positions[i].copy(),
                    informed_since=since,
                )
            )
        return out


@dataclass
class MarketState:
    """
    Per-stock market quantities at the start of a period

    history[t] is the price after clearing period t-1 (history[0] is the initial price)
    """

    price: np.ndarray
    fundamental: np.ndarray
    volume: np.ndarray
    turnover: np.ndarray
    imbalance_large: np.ndarray
    imbalance_small: np.ndarray
    market_maker_inventory: np.ndarray
    shares_outstanding: float
    history: List[np.ndarray]

    @classmethod
    def initial(cls, n_stocks: int, price: float, shares_outstanding: float) -> "MarketState":
        p = np.full(n_stocks, float(price))
        zeros = np.zeros(n_stocks)
        return cls(
            price=p,
            fundamental=p.copy(),
            volume=zeros.copy(),
            turnover=zeros.copy(),
            imbalance_large=zeros.copy(),
            imbalance_small=zeros.copy(),
            market_maker_inventory=np.full(n_stocks, float(shares_outstanding)),
            shares_outstanding=float(shares_outstanding),
            history=[p.copy()],
        )

    @property
    def n_stocks(self) -> int:
        return int(self.price.size)


@dataclass(frozen=True)
class PanelRecord:
    period: int
    stock_id: int
    price: float
    ret: float
    volume: float
    turnover: float
    fundamental: float
    frac_informed: float
    warm_up: bool = False


@dataclass(frozen=True)
class TradeRecord:
    period: int
    stock_id: int
    agent_class: str
    signed_shares: float
    fill_price: float


@dataclass
class Orders:
    """Signed share orders of one agent class: rows are agents, columns stocks"""

    agent_class: str
    shares: np.ndarray

    @property
    def tag(self) -> str:
        return TAG_BY_CLASS[self.agent_class]


class SeedStreams:
    """
    Independent generators keyed by (purpose, stock, period) under one master seed

    Keys are hashed by numpy's SeedSequence, so adding stocks or events never
    perturbs draws made under other keys
    """

    def __init__(self, seed: int):
        self.seed = int(seed)

    def _rng(self, *key: int) -> np.random.Generator:
        return np.random.default_rng(np.random.SeedSequence([self.seed, *key]))

    def events(self, stock_id: int) -> np.random.Generator:
        return self._rng(_EVENTS, stock_id)

    def jump(self, stock_id: int, period: int) -> np.random.Generator:
        return self._rng(_JUMPS, stock_id, period)

    def agents(self) -> np.random.Generator:
        return self._rng(_AGENTS)

    def news(self, stock_id: int, period: int) -> np.random.Generator:
        return self._rng(_NEWS, stock_id, period)


@dataclass
class NewsItem:
    """
    Diffusion state of one event among the newswatchers

    order: diffusion order (agent ids, first = learns first); decode_u: per-agent
    uniform draw, the agent decodes the true sign while decode_u < its fidelity
    """

    index: int
    event: EventRecord
    order: np.ndarray
    decode_u: np.ndarray
    n_insiders: int
    informed_since: np.ndarray
    base_value: Optional[float] = None
    contribution: float = 0.0
    last_frac: float = 0.0

    @classmethod
    def draw(cls, index: int, event: EventRecord, n_newswatchers: int, cfg: MarketConfig,
             streams: SeedStreams) -> "NewsItem":
        rng = streams.news(event.stock_id, event.period)
        order = rng.permutation(n_newswatchers)
        decode_u = rng.random(n_newswatchers)
        n_insiders = 0
        if cfg.insider_lead > 0:
            n_insiders = max(1, int(round(cfg.insider_fraction * n_newswatchers)))
        return cls(
            index=index,
            event=event,
            order=order,
            decode_u=decode_u,
            n_insiders=n_insiders,
            informed_since=np.full(n_newswatchers, -1, dtype=np.int64),
        )

    @property
    def started(self) -> bool:
        return self.base_value is not None

    def start(self, fundamental_before: float) -> None:
        self.base_value = float(fundamental_before)
        self.contribution = self.event.jump * self.base_value

    def frac(self, now: int, cfg: MarketConfig) -> float:
        if now < self.event.period:
            return 0.0
        return frac_informed(self.event, now, cfg)

    def informed_count(self, now: int, cfg: MarketConfig) -> int:
        n = self.order.size
        count = int(math.floor(self.frac(now, cfg) * n + 1e-9))
        if now >= self.event.period - cfg.insider_lead:
            count = max(count, self.n_insiders)
        return min(count, n)

    def informed_mask(self, now: int, cfg: MarketConfig) -> np.ndarray:
        mask = np.zeros(self.order.size, dtype=bool)
        mask[self.order[: self.informed_count(now, cfg)]] = True
        return mask

    def is_public(self, now: int, cfg: MarketConfig) -> bool:
        return self.started and self.frac(now, cfg) >= 1.0

    def announced_value(self, fundamental_now: float) -> float:
        """
        Event value in price units as the news states it: jump * pre-event fundamental

        Erosion lowers the fundamental but not what the news says, so informed agents
        keep pricing the full jump until the event is public
        """
        if self.started:
            return self.event.jump * self.base_value
        return self.event.jump * fundamental_now


def frac_informed(event: EventRecord, now: int, cfg: MarketConfig) -> float:
    """min(1, (now - event.period) / T_diff), the fraction of newswatchers informed"""
    if now < event.period:
        raise DomainError(f"period {now} precedes event period {event.period}")
    return min(1.0, (now - event.period) / cfg.T_diff)


def normalized_info_value(P: float, n_newswatchers: int) -> float:
    """info_value(max(P, 1/n)) / info_value(1/n), in [0, 1]"""
    if n_newswatchers <= 1:
        return 0.0
    floor = 1.0 / n_newswatchers
    return min(1.0, info_value(max(P, floor)) / info_value(floor))


def generate_events(cfg: MarketConfig, streams: Optional[SeedStreams] = None) -> List[EventRecord]:
    """
    Independent events per stock-period with probability event_rate

    Sign is +/- with equal probability; magnitude event_scale * exp(sigma * z).
    Occurrence uniforms come from one sequential stream per stock, and each event
    draws its sign and size from its own (stock, period) stream, so a longer run
    reproduces every event of a shorter one
    """
    streams = streams or SeedStreams(cfg.seed)
    events = []
    for stock_id in range(cfg.n_stocks):
        occur = streams.events(stock_id).random(cfg.n_periods)
        for period in np.flatnonzero(occur < cfg.event_rate):
            rng = streams.jump(stock_id, int(period))
            up = rng.random() < 0.5
            magnitude = cfg.event_scale * math.exp(cfg.event_scale_sigma * rng.standard_normal())
            jump = magnitude if up else -min(magnitude, MAX_DOWN_JUMP)
            events.append(EventRecord(int(period), stock_id, float(jump)))
    events.sort(key=lambda e: (e.period, e.stock_id))
    return events


def init_agents(cfg: MarketConfig, streams: SeedStreams) -> AgentPool:
    """Draw capital within each class and buy each newswatcher its channel fidelity"""
    rng = streams.agents()

    def capital(n: int, mean: float) -> np.ndarray:
        if n == 0:
            return np.zeros(0)
        draws = rng.lognormal(0.0, cfg.wealth_dispersion, n)
        return mean * draws / draws.mean()

    nw_wealth = capital(cfg.n_newswatchers, cfg.newswatcher_wealth)
    mom_wealth = capital(cfg.n_momentum, cfg.momentum_wealth)
    cm = CostModel(cfg.cost_alpha)
    share = cfg.budget_share
    if cfg.budget_cap_at_stake:
        share = min(share, cfg.event_scale)
    nw_fidelity = np.array([choose_fidelity(w, share, cfg.event_scale, cm) for w in nw_wealth])

    wealth = np.concatenate([nw_wealth, mom_wealth])
    n_agents = wealth.size
    return AgentPool(
        wealth=wealth,
        fidelity=np.concatenate([nw_fidelity, np.full(cfg.n_momentum, 0.5)]),
        positions=np.zeros((n_agents, cfg.n_stocks)),
        cash=wealth.copy(),
        n_newswatchers=cfg.n_newswatchers,
    )


def _clip_short_sales(shares: np.ndarray, positions: np.ndarray, allowed: bool) -> np.ndarray:
    if allowed:
        return shares
    return np.maximum(shares, -np.maximum(positions, 0.0))


def newswatcher_orders(state: MarketState, agents: AgentPool, news: Sequence[NewsItem], now: int,
                       cfg: MarketConfig) -> Orders:
    """
    Orders of every newswatcher, tagged LARGE

    Perceived value = public value + decoded announced value of each active event the
    agent is informed of; order = aggressiveness * (perceived - price) / price * capital / price.
    Aggressiveness is max(base_aggressiveness, normalized info value of the least
    diffused active event). Decode draws come from each NewsItem's own substream.
    """
    n_nw = agents.n_newswatchers
    rows = agents.newswatchers
    price = state.price

    active = [item for item in news if not item.is_public(now, cfg)]
    public_value = state.fundamental.copy()
    for item in active:
        if item.started:
            public_value[item.event.stock_id] -= item.contribution

    perceived = np.repeat(public_value[None, :], n_nw, axis=0)
    informed_share = np.ones(state.n_stocks)
    nw_wealth = agents.wealth[rows]

    for item in active:
        s = item.event.stock_id
        mask = item.informed_mask(now, cfg)
        if cfg.informed_weighting == "wealth":
            share = float(nw_wealth[mask].sum() / nw_wealth.sum())
        else:
            share = float(mask.sum()) / n_nw
        informed_share[s] = min(informed_share[s], share)
        if not mask.any():
            continue
        fidelity = agents.fidelity[rows][mask]
        if cfg.fidelity_learning:
            tau = now - item.informed_since[mask]
            fidelity = learning_update_array(fidelity, cfg.learning_rate, tau)
        correct = item.decode_u[mask] < fidelity
        magnitude = abs(item.announced_value(state.fundamental[s]))
        decoded = np.where(correct, item.event.sign, -item.event.sign) * magnitude
        perceived[mask, s] += decoded

    aggressiveness = np.array([
        max(cfg.base_aggressiveness, normalized_info_value(P, n_nw)) for P in informed_share
    ])
    capital = agents.capital(rows, price, cfg.initial_price)
    shares = aggressiveness[None, :] * (perceived - price[None, :]) / price[None, :] * capital / price[None, :]
    shares = _clip_short_sales(shares, agents.positions[rows], cfg.short_sale_newswatcher)
    return Orders(NEWSWATCHER, shares)


def momentum_orders(state: MarketState, agents: AgentPool, now: int, cfg: MarketConfig) -> Orders:
    """
    Orders of every momentum trader, tagged SMALL

    order = momentum_gain * trailing return over momentum_window * capital / price;
    zero during warm-up (now < momentum_window)
    """
    rows = agents.momentum
    n_mom = agents.n_agents - agents.n_newswatchers
    if now < cfg.momentum_window or now >= len(state.history):
        return Orders(MOMENTUM, np.zeros((n_mom, state.n_stocks)))
    trailing = state.history[now] / state.history[now - cfg.momentum_window] - 1.0
    capital = agents.capital(rows, state.price, cfg.initial_price)
    shares = cfg.momentum_gain * trailing[None, :] * capital / state.price[None, :]
    shares = _clip_short_sales(shares, agents.positions[rows], cfg.short_sale_momentum)
    return Orders(MOMENTUM, shares)


def clear_market(state: MarketState, orders: Sequence[Orders], cfg: MarketConfig,
                 period: Optional[int] = None) -> Tuple[MarketState, List[TradeRecord]]:
    """
    Fill every order at one price per stock against the market maker

    price' = price * (1 + kappa * net / shares_outstanding), floored at 1e-6
    """
    n = state.n_stocks
    net = np.zeros(n)
    volume = np.zeros(n)
    by_tag = {LARGE: np.zeros(n), SMALL: np.zeros(n)}
    for o in orders:
        net += o.shares.sum(axis=0)
        volume += np.abs(o.shares).sum(axis=0)
        by_tag[o.tag] += o.shares.sum(axis=0)

    new_price = np.maximum(state.price * (1.0 + cfg.impact_kappa * net / state.shares_outstanding), PRICE_FLOOR)
    state.history.append(new_price.copy())
    new_state = replace(
        state,
        price=new_price,
        fundamental=state.fundamental.copy(),
        volume=volume,
        turnover=volume / state.shares_outstanding,
        imbalance_large=by_tag[LARGE],
        imbalance_small=by_tag[SMALL],
        market_maker_inventory=state.market_maker_inventory - net,
    )

    trades = []
    when = len(state.history) - 2 if period is None else period
    for o in orders:
        traded = np.abs(o.shares).sum(axis=0) > 0
        class_net = o.shares.sum(axis=0)
        for s in np.flatnonzero(traded):
            trades.append(TradeRecord(when, int(s), o.agent_class, float(class_net[s]), float(new_price[s])))
    return new_state, trades


def apply_value_erosion(state: MarketState, news: Sequence[NewsItem], now: int, cfg: MarketConfig) -> MarketState:
    """
    Competitors absorb a positive event's value as it diffuses

    Each period the fundamental is multiplied by 1 - value_erosion * dfrac * jump * V_pre / V,
    so a fully diffused event gives back value_erosion of its uplift in total
    """
    for item in news:
        if not item.started:
            continue
        f = item.frac(now, cfg)
        dfrac = f - item.last_frac
        item.last_frac = f
        if cfg.value_erosion == 0 or item.event.jump <= 0 or dfrac <= 0:
            continue
        s = item.event.stock_id
        decrement = cfg.value_erosion * dfrac * item.event.jump * item.base_value
        decrement = min(decrement, state.fundamental[s] - PRICE_FLOOR)
        state.fundamental[s] *= 1.0 - decrement / state.fundamental[s]
        item.contribution -= decrement
    return state


@dataclass
class SimulationResult:
    config: MarketConfig
    panel: pd.DataFrame
    trades: pd.DataFrame
    events: pd.DataFrame
    warmup: int
    final_state: MarketState
    agents: AgentPool

    def panel_records(self) -> Iterator[PanelRecord]:
        for row in self.panel.itertuples(index=False):
            yield PanelRecord(
                period=int(row.period), stock_id=int(row.stock_id), price=row.price, ret=row[3],
                volume=row.volume, turnover=row.turnover, fundamental=row.fundamental,
                frac_informed=row.frac_informed, warm_up=int(row.period) < self.warmup,
            )

    def conservation_gap(self) -> float:
        """max |sum of positions + market-maker inventory - shares outstanding| over stocks"""
        total = self.agents.positions.sum(axis=0) + self.final_state.market_maker_inventory
        return float(np.max(np.abs(total - self.final_state.shares_outstanding)))


PANEL_COLUMNS = ["period", "stock_id", "price", "return", "volume", "turnover", "fundamental", "frac_informed"]
TRADE_COLUMNS = ["period", "stock_id", "agent_class", "signed_shares", "fill_price"]
EVENT_COLUMNS = ["period", "stock_id", "jump"]


def events_frame(events: Sequence[EventRecord]) -> pd.DataFrame:
    return pd.DataFrame(
        {"period": [e.period for e in events], "stock_id": [e.stock_id for e in events],
         "jump": [e.jump for e in events]},
        columns=EVENT_COLUMNS,
    ).astype({"period": "int64", "stock_id": "int64", "jump": "float64"})


def run_simulation(cfg: MarketConfig, events: Optional[Sequence[EventRecord]] = None) -> SimulationResult:
    """
    Run every period: start events -> diffuse -> collect orders -> clear -> erode -> record

    Deterministic in cfg; `events` overrides the generated event list (scheduled scenarios)
    """
    streams = SeedStreams(cfg.seed)
    if events is None:
        events = generate_events(cfg, streams)
    events = sorted(events, key=lambda e: (e.period, e.stock_id))
    agents = init_agents(cfg, streams)
    state = MarketState.initial(cfg.n_stocks, cfg.initial_price, cfg.shares_outstanding)
    logger.info("simulation start", extra={
        "seed": cfg.seed, "n_stocks": cfg.n_stocks, "n_periods": cfg.n_periods, "n_events": len(events)})

    by_reveal: Dict[int, List[Tuple[int, EventRecord]]] = {}
    for index, event in enumerate(events):
        reveal = max(0, event.period - cfg.insider_lead)
        by_reveal.setdefault(reveal, []).append((index, event))

    shape = (cfg.n_periods, cfg.n_stocks)
    out_price, out_ret, out_volume = np.empty(shape), np.empty(shape), np.empty(shape)
    out_turnover, out_fundamental, out_frac = np.empty(shape), np.empty(shape), np.empty(shape)
    trades: List[TradeRecord] = []
    news: List[NewsItem] = []

    for now in range(cfg.n_periods):
        for index, event in by_reveal.get(now, ()):
            news.append(NewsItem.draw(index, event, cfg.n_newswatchers, cfg, streams))
        for item in news:
            if item.event.period == now and not item.started:
                s = item.event.stock_id
                item.start(state.fundamental[s])
                state.fundamental[s] *= 1.0 + item.event.jump

        for item in news:
            mask = item.informed_mask(now, cfg)
            fresh = mask & (item.informed_since < 0)
            item.informed_since[fresh] = now

        orders = [newswatcher_orders(state, agents, news, now, cfg)]
        if agents.n_agents > agents.n_newswatchers:
            orders.append(momentum_orders(state, agents, now, cfg))

        previous_price = state.price
        state, period_trades = clear_market(state, orders, cfg, period=now)
        for o in orders:
            agents.apply_fills(o, state.price)
        trades.extend(period_trades)

        state = apply_value_erosion(state, news, now, cfg)

        frac = np.ones(cfg.n_stocks)
        for item in news:
            if item.started:
                s = item.event.stock_id
                frac[s] = min(frac[s], item.frac(now, cfg))
        out_price[now] = state.price
        out_ret[now] = state.price / previous_price - 1.0
        out_volume[now] = state.volume
        out_turnover[now] = state.turnover
        out_fundamental[now] = state.fundamental
        out_frac[now] = frac

        news = [item for item in news if not item.is_public(now, cfg)]
        if now and now % 250 == 0:
            logger.debug("simulation progress", extra={"period": now, "active_news": len(news)})

    periods = np.repeat(np.arange(cfg.n_periods), cfg.n_stocks)
    stocks = np.tile(np.arange(cfg.n_stocks), cfg.n_periods)
    panel = pd.DataFrame({
        "period": periods, "stock_id": stocks, "price": out_price.ravel(), "return": out_ret.ravel(),
        "volume": out_volume.ravel(), "turnover": out_turnover.ravel(),
        "fundamental": out_fundamental.ravel(), "frac_informed": out_frac.ravel(),
    }, columns=PANEL_COLUMNS)
    trades_df = pd.DataFrame(
        [(t.period, t.stock_id, t.agent_class, t.signed_shares, t.fill_price) for t in trades],
        columns=TRADE_COLUMNS,
    )
    logger.info("simulation complete", extra={
        "seed": cfg.seed, "n_events": len(events), "n_trade_rows": len(trades_df)})
    return SimulationResult(
        config=cfg, panel=panel, trades=trades_df, events=events_frame(events),
        warmup=min(cfg.momentum_window, cfg.n_periods), final_state=state, agents=agents,
    )
