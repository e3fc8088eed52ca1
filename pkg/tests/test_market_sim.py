"""Market simulator: events, diffusion, order rules, clearing, erosion and full runs"""

import numpy as np
import pandas as pd
import pytest

from errors import ConfigError, DomainError
from market_sim import (
    LARGE,
    MOMENTUM,
    NEWSWATCHER,
    PANEL_COLUMNS,
    PRICE_FLOOR,
    SMALL,
    AgentPool,
    EventRecord,
    MarketConfig,
    MarketState,
    NewsItem,
    Orders,
    SeedStreams,
    apply_value_erosion,
    clear_market,
    frac_informed,
    generate_events,
    init_agents,
    momentum_orders,
    newswatcher_orders,
    normalized_info_value,
    run_simulation,
)


def one_stock(**overrides):
    base = dict(n_stocks=1, n_periods=20, n_newswatchers=2, n_momentum=0,
                event_rate=0.0, T_diff=2, seed=1)
    base.update(overrides)
    return MarketConfig(**base)


def pool(n_news, n_mom, wealth=1000.0, fidelity=1.0, n_stocks=1):
    n = n_news + n_mom
    return AgentPool(
        wealth=np.full(n, wealth),
        fidelity=np.concatenate([np.full(n_news, fidelity), np.full(n_mom, 0.5)]),
        positions=np.zeros((n, n_stocks)),
        cash=np.full(n, wealth),
        n_newswatchers=n_news,
    )


class TestMarketConfig:
    def test_defaults(self):
        cfg = one_stock()
        assert cfg.impact_kappa == 1.0
        assert cfg.momentum_window == 5
        assert cfg.short_sale_newswatcher is True
        assert cfg.short_sale_momentum is False
        assert cfg.informed_weighting == "headcount"

    def test_coerces_integral_floats(self):
        cfg = one_stock(n_periods=30.0, event_rate=0)
        assert isinstance(cfg.n_periods, int) and isinstance(cfg.event_rate, float)

    @pytest.mark.parametrize("key,value", [
        ("event_rate", 1.5), ("T_diff", 0), ("n_newswatchers", 0), ("impact_kappa", 0.0),
        ("budget_share", 2.0), ("informed_weighting", "votes"), ("n_periods", 2.5),
    ])
    def test_range_errors_name_the_key(self, key, value):
        with pytest.raises(ConfigError, match=key) as info:
            one_stock(**{key: value})
        assert info.value.key == key

    def test_field_docs_cover_every_field(self):
        docs = MarketConfig.field_docs()
        required = [name for name, optional, _, _ in docs if not optional]
        assert required == ["n_stocks", "n_periods", "n_newswatchers", "n_momentum",
                            "event_rate", "T_diff", "seed"]
        assert all(doc for *_, doc in docs)

    def test_budget_cap_at_stake_lowers_fidelity(self):
        kwargs = dict(n_newswatchers=5, budget_share=0.01, event_scale=1e-4, cost_alpha=100.0)
        free = init_agents(one_stock(**kwargs), SeedStreams(1))
        capped = init_agents(one_stock(budget_cap_at_stake=True, **kwargs), SeedStreams(1))
        assert np.all(free.fidelity[:5] == 1.0)
        assert np.all(capped.fidelity[:5] < 1.0)


class TestEvents:
    def test_no_events_at_zero_rate(self):
        assert generate_events(one_stock()) == []

    def test_every_period_at_rate_one(self):
        events = generate_events(one_stock(n_periods=3, event_rate=1.0))
        assert [e.period for e in events] == [0, 1, 2]
        assert all(e.jump > -1 for e in events)

    def test_deterministic(self, small_config):
        assert generate_events(small_config) == generate_events(small_config)

    def test_seed_changes_events(self, small_config):
        other = MarketConfig(**{**small_config.__dict__, "seed": 43})
        assert generate_events(small_config) != generate_events(other)

    def test_longer_run_keeps_earlier_events(self):
        short = one_stock(n_stocks=5, n_periods=1000, event_rate=0.05)
        long = one_stock(n_stocks=5, n_periods=2000, event_rate=0.05)
        assert generate_events(short) == [e for e in generate_events(long) if e.period < 1000]

    def test_jump_bound(self):
        with pytest.raises(DomainError):
            EventRecord(0, 0, -1.0)


class TestDiffusion:
    def test_fraction_informed(self):
        event = EventRecord(10, 0, 0.1)
        assert frac_informed(event, 10, one_stock()) == 0.0
        assert frac_informed(event, 12, one_stock()) == 1.0
        assert frac_informed(event, 30, one_stock()) == 1.0
        assert frac_informed(event, 15, one_stock(T_diff=20)) == 0.25

    def test_before_event(self):
        with pytest.raises(DomainError):
            frac_informed(EventRecord(10, 0, 0.1), 9, one_stock())

    def test_normalized_info_value(self):
        assert normalized_info_value(0.5, 1) == 0.0
        assert normalized_info_value(0.1, 10) == pytest.approx(1.0)
        assert normalized_info_value(0.0, 10) == pytest.approx(1.0)
        assert normalized_info_value(1.0, 10) == 0.0

    def test_informed_set_grows_in_fixed_order(self):
        cfg = one_stock(n_newswatchers=10, T_diff=5)
        item = NewsItem.draw(0, EventRecord(0, 0, 0.1), 10, cfg, SeedStreams(cfg.seed))
        masks = [item.informed_mask(t, cfg) for t in range(6)]
        assert [int(m.sum()) for m in masks] == [0, 2, 4, 6, 8, 10]
        for earlier, later in zip(masks, masks[1:]):
            assert np.all(later[earlier])

    def test_insiders_learn_early(self):
        cfg = one_stock(n_newswatchers=20, insider_lead=2, insider_fraction=0.1)
        item = NewsItem.draw(0, EventRecord(10, 0, 0.1), 20, cfg, SeedStreams(cfg.seed))
        assert item.informed_count(7, cfg) == 0
        assert item.informed_count(8, cfg) == 2
        assert item.informed_count(10, cfg) == 2


class TestNewswatcherOrders:
    def _started_event(self, cfg, jump=0.1):
        state = MarketState.initial(1, 10.0, 1e6)
        item = NewsItem.draw(0, EventRecord(0, 0, jump), cfg.n_newswatchers, cfg, SeedStreams(cfg.seed))
        item.start(state.fundamental[0])
        state.fundamental[0] *= 1.0 + jump
        return state, item

    def test_no_news_no_orders(self):
        cfg = one_stock()
        state = MarketState.initial(1, 10.0, 1e6)
        orders = newswatcher_orders(state, pool(2, 0), [], 0, cfg)
        assert orders.tag == LARGE
        assert np.all(orders.shares == 0)

    def test_uninformed_anchor_to_public_value(self):
        cfg = one_stock()
        state, item = self._started_event(cfg)
        orders = newswatcher_orders(state, pool(2, 0), [item], 0, cfg)
        assert np.all(orders.shares == 0)

    def test_informed_agent_buys(self):
        cfg = one_stock()
        state, item = self._started_event(cfg)
        orders = newswatcher_orders(state, pool(2, 0), [item], 1, cfg)
        informed = item.order[0]
        # aggressiveness 1 at P = 1/2, (11 - 10)/10 * 1000/10
        assert orders.shares[informed, 0] == pytest.approx(10.0)
        assert orders.shares[1 - informed, 0] == 0.0

    def test_misdecoded_signal_sells(self):
        cfg = one_stock()
        state, item = self._started_event(cfg)
        item.decode_u = np.array([0.9, 0.9])
        orders = newswatcher_orders(state, pool(2, 0, fidelity=0.6), [item], 1, cfg)
        assert orders.shares[item.order[0], 0] == pytest.approx(-10.0)

    def test_public_news_traded_at_base_aggressiveness(self):
        cfg = one_stock(base_aggressiveness=0.5)
        state, item = self._started_event(cfg)
        orders = newswatcher_orders(state, pool(2, 0), [item], 2, cfg)
        assert orders.shares[:, 0] == pytest.approx([5.0, 5.0])

    def test_informed_keep_announced_value_while_eroding(self):
        cfg = one_stock(value_erosion=1.0)
        state, item = self._started_event(cfg)
        state = apply_value_erosion(state, [item], 1, cfg)
        assert state.fundamental[0] == pytest.approx(10.5)
        orders = newswatcher_orders(state, pool(2, 0), [item], 1, cfg)
        # public value stays 10, informed still price the announced +1
        assert orders.shares[item.order[0], 0] == pytest.approx(10.0)
        assert orders.shares[item.order[1], 0] == 0.0

    def test_sizing_scales_with_price(self):
        cfg = one_stock(base_aggressiveness=1.0)
        state = MarketState.initial(1, 5.0, 1e6)
        state.fundamental[0] = 5.5
        orders = newswatcher_orders(state, pool(2, 0), [], 0, cfg)
        # capital 1000 * 5/10, order (5.5 - 5)/5 * 500/5
        assert orders.shares[:, 0] == pytest.approx([10.0, 10.0])

    def test_short_sales_clipped_when_disallowed(self):
        cfg = one_stock(short_sale_newswatcher=False)
        state, item = self._started_event(cfg, jump=-0.1)
        orders = newswatcher_orders(state, pool(2, 0), [item], 2, cfg)
        assert np.all(orders.shares == 0)


class TestMomentumOrders:
    def _state(self, last_price):
        state = MarketState.initial(1, 10.0, 1e6)
        state.history = [np.array([10.0])] * 5 + [np.array([last_price])]
        return state

    def test_buys_on_rising_trend(self):
        orders = momentum_orders(self._state(11.0), pool(1, 1), 5, one_stock())
        assert orders.tag == SMALL
        assert orders.shares[0, 0] == pytest.approx(10.0)

    def test_no_shorting_on_falling_trend(self):
        orders = momentum_orders(self._state(9.0), pool(1, 1), 5, one_stock())
        assert orders.shares[0, 0] == 0.0

    def test_shorting_when_allowed(self):
        orders = momentum_orders(self._state(9.0), pool(1, 1), 5, one_stock(short_sale_momentum=True))
        assert orders.shares[0, 0] == pytest.approx(-10.0)

    def test_capital_marked_to_price(self):
        state = self._state(11.0)
        state.price = np.array([5.0])
        orders = momentum_orders(state, pool(1, 1), 5, one_stock())
        assert orders.shares[0, 0] == pytest.approx(10.0)

    def test_flat_history(self):
        orders = momentum_orders(self._state(10.0), pool(1, 1), 5, one_stock())
        assert np.all(orders.shares == 0)

    def test_warm_up(self):
        orders = momentum_orders(self._state(11.0), pool(1, 1), 3, one_stock())
        assert np.all(orders.shares == 0)


class TestClearing:
    def test_zero_orders(self):
        cfg = one_stock()
        state = MarketState.initial(1, 10.0, 1e6)
        new, trades = clear_market(state, [Orders(NEWSWATCHER, np.zeros((2, 1)))], cfg, period=0)
        assert new.price[0] == 10.0 and new.volume[0] == 0.0
        assert trades == []

    def test_single_buy_moves_price(self):
        cfg = one_stock(impact_kappa=0.1, shares_outstanding=10_000)
        state = MarketState.initial(1, 10.0, 10_000)
        new, trades = clear_market(state, [Orders(NEWSWATCHER, np.array([[100.0]]))], cfg, period=3)
        assert new.price[0] == pytest.approx(10.01)
        assert new.imbalance_large[0] == 100.0
        assert new.market_maker_inventory[0] == pytest.approx(9900.0)
        assert [(t.period, t.agent_class, t.signed_shares) for t in trades] == [(3, NEWSWATCHER, 100.0)]
        assert trades[0].fill_price == pytest.approx(10.01)
        assert len(state.history) == 2

    def test_offsetting_orders(self):
        cfg = one_stock()
        state = MarketState.initial(1, 10.0, 1e6)
        new, trades = clear_market(state, [
            Orders(NEWSWATCHER, np.array([[50.0]])), Orders(MOMENTUM, np.array([[-50.0]])),
        ], cfg, period=0)
        assert new.price[0] == 10.0
        assert new.volume[0] == 100.0
        assert new.imbalance_large[0] + new.imbalance_small[0] == 0.0
        assert len(trades) == 2

    def test_price_floor(self):
        cfg = one_stock()
        state = MarketState.initial(1, 10.0, 1e6)
        new, _ = clear_market(state, [Orders(NEWSWATCHER, np.array([[-5e6]]))], cfg, period=0)
        assert new.price[0] == PRICE_FLOOR


class TestValueErosion:
    def _run(self, erosion, jump=0.1, T_diff=10):
        cfg = one_stock(value_erosion=erosion, T_diff=T_diff)
        state = MarketState.initial(1, 10.0, 1e6)
        item = NewsItem.draw(0, EventRecord(0, 0, jump), 2, cfg, SeedStreams(1))
        item.start(state.fundamental[0])
        state.fundamental[0] *= 1.0 + jump
        for now in range(T_diff + 3):
            state = apply_value_erosion(state, [item], now, cfg)
        return state.fundamental[0], item

    def test_no_erosion(self):
        fundamental, _ = self._run(0.0)
        assert fundamental == pytest.approx(11.0)

    def test_half_erosion(self):
        fundamental, _ = self._run(0.5)
        assert fundamental == pytest.approx(10.5)

    def test_full_erosion_gives_back_the_event(self):
        fundamental, item = self._run(1.0)
        assert fundamental == pytest.approx(10.0)
        assert item.contribution == pytest.approx(0.0, abs=1e-12)

    def test_negative_news_not_eroded(self):
        fundamental, _ = self._run(0.6, jump=-0.1)
        assert fundamental == pytest.approx(9.0)


class TestRunSimulation:
    def test_quiet_market(self, quiet_config):
        result = run_simulation(quiet_config)
        assert list(result.panel.columns) == PANEL_COLUMNS
        assert len(result.panel) == quiet_config.n_periods * quiet_config.n_stocks
        assert np.all(result.panel["price"] == quiet_config.initial_price)
        assert np.all(result.panel["volume"] == 0)
        assert result.trades.empty and result.events.empty

    def test_deterministic(self, small_config):
        a, b = run_simulation(small_config), run_simulation(small_config)
        pd.testing.assert_frame_equal(a.panel, b.panel)
        pd.testing.assert_frame_equal(a.trades, b.trades)
        pd.testing.assert_frame_equal(a.events, b.events)

    def test_shares_conserved(self, small_config):
        result = run_simulation(small_config)
        assert not result.trades.empty
        assert result.conservation_gap() < 1e-6 * small_config.shares_outstanding

    def test_panel_sanity(self, small_config):
        result = run_simulation(small_config)
        panel = result.panel
        assert np.all(panel["price"] > 0)
        assert np.all((panel["frac_informed"] >= 0) & (panel["frac_informed"] <= 1))
        assert result.warmup == small_config.momentum_window
        records = list(result.panel_records())
        assert records[0].warm_up and not records[-1].warm_up
        assert set(result.trades["agent_class"]) <= {NEWSWATCHER, MOMENTUM}

    @pytest.mark.parametrize("jump", [0.05, -0.05])
    def test_efficient_limit(self, jump):
        n = 10
        cfg = one_stock(n_periods=12, n_newswatchers=n, T_diff=1, base_aggressiveness=1.0,
                        budget_share=1.0, value_erosion=0.0,
                        newswatcher_wealth=10.0 * 1e6 / n)
        result = run_simulation(cfg, events=[EventRecord(5, 0, jump)])
        panel = result.panel.set_index("period")
        target = 10.0 * (1.0 + jump)
        for t in (6, 7):
            assert abs(panel.loc[t, "price"] - target) < 0.01 * abs(jump) * 10.0
        assert panel.loc[4, "price"] == 10.0
        assert panel.loc[5, "frac_informed"] == 0.0 and panel.loc[6, "frac_informed"] == 1.0

    @pytest.mark.parametrize("seed", range(5))
    def test_efficient_limit_on_every_event(self, seed):
        # newswatcher capital equals market value / kappa, so one clearing at full
        # aggressiveness puts the price on the public value
        n = 20
        cfg = MarketConfig(n_stocks=10, n_periods=200, n_newswatchers=n, n_momentum=0,
                           event_rate=0.02, T_diff=1, seed=seed, base_aggressiveness=1.0,
                           budget_share=1.0, newswatcher_wealth=10.0 * 1e6 / n)
        result = run_simulation(cfg)
        price = result.panel.pivot(index="period", columns="stock_id", values="price")
        fundamental = result.panel.pivot(index="period", columns="stock_id", values="fundamental")
        events = result.events
        checked = 0
        for e in events.itertuples(index=False):
            t, s = int(e.period), int(e.stock_id)
            overlapping = (events.stock_id == s) & (events.period > t) & (events.period <= t + 2)
            if t + 2 >= cfg.n_periods or overlapping.any():
                continue
            before = fundamental.loc[t - 1, s] if t > 0 else cfg.initial_price
            assert abs(price.loc[t + 2, s] - fundamental.loc[t + 2, s]) < 0.01 * abs(e.jump) * before
            checked += 1
        assert checked > 0

    def test_large_negative_jump_stays_bounded(self):
        # default capital and depth; a -71% event used to send prices to the floor
        cfg = MarketConfig(n_stocks=1, n_periods=120, n_newswatchers=100, n_momentum=100,
                           event_rate=0.0, T_diff=10, seed=0)
        result = run_simulation(cfg, events=[EventRecord(30, 0, -0.71)])
        panel = result.panel.set_index("period")
        target = 10.0 * (1.0 - 0.71)
        assert panel["price"].max() <= 10.0 * (1.0 + 1e-9)
        assert panel["price"].min() > 0.9 * target
        assert panel.loc[119, "price"] == pytest.approx(target, rel=0.01)

    def test_agent_snapshots(self, small_config):
        result = run_simulation(small_config)
        states = result.agents.states()
        assert len(states) == small_config.n_newswatchers + small_config.n_momentum
        assert states[0].agent_class == NEWSWATCHER and states[-1].agent_class == MOMENTUM
        assert all(0.5 <= s.fidelity <= 1.0 for s in states)
