"""Shared fixtures; modules live in src/ and are imported flat, as the CLI does"""

import os
import sys

import numpy as np
import pandas as pd
import pytest

sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..', 'src'))

from market_sim import MarketConfig  # noqa: E402


@pytest.fixture
def small_config():
    """Few stocks and periods; enough events to exercise diffusion"""
    return MarketConfig(
        n_stocks=4, n_periods=60, n_newswatchers=10, n_momentum=10,
        event_rate=0.05, T_diff=5, seed=42,
    )


@pytest.fixture
def quiet_config():
    return MarketConfig(
        n_stocks=3, n_periods=30, n_newswatchers=5, n_momentum=5,
        event_rate=0.0, T_diff=3, seed=7,
    )


def make_panel(returns: np.ndarray, turnover: np.ndarray = None) -> pd.DataFrame:
    """Long-format panel from a periods x stocks return matrix"""
    returns = np.asarray(returns, dtype=float)
    T, n = returns.shape
    if turnover is None:
        turnover = np.full((T, n), 0.01)
    price = 10.0 * np.cumprod(1.0 + returns, axis=0)
    return pd.DataFrame({
        "period": np.repeat(np.arange(T), n),
        "stock_id": np.tile(np.arange(n), T),
        "price": price.ravel(),
        "return": returns.ravel(),
        "volume": (np.asarray(turnover) * 1e6).ravel(),
        "turnover": np.asarray(turnover, dtype=float).ravel(),
        "fundamental": price.ravel(),
        "frac_informed": np.ones(T * n),
    })


@pytest.fixture
def hand_panel():
    """
    4 stocks x 6 periods: A +2%, B +1% every period, C and D alternate +/-3% in
    opposite phase; turnover constant A .05, B .01, C .04, D .02
    """
    T = 6
    alt = np.array([0.03 if t % 2 == 0 else -0.03 for t in range(T)])
    returns = np.column_stack([np.full(T, 0.02), np.full(T, 0.01), alt, -alt])
    turnover = np.tile([0.05, 0.01, 0.04, 0.02], (T, 1))
    return make_panel(returns, turnover)
