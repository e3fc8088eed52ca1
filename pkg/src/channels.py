"""
InfoMarket Channels
Discrete memoryless channels between an information source and a receiver,
binary symmetric channels parameterized by fidelity, and the conservatism
learning rule by which a receiver's equivocation falls over time
"""

import math
from dataclasses import dataclass

import numpy as np

from entropy_core import (
    NATURAL,
    Distribution,
    JointDistribution,
    LogBase,
    binary_entropy,
    log_factor,
)
from errors import ValidationError

ROW_TOLERANCE = 1e-9


def validate_fidelity(q: float) -> float:
    """Fidelity is the probability a binary receiver decodes the true state, 0.5 <= q <= 1"""
    q = float(q)
    if not (0.5 <= q <= 1.0):
        raise ValidationError(f"fidelity must lie in [0.5, 1], got {q!r}")
    return q


@dataclass(frozen=True)
class DiscreteChannel:
    """Prior over source states plus a row-stochastic receive matrix"""

    prior: Distribution
    cond: np.ndarray

    def __post_init__(self):
        prior = self.prior if isinstance(self.prior, Distribution) else Distribution(self.prior)
        cond = np.asarray(self.cond, dtype=float)
        if cond.ndim != 2 or cond.shape[0] != len(prior):
            raise ValidationError(
                f"receive matrix must have {len(prior)} rows (one per source state), got shape {cond.shape}"
            )
        if not np.all(np.isfinite(cond)) or np.any(cond < 0):
            raise ValidationError("receive matrix entries must be finite and >= 0")
        row_sums = cond.sum(axis=1)
        bad = np.flatnonzero(np.abs(row_sums - 1.0) > ROW_TOLERANCE)
        if bad.size:
            raise ValidationError(f"receive matrix row {int(bad[0])} sums to {row_sums[bad[0]]!r}, expected 1")
        cond = cond / row_sums[:, None]
        cond.setflags(write=False)
        object.__setattr__(self, "prior", prior)
        object.__setattr__(self, "cond", cond)


@dataclass(frozen=True)
class LearningRule:
    """Initial fidelity q0 and per-period learning rate lambda"""

    q0: float
    lam: float

    def __post_init__(self):
        object.__setattr__(self, "q0", validate_fidelity(self.q0))
        if not (self.lam >= 0 and math.isfinite(self.lam)):
            raise ValidationError(f"learning rate must be >= 0, got {self.lam!r}")


def joint_from_channel(ch: DiscreteChannel) -> JointDistribution:
    """joint[i][j] = prior[i] * cond[i][j]"""
    if not isinstance(ch, DiscreteChannel):
        raise ValidationError("joint_from_channel expects a DiscreteChannel")
    return JointDistribution(ch.prior.probs[:, None] * ch.cond)


def bsc(fidelity: float, prior=None) -> DiscreteChannel:
    """
    Binary symmetric channel

    cond = [[q, 1-q], [1-q, q]]; prior defaults to uniform
    """
    q = validate_fidelity(fidelity)
    if prior is None:
        prior = Distribution.uniform(2)
    elif not isinstance(prior, Distribution):
        prior = Distribution(prior)
    if len(prior) != 2:
        raise ValidationError(f"binary symmetric channel needs a 2-state prior, got {len(prior)} states")
    return DiscreteChannel(prior, np.array([[q, 1.0 - q], [1.0 - q, q]]))


def bsc_received_information(fidelity: float, base: LogBase = NATURAL) -> float:
    """Closed form for the uniform-prior BSC: R(q) = log 2 - H(q)"""
    q = validate_fidelity(fidelity)
    value = math.log(2.0) / log_factor(base) - binary_entropy(q, base)
    return max(value, 0.0)


def learning_update(rule: LearningRule, tau: int) -> float:
    """
    Fidelity after tau periods of learning

    q(tau) = 1 - (1 - q0) * exp(-lambda * tau); stateless, so applying it once
    with t1 + t2 equals the two-step result
    """
    if int(tau) != tau or tau < 0:
        raise ValidationError(f"tau must be an integer >= 0, got {tau!r}")
    q = 1.0 - (1.0 - rule.q0) * math.exp(-rule.lam * tau)
    return min(max(q, rule.q0), 1.0)


def learning_update_array(q0: np.ndarray, lam: float, tau: np.ndarray) -> np.ndarray:
    """Vectorized learning_update for agent arrays (no validation)"""
    return 1.0 - (1.0 - np.asarray(q0, dtype=float)) * np.exp(-lam * np.asarray(tau, dtype=float))
