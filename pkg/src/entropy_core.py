"""
InfoMarket Entropy Core
Discrete information measures: surprisal, entropy, cross-entropy, KL divergence,
equivocation and received information
All functions are pure; natural log is the default base
"""

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple, Union

import numpy as np
from scipy.special import rel_entr, xlogy

from errors import DomainError, InfiniteDivergenceError, ValidationError

NATURAL = "e"
SUM_TOLERANCE = 1e-9

LogBase = Union[float, int, str]


def log_factor(base: LogBase = NATURAL) -> float:
    """
    Return ln(base), the divisor converting nats to units of `base`

    Accepts 'e' / 'natural' / math.e for nats, or any real > 1 (also as a string)
    """
    if base is None or (isinstance(base, str) and base.strip().lower() in ("e", "natural", "nat", "ln")):
        return 1.0
    try:
        b = float(base)
    except (TypeError, ValueError):
        raise ValidationError(f"log base must be 'e' or a real > 1, got {base!r}")
    if not b > 1.0 or math.isinf(b):
        raise ValidationError(f"log base must be > 1, got {base!r}")
    if b == math.e:
        return 1.0
    return math.log(b)


def _as_probability_vector(values: Sequence[float], what: str) -> np.ndarray:
    p = np.asarray(values, dtype=float).ravel()
    if p.size < 1:
        raise ValidationError(f"{what} must have at least one entry")
    if not np.all(np.isfinite(p)):
        raise ValidationError(f"{what} contains non-finite entries")
    if np.any(p < 0):
        raise ValidationError(f"{what} has negative entries")
    total = float(p.sum())
    if abs(total - 1.0) > SUM_TOLERANCE:
        raise ValidationError(f"{what} sums to {total!r}, expected 1 within {SUM_TOLERANCE}")
    # renormalize inside tolerance only
    return p / total


@dataclass(frozen=True)
class Distribution:
    """Finite probability vector with optional state labels"""

    probs: np.ndarray
    labels: Optional[Tuple[str, ...]] = field(default=None, compare=False)

    def __post_init__(self):
        p = _as_probability_vector(self.probs, "distribution")
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)
        if self.labels is not None:
            labels = tuple(str(label) for label in self.labels)
            if len(labels) != p.size:
                raise ValidationError(f"{len(labels)} labels for {p.size} states")
            object.__setattr__(self, "labels", labels)

    @classmethod
    def uniform(cls, n: int) -> "Distribution":
        if n < 1:
            raise ValidationError("uniform distribution needs n >= 1")
        return cls(np.full(n, 1.0 / n))

    def __len__(self) -> int:
        return int(self.probs.size)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Distribution):
            return NotImplemented
        return self.probs.shape == other.probs.shape and bool(np.all(self.probs == other.probs))

    def __hash__(self) -> int:
        return hash(self.probs.tobytes())


@dataclass(frozen=True)
class JointDistribution:
    """|X| x |Y| joint probability matrix; rows index the source x, columns the receiver y"""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] < 1 or m.shape[1] < 1:
            raise ValidationError(f"joint distribution must be a non-empty 2-D matrix, got shape {m.shape}")
        flat = _as_probability_vector(m.ravel(), "joint distribution")
        m = flat.reshape(m.shape)
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def x_marginal(self) -> Distribution:
        return Distribution(self.matrix.sum(axis=1))

    @property
    def y_marginal(self) -> Distribution:
        return Distribution(self.matrix.sum(axis=0))

    def transposed(self) -> "JointDistribution":
        return JointDistribution(self.matrix.T.copy())


def _coerce(d, what: str = "distribution") -> Distribution:
    if isinstance(d, Distribution):
        return d
    return Distribution(np.asarray(d, dtype=float))


def _coerce_joint(j) -> JointDistribution:
    if isinstance(j, JointDistribution):
        return j
    return JointDistribution(np.asarray(j, dtype=float))


def surprisal(p: float, base: LogBase = NATURAL) -> float:
    """
    Information value of an outcome with probability p

    H = -log_b(p), zero for a certain outcome
    """
    if not (isinstance(p, (int, float, np.floating)) and 0.0 < float(p) <= 1.0):
        raise DomainError(f"surprisal needs 0 < p <= 1, got {p!r}")
    return float(-math.log(float(p)) / log_factor(base)) + 0.0


def entropy(d, base: LogBase = NATURAL) -> float:
    """
    Average information value of each state

    H = -sum_j p_j log p_j, with 0 log 0 = 0
    """
    p = _coerce(d).probs
    return float(-np.sum(xlogy(p, p)) / log_factor(base)) + 0.0


def binary_entropy(q: float, base: LogBase = NATURAL) -> float:
    """Entropy of the two-point distribution (q, 1 - q)"""
    if not 0.0 <= q <= 1.0:
        raise DomainError(f"binary entropy needs 0 <= q <= 1, got {q!r}")
    return entropy([q, 1.0 - q], base)


def _check_pair(p: Distribution, q: Distribution) -> None:
    if len(p) != len(q):
        raise ValidationError(f"length mismatch: p has {len(p)} states, q has {len(q)}")
    if np.any((q.probs == 0) & (p.probs > 0)):
        raise InfiniteDivergenceError("q_j = 0 where p_j > 0: divergence is infinite")


def cross_entropy(p, q, base: LogBase = NATURAL) -> float:
    """
    Uncertainty of predicting outcomes drawn from p with the model q

    -sum_j p_j log q_j >= entropy(p), with equality iff p = q (Gibbs inequality)
    """
    p, q = _coerce(p), _coerce(q)
    _check_pair(p, q)
    return float(-np.sum(xlogy(p.probs, q.probs)) / log_factor(base)) + 0.0


def kl_divergence(p, q, base: LogBase = NATURAL) -> float:
    """Gap between cross_entropy(p, q) and entropy(p); zero iff p = q"""
    p, q = _coerce(p), _coerce(q)
    _check_pair(p, q)
    value = float(np.sum(rel_entr(p.probs, q.probs)) / log_factor(base))
    return max(value, 0.0)


def joint_entropy(j, base: LogBase = NATURAL) -> float:
    """H(x, y) of a joint distribution"""
    m = _coerce_joint(j).matrix
    return float(-np.sum(xlogy(m, m)) / log_factor(base)) + 0.0


def equivocation(j, base: LogBase = NATURAL) -> float:
    """
    Conditional entropy of the source given the received signal

    H_y(x) = H(x, y) - H(y); zero for a noiseless channel, H(x) for an independent one
    """
    joint = _coerce_joint(j)
    value = joint_entropy(joint, base) - entropy(joint.y_marginal, base)
    # clamp float noise at the bounds 0 <= H_y(x) <= H(x)
    return float(min(max(value, 0.0), entropy(joint.x_marginal, base)))


def received_information(j, base: LogBase = NATURAL) -> float:
    """
    Information that actually reaches the receiver

    R = H(x) - H_y(x), symmetric in x and y (mutual information)
    """
    joint = _coerce_joint(j)
    h_x = entropy(joint.x_marginal, base)
    h_y = entropy(joint.y_marginal, base)
    value = h_x + h_y - joint_entropy(joint, base)
    return float(min(max(value, 0.0), h_x, h_y))


# the `info mutual` command reports received information under its usual name
mutual_information = received_information
