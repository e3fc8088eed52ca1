"""
InfoMarket Decision Layer
Value of information as a function of how many already know it, the cost of
buying channel fidelity, and the survival-threshold choice rule
"""

import logging
import math
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np
from scipy.optimize import bisect

from channels import bsc_received_information
from entropy_core import NATURAL, Distribution, LogBase, log_factor
from errors import DomainError, ValidationError

logger = logging.getLogger(__name__)

BISECTION_TOLERANCE = 1e-9
POUNDS_PER_DAY = 100.0  # 4000 pounds -> 40 days of food


@dataclass(frozen=True)
class CostModel:
    """Cost per squared nat of received information, in wealth units"""

    alpha: float

    def __post_init__(self):
        if not (self.alpha > 0 and math.isfinite(self.alpha)):
            raise ValidationError(f"cost alpha must be > 0, got {self.alpha!r}")


@dataclass(frozen=True)
class Lottery:
    """Outcome/probability pairs, outcomes in subsistence-day units"""

    outcomes: Tuple[Tuple[float, float], ...]

    def __post_init__(self):
        pairs = tuple((float(v), float(p)) for v, p in self.outcomes)
        if not pairs:
            raise ValidationError("lottery needs at least one outcome")
        if not all(math.isfinite(v) for v, _ in pairs):
            raise ValidationError("lottery outcomes must be finite")
        Distribution([p for _, p in pairs])
        object.__setattr__(self, "outcomes", pairs)

    @property
    def values(self) -> np.ndarray:
        return np.array([v for v, _ in self.outcomes])

    @property
    def probs(self) -> np.ndarray:
        return np.array([p for _, p in self.outcomes])

    def expected_value(self) -> float:
        return float(np.dot(self.values, self.probs))

    def scaled(self, factor: float) -> "Lottery":
        return Lottery(tuple((v * factor, p) for v, p in self.outcomes))


def info_value(P: float, base: LogBase = NATURAL) -> float:
    """
    Value of information already known to a fraction P of investors (or money)

    -log_b(P): zero when everyone knows it, unbounded as P -> 0
    """
    if not (isinstance(P, (int, float, np.floating)) and 0.0 < float(P) <= 1.0):
        raise DomainError(f"informed fraction must satisfy 0 < P <= 1, got {P!r}")
    return float(-math.log(float(P)) / log_factor(base)) + 0.0


def information_value_curve(points: int = 100, base: LogBase = NATURAL) -> List[Tuple[float, float]]:
    """info_value on an evenly spaced grid of P in (0, 1], ending at P = 1"""
    if points < 2:
        raise ValidationError("value curve needs at least 2 points")
    grid = np.linspace(1.0 / points, 1.0, points)
    return [(float(P), info_value(float(P), base)) for P in grid]


def info_cost(target_R: float, cm: CostModel) -> float:
    """Quadratic cost alpha * R^2 of receiving R nats"""
    if not target_R >= 0:
        raise DomainError(f"received information must be >= 0, got {target_R!r}")
    return cm.alpha * float(target_R) ** 2


def choose_fidelity(wealth: float, budget_share: float, event_scale: float, cm: CostModel) -> float:
    """
    Largest fidelity q whose information cost fits the budget

    Budget is wealth * budget_share. event_scale is validated but does not bound the
    budget; init_agents applies the value-at-stake cap when the config asks for it.
    R(q) is the received information of the uniform-prior BSC; inverted by bisection.
    """
    if not wealth > 0:
        raise DomainError(f"wealth must be > 0, got {wealth!r}")
    if not 0.0 <= budget_share <= 1.0:
        raise DomainError(f"budget share must lie in [0, 1], got {budget_share!r}")
    if not event_scale > 0:
        raise DomainError(f"event scale must be > 0, got {event_scale!r}")

    budget = wealth * budget_share
    if budget <= 0:
        return 0.5
    if info_cost(math.log(2.0), cm) <= budget:
        return 1.0

    def excess(q: float) -> float:
        return info_cost(bsc_received_information(q), cm) - budget

    q = bisect(excess, 0.5, 1.0, xtol=BISECTION_TOLERANCE)
    # step back inside the feasible side of the root
    while q > 0.5 and excess(q) > 0:
        q = max(0.5, q - BISECTION_TOLERANCE)
    return float(q)


def survival_probability(lottery: Lottery, death_threshold: float, baseline: float = 0.0) -> float:
    """Probability that baseline + outcome stays above -death_threshold"""
    end_positions = baseline + lottery.values
    return float(lottery.probs[end_positions > -death_threshold].sum())


def survival_choice(options: Sequence[Lottery], death_threshold: float, baseline: float = 0.0) -> int:
    """
    Pick the lottery with the highest survival probability

    Outcomes at or beyond -death_threshold (relative to baseline) are fatal.
    Ties go to the higher expected value, then the lowest index.
    """
    if not options:
        raise ValidationError("survival_choice needs at least one option")
    if len(options) < 2:
        logger.warning("survival_choice called with a single option")
    if not math.isfinite(death_threshold):
        raise ValidationError(f"death threshold must be finite, got {death_threshold!r}")

    best_index = 0
    best_key = None
    for index, lottery in enumerate(options):
        key = (survival_probability(lottery, death_threshold, baseline), lottery.expected_value())
        if best_key is None or key > best_key:
            best_key = key
            best_index = index
    return best_index


def kahneman_lotteries(pounds_per_day: float = POUNDS_PER_DAY) -> dict:
    """
    The four gain/loss lotteries translated from pounds into days of food

    A: 80% win 4000, 20% nothing    B: certain 3000
    C: 80% lose 4000, 20% nothing   D: certain loss of 3000
    """
    if not pounds_per_day > 0:
        raise ValidationError("pounds_per_day must be > 0")
    days = lambda pounds: pounds / pounds_per_day
    return {
        "A": Lottery(((days(4000), 0.8), (0.0, 0.2))),
        "B": Lottery(((days(3000), 1.0),)),
        "C": Lottery(((-days(4000), 0.8), (0.0, 0.2))),
        "D": Lottery(((-days(3000), 1.0),)),
    }
