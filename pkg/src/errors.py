"""
InfoMarket error types
Validation and domain errors map to CLI exit code 1, I/O errors to exit code 2
"""

from typing import Optional


class InfoMarketError(Exception):
    """Base class for every error raised by InfoMarket modules"""


class ValidationError(InfoMarketError, ValueError):
    """Input does not satisfy a type invariant (bad distribution, bad config, ...)"""


class DomainError(InfoMarketError, ValueError):
    """Argument outside the mathematical domain of an operation"""


class InfiniteDivergenceError(DomainError):
    """q_j = 0 where p_j > 0, so cross-entropy and KL divergence are infinite"""


class ConfigError(ValidationError):
    """Config file problem, tagged with the offending key and line number(s)"""

    def __init__(self, message: str, key: Optional[str] = None, line: Optional[int] = None):
        location = []
        if key is not None:
            location.append(f"key '{key}'")
        if line is not None:
            location.append(f"line {line}")
        prefix = f"{', '.join(location)}: " if location else ""
        super().__init__(prefix + message)
        self.key = key
        self.line = line


class InsufficientHistoryError(ValidationError):
    """Panel too short for the requested formation/holding span"""

    def __init__(self, required: int, available: int):
        super().__init__(
            f"panel spans {available} usable periods, {required} required (J + K + 1)"
        )
        self.required = required
        self.available = available


class DegenerateSeriesError(ValidationError):
    """Zero variance where a correlation is requested"""


class EmptyResultError(ValidationError):
    """Nothing to aggregate (for example no events to align on)"""
