from __future__ import annotations


class AnikernError(Exception):
    """Base class for every error raised by the toolkit."""


class DimensionError(AnikernError, ValueError):
    pass


class SymbolError(AnikernError, ValueError):
    pass


class GridError(AnikernError, ValueError):
    pass


class NyquistError(GridError):
    pass


class LegendreDivergenceError(AnikernError, ArithmeticError):
    pass


class CoefficientError(AnikernError, ValueError):
    pass


class TwistError(AnikernError, ValueError):
    def __init__(self, message: str, *, max_lambda: float | None = None) -> None:
        super().__init__(message)
        self.max_lambda = max_lambda


class BoundInfeasibleError(AnikernError, ArithmeticError):
    pass


class ConfigError(AnikernError, ValueError):
    def __init__(self, message: str, errors: list[str] | None = None) -> None:
        super().__init__(message)
        self.errors = errors or [message]
