"""Exception taxonomy shared across the package.

The CLI maps these onto exit codes: ConfigError -> 2, NumericalAssertionError -> 3.
"""


class ConfigError(ValueError):
    """Malformed experiment configuration. Message carries the offending field path."""


class NumericalAssertionError(AssertionError):
    """A runtime numerical guarantee was violated (smoothness, truncation range, ...)."""


class SmoothnessError(NumericalAssertionError):
    """A distribution failed the sigma-smoothness check."""


class InfiniteLossError(ArithmeticError):
    """Deterministic prediction contradicted by the realized label: log-loss is infinite."""
