"""Exception types; the CLI maps each to its own exit code."""


class ConfigError(ValueError):
    """Invalid configuration or schema."""


class DataError(ValueError):
    """Input data violates the panel invariants."""


class NumericError(RuntimeError):
    """A numerical routine failed (infeasible LP, non-convergence, ...)."""
