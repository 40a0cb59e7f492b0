"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Invalid model, system, or experiment configuration."""


class EnumerationLimitError(ValueError):
    """Exact enumeration refused because the sequence count exceeds the cap."""


class NonFiniteError(ArithmeticError):
    """A numeric path encountered non-finite parameters or values."""


class CouplingCollapseError(ArithmeticError):
    """Coupled trajectories have merged; a contraction ratio is undefined."""


class DivergenceError(RuntimeError):
    """Training loss exceeded the abort threshold."""


class FixedPointError(RuntimeError):
    """Fixed-point iteration failed to converge within the iteration cap."""
