"""Exception types shared across the package."""


class ShortcutShieldError(Exception):
    """Base class for all package errors."""


class ConfigurationError(ShortcutShieldError, ValueError):
    """Invalid parameters, infeasible settings or malformed config files."""


class GenerationError(ShortcutShieldError):
    """A sampled dataset violates a structural requirement (e.g. empty cell)."""


class OverlapError(ShortcutShieldError, ValueError):
    """A (y, v) cell has zero count, so importance weights are undefined."""


class EstimationError(ShortcutShieldError, ValueError):
    """A statistic cannot be estimated from the given sample (empty group)."""


class ContractError(ShortcutShieldError, ValueError):
    """Inputs break a documented normalization contract."""


class NumericalError(ShortcutShieldError, ArithmeticError):
    """A quantity that must be nonnegative came out clearly negative."""


class BatchCompositionError(ShortcutShieldError, ValueError):
    """A batch lacks the groups needed by the requested penalty."""
