"""Exception types shared across the package."""


class LayoutError(Exception):
    """Base class for all package errors."""


class DegenerateInput(LayoutError, ValueError):
    pass


class InvalidLayout(LayoutError, ValueError):
    def __init__(self, violations):
        self.violations = list(violations)
        msg = "; ".join(str(v) for v in self.violations) or "invalid layout"
        super().__init__(msg)


class MissingSurface(LayoutError, ValueError):
    pass


class DimensionMismatch(LayoutError, ValueError):
    pass


class FormatError(LayoutError, ValueError):
    pass


class RangeError(LayoutError, ValueError):
    pass


class BudgetExceeded(LayoutError, RuntimeError):
    pass


class LengthMismatch(LayoutError, ValueError):
    pass


class EmptyDataset(LayoutError, ValueError):
    pass


class EmptyCandidates(LayoutError, ValueError):
    pass


class EmptyInput(LayoutError, ValueError):
    pass


class NonFiniteLoss(LayoutError, FloatingPointError):
    pass


class ConfigError(LayoutError, ValueError):
    pass
