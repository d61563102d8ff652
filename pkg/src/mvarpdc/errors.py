"""Exception and warning types raised across the package."""


class MvarPdcError(Exception):
    """Base class for every error raised by mvarpdc."""


class ConfigError(MvarPdcError, ValueError):
    """Invalid configuration value."""


class NonStationaryModel(MvarPdcError):
    """Generator coefficients with companion spectral radius >= 1."""

    def __init__(self, radius):
        self.radius = radius
        super().__init__(f"MVAR generator is not stationary (spectral radius {radius:.6g} >= 1)")


class DimensionMismatch(MvarPdcError, ValueError):
    pass


class ShapeMismatch(MvarPdcError, ValueError):
    pass


class FileFormatError(MvarPdcError, ValueError):
    pass


class InsufficientSamples(MvarPdcError, ValueError):
    pass


class IllConditioned(MvarPdcError, ArithmeticError):
    """Regressor matrix too ill-conditioned for a least-squares solve."""

    def __init__(self, condition):
        self.condition = condition
        super().__init__(f"Phi^T Phi is ill-conditioned (condition number ~{condition:.3g})")


class NumericalBreakdown(MvarPdcError, ArithmeticError):
    """EM iterate left the positive-definite / finite regime."""


class OddTrialCount(MvarPdcError, ValueError):
    pass


class DegenerateColumn(RuntimeWarning):
    """A column of the spectral matrix vanished; affected PDC bins were set to 0."""


class DegenerateNull(RuntimeWarning):
    """Null distribution had zero spread at some bins; threshold set to the null mean there."""
