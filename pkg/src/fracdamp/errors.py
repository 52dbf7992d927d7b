"""Exception hierarchy shared by all fracdamp modules."""


class FracdampError(Exception):
    """Base class for all package errors."""


class ParameterError(FracdampError, ValueError):
    """A scalar parameter is outside its admissible range.

    The message always names the offending parameter.
    """


class CoefficientError(FracdampError, ValueError):
    """A tabulated diffusion coefficient violates its positivity/support contract."""


class HypothesisViolationError(CoefficientError):
    """The degeneracy measure of the coefficient is >= 2."""


class ConfigurationError(FracdampError, ValueError):
    """Inconsistent problem configuration (variant/coefficient/damping combination)."""


class ShapeError(FracdampError, ValueError):
    """State and operator grids do not match."""


class GridError(FracdampError, ValueError):
    """Unsupported grid (nonuniform time grid, inverted bounds, too few nodes)."""


class NumericalError(FracdampError, RuntimeError):
    """A solver failed; `diagnostics` carries whatever is known about the failure."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})


class SpectralCollisionError(NumericalError):
    """A resolvent shift sits on (or numerically at) a discrete eigenvalue."""

    def __init__(self, lam, nearest_eigenvalue, message=None):
        msg = message or (
            f"shift i*{lam:g} collides with a discrete eigenvalue near "
            f"{nearest_eigenvalue:.6g}"
        )
        super().__init__(msg, {"lambda": lam, "nearest_eigenvalue": nearest_eigenvalue})
        self.lam = lam
        self.nearest_eigenvalue = nearest_eigenvalue


class NearSingularError(NumericalError):
    """The analytic connection determinant is numerically zero."""


class FitDataError(FracdampError, ValueError):
    """Degenerate or insufficient data for a power-law fit."""
