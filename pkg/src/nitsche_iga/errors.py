"""Exception hierarchy shared by all modules."""


class IGAError(Exception):
    """Base class for every error raised by this package."""


class DomainError(IGAError, ValueError):
    """A parameter value lies outside the knot range."""


class DegenerateElementError(IGAError, ValueError):
    """A knot span (or element) has zero parametric measure."""


class InvalidPatchError(IGAError, ValueError):
    """Patch data violates a structural invariant (knots, weights, net size)."""


class InvertedElementError(IGAError):
    """Non-positive Jacobian determinant at a quadrature point."""

    def __init__(self, message, element=None):
        super().__init__(message)
        self.element = element


class InversionError(IGAError):
    """Newton inversion of the geometry map did not converge.

    ``residual`` holds the last physical residual norm; ``singular`` is set
    when the parametric Jacobian became singular.
    """

    def __init__(self, message, residual=float("nan"), singular=False):
        super().__init__(message)
        self.residual = residual
        self.singular = singular


class InterfaceMismatchError(IGAError):
    """An interface quadrature point could not be located on the second patch."""

    def __init__(self, message, point=None):
        super().__init__(message)
        self.point = point


class MaterialError(IGAError, ValueError):
    """Invalid elastic constants (including the incompressible limit)."""


class ProjectionError(IGAError):
    """Singular Gram matrix in a boundary projection."""


class SolverError(IGAError):
    """Singular or indefinite system; ``pivot`` is the first failing pivot."""

    def __init__(self, message, pivot=None):
        super().__init__(message)
        self.pivot = pivot


class ModelError(IGAError, ValueError):
    """Model file failed validation. ``path`` locates the offending field."""

    def __init__(self, message, path=""):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path
