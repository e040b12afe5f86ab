"""Exception hierarchy shared by all modules."""


class NemfilmError(Exception):
    """Base class for library errors."""


class InvalidInputError(NemfilmError, ValueError):
    """An argument violates a documented precondition."""


class NotRepresentableError(NemfilmError, ValueError):
    """A tensor cannot be written in the requested surface frame."""


class IllPosedError(NemfilmError, ValueError):
    """A minimization problem has no unique minimizer for these constants."""


class NoNematicMinimumError(IllPosedError):
    """The bulk potential has no nontrivial uniaxial stationary point."""


class FoldError(NemfilmError, ValueError):
    """The normal map x + eps*t*nu(x) is not invertible at some node."""


class RangeError(NemfilmError, ValueError):
    """Arclength parameter outside the profile domain."""


class UndefinedDegreeError(NemfilmError, ValueError):
    """Winding number requested along a circle where |p| vanishes."""


class BracketError(NemfilmError, ValueError):
    """Bisection bracket does not contain a sign change."""


class AdmissibilityError(NemfilmError, ValueError):
    """A surface tensor field violates the leading-order anchoring constraint."""
