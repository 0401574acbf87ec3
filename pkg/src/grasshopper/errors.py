"""Exception types shared across the package."""


class GrasshopperError(Exception):
    pass


class DomainError(GrasshopperError, ValueError):
    """An argument lies outside the range where a formula is valid."""


class SingularInputError(DomainError):
    """The formula diverges at the requested point."""


class QuadratureError(GrasshopperError, ArithmeticError):
    """A numerical integral did not reach its tolerance."""

    def __init__(self, message, achieved=None):
        super().__init__(message)
        self.achieved = achieved


class BracketError(GrasshopperError):
    """A maximization bracket could not be established.

    ``scan`` holds the (abscissa, value) samples that were examined.
    """

    def __init__(self, message, scan=None):
        super().__init__(message)
        self.scan = scan


class SamplingError(GrasshopperError):
    pass


class ConfigurationError(GrasshopperError, ValueError):
    """Inconsistent lattice, kernel or spin configuration."""


class StarShapeError(GrasshopperError):
    """A boundary is not star-shaped about its centroid."""
