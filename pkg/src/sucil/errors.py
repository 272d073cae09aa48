"""Exception types raised across the package."""


class SucilError(Exception):
    """Base class for all errors raised by this package."""


class DimensionMismatch(SucilError, ValueError):
    pass


class SingularSystem(SucilError, ValueError):
    pass


class AmbiguousMembership(SucilError):
    """A point tested inside two cones of the same complex.

    Cones of a poised set are disjoint, so this only happens when the
    membership tolerance is set far too loose.
    """


class CapacityExceeded(SucilError, MemoryError):
    pass


class EmptyActiveSet(SucilError):
    pass


class StencilOutsideDomain(SucilError, ValueError):
    def __init__(self, points):
        self.points = [tuple(int(v) for v in p) for p in points]
        super().__init__(
            "initial stencil leaves the domain at "
            + ", ".join(str(p) for p in self.points)
            + "; recenter the starting point so that x0 +/- e_i stays inside the box"
        )


class UnknownProblem(SucilError, KeyError):
    pass


class DimensionTooSmall(SucilError, ValueError):
    pass


class NoPoisedSubset(SucilError, ValueError):
    pass


class ZeroNormal(SucilError, ValueError):
    pass


class IncompleteAssignment(SucilError, KeyError):
    pass


class MissingPair(SucilError, KeyError):
    pass


class SchemaMismatch(SucilError, ValueError):
    pass
