"""Exception hierarchy shared by all modules."""


class ConvexPosError(Exception):
    """Base class for every error raised by this package."""

    exit_code = 2


class PolygonError(ConvexPosError, ValueError):
    """Invalid polygon input."""


class TooFewVertices(PolygonError):
    pass


class DuplicateVertex(PolygonError):
    pass


class CollinearVertices(PolygonError):
    pass


class NonConvex(PolygonError):
    pass


class SingularMap(ConvexPosError, ValueError):
    pass


class NoConvergence(ConvexPosError, ArithmeticError):
    exit_code = 3


class SingularMatrix(ConvexPosError, ArithmeticError):
    exit_code = 3


class UnboundedCandidate(ConvexPosError, ValueError):
    pass


class NoValidSubset(ConvexPosError, ValueError):
    pass


class TooLarge(ConvexPosError, ValueError):
    """A cost guard (number of sides, number of points) was exceeded."""

    exit_code = 4


class InvalidSizeVector(ConvexPosError, ValueError):
    pass


class EmptyInput(ConvexPosError, ValueError):
    pass


class PointOutsidePolygon(ConvexPosError, ValueError):
    def __init__(self, index: int, point=None):
        self.index = index
        self.point = point
        msg = f"point {index} lies outside the polygon"
        if point is not None:
            msg += f": ({float(point[0])!r}, {float(point[1])!r})"
        super().__init__(msg)
