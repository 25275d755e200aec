"""Exception hierarchy shared by all curvedfem modules."""


class CurvedFEMError(Exception):
    """Base class for every error raised by this package."""


class OutsideTubularNeighborhood(CurvedFEMError):
    """A point lies too far from the boundary for the projection to be unique."""


class NonConvergence(CurvedFEMError):
    """An iterative closest-point search failed to converge."""


class UnsupportedDegree(CurvedFEMError):
    pass


class UnsupportedOrder(CurvedFEMError):
    pass


class DegenerateElement(CurvedFEMError):
    """Non-positive Jacobian determinant of a geometric map."""


class DegenerateLift(CurvedFEMError):
    pass


class DegenerateFace(CurvedFEMError):
    pass


class InvalidMesh(CurvedFEMError):
    """A mesh violates a structural invariant (watertightness, boundary layout)."""


class NewtonDivergence(CurvedFEMError):
    pass


class OutsideElement(CurvedFEMError):
    pass


class QuadratureOrderTooLow(CurvedFEMError):
    pass


class MaxIterations(CurvedFEMError):
    pass


class IndefiniteBreakdown(CurvedFEMError):
    """CG met a search direction with p^T A p <= 0: the matrix is not SPD."""


class ZeroError(CurvedFEMError):
    """An error value too small for a meaningful convergence-order estimate."""


class StudyAborted(CurvedFEMError):
    """A convergence study failed part way; carries the completed levels.

    Attributes
    ----------
    stage : str
        Pipeline stage that failed (mesh, elevate, assemble, solve, errors).
    report : StudyReport or None
        Report holding the levels completed before the failure.
    """

    def __init__(self, message, stage, report=None):
        super().__init__(message)
        self.stage = stage
        self.report = report
