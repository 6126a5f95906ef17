"""Exception hierarchy shared by all modules."""


class KLShellError(Exception):
    """Base class for library errors."""


class ConstructionError(KLShellError, ValueError):
    """Invalid arguments when building a spline, material or model object."""


class DomainError(KLShellError, ValueError):
    """Evaluation point outside the parametric domain."""


class UnsupportedDegreeError(ConstructionError):
    pass


class DegenerateGeometryError(KLShellError):
    """Vanishing Jacobian or tangent."""


class TrimmingError(KLShellError):
    """Trim configuration the reparametrization cannot handle."""


class AssemblyError(KLShellError):
    pass


class SolverError(KLShellError):
    pass


class SingularDofError(SolverError):
    def __init__(self, dof: int):
        super().__init__(f"zero diagonal entry at dof {dof}")
        self.dof = dof


class IndefiniteSystemError(SolverError):
    pass


class WatertightnessError(KLShellError):
    pass


class FormatError(KLShellError, ValueError):
    """Unreadable or unsupported file content."""
