"""Exception types shared across the package."""


class ContractViolationError(ValueError):
    """An input violates a documented precondition (e.g. asymmetric matrix)."""


class EmptyBasisError(ValueError):
    """All candidate vectors were numerically zero or dependent."""


class SingularSystemError(RuntimeError):
    """A linear system was singular beyond the regularization threshold.

    Carries a condition-number estimate in ``condition``.
    """

    def __init__(self, message, condition=None):
        super().__init__(message)
        self.condition = condition


class ModelConstructionError(RuntimeError):
    """Interpolation model could not be built from the given points.

    ``offenders`` lists indices of the points implicated in the failure.
    """

    def __init__(self, message, offenders=None, condition=None):
        super().__init__(message)
        self.offenders = list(offenders) if offenders is not None else []
        self.condition = condition


class DegenerateGeometryError(RuntimeError):
    """Interpolation set is affinely dependent; Lagrange basis does not exist."""


class CatalogError(KeyError):
    """Requested test problem is not in the catalog."""


class UnsupportedDiagnosticError(RuntimeError):
    """A diagnostic needs a derivative oracle the problem does not provide."""
