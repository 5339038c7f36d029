"""Exception types shared across the package."""

from .numkit.fd import StencilFailure
from .numkit.jets import SingularEvaluationError
from .numkit.tensor import ContractViolation


class DegenerateMetricError(ArithmeticError):
    """A metric (or fundamental tensor) is not invertible / not positive definite."""


class OutsideChartError(ValueError):
    """A point lies outside the coordinate chart of a field."""


class OutsideRegularConeError(ValueError):
    """(x, y) violates one of the square-metric regularity guards."""

    def __init__(self, guard, detail=""):
        self.guard = guard
        msg = f"outside regular cone: guard '{guard}' violated"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


class DeformationDomainError(ValueError):
    """The deformation needs ||beta||_alpha < 1."""


class FamilyInadmissibleError(RuntimeError):
    """Sampling could not find admissible points for a family."""


__all__ = [
    "ContractViolation", "DegenerateMetricError", "DeformationDomainError",
    "FamilyInadmissibleError", "OutsideChartError", "OutsideRegularConeError",
    "SingularEvaluationError", "StencilFailure",
]
