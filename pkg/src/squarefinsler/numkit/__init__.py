"""Dense small tensors, jet differentiation and a finite-difference oracle."""

from .fd import StencilFailure, fd_partial
from .jets import (
    MAX_ORDER,
    Jet,
    JetSpace,
    SingularEvaluationError,
    cos,
    einsum,
    exp,
    inv,
    jet_eval,
    jet_space,
    lift,
    log,
    matmul,
    outer,
    sin,
    sqrt,
    stack,
    value,
)
from .tensor import (
    ContractViolation,
    Tensor,
    antisymmetrize,
    lower_index,
    raise_index,
    symmetrize,
)

__all__ = [
    "MAX_ORDER", "Jet", "JetSpace", "SingularEvaluationError", "StencilFailure",
    "ContractViolation", "Tensor", "antisymmetrize", "cos", "einsum", "exp",
    "fd_partial", "inv", "jet_eval", "jet_space", "lift", "log", "lower_index",
    "matmul", "outer", "raise_index", "sin", "sqrt", "stack", "symmetrize", "value",
]
