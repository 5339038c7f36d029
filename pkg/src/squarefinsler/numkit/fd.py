"""Finite-difference partial derivatives (independent oracle for the jets)."""

from __future__ import annotations

import itertools

import numpy as np


class StencilFailure(ArithmeticError):
    """The function returned a non-finite value on the stencil."""


# central stencils: offsets (in units of h) and weights for derivative order d
_STENCILS = {
    0: ((0,), (1.0,)),
    1: ((-1, 1), (-0.5, 0.5)),
    2: ((-1, 0, 1), (1.0, -2.0, 1.0)),
    3: ((-2, -1, 1, 2), (-0.5, 1.0, -1.0, 0.5)),
}


def _power_of_two(h):
    return 2.0 ** np.round(np.log2(h))


def _product_stencil(f, x0, multi_index, h):
    axes = [i for i, e in enumerate(multi_index) if e]
    parts = [_STENCILS[multi_index[i]] for i in axes]
    total = 0.0
    for combo in itertools.product(*[list(zip(*p)) for p in parts]):
        x = x0.copy()
        w = 1.0
        for ax, (off, wt) in zip(axes, combo):
            x[ax] += off * h
            w *= wt
        fx = f(x)
        if not np.isfinite(fx):
            raise StencilFailure(f"non-finite value at {x}")
        total += w * fx
    return total / h ** sum(multi_index)


def fd_partial(f, x0, multi_index, scale=1.0):
    """Central-difference mixed partial with one Richardson step.

    Parameters
    ----------
    f : callable
        Scalar function of a 1-D float array.
    x0 : array_like
        Evaluation point.
    multi_index : sequence of int
        Derivative order per coordinate, total order 1..3.
    scale : float
        Characteristic length of `f` near `x0`; the step is
        ``scale * eps**(1/(order+2))`` rounded to a power of two.
    """
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    multi_index = tuple(int(e) for e in multi_index)
    if len(multi_index) != x0.size:
        raise ValueError("multi-index length does not match x0")
    order = sum(multi_index)
    if not 1 <= order <= 3 or max(multi_index) > 3:
        raise ValueError("finite differences support total order 1..3")
    h = _power_of_two(scale * np.finfo(float).eps ** (1.0 / (order + 2)))
    coarse = _product_stencil(f, x0, multi_index, h)
    fine = _product_stencil(f, x0, multi_index, h / 2)
    # every stencil above is second-order accurate
    return (4.0 * fine - coarse) / 3.0
