"""
Truncated multivariate Taylor arithmetic ("jets").

A :class:`Jet` holds, for every entry of a small dense array, the Taylor
coefficients of that entry in ``m`` perturbation variables up to a fixed
total order.  Coefficients are stored with the multi-index factorial
divided out, so the coefficient of ``t1**2 * t3`` is ``d^3 f / dt1^2 dt3 / 2``.

The coefficient axis is always the *last* axis of :attr:`Jet.coef`; the
leading axes are the array ("tensor") shape.  Arithmetic broadcasts over
the leading axes exactly like numpy.

Notes
-----
Every primitive is exact up to floating-point rounding: products use the
truncated Cauchy product and univariate functions use their Taylor series
around the base value, which terminates because the perturbation part of a
jet is nilpotent.
"""

from __future__ import annotations

import itertools
import math
from functools import lru_cache

import numpy as np

MAX_ORDER = 4


class SingularEvaluationError(ArithmeticError):
    """A primitive was evaluated where it is not smooth (x/0, sqrt(x<=0), ...)."""

    def __init__(self, primitive, detail=""):
        self.primitive = primitive
        msg = f"singular evaluation in {primitive}"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)


class JetSpace:
    """Index bookkeeping for jets in `nvars` variables truncated at `order`.

    Use :func:`jet_space` to obtain cached instances.
    """

    def __init__(self, nvars, order):
        if not 0 <= order <= MAX_ORDER:
            raise ValueError(f"jet order must be in 0..{MAX_ORDER}, got {order}")
        if nvars < 0:
            raise ValueError("nvars must be non-negative")
        self.nvars = nvars
        self.order = order

        multi = []
        for deg in range(order + 1):
            # lexical order inside a degree, first variable varies slowest
            for combo in itertools.combinations_with_replacement(range(nvars), deg):
                mi = [0] * nvars
                for v in combo:
                    mi[v] += 1
                multi.append(tuple(mi))
            if nvars == 0:
                break
        multi.sort(key=lambda mi: (sum(mi), [-e for e in mi]))
        self.multi = np.array(multi, dtype=int).reshape(len(multi), nvars)
        self.size = len(multi)
        self.index = {mi: k for k, mi in enumerate(multi)}
        self.degree = self.multi.sum(axis=1)
        self.factorial = np.array(
            [math.prod(math.factorial(e) for e in mi) for mi in multi], dtype=float)

        ii, jj, kk = [], [], []
        for i, a in enumerate(multi):
            for j, b in enumerate(multi):
                if self.degree[i] + self.degree[j] > order:
                    continue
                ii.append(i)
                jj.append(j)
                kk.append(self.index[tuple(x + y for x, y in zip(a, b))])
        self._ii = np.array(ii, dtype=int)
        self._jj = np.array(jj, dtype=int)
        scatter = np.zeros((len(kk), self.size))
        scatter[np.arange(len(kk)), kk] = 1.0
        self._scatter = scatter

        # d/dt_v: coefficient at beta receives (beta_v + 1) * c[beta + e_v]
        self._diff = []
        for v in range(nvars):
            src, dst, fac = [], [], []
            for k, mi in enumerate(multi):
                if mi[v] == 0:
                    continue
                lower = list(mi)
                lower[v] -= 1
                src.append(k)
                dst.append(self.index[tuple(lower)])
                fac.append(float(mi[v]))
            self._diff.append((np.array(src, dtype=int), np.array(dst, dtype=int),
                               np.array(fac)))

    def __repr__(self):
        return f"JetSpace(nvars={self.nvars}, order={self.order})"

    def product(self, a, b):
        """Truncated Cauchy product of two coefficient arrays (broadcasting)."""
        return (a[..., self._ii] * b[..., self._jj]) @ self._scatter

    def constant(self, value):
        value = np.asarray(value, dtype=float)
        coef = np.zeros(value.shape + (self.size,))
        coef[..., 0] = value
        return Jet(self, coef)

    def seed(self, x0, variables=None, directions=None):
        """Jet for ``x0 + sum_d t_d * directions[d]``.

        With `variables` given, the coordinate ``x0[i]`` is perturbed by the
        variable ``variables[i]`` (unit direction).  Otherwise `directions` is
        an ``(ndir, len(x0))`` array assigning one direction to each of the
        first ``ndir`` variables.
        """
        x0 = np.asarray(x0, dtype=float)
        coef = np.zeros(x0.shape + (self.size,))
        coef[..., 0] = x0
        if self.order == 0:
            return Jet(self, coef)
        if directions is not None:
            directions = np.atleast_2d(np.asarray(directions, dtype=float))
            if len(directions) > self.nvars:
                raise ValueError("more directions than jet variables")
            for d, vec in enumerate(directions):
                coef[..., self._first_order_slot(d)] += vec
        else:
            if variables is None:
                variables = range(x0.size)
            for i, v in enumerate(variables):
                if v is None:
                    continue
                coef[i, self._first_order_slot(v)] = 1.0
        return Jet(self, coef)

    def _first_order_slot(self, v):
        mi = [0] * self.nvars
        mi[v] = 1
        return self.index[tuple(mi)]


@lru_cache(maxsize=None)
def jet_space(nvars, order):
    return JetSpace(nvars, order)


def _as_array(x):
    return np.asarray(x, dtype=float)


class Jet:
    """Array of truncated Taylor expansions sharing one :class:`JetSpace`."""

    __array_ufunc__ = None  # make numpy defer to the reflected operators

    def __init__(self, space, coef):
        self.space = space
        self.coef = coef

    # ---- basic properties -------------------------------------------------
    @property
    def shape(self):
        return self.coef.shape[:-1]

    @property
    def ndim(self):
        return self.coef.ndim - 1

    @property
    def value(self):
        """Base value (zeroth-order coefficient)."""
        return self.coef[..., 0]

    def __len__(self):
        return self.shape[0]

    def __repr__(self):
        return f"Jet(shape={self.shape}, {self.space!r})"

    def __getitem__(self, idx):
        if not isinstance(idx, tuple):
            idx = (idx,)
        if Ellipsis not in idx:
            idx = idx + (Ellipsis,)
        return Jet(self.space, self.coef[idx + (slice(None),)])

    @property
    def T(self):
        axes = list(range(self.ndim))[::-1] + [self.ndim]
        return Jet(self.space, self.coef.transpose(axes))

    def transpose(self, *axes):
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = axes[0]
        return Jet(self.space, self.coef.transpose(list(axes) + [self.ndim]))

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = shape[0]
        return Jet(self.space, self.coef.reshape(tuple(shape) + (self.space.size,)))

    def sum(self, axis=None):
        if axis is None:
            return Jet(self.space, self.coef.reshape(-1, self.space.size).sum(axis=0))
        axis = axis % self.ndim if self.ndim else axis
        return Jet(self.space, self.coef.sum(axis=axis))

    def trace(self):
        return Jet(self.space, np.trace(self.coef, axis1=0, axis2=1))

    def copy(self):
        return Jet(self.space, self.coef.copy())

    # ---- coercion ---------------------------------------------------------
    def _lift(self, other):
        if isinstance(other, Jet):
            if other.space is not self.space:
                raise ValueError(f"jets live in different spaces: {self.space} vs {other.space}")
            return other
        return self.space.constant(other)

    # ---- arithmetic -------------------------------------------------------
    def __neg__(self):
        return Jet(self.space, -self.coef)

    def __pos__(self):
        return self

    def __add__(self, other):
        if isinstance(other, Jet):
            self._lift(other)
            return Jet(self.space, self.coef + other.coef)
        other = _as_array(other)
        shape = np.broadcast_shapes(self.shape, other.shape)
        coef = np.array(np.broadcast_to(self.coef, shape + (self.space.size,)))
        coef[..., 0] += other
        return Jet(self.space, coef)

    __radd__ = __add__

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Jet):
            self._lift(other)
            return Jet(self.space, self.space.product(self.coef, other.coef))
        other = _as_array(other)
        return Jet(self.space, self.coef * other[..., None])

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Jet):
            return self * other.reciprocal()
        other = _as_array(other)
        if np.any(other == 0):
            raise SingularEvaluationError("division", "divisor is zero")
        return Jet(self.space, self.coef / other[..., None])

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def __pow__(self, p):
        if isinstance(p, Jet):
            return exp(p * log(self))
        if p == 2:
            return self * self
        if p == 1:
            return self
        if float(p).is_integer() and p >= 0:
            out = self.space.constant(np.ones(self.shape))
            for _ in range(int(p)):
                out = out * self
            return out
        a0 = self.value
        if float(p).is_integer():
            if np.any(a0 == 0):
                raise SingularEvaluationError("power", f"negative exponent {p} at zero base")
        elif np.any(a0 <= 0):
            raise SingularEvaluationError("power", f"fractional exponent {p} at non-positive base")
        return _compose(self, _power_series(a0, p, self.space.order))

    def __matmul__(self, other):
        return matmul(self, other)

    def __rmatmul__(self, other):
        return matmul(other, self)

    def reciprocal(self):
        a0 = self.value
        if np.any(a0 == 0):
            raise SingularEvaluationError("division", "divisor is zero")
        return _compose(self, _power_series(a0, -1, self.space.order))

    # ---- calculus ---------------------------------------------------------
    def diff(self, var):
        """Derivative with respect to perturbation variable `var`.

        The result lives in the same space; its top-order coefficients are
        zero, i.e. it is exact only to order ``space.order - 1``.
        """
        src, dst, fac = self.space._diff[var]
        coef = np.zeros_like(self.coef)
        coef[..., dst] = self.coef[..., src] * fac
        return Jet(self.space, coef)

    def grad(self, variables):
        """Stack of derivatives along a new trailing array axis."""
        return stack([self.diff(v) for v in variables], axis=self.ndim)

    def partial(self, multi_index):
        """Partial derivative value for a multi-index over the jet variables."""
        mi = tuple(int(e) for e in multi_index)
        k = self.space.index[mi]
        return self.coef[..., k] * self.space.factorial[k]

    def restrict(self, variables, order=None):
        """Set every variable not in `variables` to zero.

        Returns a jet in the space of the kept variables (optionally with a
        lower truncation order).
        """
        variables = list(variables)
        order = self.space.order if order is None else order
        target = jet_space(len(variables), order)
        src = []
        for mi in target.multi:
            full = [0] * self.space.nvars
            for pos, v in enumerate(variables):
                full[v] = int(mi[pos])
            src.append(self.space.index[tuple(full)])
        return Jet(target, self.coef[..., src])


# ---- free functions -------------------------------------------------------

def _compose(a, series):
    """Evaluate ``sum_k series[k] * (a - a0)**k`` by Horner's rule."""
    h = Jet(a.space, a.coef.copy())
    h.coef[..., 0] = 0.0
    out = a.space.constant(series[-1])
    for c in series[-2::-1]:
        out = out * h + c
    return out


def _power_series(a0, p, order):
    series = []
    binom = 1.0
    for k in range(order + 1):
        series.append(binom * a0 ** (p - k))
        binom *= (p - k) / (k + 1)
    return series


def sqrt(x):
    if not isinstance(x, Jet):
        x = _as_array(x)
        if np.any(x < 0):
            raise SingularEvaluationError("sqrt", "negative argument")
        return np.sqrt(x)
    a0 = x.value
    if np.any(a0 <= 0):
        raise SingularEvaluationError("sqrt", "non-positive base value")
    return _compose(x, _power_series(a0, 0.5, x.space.order))


def exp(x):
    if not isinstance(x, Jet):
        return np.exp(x)
    e0 = np.exp(x.value)
    return _compose(x, [e0 / math.factorial(k) for k in range(x.space.order + 1)])


def log(x):
    if not isinstance(x, Jet):
        x = _as_array(x)
        if np.any(x <= 0):
            raise SingularEvaluationError("log", "non-positive argument")
        return np.log(x)
    a0 = x.value
    if np.any(a0 <= 0):
        raise SingularEvaluationError("log", "non-positive base value")
    series = [np.log(a0)]
    for k in range(1, x.space.order + 1):
        series.append((-1) ** (k + 1) / (k * a0 ** k))
    return _compose(x, series)


def sin(x):
    if not isinstance(x, Jet):
        return np.sin(x)
    s, c = np.sin(x.value), np.cos(x.value)
    cycle = [s, c, -s, -c]
    return _compose(x, [cycle[k % 4] / math.factorial(k) for k in range(x.space.order + 1)])


def cos(x):
    if not isinstance(x, Jet):
        return np.cos(x)
    s, c = np.sin(x.value), np.cos(x.value)
    cycle = [c, -s, -c, s]
    return _compose(x, [cycle[k % 4] / math.factorial(k) for k in range(x.space.order + 1)])


def _space_of(*operands):
    space = None
    for op in operands:
        if isinstance(op, Jet):
            if space is None:
                space = op.space
            elif op.space is not space:
                raise ValueError("jets live in different spaces")
    return space


def lift(x, space):
    """Coerce `x` to a jet in `space` (constants get zero perturbation)."""
    if isinstance(x, Jet):
        if x.space is not space:
            raise ValueError("jet belongs to another space")
        return x
    return space.constant(x)


def _einsum2(subscripts, a, b):
    ins, out = subscripts.split("->")
    sa, sb = ins.split(",")
    if isinstance(a, Jet) and isinstance(b, Jet):
        space = a.space
        pa = a.coef[..., space._ii]
        pb = b.coef[..., space._jj]
        prod = np.einsum(f"{sa}Z,{sb}Z->{out}Z", pa, pb)
        return Jet(space, prod @ space._scatter)
    if isinstance(a, Jet):
        return Jet(a.space, np.einsum(f"{sa}Z,{sb}->{out}Z", a.coef, _as_array(b)))
    if isinstance(b, Jet):
        return Jet(b.space, np.einsum(f"{sa},{sb}Z->{out}Z", _as_array(a), b.coef))
    return np.einsum(subscripts, a, b)


def einsum(subscripts, *operands):
    """Two-or-more operand einsum with explicit output (``'ij,j->i'``).

    Operands may be jets or plain arrays; they are contracted pairwise from
    left to right.
    """
    subscripts = subscripts.replace(" ", "")
    if "->" not in subscripts:
        raise ValueError("einsum subscripts must name the output explicitly")
    ins, out = subscripts.split("->")
    terms = ins.split(",")
    if len(terms) != len(operands):
        raise ValueError("subscripts do not match operand count")
    if len(operands) == 1:
        op = operands[0]
        if isinstance(op, Jet):
            return Jet(op.space, np.einsum(f"{terms[0]}Z->{out}Z", op.coef))
        return np.einsum(subscripts, op)
    acc, acc_sub = operands[0], terms[0]
    for k in range(1, len(operands)):
        rest = "".join(terms[k + 1:]) + out
        keep = "".join(dict.fromkeys(c for c in acc_sub + terms[k] if c in rest))
        target = out if k == len(operands) - 1 else keep
        acc = _einsum2(f"{acc_sub},{terms[k]}->{target}", acc, operands[k])
        acc_sub = target
    return acc


def matmul(a, b):
    na = a.ndim if isinstance(a, Jet) else np.ndim(a)
    nb = b.ndim if isinstance(b, Jet) else np.ndim(b)
    sub = {(2, 2): "ij,jk->ik", (2, 1): "ij,j->i", (1, 2): "i,ij->j", (1, 1): "i,i->"}
    if (na, nb) not in sub:
        raise ValueError(f"matmul supports 1-D/2-D operands, got {na}-D @ {nb}-D")
    return einsum(sub[(na, nb)], a, b)


def outer(a, b):
    return einsum("i,j->ij", a, b)


def stack(items, axis=0):
    space = _space_of(*items)
    if space is None:
        return np.stack([_as_array(x) for x in items], axis=axis)
    coefs = [lift(x, space).coef for x in items]
    return Jet(space, np.stack(coefs, axis=axis))


def inv(m):
    """Inverse of a square jet matrix by a terminating Neumann series."""
    if not isinstance(m, Jet):
        m = _as_array(m)
        try:
            return np.linalg.inv(m)
        except np.linalg.LinAlgError:
            raise SingularEvaluationError("matrix inverse", "singular matrix") from None
    m0 = m.value
    try:
        m0inv = np.linalg.inv(m0)
    except np.linalg.LinAlgError:
        raise SingularEvaluationError("matrix inverse", "singular matrix") from None
    if not np.all(np.isfinite(m0inv)):
        raise SingularEvaluationError("matrix inverse", "singular matrix")
    nil = m - m0
    step = -matmul(m0inv, nil)
    out = m.space.constant(m0inv)
    for _ in range(m.space.order):
        out = m0inv + matmul(step, out)
    return out


def value(x):
    """Base value of a jet, or the array itself."""
    return x.value if isinstance(x, Jet) else _as_array(x)


def jet_eval(f, x0, directions=None, order=2):
    """Taylor coefficients of a scalar field at `x0` along `directions`.

    Parameters
    ----------
    f : callable
        ``f(x)`` where ``x`` is a 1-D :class:`Jet`; must be written with jet
        compatible arithmetic (the functions of this module).
    x0 : array_like
        Base point (length ``m``).
    directions : array_like, optional
        ``(ndir, m)`` perturbation directions; defaults to the coordinate
        axes.  At most ``2 m`` directions are allowed.
    order : int
        Truncation order, ``1 <= order <= MAX_ORDER``.

    Returns
    -------
    Jet
        Jet in ``ndir`` variables; use :meth:`Jet.partial` to read mixed
        partial derivatives.
    """
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    if not 1 <= order <= MAX_ORDER:
        raise ValueError(f"order must be in 1..{MAX_ORDER}")
    if directions is None:
        directions = np.eye(x0.size)
    directions = np.atleast_2d(np.asarray(directions, dtype=float))
    if directions.shape[1] != x0.size:
        raise ValueError("direction length does not match x0")
    if len(directions) > 2 * x0.size:
        raise ValueError("at most 2*len(x0) simultaneous directions")
    space = jet_space(len(directions), order)
    out = f(space.seed(x0, directions=directions))
    return lift(out, space)
