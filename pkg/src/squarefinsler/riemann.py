"""
Riemannian metrics given in a chart.

A :class:`MetricField` wraps a function ``x -> a_ij(x)`` written with jet
arithmetic, so the same code yields values and exact x-derivatives.
Curvature is computed from the geodesic spray with the same formula used
for Finsler metrics, see :func:`curvature_from_spray`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import numkit as nk
from .errors import ContractViolation, DegenerateMetricError, OutsideChartError
from .numkit import Jet, jet_space


@dataclass(frozen=True)
class MetricField:
    """Riemannian metric ``a_ij(x)`` on a chart of ``R^dim``.

    Parameters
    ----------
    dim : int
        Manifold dimension.
    func : callable
        ``func(x)`` with ``x`` a 1-D :class:`~squarefinsler.numkit.Jet`,
        returning the ``(dim, dim)`` matrix as a jet or plain array.
    tag : str
        One of ``euclidean``, ``space-form``, ``conformal-poly``, ``custom``
        (or any derived label).
    r_max : float
        Radius of the coordinate ball on which the field is meant to be used.
    params : dict
        Free-form description of the construction.
    """

    dim: int
    func: Callable
    tag: str = "custom"
    r_max: float = 1.0
    params: dict = field(default_factory=dict)

    def jet(self, x):
        out = nk.lift(self.func(x), x.space)
        if out.shape != (self.dim, self.dim):
            raise ContractViolation(f"metric returned shape {out.shape}")
        return out

    def taylor(self, x0, order=2):
        """Jet of ``a_ij`` at `x0` in the ``dim`` coordinate directions."""
        space = jet_space(self.dim, order)
        return self.jet(space.seed(x0))

    def value(self, x0):
        return self.taylor(x0, order=0).value

    def check_positive(self, x0):
        a = self.value(x0)
        if not np.allclose(a, a.T, rtol=1e-12, atol=1e-14):
            raise DegenerateMetricError("metric is not symmetric")
        try:
            np.linalg.cholesky(a)
        except np.linalg.LinAlgError:
            raise DegenerateMetricError("metric is not positive definite") from None
        return a


@dataclass(frozen=True)
class SpaceFormParams:
    """Curvature and admissible chart radius of the space form ``h_mu``."""

    mu: float
    r_max: float = None

    def __post_init__(self):
        limit = admissible_radius(self.mu)
        if self.r_max is None:
            object.__setattr__(self, "r_max", limit)
        elif self.r_max <= 0 or (self.mu < 0 and self.r_max >= limit):
            raise ContractViolation(f"r_max={self.r_max} inconsistent with mu={self.mu}")


def admissible_radius(mu, default=1.0):
    """Chart radius on which ``1 + mu |x|^2 > 0`` (``default`` if unbounded)."""
    return 1.0 / np.sqrt(-mu) if mu < 0 else default


def chart_factor(x, mu):
    """``1 + mu |x|^2``, raising if it is not positive."""
    p = 1.0 + mu * nk.matmul(x, x)
    if np.any(nk.value(p) <= 0):
        raise OutsideChartError(f"1 + mu|x|^2 <= 0 (mu={mu})")
    return p


def euclidean(n):
    return MetricField(n, lambda x: np.eye(n), tag="euclidean", r_max=1.0)


def space_form_tensor(x, mu):
    """``h_ij(x)`` of the projectively flat space form of curvature `mu`."""
    n = x.shape[0]
    p = chart_factor(x, mu)
    return np.eye(n) / p - mu * nk.outer(x, x) / (p * p)


def space_form(mu, n=3, r_max=None):
    """Space form ``h_mu`` in its Beltrami (projectively flat) chart."""
    params = SpaceFormParams(float(mu), r_max)
    tag = "euclidean" if mu == 0 else "space-form"
    return MetricField(n, lambda x: space_form_tensor(x, params.mu), tag=tag,
                       r_max=params.r_max, params={"mu": params.mu})


def space_form_norm(x, y, mu):
    """Closed form ``h_mu(x, y)`` (plain floats)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    p = 1.0 + mu * (x @ x)
    if p <= 0:
        raise OutsideChartError(f"1 + mu|x|^2 <= 0 (mu={mu})")
    return np.sqrt(p * (y @ y) - mu * (x @ y) ** 2) / p


def conformal_metric(phi, n, tag="conformal-poly", r_max=1.0):
    """``a_ij = exp(2 phi(x)) delta_ij`` for a jet-compatible scalar `phi`."""
    return MetricField(n, lambda x: np.eye(n) * nk.exp(2.0 * phi(x)), tag=tag, r_max=r_max)


# ---- connection and spray -------------------------------------------------

def christoffel_jet(a, ainv, xvars):
    """``Gamma^i_jk`` from a metric jet; exact one order below `a`."""
    da = a.grad(xvars)  # da[i, j, k] = d_k a_ij
    lower = 0.5 * (da.transpose(0, 2, 1) + da - da.transpose(2, 0, 1))
    return nk.einsum("il,ljk->ijk", ainv, lower)


def christoffel(g, x):
    """Levi-Civita symbols ``Gamma[i, j, k] = Gamma^i_jk`` at `x`."""
    a = g.taylor(x, order=1)
    try:
        ainv = np.linalg.inv(a.value)
    except np.linalg.LinAlgError:
        raise DegenerateMetricError("degenerate metric") from None
    gamma = christoffel_jet(a, ainv, range(g.dim)).value
    return 0.5 * (gamma + gamma.transpose(0, 2, 1))


def _require_nonzero(y):
    if not np.any(np.asarray(y, dtype=float)):
        raise ContractViolation("y must be non-zero")


def spray_riemann(g, x, y):
    """``G^i = 1/2 Gamma^i_jk y^j y^k``."""
    _require_nonzero(y)
    y = np.asarray(y, dtype=float)
    return 0.5 * np.einsum("ijk,j,k->i", christoffel(g, x), y, y)


def curvature_from_spray(G, y, xvars, yvars):
    """Riemann curvature ``R^i_k`` from a spray jet.

    ``R = 2 dG/dx^k - y^j d2G/dx^j dy^k + 2 G^j d2G/dy^j dy^k
    - dG^i/dy^j dG^j/dy^k``.  The result is exact two orders below `G`.
    """
    dgx = G.grad(xvars)
    dgy = G.grad(yvars)
    dgxy = dgx.grad(yvars)
    dgyy = dgy.grad(yvars)
    return (2.0 * dgx - nk.einsum("j,ijk->ik", y, dgxy)
            + 2.0 * nk.einsum("j,ijk->ik", G, dgyy)
            - nk.einsum("ij,jk->ik", dgy, dgy))


def local_jets(n, x0, y0, order):
    """Seed x in variables ``0..n-1`` and y in ``n..2n-1`` of one jet space."""
    space = jet_space(2 * n, order)
    x = space.seed(x0, variables=range(n))
    y = space.seed(y0, variables=range(n, 2 * n))
    return x, y, list(range(n)), list(range(n, 2 * n))


def riemann_curvature_alpha(g, x, y):
    """Riemann curvature ``R^i_k`` of the Riemannian metric `g` at (x, y)."""
    _require_nonzero(y)
    n = g.dim
    xj, yj, xv, yv = local_jets(n, x, y, 2)
    a = g.jet(xj)
    gamma = christoffel_jet(a, nk.inv(a), xv)
    G = 0.5 * nk.einsum("ijk,j,k->i", gamma, yj, yj)
    return curvature_from_spray(G, yj, xv, yv).value


def constant_curvature_shape(a, y):
    """``alpha^2 delta^i_k - y^i ybar_k`` with ``ybar = a y``."""
    y = np.asarray(y, dtype=float)
    ybar = a @ y
    return (y @ ybar) * np.eye(len(y)) - np.outer(y, ybar)


@dataclass(frozen=True)
class ConstancyFit:
    mu: float
    residual: float
    per_sample: np.ndarray


def sectional_constancy_residual(g, samples):
    """Fit ``R^i_k ~ mu (alpha^2 delta - y ybar)`` over `samples` of (x, y).

    Returns ``(mu_hat, residual)`` packed in a :class:`ConstancyFit`; the
    residual is the worst per-sample ``|R - mu T| / max(|R|, alpha^2)``.
    """
    samples = list(samples)
    if not samples:
        raise ContractViolation("need at least one (x, y) sample")
    rs, ts, scales = [], [], []
    for x, y in samples:
        rs.append(riemann_curvature_alpha(g, x, y))
        a = g.value(x)
        ts.append(constant_curvature_shape(a, y))
        y = np.asarray(y, dtype=float)
        scales.append(y @ a @ y)
    R = np.array(rs)
    T = np.array(ts)
    mu = float(np.sum(R * T) / np.sum(T * T))
    err = np.linalg.norm((R - mu * T).reshape(len(R), -1), axis=1)
    den = np.maximum(np.linalg.norm(R.reshape(len(R), -1), axis=1), scales)
    per = err / den
    return ConstancyFit(mu, float(per.max()), per)


# ---- sampling ---------------------------------------------------------------

def sample_ball(rng, n, radius):
    v = rng.standard_normal(n)
    v /= np.linalg.norm(v)
    return v * radius * rng.random() ** (1.0 / n)


def sample_sphere(rng, n):
    v = rng.standard_normal(n)
    return v / np.linalg.norm(v)
