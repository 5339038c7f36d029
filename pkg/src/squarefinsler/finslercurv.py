"""
Square metrics ``F = (alpha + beta)^2 / alpha`` and their curvature.

Two independent spray routes are provided: :func:`spray_generic` builds the
spray from the second derivatives of ``F^2`` and the fundamental tensor,
:func:`spray_closed_form` uses the square-metric formula in terms of
``r_ij`` and ``s_ij``.  Curvature (Riemann, Weyl, Douglas) is computed by
jet-differentiating the closed-form spray.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import numkit as nk
from .betaform import FormField, covariant_derivative_jet, norm_sq
from .errors import ContractViolation, DegenerateMetricError, OutsideRegularConeError
from .numkit import jet_space
from .riemann import MetricField, christoffel_jet, curvature_from_spray, local_jets


@dataclass(frozen=True)
class SquareMetricModel:
    """``F = (alpha + beta)^2 / alpha`` with regularity guards.

    ``eps_s`` keeps ``|1 - s|`` and ``1 + 2b^2 - 3s^2`` away from zero and
    ``eps_F`` bounds ``1 + s`` from below, where ``s = beta / alpha``.
    """

    alpha: MetricField
    beta: FormField
    eps_s: float = 0.05
    eps_F: float = 0.05
    tag: str = "custom"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.alpha.dim != self.beta.dim:
            raise ContractViolation("alpha and beta dimensions differ")

    @property
    def dim(self):
        return self.alpha.dim

    def with_beta(self, beta, tag=None):
        return SquareMetricModel(self.alpha, beta, self.eps_s, self.eps_F,
                                 tag=tag or self.tag, params=dict(self.params))


@dataclass(frozen=True)
class CurvatureBundle:
    """Everything computed at one (x, y)."""

    x: np.ndarray
    y: np.ndarray
    F: float
    g: np.ndarray
    spray: np.ndarray
    spray_generic: np.ndarray
    riemann: np.ndarray
    ricci: float
    R: float
    A: np.ndarray
    weyl: np.ndarray | None
    douglas: np.ndarray
    K: float
    residuals: dict


# ---- pointwise quantities -------------------------------------------------

def _local(F, x):
    """Field jets at a seeded point ``x`` (any jet space)."""
    xv = [v for v in range(x.space.nvars)][: F.dim]
    a = F.alpha.jet(x)
    ainv = nk.inv(a)
    b = F.beta.jet(x)
    gamma = christoffel_jet(a, ainv, xv)
    return {
        "a": a, "ainv": ainv, "b": b, "bup": nk.matmul(ainv, b), "b2": norm_sq(b, ainv),
        "gamma": gamma, "bij": covariant_derivative_jet(b, gamma, xv),
    }


def _point_constants(F, x0):
    """Values of the field quantities at `x0` (first x-derivatives included)."""
    space = jet_space(F.dim, 1)
    q = _local(F, space.seed(x0))
    return {key: val.value for key, val in q.items()}


def _alpha_beta(q, y):
    alpha = nk.sqrt(nk.einsum("ij,i,j->", q["a"], y, y))
    beta = nk.einsum("i,i->", q["b"], y)
    return alpha, beta


def check_guards(F, x, y):
    """Raise :class:`OutsideRegularConeError` if (x, y) violates a guard."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if not np.any(y):
        raise ContractViolation("y must be non-zero")
    a = F.alpha.value(x)
    b = F.beta.value(x)
    b2 = float(b @ np.linalg.solve(a, b))
    if b2 >= 1.0:
        raise OutsideRegularConeError("b2<1", f"b^2={b2:.6g}")
    s = float(b @ y) / np.sqrt(y @ a @ y)
    if abs(1.0 - s) <= F.eps_s:
        raise OutsideRegularConeError("|1-s|>eps_s", f"s={s:.6g}")
    if 1.0 + 2.0 * b2 - 3.0 * s * s <= F.eps_s:
        raise OutsideRegularConeError("1+2b^2-3s^2>eps_s", f"s={s:.6g}, b^2={b2:.6g}")
    if 1.0 + s <= F.eps_F:
        raise OutsideRegularConeError("1+s>eps_F", f"s={s:.6g}")
    return b2, s


def _square(alpha, beta):
    return (alpha + beta) ** 2 / alpha


def evaluate(F, x, y):
    """``F(x, y)`` and the fundamental tensor ``g_ij = 1/2 [F^2]_{y^i y^j}``."""
    check_guards(F, x, y)
    n = F.dim
    space = jet_space(n, 2)
    yj = space.seed(y)
    q = _point_constants(F, x)
    alpha, beta = _alpha_beta(q, yj)
    f2 = _square(alpha, beta) ** 2
    g = np.array([[0.5 * f2.diff(i).diff(j).value for j in range(n)] for i in range(n)])
    return float(np.sqrt(f2.value)), g


# ---- sprays -----------------------------------------------------------------

def spray_generic(F, x, y):
    """``G^i = 1/4 g^{il} ([F^2]_{x^k y^l} y^k - [F^2]_{x^l})``."""
    check_guards(F, x, y)
    n = F.dim
    xj, yj, xv, yv = local_jets(n, x, y, 2)
    q = _local(F, xj)
    alpha, beta = _alpha_beta(q, yj)
    f2 = _square(alpha, beta) ** 2
    g = 0.5 * f2.grad(yv).grad(yv).value
    f2xy = f2.grad(xv).grad(yv).value  # [k, l]
    f2x = f2.grad(xv).value
    try:
        np.linalg.cholesky(g)
    except np.linalg.LinAlgError:
        raise DegenerateMetricError("degenerate fundamental tensor") from None
    y = np.asarray(y, dtype=float)
    return 0.25 * np.linalg.solve(g, y @ f2xy - f2x)


def _closed_spray(q, y):
    """Square-metric spray from field quantities `q` (jets or arrays)."""
    alpha, beta = _alpha_beta(q, y)
    s = beta / alpha
    bij = q["bij"]
    r = 0.5 * (bij + bij.T)
    sk = 0.5 * (bij - bij.T)
    r00 = nk.einsum("ij,i,j->", r, y, y)
    s_i0 = nk.einsum("ij,j->i", sk, y)
    s_up0 = nk.matmul(q["ainv"], s_i0)
    s0 = nk.einsum("i,i->", q["bup"], s_i0)
    g_alpha = 0.5 * nk.einsum("ijk,j,k->i", q["gamma"], y, y)
    Q = 2.0 / (1.0 - s)
    big = (1.0 + 2.0 * q["b2"] - 3.0 * s * s)
    coeff = ((1.0 - 2.0 * s) / alpha * y + q["bup"]) / big
    return g_alpha + Q * alpha * s_up0 + coeff * (r00 - 2.0 * alpha * Q * s0)


def spray_closed_form(F, x, y):
    """Square-metric spray with ``Q = 2 / (1 - s)``."""
    check_guards(F, x, y)
    q = _point_constants(F, x)
    return np.asarray(nk.value(_closed_spray(q, np.asarray(y, dtype=float))), dtype=float)


def _spray_jet(F, x, y, order):
    """Closed-form spray as a jet in (x, y); exact for x-order <= order - 1."""
    xj, yj, xv, yv = local_jets(F.dim, x, y, order)
    return _closed_spray(_local(F, xj), yj), yj, xv, yv


# ---- curvature --------------------------------------------------------------

def _riemann_jet(F, x, y):
    G, yj, xv, yv = _spray_jet(F, x, y, 3)
    return curvature_from_spray(G, yj, xv, yv), G, yv


def riemann_curvature(F, x, y):
    """Riemann curvature ``R^i_k`` of `F` at (x, y)."""
    check_guards(F, x, y)
    return _riemann_jet(F, x, y)[0].value


def _weyl_from(Rj, yv, y):
    n = len(y)
    R = Rj.value
    ric = np.trace(R)
    Rs = ric / (n - 1)
    A = R - Rs * np.eye(n)
    # d(A^m_k)/dy^m, with A = R - (tr R / (n-1)) delta
    dR = np.stack([Rj.diff(v).value for v in yv], axis=0)  # dR[m, i, k]
    dtr = np.einsum("mii->m", dR)
    divA = np.einsum("mmk->k", dR) - dtr / (n - 1)
    W = A - np.outer(y, divA) / (n + 1)
    return W, A, ric, Rs


def weyl(F, x, y):
    """Weyl curvature ``W^i_k``; requires ``n >= 3``."""
    if F.dim < 3:
        raise ContractViolation("the Weyl curvature is defined here for n >= 3")
    check_guards(F, x, y)
    Rj, _, yv = _riemann_jet(F, x, y)
    return _weyl_from(Rj, yv, np.asarray(y, dtype=float))[0]


def douglas(F, x, y):
    """Douglas curvature ``D[h, i, j, k] = D_h^i_jk`` at (x, y).

    Needs fourth y-derivatives of the spray (through ``G^m_m y^i``), so the
    spray is expanded in y alone at order 4.
    """
    check_guards(F, x, y)
    n = F.dim
    q = _point_constants(F, x)
    space = jet_space(n, 4)
    yj = space.seed(y)
    G = _closed_spray(q, yj)
    trace = sum(G[m].diff(m) for m in range(n))
    P = G - trace * yj / (n + 1)
    d3 = np.zeros((n, n, n, n))
    for h in range(n):
        ph = P.diff(h)
        for j in range(n):
            phj = ph.diff(j)
            for k in range(n):
                d3[h, :, j, k] = phj.diff(k).value
    return d3


def flag_curvature_extract(F, x, y, R=None):
    """``K = Ric / ((n-1) F^2)`` and the scalar-flag residual.

    The residual is ``|R - K (F^2 delta - y^i y_k)| / max(|R|, F^2)`` with
    ``y_k = g_km y^m``.
    """
    n = F.dim
    y = np.asarray(y, dtype=float)
    Fv, g = evaluate(F, x, y)
    if R is None:
        R = riemann_curvature(F, x, y)
    K = float(np.trace(R) / ((n - 1) * Fv * Fv))
    shape = Fv * Fv * np.eye(n) - np.outer(y, g @ y)
    res = np.linalg.norm(R - K * shape) / max(np.linalg.norm(R), Fv * Fv)
    return K, float(res)


def projective_flatness_residual(F, x, y, G=None):
    """``max_{i<j} |G^i y^j - G^j y^i| / max(|G| |y|, 1)``."""
    y = np.asarray(y, dtype=float)
    if G is None:
        G = spray_closed_form(F, x, y)
    cross = np.abs(np.outer(G, y) - np.outer(y, G))
    return float(cross.max() / max(np.linalg.norm(G) * np.linalg.norm(y), 1.0))


def _relative(a, b, floor):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    den = max(np.linalg.norm(a), np.linalg.norm(b), floor)
    return float(np.linalg.norm(a - b) / den)


def curvature_bundle(F, x, y, with_douglas=True):
    """Compute the full curvature stack of `F` at (x, y)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = F.dim
    Fv, g = evaluate(F, x, y)
    Rj, Gj, yv = _riemann_jet(F, x, y)
    R = Rj.value
    G = Gj.value
    Gg = spray_generic(F, x, y)
    if n >= 3:
        W, A, ric, Rs = _weyl_from(Rj, yv, y)
        weyl_res = float(np.linalg.norm(W) / max(np.linalg.norm(R), 1.0))
    else:
        W = None
        ric = float(np.trace(R))
        Rs = ric / (n - 1)
        A = R - Rs * np.eye(n)
        weyl_res = float("nan")
    D = douglas(F, x, y) if with_douglas else np.zeros((n, n, n, n))
    K, flag_res = flag_curvature_extract(F, x, y, R=R)
    residuals = {
        "spray_match": _relative(G, Gg, 1e-12 * Fv * Fv),
        "weyl": weyl_res,
        "douglas": float(np.linalg.norm(D)),
        "scalar_flag": flag_res,
        "proj_flat": projective_flatness_residual(F, x, y, G=G),
        "null_direction": float(np.linalg.norm(R @ y) / max(np.linalg.norm(R) * np.linalg.norm(y), Fv * Fv)),
    }
    return CurvatureBundle(x=x, y=y, F=Fv, g=g, spray=G, spray_generic=Gg, riemann=R,
                           ricci=float(ric), R=float(Rs), A=A, weyl=W, douglas=D, K=K,
                           residuals=residuals)
