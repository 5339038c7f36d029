"""
1-forms against a background Riemannian metric.

Covariant derivatives ``b_{i|j}``, their symmetric/antisymmetric split and
the derived scalars used by square-metric sprays, plus the closed conformal
1-forms of the space forms and the checks built on them.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import numkit as nk
from .errors import ContractViolation
from .numkit import jet_space
from .riemann import MetricField, chart_factor, christoffel_jet


@dataclass(frozen=True)
class FormField:
    """1-form ``b_i(x)``; `func` maps a 1-D jet ``x`` to a length-``dim`` jet."""

    dim: int
    func: Callable
    tag: str = "custom"
    params: dict = field(default_factory=dict)

    def jet(self, x):
        out = nk.lift(self.func(x), x.space)
        if out.shape != (self.dim,):
            raise ContractViolation(f"form returned shape {out.shape}")
        return out

    def taylor(self, x0, order=2):
        return self.jet(jet_space(self.dim, order).seed(x0))

    def value(self, x0):
        return self.taylor(x0, order=0).value


def zero_form(n):
    return FormField(n, lambda x: np.zeros(n), tag="zero")


def parallel_form(b):
    """Constant coefficients ``b_i`` (parallel for a Euclidean metric)."""
    b = np.array(b, dtype=float)
    return FormField(len(b), lambda x: b, tag="parallel", params={"b": b.tolist()})


def norm_sq(b, ainv):
    """``b^2 = a^{ij} b_i b_j`` (jets or arrays)."""
    return nk.einsum("i,ij,j->", b, ainv, b)


# ---- covariant derivative ---------------------------------------------------

def covariant_derivative_jet(b, gamma, xvars):
    """``b_{i|j} = d_j b_i - Gamma^k_ij b_k``; exact one order below `b`."""
    return b.grad(xvars) - nk.einsum("kij,k->ij", gamma, b)


def covariant_derivative(beta, g, x):
    """``b_{i|j}`` of `beta` with respect to `g` at `x` (``[i, j]`` array)."""
    space = jet_space(g.dim, 1)
    xj = space.seed(x)
    a = g.jet(xj)
    gamma = christoffel_jet(a, nk.inv(a), range(g.dim))
    return covariant_derivative_jet(beta.jet(xj), gamma, range(g.dim)).value


@dataclass(frozen=True)
class NablaBeta:
    """``b_{i|j}`` and every tensor/scalar derived from it at one (x, y).

    Index conventions: ``T_{i0} = T_ij y^j``, ``T_00 = T_ij y^i y^j``;
    indices are raised with ``a^{ij}``.
    """

    bij: np.ndarray
    r: np.ndarray
    s: np.ndarray
    r_up: np.ndarray  # r^i_j
    s_up: np.ndarray  # s^i_j
    q: np.ndarray
    t: np.ndarray
    r_vec: np.ndarray  # r_j = b^i r_ij
    s_vec: np.ndarray  # s_j = b^i s_ij
    q_vec: np.ndarray
    t_vec: np.ndarray
    r00: float
    s0: float
    s_up0: np.ndarray  # s^i_0


def rs_decompose(bij, a, b, y):
    """Populate :class:`NablaBeta` from ``b_{i|j}``, ``a_ij``, ``b_i`` and `y`."""
    bij = np.asarray(bij, dtype=float)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    y = np.asarray(y, dtype=float)
    ainv = np.linalg.inv(a)
    bup = ainv @ b
    r = 0.5 * (bij + bij.T)
    s = 0.5 * (bij - bij.T)
    r_up = ainv @ r
    s_up = ainv @ s
    q = r @ s_up
    t = s @ s_up
    s_vec = bup @ s
    return NablaBeta(
        bij=bij, r=r, s=s, r_up=r_up, s_up=s_up, q=q, t=t,
        r_vec=bup @ r, s_vec=s_vec, q_vec=bup @ q, t_vec=bup @ t,
        r00=float(y @ r @ y), s0=float(s_vec @ y), s_up0=s_up @ y,
    )


# ---- closed conformal forms on space forms ----------------------------------

def conformal_form_tensor(x, mu, k, a):
    p = chart_factor(x, mu)
    ax = nk.matmul(x, a)
    return ((k - mu * ax) * x + p * a) / p ** 1.5


def conformal_form(mu, k, a):
    """Closed conformal 1-form ``w_i`` of the space form ``h_mu``."""
    a = np.array(a, dtype=float)
    return FormField(len(a), lambda x: conformal_form_tensor(x, mu, k, a),
                     tag="conformal", params={"mu": mu, "k": k, "a": a.tolist()})


def conformal_form_upper(x, mu, k, a):
    """Contravariant form ``w^i = sqrt(1 + mu|x|^2) (k x^i + a^i)``."""
    x = np.asarray(x, dtype=float)
    return np.sqrt(1.0 + mu * (x @ x)) * (k * x + np.asarray(a, dtype=float))


def conformal_norm_sq(x, mu, k, a):
    """Closed form of ``||omega||_h^2`` for :func:`conformal_form`."""
    x = np.asarray(x, dtype=float)
    a = np.asarray(a, dtype=float)
    ax = a @ x
    return a @ a + (k * k * (x @ x) + 2 * k * ax - mu * ax * ax) / (1.0 + mu * (x @ x))


def conformal_c(x, mu, k, a):
    """Closed form of the conformal factor ``c`` with ``w_{i|j} = -2c h_ij``."""
    x = np.asarray(x, dtype=float)
    return (-k + mu * (np.asarray(a, dtype=float) @ x)) / (2.0 * np.sqrt(1.0 + mu * (x @ x)))


def conformal_c_jet(omega, h, x, xvars):
    """``c = -tr(h^{ij} w_{i|j}) / (2n)`` as a jet (two orders below the seed)."""
    hm = h.jet(x)
    hinv = nk.inv(hm)
    gamma = christoffel_jet(hm, hinv, xvars)
    wij = covariant_derivative_jet(omega.jet(x), gamma, xvars)
    return -nk.einsum("ij,ij->", hinv, wij) / (2.0 * h.dim), hm, hinv, gamma, wij


@dataclass(frozen=True)
class ConformalCheck:
    c: np.ndarray
    residual: float
    closedness: float
    per_sample: np.ndarray


def check_closed_conformal(omega, h, samples):
    """Check ``w_{i|j} = -2 c h_ij`` at sample points.

    ``c`` is read off the trace at each point; `residual` is the worst
    ``|w_{i|j} + 2c h_ij| / max(|w_{i|j}|, 1)`` and `closedness` the worst
    norm of the antisymmetric part.
    """
    samples = [np.asarray(x, dtype=float) for x in samples]
    if not samples:
        raise ContractViolation("need sample points")
    n = h.dim
    cs, res, closed = [], [], []
    for x in samples:
        wij = covariant_derivative(omega, h, x)
        hm = h.value(x)
        c = -np.trace(np.linalg.solve(hm, wij)) / (2 * n)
        cs.append(c)
        res.append(np.linalg.norm(wij + 2 * c * hm) / max(np.linalg.norm(wij), 1.0))
        closed.append(np.linalg.norm(0.5 * (wij - wij.T)))
    res = np.array(res)
    return ConformalCheck(np.array(cs), float(res.max()), float(max(closed)), res)


@dataclass(frozen=True)
class ConformalFactorData:
    """Second-order data of the conformal factor ``c`` at one point."""

    c: float
    grad_c: np.ndarray  # c_i
    grad_norm_sq: float  # h^{ij} c_i c_j
    f: float  # |grad c|^2 + mu c^2
    hessian_residual: float  # |c_{i|j} + mu c h_ij| / max(|c_{i|j}|, 1)
    laplacian_residual: float  # |Delta c + n mu c| / max(|Delta c|, 1)

    @property
    def delta(self):
        return float(np.sqrt(max(self.f, 0.0)))


def conformal_factor_data(omega, h, mu, x):
    """``c``, ``grad c`` and the second-order identities at `x`."""
    n = h.dim
    space = jet_space(n, 3)
    xj = space.seed(x)
    xv = range(n)
    c, hm, hinv, gamma, _ = conformal_c_jet(omega, h, xj, xv)
    ci = c.grad(xv)
    cij = covariant_derivative_jet(ci, gamma, xv).value
    cv, civ = float(c.value), ci.value
    hv, hinvv = hm.value, hinv.value
    grad_sq = float(civ @ hinvv @ civ)
    lap = float(np.einsum("ij,ij->", hinvv, cij))
    return ConformalFactorData(
        c=cv, grad_c=civ, grad_norm_sq=grad_sq, f=grad_sq + mu * cv * cv,
        hessian_residual=float(np.linalg.norm(cij + mu * cv * hv) / max(np.linalg.norm(cij), 1.0)),
        laplacian_residual=abs(lap + n * mu * cv) / max(abs(lap), 1.0),
    )
