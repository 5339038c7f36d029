"""
Square metrics of scalar flag curvature: structure checks and model families.

The scalar functions ``tau, lambda, eta, u`` of the characterization are
always *fitted* from (alpha, beta); closed forms for the model families
are exposed separately so they can be tested against the fits.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import numkit as nk
from .betaform import (
    FormField,
    conformal_c,
    conformal_form,
    conformal_norm_sq,
    covariant_derivative_jet,
    norm_sq,
)
from .errors import ContractViolation, DeformationDomainError, OutsideChartError
from .finslercurv import SquareMetricModel
from .numkit import jet_space
from .riemann import (
    MetricField,
    admissible_radius,
    chart_factor,
    christoffel_jet,
    riemann_curvature_alpha,
    space_form,
    space_form_tensor,
)

# ---- family parameters --------------------------------------------------------


@dataclass(frozen=True)
class FamilyParams:
    """Constants ``(mu, k, a)`` of the local scalar-flag-curvature family."""

    mu: float
    k: float
    a: tuple

    def __post_init__(self):
        object.__setattr__(self, "a", tuple(float(v) for v in self.a))

    @property
    def avec(self):
        return np.array(self.a)

    @property
    def n(self):
        return len(self.a)

    def sigma_sq(self, x):
        """``sigma^2(x)``; works on jets and arrays."""
        mu, k, a = self.mu, self.k, self.avec
        ax = nk.matmul(x, a)
        return ((k * k + (1 + a @ a) * mu) * nk.matmul(x, x)
                + (2 * k - mu * ax) * ax + a @ a + 1.0)

    def sigma(self, x):
        s2 = self.sigma_sq(x)
        if np.any(nk.value(s2) <= 0):
            raise OutsideChartError("sigma^2 <= 0")
        return nk.sqrt(s2)

    def c(self, x):
        return conformal_c(x, self.mu, self.k, self.avec)

    def grad_c(self, x):
        """Hand-differentiated ``c_i = dc/dx^i``."""
        x = np.asarray(x, dtype=float)
        mu, k, a = self.mu, self.k, self.avec
        p = 1.0 + mu * (x @ x)
        return 0.5 * mu * (p * a + (k - mu * (a @ x)) * x) / p ** 1.5

    def w_sq(self, x):
        return conformal_norm_sq(x, self.mu, self.k, self.avec)

    @property
    def rho_sq(self):
        a = self.avec
        return (self.k ** 2 + (1 + a @ a) * self.mu) / 4.0

    @property
    def delta(self):
        """``delta = sqrt(mu rho^2 - mu^2/4)``; defined for ``mu > 0``."""
        if self.mu <= 0:
            raise ContractViolation("delta is defined for mu > 0")
        return float(np.sqrt(max(self.mu * self.rho_sq - self.mu ** 2 / 4.0, 0.0)))

    @property
    def r_max(self):
        return admissible_radius(self.mu)


def _family_alpha(params):
    def a(x):
        p = chart_factor(x, params.mu)
        conf = params.sigma_sq(x) / p
        return conf * conf * space_form_tensor(x, params.mu)
    return a


def _family_beta(params):
    mu, k, av = params.mu, params.k, params.avec

    def b(x):
        p = chart_factor(x, mu)
        sig = params.sigma(x)
        return sig / p * (av + (k - mu * nk.matmul(x, av)) / p * x)
    return b


def model_family(params, n=None, eps_s=0.05, eps_F=0.05):
    """Square metric of scalar flag curvature in the space-form chart."""
    n = params.n if n is None else n
    if n != params.n:
        raise ContractViolation("len(a) must equal n")
    if n < 2:
        raise ContractViolation("n >= 2 required")
    alpha = MetricField(n, _family_alpha(params), tag="square-scalar-alpha",
                        r_max=params.r_max, params={"mu": params.mu})
    beta = FormField(n, _family_beta(params), tag="square-scalar-beta")
    return SquareMetricModel(alpha, beta, eps_s, eps_F, tag="square-scalar",
                             params={"mu": params.mu, "k": params.k, "a": list(params.a)})


def model_family_alternate(params, eps_s=0.05, eps_F=0.05):
    """The ``mu > 0`` representation through ``c`` and ``rho``."""
    mu = params.mu
    if mu <= 0:
        raise ContractViolation("alternate representation needs mu > 0")
    n = params.n
    av, k, rho2 = params.avec, params.k, params.rho_sq

    def c_and_grad(x):
        p = chart_factor(x, mu)
        ax = nk.matmul(x, av)
        c = (-k + mu * ax) / (2.0 * nk.sqrt(p))
        ci = 0.5 * mu * (p * av + (k - mu * ax) * x) / p ** 1.5
        return c, ci

    def a(x):
        c, _ = c_and_grad(x)
        conf = 4.0 / mu * (rho2 - c * c)
        return conf * conf * space_form_tensor(x, mu)

    def b(x):
        c, ci = c_and_grad(x)
        return 4.0 * mu ** -1.5 * nk.sqrt(rho2 - c * c) * ci

    alpha = MetricField(n, a, tag="square-scalar-alt-alpha", r_max=params.r_max)
    beta = FormField(n, b, tag="square-scalar-alt-beta")
    return SquareMetricModel(alpha, beta, eps_s, eps_F, tag="square-scalar-alt")


def constant_curvature_family(a, sign=1, n=None, eps_s=0.05, eps_F=0.05):
    """Projectively flat square metric of zero flag curvature on ``|x| < 1``.

    ``a = 0`` gives Berwald's metric.
    """
    av = np.array(a, dtype=float)
    n = len(av) if n is None else n
    if len(av) != n:
        raise ContractViolation("len(a) must equal n")
    if sign not in (1, -1):
        raise ContractViolation("sign must be +1 or -1")

    def chart(x):
        q = 1.0 - nk.matmul(x, x)
        l = 1.0 + nk.matmul(x, av)
        if np.any(nk.value(q) <= 0) or np.any(nk.value(l) <= 0):
            raise OutsideChartError("need |x| < 1 and 1 + <a, x> > 0")
        return q, l

    def alpha(x):
        q, l = chart(x)
        conf = l * l / q
        return conf * conf * space_form_tensor(x, -1.0)

    def beta(x):
        q, l = chart(x)
        return sign * (l * l / q) * (av / l + x / q)

    return SquareMetricModel(
        MetricField(n, alpha, tag="square-constant-alpha", r_max=1.0),
        FormField(n, beta, tag="square-constant-beta"), eps_s, eps_F,
        tag="square-constant", params={"a": av.tolist(), "sign": sign})


def constant_curvature_equivalent(a):
    """Parameters of the scalar family equivalent to the zero-curvature family.

    Returns ``(params, scale)`` such that the zero-curvature metric with
    vector ``a`` equals ``F_family(params) / scale``; requires ``|a| < 1``.
    """
    av = np.array(a, dtype=float)
    a2 = av @ av
    if a2 >= 1.0:
        raise ContractViolation("equivalence needs |a| < 1")
    k = 1.0 / np.sqrt(1.0 - a2)
    return FamilyParams(-1.0, k, tuple(k * av)), k * k


def perturb_form(beta, index=0, factor=1.05):
    """Multiply one coefficient of `beta` by `factor` (negative control)."""
    def b(x):
        out = beta.jet(x)
        scale = np.ones(beta.dim)
        scale[index] = factor
        return out * scale
    return FormField(beta.dim, b, tag=f"{beta.tag}-perturbed",
                     params={"index": index, "factor": factor})


def perturbed_model(F, index=0, factor=1.05):
    return F.with_beta(perturb_form(F.beta, index, factor), tag=f"{F.tag}-perturbed")


# ---- deformation -------------------------------------------------------------

def _b2_jet(alpha, beta, x):
    a = alpha.jet(x)
    b = beta.jet(x)
    b2 = norm_sq(b, nk.inv(a))
    if np.any(nk.value(b2) >= 1.0):
        raise DeformationDomainError(f"b^2 = {float(nk.value(b2)):.6g} >= 1")
    return a, b, b2


def deform(alpha, beta):
    """``h = (1 - b^2) alpha``, ``omega = sqrt(1 - b^2) beta`` (as norms).

    The metric tensor of ``h`` is ``(1 - b^2)^2 a_ij``.
    """
    def h(x):
        a, _, b2 = _b2_jet(alpha, beta, x)
        return (1.0 - b2) ** 2 * a

    def w(x):
        _, b, b2 = _b2_jet(alpha, beta, x)
        return nk.sqrt(1.0 - b2) * b

    return (MetricField(alpha.dim, h, tag="deformed", r_max=alpha.r_max),
            FormField(beta.dim, w, tag="deformed"))


def undeform(h, omega):
    """Inverse of :func:`deform`: ``alpha = (1 + w^2) h``, ``beta = sqrt(1 + w^2) omega``."""
    def w2(x):
        hm = h.jet(x)
        w = omega.jet(x)
        return hm, w, norm_sq(w, nk.inv(hm))

    def a(x):
        hm, _, ww = w2(x)
        return (1.0 + ww) ** 2 * hm

    def b(x):
        _, w, ww = w2(x)
        return nk.sqrt(1.0 + ww) * w

    return (MetricField(h.dim, a, tag="undeformed", r_max=h.r_max),
            FormField(omega.dim, b, tag="undeformed"))


def deformation_norms(alpha, beta, x):
    """``(b^2, w^2)`` at `x`, with ``w = ||omega||_h`` after deformation."""
    h, omega = deform(alpha, beta)
    b = beta.value(x)
    b2 = float(b @ np.linalg.solve(alpha.value(x), b))
    w = omega.value(x)
    return b2, float(w @ np.linalg.solve(h.value(x), w))


# ---- characterization residuals ---------------------------------------------


@dataclass(frozen=True)
class StructureResiduals:
    """Fitted scalars and scale-normalized residuals at one point."""

    tau: float
    lam: float
    eta: float
    u: float
    b2: float
    grad_tau: np.ndarray
    residual_y1: float
    residual_y2: float
    residual_y3: float
    residual_qq_eta: float
    residual_qq_u: float
    u_indeterminate: bool = False

    def as_dict(self):
        return {"y1": self.residual_y1, "y2": self.residual_y2, "y3": self.residual_y3,
                "qq_eta": self.residual_qq_eta, "qq_u": self.residual_qq_u}

    @property
    def max_residual(self):
        return max(self.as_dict().values())


def _rel(diff, *refs):
    return float(np.linalg.norm(diff) / max(max(np.linalg.norm(r) for r in refs), 1.0))


def structure_tensor(a, b, b2):
    """``(1 + 2b^2) a_ij - 3 b_i b_j`` (jets or arrays)."""
    return (1.0 + 2.0 * b2) * a - 3.0 * nk.outer(b, b)


def tau_jet(alpha, beta, x, xvars):
    """Least-squares ``tau`` of ``b_{i|j} ~ tau M_ij`` as a jet in x."""
    a = alpha.jet(x)
    ainv = nk.inv(a)
    b = beta.jet(x)
    gamma = christoffel_jet(a, ainv, xvars)
    bij = covariant_derivative_jet(b, gamma, xvars)
    b2 = norm_sq(b, ainv)
    M = structure_tensor(a, b, b2)
    tau = nk.einsum("ij,ij->", bij, M) / nk.einsum("ij,ij->", M, M)
    return tau, bij, M, a, ainv, b, b2


def y2_basis(a, b, y):
    """The two tensors multiplying ``lambda`` and ``eta`` in the curvature ansatz."""
    y = np.asarray(y, dtype=float)
    n = len(y)
    ainv = np.linalg.inv(a)
    bup = ainv @ b
    ybar = a @ y
    alpha2 = y @ ybar
    beta = b @ y
    eye = np.eye(n)
    t_lam = alpha2 * eye - np.outer(y, ybar)
    t_eta = 2.0 * (beta * beta * eye + alpha2 * np.outer(bup, b)
                   - beta * np.outer(bup, ybar) - beta * np.outer(y, b))
    return t_lam, t_eta


def well_spread_directions(n, count=None, rng=None):
    """``count >= n(n+1)/2`` unit directions (coordinate axes and pair sums first)."""
    count = n * (n + 1) // 2 if count is None else count
    dirs = [np.eye(n)[i] for i in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            dirs.append((np.eye(n)[i] + np.eye(n)[j]) / np.sqrt(2))
    rng = np.random.default_rng(12345) if rng is None else rng
    while len(dirs) < count:
        v = rng.standard_normal(n)
        dirs.append(v / np.linalg.norm(v))
    return [np.asarray(d) for d in dirs[:count]]


def structure_residuals(alpha, beta, x, y_samples=None):
    """Fit ``tau, lambda, eta, u`` at `x` and measure the structure equations.

    * ``b_{i|j} = tau ((1 + 2b^2) a_ij - 3 b_i b_j)``
    * ``Rbar^i_k = lambda (alpha^2 delta - y ybar) + 2 eta (beta^2 delta + ...)``
    * ``tau_{x^i} = u b_i``
    * ``eta = lambda + 4(2 + b^2) tau^2``, ``u = -(7 + 4b^2) tau^2 - lambda``
    """
    n = alpha.dim
    if n < 3:
        raise ContractViolation("the characterization needs n >= 3")
    x = np.asarray(x, dtype=float)
    if y_samples is None:
        y_samples = well_spread_directions(n)
    y_samples = [np.asarray(y, dtype=float) for y in y_samples]
    if len(y_samples) < n * (n + 1) // 2:
        raise ContractViolation("need at least n(n+1)/2 y-samples")

    space = jet_space(n, 2)
    tau_j, bij_j, M_j, a_j, _, b_j, b2_j = tau_jet(alpha, beta, space.seed(x), range(n))
    tau = float(tau_j.value)
    bij, M = bij_j.value, M_j.value
    a, b, b2 = a_j.value, b_j.value, float(b2_j.value)
    grad_tau = tau_j.grad(range(n)).value
    res_y1 = _rel(bij - tau * M, bij, tau * M)

    rows, rhs = [], []
    for y in y_samples:
        R = riemann_curvature_alpha(alpha, x, y)
        t_lam, t_eta = y2_basis(a, b, y)
        rows.append(np.stack([t_lam.ravel(), t_eta.ravel()], axis=1))
        rhs.append(R.ravel())
    A = np.concatenate(rows)
    rhs = np.concatenate(rhs)
    (lam, eta), *_ = np.linalg.lstsq(A, rhs, rcond=None)
    fit = A @ np.array([lam, eta])
    res_y2 = _rel(rhs - fit, rhs, fit)

    if b2 < 1e-8:
        u = float("nan")
        res_y3 = float(np.linalg.norm(grad_tau))
        res_qq_u = 0.0
        indeterminate = True
    else:
        u = float(grad_tau @ np.linalg.solve(a, b) / b2)
        res_y3 = _rel(grad_tau - u * b, grad_tau, u * b)
        u_pred = -(7.0 + 4.0 * b2) * tau ** 2 - lam
        res_qq_u = _rel(u - u_pred, u, u_pred)
        indeterminate = False
    eta_pred = lam + 4.0 * (2.0 + b2) * tau ** 2
    if indeterminate:
        # the eta basis tensor vanishes with b, so eta carries no information
        eta, res_qq_eta = eta_pred, 0.0
    else:
        res_qq_eta = _rel(eta - eta_pred, eta, eta_pred)
    return StructureResiduals(tau=tau, lam=float(lam), eta=float(eta), u=u, b2=b2,
                             grad_tau=grad_tau, residual_y1=res_y1, residual_y2=res_y2,
                             residual_y3=res_y3, residual_qq_eta=res_qq_eta,
                             residual_qq_u=res_qq_u, u_indeterminate=indeterminate)


def flag_curvature_from_structure(alpha, beta, tau, lam, x, y):
    """``K = alpha/F^2 {[lambda + tau^2 (5 + 4b^2)] alpha + (eta - 3 tau^2) beta}``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    a = alpha.value(x)
    b = beta.value(x)
    b2 = float(b @ np.linalg.solve(a, b))
    al = float(np.sqrt(y @ a @ y))
    be = float(b @ y)
    F = (al + be) ** 2 / al
    eta = lam + 4.0 * (2.0 + b2) * tau ** 2
    return al / F ** 2 * ((lam + tau ** 2 * (5.0 + 4.0 * b2)) * al + (eta - 3.0 * tau ** 2) * be)


# ---- closed forms on the model family ---------------------------------------

def tau_sigma6(params, x):
    """Closed-form ``tau`` with ``sigma^6`` in the denominator (does not match the fit)."""
    x = np.asarray(x, dtype=float)
    p = 1.0 + params.mu * (x @ x)
    return p * (params.k - params.mu * (params.avec @ x)) / params.sigma_sq(x) ** 3


def tau_sigma3(params, x):
    """``tau = -2c (1 - b^2)^{3/2}`` worked out: ``sigma^3`` in the denominator."""
    x = np.asarray(x, dtype=float)
    p = 1.0 + params.mu * (x @ x)
    return p * (params.k - params.mu * (params.avec @ x)) / params.sigma_sq(x) ** 1.5


def tau_from_c(params, x):
    """``tau = -2 c (1 - b^2)^{3/2}`` with ``1 - b^2 = 1 / (1 + w^2)``."""
    return -2.0 * params.c(x) * (1.0 + params.w_sq(x)) ** -1.5


def _u_bracket(params, x):
    mu, k, a = params.mu, params.k, params.avec
    ax = a @ x
    return (((1 + a @ a) * mu ** 2 + k * k * mu) * (x @ x) + 2 * mu ** 2 * ax ** 2
            + (1 + a @ a - 4 * k * ax) * mu + 3 * k * k)


def u_closed_form(params, x):
    """Closed-form ``u`` (``sigma^6`` in the denominator)."""
    x = np.asarray(x, dtype=float)
    p = 1.0 + params.mu * (x @ x)
    return -p * p / params.sigma_sq(x) ** 3 * _u_bracket(params, x)


def u_from_tau(params, x):
    """``u = <grad tau_sigma3, b> / b^2`` evaluated with jets."""
    n = params.n
    space = jet_space(n, 1)
    xj = space.seed(x)
    p = chart_factor(xj, params.mu)
    tau = p * (params.k - params.mu * nk.matmul(xj, params.avec)) / params.sigma_sq(xj) ** 1.5
    F = model_family(params)
    a = F.alpha.value(x)
    b = F.beta.value(x)
    grad = tau.grad(range(n)).value
    return float(grad @ np.linalg.solve(a, b) / (b @ np.linalg.solve(a, b)))


def curvature_formula_family(params, x, alpha_value, beta_value):
    """``K = (k^2 + mu + mu|a|^2)(1 + mu|x|^2)^3 / sigma^6 * (alpha/(alpha+beta))^3``."""
    x = np.asarray(x, dtype=float)
    a = params.avec
    p = 1.0 + params.mu * (x @ x)
    num = params.k ** 2 + params.mu + params.mu * (a @ a)
    return num * p ** 3 / params.sigma_sq(x) ** 3 * (alpha_value / (alpha_value + beta_value)) ** 3


def curvature_formula_rho(params, x, alpha_value, beta_value):
    """``K = rho^2 mu^3 / 16 [(1 + beta/alpha)(rho^2 - c^2)]^{-3}`` for ``mu > 0``."""
    if params.mu <= 0:
        raise ContractViolation("needs mu > 0")
    rho2 = params.rho_sq
    c = params.c(x)
    return rho2 * params.mu ** 3 / 16.0 * ((1 + beta_value / alpha_value) * (rho2 - c * c)) ** -3


def rigidity_bounds(mu, delta):
    """Lower and upper bounds on ``K`` for ``mu > 0``."""
    if mu <= 0:
        raise ContractViolation("rigidity bounds need mu > 0")
    if delta < 0:
        raise ContractViolation("delta must be non-negative")
    root = np.sqrt(4 * delta ** 2 + mu ** 2)
    return ((root - 2 * delta) ** 3 / (mu * root), (root + 2 * delta) ** 3 / (mu * root))


def tau_exponent_verdict(fitted, sigma6, sigma3, tol=1e-7):
    """Which closed form of ``tau`` matches the fitted values.

    Returns ``"sigma^6"``, ``"sigma^3"``, ``"both"`` or ``"neither"``.
    """
    fitted = np.asarray(fitted, dtype=float)
    scale = np.maximum(np.abs(fitted), 1.0)
    p_ok = bool(np.all(np.abs(np.asarray(sigma6) - fitted) / scale <= tol))
    c_ok = bool(np.all(np.abs(np.asarray(sigma3) - fitted) / scale <= tol))
    return {(True, True): "both", (True, False): "sigma^6",
            (False, True): "sigma^3", (False, False): "neither"}[(p_ok, c_ok)]


__all__ = [
    "FamilyParams", "StructureResiduals", "constant_curvature_equivalent",
    "constant_curvature_family", "conformal_form", "curvature_formula_rho",
    "curvature_formula_family", "deform", "deformation_norms", "flag_curvature_from_structure",
    "model_family", "model_family_alternate", "perturb_form", "perturbed_model",
    "rigidity_bounds", "space_form", "structure_tensor", "tau_sigma3", "tau_exponent_verdict",
    "tau_from_c", "tau_jet", "tau_sigma6", "structure_residuals", "u_from_tau", "u_closed_form",
    "undeform", "well_spread_directions", "y2_basis",
]
