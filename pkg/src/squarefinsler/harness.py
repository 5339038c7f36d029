"""
Batch verification: sample a family, run every residual, build a report.

The report is plain JSON-compatible data (``schema: 1``); the README lists
its fields.
"""

from __future__ import annotations

import dataclasses
import json
import logging
from dataclasses import dataclass, field

import numpy as np

from . import numkit as nk
from .betaform import FormField, check_closed_conformal, conformal_factor_data, parallel_form, zero_form
from .classify import (
    FamilyParams,
    constant_curvature_equivalent,
    constant_curvature_family,
    deform,
    flag_curvature_from_structure,
    model_family,
    model_family_alternate,
    rigidity_bounds,
    tau_sigma3,
    tau_exponent_verdict,
    tau_sigma6,
    structure_residuals,
)
from .errors import (
    ContractViolation,
    DegenerateMetricError,
    DeformationDomainError,
    FamilyInadmissibleError,
    OutsideChartError,
    OutsideRegularConeError,
    SingularEvaluationError,
)
from .finslercurv import SquareMetricModel, check_guards, curvature_bundle
from .riemann import conformal_metric, euclidean, sample_ball, sample_sphere, sectional_constancy_residual, space_form

log = logging.getLogger(__name__)

SCHEMA = 1
FAMILIES = ("euclidean-parallel", "space-form", "square-scalar", "square-constant", "custom")
ROWS = ("y1", "y2", "y3", "qq", "weyl", "douglas", "scalar-flag", "proj-flat",
        "deform-constcurv", "deform-conformal", "delta-const", "bounds",
        "spray-match", "k-consistency", "alt-representation")
DEFAULT_TOLERANCES = {
    "y1": 1e-6, "y2": 1e-6, "y3": 1e-6, "qq": 1e-6, "weyl": 1e-6, "douglas": 1e-6,
    "scalar-flag": 1e-6, "proj-flat": 1e-7, "deform-constcurv": 1e-6,
    "deform-conformal": 1e-8, "delta-const": 1e-7, "bounds": 1e-8,
    "spray-match": 1e-8, "k-consistency": 1e-6, "alt-representation": 1e-9,
}
NEGATIVE_CONTROL_FLOOR = 1e-3
MAX_RETRIES = 100
_SAMPLING_ERRORS = (OutsideChartError, OutsideRegularConeError, DeformationDomainError,
                    SingularEvaluationError, DegenerateMetricError)


@dataclass
class RunConfig:
    family: str = "square-scalar"
    n: int = 3
    mu: float = 1.0
    k: float = 0.3
    a: tuple = None
    sign: int = 1
    samples: int = 16
    seed: int = 0
    radius: float = 0.4
    tolerances: dict = field(default_factory=dict)
    output: str = None
    format: str = "json"
    custom: dict = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ContractViolation(f"unknown family {self.family!r}; choose from {FAMILIES}")
        if self.samples < 1:
            raise ContractViolation("samples must be >= 1")
        if not 0 < self.radius < 1:
            raise ContractViolation("radius is a fraction of the chart radius in (0, 1)")
        if self.a is None:
            self.a = (0.0,) * self.n
        self.a = tuple(float(v) for v in self.a)
        if len(self.a) != self.n:
            raise ContractViolation(f"a has {len(self.a)} entries, expected n={self.n}")
        if self.sign not in (1, -1):
            raise ContractViolation("sign must be +1 or -1")
        unknown = set(self.tolerances) - set(ROWS)
        if unknown:
            raise ContractViolation(f"unknown tolerance names {sorted(unknown)}")
        if any(v <= 0 for v in self.tolerances.values()):
            raise ContractViolation("tolerances must be positive")
        if self.family == "custom" and not self.custom:
            raise ContractViolation("the custom family needs a 'custom' table")

    def tolerance(self, row):
        return self.tolerances.get(row, DEFAULT_TOLERANCES[row])

    def echo(self):
        out = dataclasses.asdict(self)
        out["a"] = list(self.a)
        return out

    @classmethod
    def from_mapping(cls, data):
        known = {f.name for f in dataclasses.fields(cls)}
        extra = set(data) - known
        if extra:
            raise ContractViolation(f"unknown config keys {sorted(extra)}")
        return cls(**data)

    @classmethod
    def from_file(cls, path, **overrides):
        with open(path) as fh:
            data = json.load(fh)
        data = {**overrides, **data}
        return cls.from_mapping(data)


# ---- custom polynomial family -----------------------------------------------

def polynomial(terms, n):
    """Jet-compatible polynomial from ``[[coef, [e_1, ..., e_n]], ...]``."""
    parsed = []
    for coef, exps in terms:
        exps = [int(e) for e in exps]
        if len(exps) != n or min(exps) < 0:
            raise ContractViolation(f"bad exponent vector {exps}")
        if sum(exps) > 4:
            raise ContractViolation("custom polynomials have total degree <= 4")
        parsed.append((float(coef), exps))

    def p(x):
        out = 0.0
        for coef, exps in parsed:
            term = coef
            for i, e in enumerate(exps):
                for _ in range(e):
                    term = term * x[i]
            out = out + term
        return out
    return p


def custom_model(table, n):
    """Square metric with ``a_ij = exp(2 phi) delta_ij`` and polynomial ``b_i``."""
    phi = polynomial(table.get("phi", []), n)
    b_terms = table.get("b")
    if b_terms is None or len(b_terms) != n:
        raise ContractViolation("custom table needs one polynomial per b_i")
    bs = [polynomial(t, n) for t in b_terms]
    alpha = conformal_metric(phi, n, tag="conformal-poly", r_max=float(table.get("r_max", 1.0)))
    beta = FormField(n, lambda x: nk.stack([nk.lift(b(x), x.space) if isinstance(x, nk.Jet)
                                             else b(x) for b in bs]), tag="polynomial")
    return SquareMetricModel(alpha, beta, tag="custom", params={"custom": table})


def build_family(config):
    """Return ``(model, expected_mu, k_formula)`` for `config`.

    ``k_formula(x, y, alpha, beta)`` is the closed-form flag curvature or None.
    """
    n = config.n
    fam = config.family
    if fam == "euclidean-parallel":
        F = SquareMetricModel(euclidean(n), parallel_form(config.a), tag=fam)
        return F, 0.0, lambda x, al, be: 0.0
    if fam == "space-form":
        F = SquareMetricModel(space_form(config.mu, n), zero_form(n), tag=fam)
        return F, config.mu, lambda x, al, be: config.mu
    if fam == "square-scalar":
        params = FamilyParams(config.mu, config.k, config.a)
        from .classify import curvature_formula_family
        return model_family(params), config.mu, lambda x, al, be: curvature_formula_family(params, x, al, be)
    if fam == "square-constant":
        F = constant_curvature_family(config.a, config.sign)
        eq, scale = constant_curvature_equivalent(config.a)
        mu_rep = -eq.k ** 2 / (1.0 + eq.avec @ eq.avec)
        return F, mu_rep * scale ** 2, lambda x, al, be: 0.0
    return custom_model(config.custom, n), None, None


# ---- report -----------------------------------------------------------------

@dataclass
class VerificationReport:
    schema: int
    config: dict
    samples: list
    summary: dict

    @property
    def passed(self):
        return bool(self.summary["pass"])

    def to_dict(self):
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data):
        if data.get("schema") != SCHEMA:
            raise ContractViolation(f"unsupported report schema {data.get('schema')!r}")
        return cls(schema=data["schema"], config=data["config"], samples=data["samples"],
                   summary=data["summary"])


def _f(x):
    return None if x is None or not np.isfinite(x) else float(x)


def sample_points(F, config, rng):
    """Draw ``config.samples`` admissible (x, y) pairs.

    x is uniform in the ball of radius ``config.radius * r_max``, y uniform on
    the unit sphere.  A draw outside the chart or the regular cone is
    retried up to ``MAX_RETRIES`` times.  Returns ``(points, resamples)``.
    """
    r_max = F.alpha.r_max
    points, resamples = [], 0
    for _ in range(config.samples):
        for _ in range(MAX_RETRIES):
            x = sample_ball(rng, config.n, config.radius * r_max)
            y = sample_sphere(rng, config.n)
            try:
                check_guards(F, x, y)
                F.alpha.check_positive(x)
                if config.n >= 3:
                    deform(F.alpha, F.beta)[0].check_positive(x)
            except _SAMPLING_ERRORS as exc:
                resamples += 1
                log.debug("resampling after %s", exc)
                continue
            points.append((x, y))
            break
        else:
            raise FamilyInadmissibleError("family inadmissible with these parameters")
    return points, resamples


def run_verify(config):
    """Sample the configured family and evaluate every applicable check."""
    F, expected_mu, k_formula = build_family(config)
    n = config.n
    rng = np.random.default_rng(config.seed)
    points, resamples = sample_points(F, config, rng)

    records = []
    taus = []
    ks = []
    for idx, (x, y) in enumerate(points):
        bd = curvature_bundle(F, x, y)
        res = {
            "weyl": _f(bd.residuals["weyl"]),
            "douglas": bd.residuals["douglas"],
            "scalar-flag": bd.residuals["scalar_flag"],
            "proj-flat": bd.residuals["proj_flat"],
            "spray-match": bd.residuals["spray_match"],
        }
        al = float(np.sqrt(y @ F.alpha.value(x) @ y))
        be = float(F.beta.value(x) @ y)
        k_closed = None if k_formula is None else float(k_formula(x, al, be))
        k_y4 = None
        if n >= 3:
            th = structure_residuals(F.alpha, F.beta, x)
            res.update({"y1": th.residual_y1, "y2": th.residual_y2, "y3": th.residual_y3,
                        "qq": max(th.residual_qq_eta, th.residual_qq_u)})
            k_y4 = float(flag_curvature_from_structure(F.alpha, F.beta, th.tau, th.lam, x, y))
            taus.append(th.tau)
        kc = [k for k in (k_closed, k_y4) if k is not None]
        if kc:
            res["k-consistency"] = max(abs(bd.K - k) / max(abs(bd.K), 1.0) for k in kc)
        ks.append(bd.K)
        records.append({
            "index": idx, "x": x.tolist(), "y": y.tolist(), "F": bd.F, "K_hat": bd.K,
            "K_formula": k_closed, "K_y4": k_y4,
            "residuals": {key: _f(v) for key, v in sorted(res.items())},
        })

    summary = {"rows": {}, "resamples": resamples}
    rows = summary["rows"]
    for row in ROWS:
        vals = [r["residuals"].get(row) for r in records]
        vals = [v for v in vals if v is not None]
        if vals:
            rows[row] = {"max": max(vals)}

    # deformation and conformal-factor checks
    if n >= 3:
        h, omega = deform(F.alpha, F.beta)
        fit = sectional_constancy_residual(h, points)
        mu_hat = fit.mu
        dev = 0.0 if expected_mu is None else abs(mu_hat - expected_mu) / max(abs(expected_mu), 1.0)
        rows["deform-constcurv"] = {"max": max(fit.residual, dev), "mu_hat": mu_hat,
                                    "mu_expected": expected_mu}
        xs = [x for x, _ in points]
        conf = check_closed_conformal(omega, h, xs)
        conf_res = max(conf.residual, conf.closedness)
        c_dev = None
        if config.family == "square-scalar":
            from .betaform import conformal_c
            c_dev = max(abs(c - conformal_c(x, config.mu, config.k, np.array(config.a)))
                        for c, x in zip(conf.c, xs))
            conf_res = max(conf_res, c_dev)
        rows["deform-conformal"] = {"max": conf_res, "c_formula_deviation": c_dev}
        fd = [conformal_factor_data(omega, h, mu_hat, x) for x in xs]
        fvals = np.array([d.f for d in fd])
        if mu_hat > 0:
            deltas = np.sqrt(np.maximum(fvals, 0.0))
            spread = float(deltas.std() / (1.0 + deltas.mean())) if len(deltas) > 1 else 0.0
            summary["delta"] = {"mean": float(deltas.mean()), "std": float(deltas.std())}
        else:
            spread = float(fvals.std() / (1.0 + abs(fvals.mean()))) if len(fvals) > 1 else 0.0
            summary["delta"] = None
        rows["delta-const"] = {"max": spread, "f_mean": float(fvals.mean())}
        if mu_hat > 0 and summary["delta"] is not None and abs(mu_hat - round(mu_hat, 6)) < 1e-6:
            kmin, kmax = rigidity_bounds(mu_hat, summary["delta"]["mean"])
            viol = max(max(kmin - k, k - kmax, 0.0) for k in ks)
            rows["bounds"] = {"max": viol, "K_min": kmin, "K_max": kmax}

    if config.family == "square-scalar":
        params = FamilyParams(config.mu, config.k, config.a)
        xs = [x for x, _ in points]
        verdict = tau_exponent_verdict(taus, [tau_sigma6(params, x) for x in xs],
                                       [tau_sigma3(params, x) for x in xs])
        summary["tau_exponent_verdict"] = verdict
        if config.mu > 0:
            alt = model_family_alternate(params)
            dev = 0.0
            for x in xs:
                a1, a2 = F.alpha.value(x), alt.alpha.value(x)
                b1, b2 = F.beta.value(x), alt.beta.value(x)
                dev = max(dev, np.linalg.norm(a1 - a2) / np.linalg.norm(a1),
                          np.linalg.norm(b1 - b2) / max(np.linalg.norm(b1), 1e-300))
            rows["alt-representation"] = {"max": float(dev)}
    else:
        summary["tau_exponent_verdict"] = None

    ok = True
    for row, entry in rows.items():
        entry["tolerance"] = config.tolerance(row)
        entry["pass"] = bool(entry["max"] <= entry["tolerance"])
        ok = ok and entry["pass"]
    summary["pass"] = ok
    summary["rows"] = {row: rows[row] for row in ROWS if row in rows}
    return VerificationReport(SCHEMA, config.echo(), records, summary)


def emit_report(report, fmt="json"):
    """Serialize `report` as JSON (stable key order) or a text table."""
    if fmt == "json":
        return json.dumps(report.to_dict(), sort_keys=True, indent=2)
    if fmt != "text":
        raise ContractViolation(f"unknown format {fmt!r}")
    lines = [f"family {report.config['family']}  n={report.config['n']}  "
             f"samples={len(report.samples)}  seed={report.config['seed']}",
             f"{'check':<20}{'max residual':>14}{'tolerance':>12}  status"]
    for row in ROWS:
        entry = report.summary["rows"].get(row)
        if entry is None:
            lines.append(f"{row:<20}{'-':>14}{'-':>12}  n/a")
            continue
        status = "pass" if entry["pass"] else "FAIL"
        lines.append(f"{row:<20}{entry['max']:>14.3e}{entry['tolerance']:>12.1e}  {status}")
    verdict = report.summary.get("tau_exponent_verdict")
    if verdict:
        lines.append(f"tau closed form matching the fit: {verdict}")
    if report.summary.get("delta"):
        d = report.summary["delta"]
        lines.append(f"delta mean {d['mean']:.12g}  std {d['std']:.3e}")
    lines.append(f"resamples {report.summary['resamples']}")
    lines.append("PASS" if report.passed else "FAIL")
    return "\n".join(lines) + "\n"


def parse_report(text):
    return VerificationReport.from_dict(json.loads(text))


def point_report(config, x, y):
    """Curvature quantities of the configured family at one (x, y)."""
    F, _, k_formula = build_family(config)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    bd = curvature_bundle(F, x, y)
    al = float(np.sqrt(y @ F.alpha.value(x) @ y))
    be = float(F.beta.value(x) @ y)
    out = {"F": bd.F, "K_hat": bd.K,
           "K_formula": None if k_formula is None else float(k_formula(x, al, be)),
           "residuals": {k: _f(v) for k, v in bd.residuals.items()}}
    if config.n >= 3:
        th = structure_residuals(F.alpha, F.beta, x)
        out["structure"] = {"tau": th.tau, "lambda": th.lam, "eta": th.eta,
                           "u": _f(th.u), **th.as_dict()}
    return out
