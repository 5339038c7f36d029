import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from squarefinsler.betaform import conformal_form
from squarefinsler.classify import (
    FamilyParams,
    constant_curvature_equivalent,
    constant_curvature_family,
    curvature_formula_rho,
    curvature_formula_family,
    deform,
    deformation_norms,
    flag_curvature_from_structure,
    model_family,
    model_family_alternate,
    perturbed_model,
    rigidity_bounds,
    tau_sigma3,
    tau_exponent_verdict,
    tau_from_c,
    tau_sigma6,
    structure_residuals,
    u_from_tau,
    u_closed_form,
    undeform,
)
from squarefinsler.errors import ContractViolation
from squarefinsler.finslercurv import curvature_bundle
from squarefinsler.riemann import sample_ball, sample_sphere, sectional_constancy_residual, space_form

P = FamilyParams(1.0, 0.3, (0.1, 0.2, 0.05))
X = np.array([0.2, -0.15, 0.1])


def test_structure_residuals_on_family():
    th = structure_residuals(*_ab(P), X)
    assert th.max_residual < 1e-12
    assert not th.u_indeterminate


def _ab(params):
    F = model_family(params)
    return F.alpha, F.beta


def test_structure_residuals_need_three_dimensions():
    F = model_family(FamilyParams(1.0, 0.3, (0.1, 0.2)))
    with pytest.raises(ContractViolation):
        structure_residuals(F.alpha, F.beta, X[:2])


def test_tau_closed_forms():
    th = structure_residuals(*_ab(P), X)
    assert th.tau == pytest.approx(tau_sigma3(P, X), rel=1e-12)
    assert th.tau == pytest.approx(tau_from_c(P, X), rel=1e-12)
    assert abs(th.tau - tau_sigma6(P, X)) > 1e-4
    assert th.u == pytest.approx(u_closed_form(P, X), rel=1e-10)
    assert th.u == pytest.approx(u_from_tau(P, X), rel=1e-10)


def test_tau_verdict_labels():
    assert tau_exponent_verdict([1.0], [1.0], [2.0]) == "sigma^6"
    assert tau_exponent_verdict([2.0], [1.0], [2.0]) == "sigma^3"
    assert tau_exponent_verdict([1.0], [1.0], [1.0]) == "both"
    assert tau_exponent_verdict([3.0], [1.0], [2.0]) == "neither"


def test_curvature_formulas_agree():
    F = model_family(P)
    rng = np.random.default_rng(0)
    th = structure_residuals(F.alpha, F.beta, X)
    for _ in range(4):
        y = sample_sphere(rng, 3)
        bd = curvature_bundle(F, X, y, with_douglas=False)
        al = np.sqrt(y @ F.alpha.value(X) @ y)
        be = F.beta.value(X) @ y
        assert bd.K == pytest.approx(curvature_formula_family(P, X, al, be), rel=1e-11)
        assert bd.K == pytest.approx(curvature_formula_rho(P, X, al, be), rel=1e-11)
        assert bd.K == pytest.approx(flag_curvature_from_structure(F.alpha, F.beta, th.tau, th.lam, X, y), rel=1e-11)


def test_deform_round_trip():
    F = model_family(P)
    h, w = deform(F.alpha, F.beta)
    a2, b2 = undeform(h, w)
    assert np.allclose(a2.value(X), F.alpha.value(X), rtol=1e-13)
    assert np.allclose(b2.value(X), F.beta.value(X), rtol=1e-13)
    bb, ww = deformation_norms(F.alpha, F.beta, X)
    assert 1.0 / (1.0 - bb) == pytest.approx(1.0 + ww, rel=1e-13)


def test_deformation_recovers_space_form_data():
    F = model_family(P)
    h, w = deform(F.alpha, F.beta)
    assert np.allclose(h.value(X), space_form(P.mu).value(X), rtol=1e-13)
    assert np.allclose(w.value(X), conformal_form(P.mu, P.k, P.avec).value(X), rtol=1e-13)


def test_alternate_representation():
    F, G = model_family(P), model_family_alternate(P)
    assert np.allclose(F.alpha.value(X), G.alpha.value(X), rtol=1e-12)
    assert np.allclose(F.beta.value(X), G.beta.value(X), rtol=1e-12)
    with pytest.raises(ContractViolation):
        model_family_alternate(FamilyParams(-1.0, 0.3, (0.1, 0.2, 0.05)))


@pytest.mark.parametrize("a, sign", [((0.2, 0.0, 0.0), 1), ((0.0, 0.0, 0.0), 1),
                                     ((0.3, -0.2, 0.1), -1)])
def test_zero_curvature_family(a, sign):
    F = constant_curvature_family(a, sign)
    rng = np.random.default_rng(7)
    for _ in range(3):
        x = sample_ball(rng, 3, 0.4)
        y = sample_sphere(rng, 3)
        bd = curvature_bundle(F, x, y, with_douglas=False)
        assert abs(bd.K) < 1e-12
        th = structure_residuals(F.alpha, F.beta, x)
        assert th.lam == pytest.approx(-(5 + 4 * th.b2) * th.tau ** 2, abs=1e-12)


def test_zero_curvature_equivalence():
    a = (0.3, -0.2, 0.1)
    eq, scale = constant_curvature_equivalent(a)
    F, G = constant_curvature_family(a), model_family(eq)
    assert np.allclose(G.alpha.value(X), scale ** 2 * F.alpha.value(X), rtol=1e-12)
    assert np.allclose(G.beta.value(X), scale * F.beta.value(X), rtol=1e-12)
    with pytest.raises(ContractViolation):
        constant_curvature_equivalent((0.8, 0.7, 0.0))


def test_negative_control_breaks_structure():
    F = perturbed_model(model_family(P), 0, 1.05)
    th = structure_residuals(F.alpha, F.beta, X)
    assert th.residual_y1 > 1e-3
    h, _ = deform(F.alpha, F.beta)
    rng = np.random.default_rng(0)
    fit = sectional_constancy_residual(h, [(sample_ball(rng, 3, 0.4), sample_sphere(rng, 3)) for _ in range(6)])
    assert fit.residual > 1e-3


def test_rigidity_bounds():
    lo, hi = rigidity_bounds(1.0, 0.0)
    assert lo == pytest.approx(1.0) and hi == pytest.approx(1.0)
    lo, hi = rigidity_bounds(1.0, P.delta)
    assert lo < hi
    with pytest.raises(ContractViolation):
        rigidity_bounds(-1.0, 0.1)


def test_derived_constants():
    a = P.avec
    assert P.delta ** 2 == pytest.approx(P.mu * (P.k ** 2 + P.mu * (a @ a)) / 4)
    assert P.rho_sq == pytest.approx((P.k ** 2 + (1 + a @ a) * P.mu) / 4)


@settings(max_examples=15, deadline=None)
@given(st.floats(0.2, 2.0), st.floats(-0.6, 0.6), st.floats(-0.3, 0.3), st.floats(-0.3, 0.3))
def test_family_property(mu, k, a0, a1):
    params = FamilyParams(mu, k, (a0, a1, 0.05))
    F = model_family(params)
    x = np.array([0.1, 0.05, -0.1])
    th = structure_residuals(F.alpha, F.beta, x)
    assert th.max_residual < 1e-9
    assert th.tau == pytest.approx(tau_sigma3(params, x), rel=1e-9, abs=1e-12)
