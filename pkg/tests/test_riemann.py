import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from squarefinsler import numkit as nk
from squarefinsler.errors import ContractViolation, DegenerateMetricError, OutsideChartError
from squarefinsler.numkit import fd_partial
from squarefinsler.riemann import (
    MetricField,
    SpaceFormParams,
    admissible_radius,
    christoffel,
    conformal_metric,
    constant_curvature_shape,
    euclidean,
    riemann_curvature_alpha,
    sample_ball,
    sample_sphere,
    sectional_constancy_residual,
    space_form,
    space_form_norm,
    spray_riemann,
)


def christoffel_fd(g, x):
    """Second-kind symbols from finite-difference metric derivatives."""
    n = g.dim
    x = np.asarray(x, dtype=float)
    da = np.zeros((n, n, n))
    for i in range(n):
        for j in range(n):
            for k in range(n):
                mi = [0] * n
                mi[k] = 1
                da[i, j, k] = fd_partial(lambda z: g.value(z)[i, j], x, mi)
    lower = 0.5 * (da.transpose(0, 2, 1) + da - da.transpose(2, 0, 1))
    return np.einsum("il,ljk->ijk", np.linalg.inv(g.value(x)), lower)


def test_conformal_example_symbols():
    g = conformal_metric(lambda x: x[0], 2)
    gam = christoffel(g, [0.3, -0.1])
    assert gam[0, 0, 0] == pytest.approx(1.0)
    assert gam[0, 1, 1] == pytest.approx(-1.0)
    assert gam[1, 0, 1] == pytest.approx(1.0)
    assert gam[1, 1, 0] == pytest.approx(1.0)


def test_euclidean_is_flat():
    g = euclidean(3)
    assert np.all(christoffel(g, [0.1, 0.2, 0.3]) == 0)
    assert np.all(riemann_curvature_alpha(g, [0.1, 0.2, 0.3], [1.0, 0.0, 0.5]) == 0)


@pytest.mark.parametrize("mu", [-1.0, -0.3, 0.5, 2.0])
def test_christoffel_against_finite_differences(mu):
    g = space_form(mu)
    x = np.array([0.2, -0.1, 0.25])
    assert np.allclose(christoffel(g, x), christoffel_fd(g, x), atol=1e-7)


def test_christoffel_symmetric_lower_indices():
    g = conformal_metric(lambda x: 0.3 * x[0] * x[1] - 0.2 * x[2] ** 2, 3)
    gam = christoffel(g, [0.1, 0.4, -0.3])
    assert np.allclose(gam, gam.transpose(0, 2, 1), atol=1e-15)
    assert np.allclose(gam, christoffel_fd(g, [0.1, 0.4, -0.3]), atol=1e-7)


def test_spray_is_quadratic():
    g = space_form(0.7)
    x, y = np.array([0.1, 0.2, -0.3]), np.array([0.3, -1.0, 0.2])
    assert np.allclose(spray_riemann(g, x, 2.5 * y), 6.25 * spray_riemann(g, x, y), rtol=1e-13)
    with pytest.raises(ContractViolation):
        spray_riemann(g, x, np.zeros(3))


@pytest.mark.parametrize("mu", [-1.0, -0.3, 0.0, 0.5, 1.0, 2.0])
def test_space_forms_have_constant_curvature(mu):
    g = space_form(mu)
    rng = np.random.default_rng(5)
    samples = [(sample_ball(rng, 3, 0.5 * g.r_max), sample_sphere(rng, 3)) for _ in range(8)]
    fit = sectional_constancy_residual(g, samples)
    assert fit.mu == pytest.approx(mu, abs=1e-10)
    assert fit.residual < 1e-10


def test_space_form_curvature_pointwise():
    mu = -0.6
    g = space_form(mu)
    x, y = np.array([0.3, 0.1, -0.2]), np.array([0.2, 0.9, 0.4])
    R = riemann_curvature_alpha(g, x, y)
    assert np.allclose(R, mu * constant_curvature_shape(g.value(x), y), atol=1e-13)


def test_space_form_norm_matches_tensor():
    rng = np.random.default_rng(1)
    for mu in (-1.0, 0.4):
        g = space_form(mu)
        x = sample_ball(rng, 3, 0.6 * g.r_max)
        y = rng.standard_normal(3)
        assert space_form_norm(x, y, mu) == pytest.approx(np.sqrt(y @ g.value(x) @ y), rel=1e-13)


def test_chart_limits():
    assert admissible_radius(-4.0) == pytest.approx(0.5)
    assert admissible_radius(1.0) == 1.0
    with pytest.raises(OutsideChartError):
        space_form(-1.0).value([0.8, 0.8, 0.0])
    with pytest.raises(ContractViolation):
        SpaceFormParams(-1.0, r_max=1.5)


def test_degenerate_metric_detected():
    g = MetricField(2, lambda x: np.diag([1.0, 0.0]))
    with pytest.raises(DegenerateMetricError):
        g.check_positive([0.0, 0.0])
    with pytest.raises(DegenerateMetricError):
        christoffel(g, [0.0, 0.0])


def test_conformal_sphere_curvature():
    # 4 / (1 + |x|^2)^2 delta is the round unit sphere in stereographic coordinates
    g = conformal_metric(lambda x: np.log(2.0) - nk.log(1.0 + nk.matmul(x, x)), 3)
    rng = np.random.default_rng(2)
    samples = [(sample_ball(rng, 3, 0.9), sample_sphere(rng, 3)) for _ in range(5)]
    fit = sectional_constancy_residual(g, samples)
    assert fit.mu == pytest.approx(1.0, abs=1e-12)
    assert fit.residual < 1e-12


def test_non_constant_curvature_is_flagged():
    g = conformal_metric(lambda x: 0.4 * x[0] ** 2 + 0.3 * x[1] * x[2], 3)
    rng = np.random.default_rng(3)
    samples = [(sample_ball(rng, 3, 0.5), sample_sphere(rng, 3)) for _ in range(6)]
    assert sectional_constancy_residual(g, samples).residual > 1e-2


@settings(max_examples=25, deadline=None)
@given(st.floats(-0.9, 2.0), st.integers(0, 10_000))
def test_riemann_annihilates_y(mu, seed):
    rng = np.random.default_rng(seed)
    g = space_form(mu)
    x = sample_ball(rng, 3, 0.7 * min(g.r_max, 1.0))
    y = sample_sphere(rng, 3)
    R = riemann_curvature_alpha(g, x, y)
    assert np.linalg.norm(R @ y) < 1e-12 * max(1.0, np.linalg.norm(R))
