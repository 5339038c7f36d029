import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from squarefinsler import numkit as nk
from squarefinsler.betaform import (
    FormField,
    check_closed_conformal,
    conformal_c,
    conformal_factor_data,
    conformal_form,
    conformal_form_upper,
    conformal_norm_sq,
    covariant_derivative,
    parallel_form,
    rs_decompose,
    zero_form,
)
from squarefinsler.numkit import fd_partial
from squarefinsler.riemann import christoffel, conformal_metric, euclidean, sample_ball, space_form


def covariant_derivative_fd(beta, g, x):
    n = g.dim
    db = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            mi = [0] * n
            mi[j] = 1
            db[i, j] = fd_partial(lambda z: beta.value(z)[i], x, mi)
    return db - np.einsum("kij,k->ij", christoffel(g, x), beta.value(x))


PARAMS = [(1.0, 0.3, (0.1, 0.2, 0.05)), (-0.5, 0.7, (0.3, -0.1, 0.2)),
          (0.0, -0.4, (0.2, 0.0, 0.1)), (2.0, 0.0, (0.0, 0.3, 0.0))]


def test_parallel_form_on_flat_space():
    b = covariant_derivative(parallel_form([0.1, 0.2, 0.3]), euclidean(3), [0.4, 0.1, 0.0])
    assert np.all(b == 0)


def test_covariant_derivative_against_finite_differences():
    g = conformal_metric(lambda x: 0.2 * x[0] * x[1], 3)
    beta = FormField(3, lambda x: nk.stack([x[1] ** 2, nk.sin(x[0]), x[0] * x[2] + 0.5]))
    x = np.array([0.3, -0.2, 0.4])
    assert np.allclose(covariant_derivative(beta, g, x), covariant_derivative_fd(beta, g, x), atol=1e-7)


def test_rs_decompose_algebra():
    rng = np.random.default_rng(0)
    n = 3
    bij = rng.standard_normal((n, n))
    m = rng.standard_normal((n, n))
    a = m @ m.T + n * np.eye(n)
    b = rng.standard_normal(n) * 0.2
    y = rng.standard_normal(n)
    nb = rs_decompose(bij, a, b, y)
    assert np.allclose(nb.r + nb.s, bij, atol=1e-15)
    assert np.allclose(nb.r, nb.r.T)
    assert np.allclose(nb.s, -nb.s.T)
    ainv = np.linalg.inv(a)
    bup = ainv @ b
    assert nb.r00 == pytest.approx(y @ bij @ y)
    assert nb.s0 == pytest.approx(bup @ nb.s @ y)
    assert np.allclose(nb.s_up0, ainv @ nb.s @ y)
    assert np.allclose(nb.q, nb.r @ ainv @ nb.s)
    assert np.allclose(nb.t_vec, bup @ nb.s @ ainv @ nb.s)


@pytest.mark.parametrize("mu, k, a", PARAMS)
def test_space_form_forms_are_closed_conformal(mu, k, a):
    h = space_form(mu)
    w = conformal_form(mu, k, a)
    rng = np.random.default_rng(1)
    xs = [sample_ball(rng, 3, 0.6 * h.r_max) for _ in range(6)]
    chk = check_closed_conformal(w, h, xs)
    assert chk.residual < 1e-13
    assert chk.closedness < 1e-13
    for c, x in zip(chk.c, xs):
        assert c == pytest.approx(conformal_c(x, mu, k, np.array(a)), abs=1e-13)


@pytest.mark.parametrize("mu, k, a", PARAMS)
def test_upper_form_and_norm(mu, k, a):
    h = space_form(mu)
    w = conformal_form(mu, k, a)
    x = np.array([0.2, -0.3, 0.1])
    hm, wl = h.value(x), w.value(x)
    assert np.allclose(np.linalg.solve(hm, wl), conformal_form_upper(x, mu, k, a), atol=1e-14)
    assert wl @ np.linalg.solve(hm, wl) == pytest.approx(conformal_norm_sq(x, mu, k, a), rel=1e-13)


@pytest.mark.parametrize("mu, k, a", PARAMS)
def test_conformal_factor_identities(mu, k, a):
    h = space_form(mu)
    w = conformal_form(mu, k, a)
    rng = np.random.default_rng(4)
    fs = []
    for _ in range(5):
        d = conformal_factor_data(w, h, mu, sample_ball(rng, 3, 0.6 * h.r_max))
        assert d.hessian_residual < 1e-12
        assert d.laplacian_residual < 1e-12
        fs.append(d.f)
    # |grad c|^2 + mu c^2 is constant on a space form
    assert np.ptp(fs) < 1e-13
    a = np.asarray(a)
    assert fs[0] == pytest.approx(mu * (k * k + mu * (a @ a)) / 4, abs=1e-13)


def test_generic_form_is_not_conformal():
    h = space_form(0.5)
    beta = FormField(3, lambda x: nk.stack([x[1], 0.1 + 0.0 * x[0], x[0] * x[2]]))
    chk = check_closed_conformal(beta, h, [np.array([0.1, 0.2, 0.3])])
    assert chk.residual > 1e-2


def test_zero_form():
    assert np.all(zero_form(3).value([0.1, 0.2, 0.3]) == 0)


@settings(max_examples=25, deadline=None)
@given(st.floats(-0.9, 1.5), st.floats(-1, 1), st.floats(-0.5, 0.5), st.floats(-0.5, 0.5))
def test_conformal_c_formula_property(mu, k, a0, a1):
    a = (a0, a1, 0.1)
    h = space_form(mu)
    w = conformal_form(mu, k, a)
    x = np.array([0.3, -0.2, 0.1]) * min(h.r_max, 1.0)
    chk = check_closed_conformal(w, h, [x])
    assert chk.residual < 1e-12
    assert chk.c[0] == pytest.approx(conformal_c(x, mu, k, np.array(a)), abs=1e-12)
