from __future__ import annotations

import json
import logging
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from numpy.polynomial import Polynomial
from scipy import integrate, stats

from fsdiffusion.errors import IndexOutOfSystem, ValidationError
from fsdiffusion.fsdist import FsParams, moment, pdf, sample
from fsdiffusion.fspoly import build_system
from fsdiffusion.gof import (
    GofResult,
    coth_variance,
    moment_condition_check,
    robustness_matrix,
    score,
    score_scaled_digamma,
    stein_residual,
    stein_solution,
    test_joint as joint_test,
    test_single as single_test,
)
from fsdiffusion.studies import matched_mean_gamma, simulate_unit_paths

P = FsParams(5, 20, 1.0)
XS = np.array([0.05, 0.3, 0.7, 1.0, 1.3, 2.0, 3.5, 6.0, 12.0])


# ---------------------------------------------------------------------------
# Stein solution
# ---------------------------------------------------------------------------


def test_identity_gives_constant_with_scaled_operator():
    f = stein_solution(P, Polynomial([0.0, 1.0]), XS, operator="scaled")
    np.testing.assert_allclose(f, 1 / (P.alpha * (2 - P.beta)), rtol=1e-12)


@pytest.mark.parametrize("ab", [(3, 12), (7, 30), (2.5, 9.0)])
def test_identity_constant_other_params(ab):
    p = FsParams(*ab, theta=0.7)
    f = stein_solution(p, Polynomial([0.0, 1.0]), XS, operator="scaled")
    np.testing.assert_allclose(f, 1 / (p.alpha * (2 - p.beta)), rtol=1e-12)
    g = stein_solution(p, Polynomial([0.0, 1.0]), XS)
    np.testing.assert_allclose(g, -1 / p.theta, rtol=1e-12)


def test_constant_h_gives_zero():
    F0 = build_system(P)[0]
    np.testing.assert_allclose(stein_solution(P, F0, XS), 0.0, atol=1e-15)


@pytest.mark.parametrize("name", ["identity", "F1", "square"])
def test_stein_residual(name):
    F = build_system(P)
    h = {"identity": Polynomial([0.0, 1.0]), "F1": F[1], "square": Polynomial([0.0, 0.0, 1.0])}[name]
    f = lambda x: stein_solution(P, h, x)
    res = stein_residual(P, h, f, XS)
    scale = np.maximum(1.0, np.abs(h(XS)))
    assert np.max(np.abs(res) / scale) <= 1e-6


@pytest.mark.filterwarnings("ignore::scipy.integrate.IntegrationWarning")
def test_polynomial_and_quadrature_routes_agree():
    # this h makes f_h vanish at x = 2, hence the absolute floor
    h = Polynomial([0.3, -1.0, 0.25])
    exact = stein_solution(P, h, XS)
    quad = stein_solution(P, lambda y: h(y), XS)
    np.testing.assert_allclose(quad, exact, rtol=1e-9, atol=1e-14)


def test_stein_solution_nonpolynomial_residual():
    h = np.log
    res = stein_residual(P, h, lambda x: stein_solution(P, h, x), XS[1:-1])
    assert np.max(np.abs(res)) < 1e-6


def test_stein_solution_matches_direct_integral():
    # f_h = 2 / (sigma^2 fs) int_0^x (h - E h) fs with scipy.quad on the density
    h = lambda y: y * y
    eh = moment(P, 2)
    for x in (0.4, 1.0, 2.5):
        val, _ = integrate.quad(lambda y: (h(y) - eh) * pdf(P, y), 0, x, epsabs=0, epsrel=1e-12)
        s2 = 4 * P.theta * x * (P.alpha * x + P.beta) / (P.alpha * (P.beta - 2))
        assert stein_solution(P, Polynomial([0, 0, 1.0]), x) == pytest.approx(2 * val / (s2 * pdf(P, x)), rel=1e-9)


def test_stein_solution_validation():
    with pytest.raises(ValidationError):
        stein_solution(P, Polynomial([0.0, 1.0]), -1.0)
    with pytest.raises(ValidationError):
        stein_solution(FsParams(5, 6), Polynomial([0, 0, 0, 0, 1.0]), 1.0)


# ---------------------------------------------------------------------------
# chi-square tests
# ---------------------------------------------------------------------------


def test_coth_variance():
    assert coth_variance(P, 1) == pytest.approx(1 / math.tanh(0.5), rel=1e-15)
    lam2 = P.eigenvalue(2)
    assert coth_variance(P, 2, spacing=0.5) == pytest.approx(1 / math.tanh(lam2 / 4), rel=1e-15)


def test_coth_variance_matches_lag_sum():
    # sum_k E[F_j(X_0) F_j(X_k)] over all integer lags = 1 + 2 sum exp(-lambda k)
    for j in (1, 2, 3):
        lam = P.eigenvalue(j)
        series = 1 + 2 * sum(math.exp(-lam * k) for k in range(1, 400))
        assert coth_variance(P, j) == pytest.approx(series, rel=1e-12)


def test_joint_m1_equals_single():
    x = sample(P, 5000, 4)
    a, b = single_test(P, x, 1), joint_test(P, x, 1)
    assert a.statistic == b.statistic and a.p_value == b.p_value


def test_joint_statistic_is_sum_of_squares():
    x = sample(P, 3000, 8)
    r = joint_test(P, x, 3)
    assert r.dof == 3
    assert r.statistic == pytest.approx(sum(z * z for z in r.per_poly_z), rel=1e-14)
    assert r.p_value == pytest.approx(stats.chi2.sf(r.statistic, 3), rel=1e-10)
    parsed = json.loads(r.to_json())
    assert parsed["schema_version"] == 1 and set(parsed) == set(GofResult.__dataclass_fields__)


def test_index_errors():
    x = sample(P, 100, 1)
    with pytest.raises(IndexOutOfSystem):
        joint_test(P, x, P.n_polynomials + 1)
    with pytest.raises(IndexOutOfSystem):
        single_test(P, x, 0)
    with pytest.raises(ValidationError):
        joint_test(P, [1.0], 1)


def test_estimated_parameters_note():
    r = joint_test(P, sample(P, 500, 2), 2, params_source="estimated")
    assert r.params_source == "estimated" and r.warnings


def test_moment_condition_check(caplog):
    x = sample(P, 200_000, 11)
    means = moment_condition_check(P, x, 2)
    assert means.shape == (2,)
    assert np.all(np.abs(means) < 5 * np.sqrt(1 / 200_000))
    with caplog.at_level(logging.WARNING):
        means = moment_condition_check(P, x, 9)
    assert len(means) == P.n_polynomials and "truncated" in caplog.text


def test_size_small_scale():
    X = simulate_unit_paths(P, 300, 3000, 21)
    pv = np.array([joint_test(P, X[:, i], 2).p_value for i in range(X.shape[1])])
    rate = np.mean(pv < 0.05)
    assert abs(rate - 0.05) < 4 * math.sqrt(0.05 * 0.95 / 300)


def test_power_small_scale():
    rej = [joint_test(P, matched_mean_gamma(P, 10_000, s), 2).reject() for s in range(40)]
    assert np.mean(rej) >= 0.8


# ---------------------------------------------------------------------------
# score
# ---------------------------------------------------------------------------


@given(st.floats(0.5, 40), st.floats(2.5, 80), st.floats(0.01, 50))
def test_score_is_log_density_gradient(a, b, x):
    p = FsParams(a, b)
    ha, hb = 1e-5 * a, 1e-5 * b
    fd_a = (stats.f.logpdf(x, a + ha, b) - stats.f.logpdf(x, a - ha, b)) / (2 * ha)
    fd_b = (stats.f.logpdf(x, a, b + hb) - stats.f.logpdf(x, a, b - hb)) / (2 * hb)
    s = score(p, x)
    assert s[0] == pytest.approx(fd_a, abs=1e-5 * max(1.0, abs(fd_a)))
    assert s[1] == pytest.approx(fd_b, abs=1e-5 * max(1.0, abs(fd_b)))


def test_score_has_zero_mean():
    for k in range(2):
        val, _ = integrate.quad(lambda y: score(P, y)[k] * pdf(P, y), 0, np.inf, epsabs=1e-13, limit=200)
        assert abs(val) < 1e-10


def test_score_scaled_digamma_is_not_a_gradient():
    x = 1.7
    fd = (stats.f.logpdf(x, 5 + 1e-5, 20) - stats.f.logpdf(x, 5 - 1e-5, 20)) / 2e-5
    assert abs(score_scaled_digamma(P, x)[0] - fd) > 1.0


def test_robustness_matrix():
    r = robustness_matrix(P, 2)
    assert r.shape == (2, 2)
    assert np.max(np.abs(r)) > 1e-3
    F = build_system(P)
    for j in (1, 2):
        for k in range(2):
            val, _ = integrate.quad(lambda y: F[j](y) * score(P, y)[k] * pdf(P, y), 0, np.inf, epsabs=1e-13, limit=200)
            assert r[j - 1, k] == pytest.approx(val, abs=1e-9)
