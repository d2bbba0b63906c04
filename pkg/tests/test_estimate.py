from __future__ import annotations

import itertools
import json
import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fsdiffusion.diffusion import SamplePath, iter_ensemble
from fsdiffusion.errors import AcfNonPositive, DegenerateSample, MomentDoesNotExist, MomentInversionFailed, NotPositiveDefinite
from fsdiffusion.estimate import (
    EstimationReport,
    alpha_beta_from_moments,
    asymptotic_cov_ab,
    asymptotic_cov_m,
    choose_lag,
    delta_matrix,
    estimate,
    estimate_alpha_beta,
    estimate_theta,
    inv_sqrt_2x2,
    sample_acf,
    studentize,
)
from fsdiffusion.fsdist import FsParams, mean_var, moment
from fsdiffusion.spectral import cross_raw_moments
from fsdiffusion.studies import simulate_unit_paths

GRID27 = [FsParams(a, b, t) for a, b, t in itertools.product((3, 5, 9), (10, 20, 40), (0.2, 1, 3))]


def _path(values, dt=1.0):
    values = np.asarray(values, dtype=float)
    return SamplePath(dt * np.arange(len(values)), values, dt)


# ---------------------------------------------------------------------------
# point estimators
# ---------------------------------------------------------------------------


def test_sample_acf_constant_path():
    with pytest.raises(DegenerateSample):
        sample_acf(_path(np.full(50, 2.0)), 1)


def test_sample_acf_linear_pairs():
    assert sample_acf(_path(np.arange(1, 101)), 3) == pytest.approx(1.0, abs=1e-12)


@given(st.lists(st.floats(0.01, 100), min_size=10, max_size=60), st.integers(1, 5))
def test_sample_acf_matches_pearson(values, lag):
    x = np.asarray(values)
    if np.ptp(x[:-lag]) < 1e-6 or np.ptp(x[lag:]) < 1e-6:
        return
    assert sample_acf(x, lag) == pytest.approx(np.corrcoef(x[:-lag], x[lag:])[0, 1], abs=1e-7)


def test_sample_acf_lag_validation():
    from fsdiffusion.errors import ValidationError

    with pytest.raises(ValidationError):
        sample_acf(_path(np.arange(1, 11)), 0)
    with pytest.raises(ValidationError):
        sample_acf(_path(np.arange(1, 11)), 10)


def test_sample_acf_fine_grid_band():
    # theta = 0.5, dt = 0.02, n = 2e5, lag 100 (t = 2): the target is exp(-1)
    p = FsParams(5, 20, 0.5)
    X = simulate_unit_paths(p, 20, 200_000, 314, record_dt=0.02)
    rho = sample_acf(X, 100)
    assert abs(rho.mean() - math.exp(-1)) < 0.02
    # a single path scatters by about 0.03, wider than a +-0.02 band
    assert 0.015 < rho.std(ddof=1) < 0.045


def test_estimate_theta_inverts_acf():
    p = FsParams(5, 20, 0.5)
    X = simulate_unit_paths(p, 1, 20_000, 5, record_dt=0.1)[:, 0]
    path = _path(X, 0.1)
    rho = sample_acf(path, 20)
    assert estimate_theta(path, 20) == pytest.approx(-math.log(rho) / 2.0, rel=1e-14)


def test_estimate_theta_flags():
    alt = _path(np.tile([1.0, 3.0], 50))
    with pytest.warns(AcfNonPositive):
        th = estimate_theta(alt, 1)
    assert th == pytest.approx(0.0, abs=1e-12)
    with pytest.warns(AcfNonPositive):
        assert estimate_theta(_path(np.arange(1, 101)), 1) == pytest.approx(0.0, abs=1e-9)


def test_round_trip_examples():
    assert alpha_beta_from_moments(1.5, 6.75) == (pytest.approx(4.0, rel=1e-12), pytest.approx(6.0, rel=1e-12))
    p = FsParams(5, 20)
    m1, m2 = moment(p, 1), moment(p, 2)
    assert m2 == pytest.approx(35 / 18, rel=1e-14)
    a, b = alpha_beta_from_moments(m1, m2)
    assert (a, b) == (pytest.approx(5, abs=1e-9), pytest.approx(20, abs=1e-9))


@given(st.floats(0.2, 100), st.floats(4.1, 200))
def test_round_trip_property(a, b):
    p = FsParams(a, b)
    ah, bh = alpha_beta_from_moments(moment(p, 1), moment(p, 2))
    assert ah == pytest.approx(a, rel=1e-9)
    assert bh == pytest.approx(b, rel=1e-9)


def test_round_trip_central_moment_form():
    p = FsParams(7, 13)
    m1, var = mean_var(p)
    a, _ = alpha_beta_from_moments(m1, var + m1 * m1)
    # same alpha from the variance form 2 m1^2 / (var (2 - m1) - m1^2 (m1 - 1))
    assert a == pytest.approx(2 * m1**2 / (var * (2 - m1) - m1**2 * (m1 - 1)), rel=1e-12)


def test_moment_inversion_errors():
    with pytest.raises(MomentInversionFailed):
        alpha_beta_from_moments(1.0, 3.0)
    with pytest.raises(MomentInversionFailed):
        alpha_beta_from_moments(1.5, 1.0)
    with pytest.raises(DegenerateSample):
        estimate_alpha_beta(_path([1.0]))


def test_choose_lag_targets_unit_product():
    p = FsParams(5, 20, 0.5)
    X = simulate_unit_paths(p, 1, 50_000, 12, record_dt=0.1)[:, 0]
    lag, th1 = choose_lag(X, 0.1)
    assert th1 == pytest.approx(0.5, rel=0.2)
    assert lag * 0.1 * th1 == pytest.approx(1.0, rel=0.1)


# ---------------------------------------------------------------------------
# asymptotic covariance
# ---------------------------------------------------------------------------


def test_cov_m_examples():
    p = FsParams(5, 20, 1.0)
    s = asymptotic_cov_m(p)
    assert s[0, 1] == s[1, 0]
    var = mean_var(p)[1]
    assert s[0, 0] == pytest.approx(var / math.tanh(0.5), rel=1e-14)
    assert s[0, 0] == pytest.approx(1.5354, abs=1e-3)
    far = asymptotic_cov_m(FsParams(5, 20, 60.0))
    assert far[0, 0] == pytest.approx(var, rel=1e-12)
    with pytest.raises(MomentDoesNotExist):
        asymptotic_cov_m(FsParams(5, 8))


def _series_cov(p: FsParams, spacing: float = 1.0) -> np.ndarray:
    # long-run covariance of (X, X^2) summed over lags with the exact cross moments
    m1, m2, m3, m4 = (moment(p, n) for n in range(1, 5))
    s11, s12, s22 = m2 - m1 * m1, m3 - m1 * m2, m4 - m2 * m2
    k = 1
    while True:
        c11, c12, c22 = cross_raw_moments(p, k * spacing)
        d = (c11 - m1 * m1, c12 - m1 * m2, c22 - m2 * m2)
        s11, s12, s22 = s11 + 2 * d[0], s12 + 2 * d[1], s22 + 2 * d[2]
        if math.exp(-p.theta * k * spacing) < 1e-16:
            break
        k += 1
    return np.array([[s11, s12], [s12, s22]])


@pytest.mark.parametrize("p", GRID27[::4])
def test_cov_m_equals_lag_series(p):
    np.testing.assert_allclose(asymptotic_cov_m(p), _series_cov(p), rtol=1e-10)


def test_cov_m_beta_squared_cross_term_differs_by_beta():
    p = FsParams(5, 20, 1.0)
    ratio = asymptotic_cov_m(p)[0, 1] / asymptotic_cov_m(p, variant="beta_squared")[0, 1]
    assert ratio == pytest.approx(p.beta, rel=1e-14)
    assert asymptotic_cov_m(p)[0, 1] == pytest.approx(_series_cov(p)[0, 1], rel=1e-10)


def test_cov_m_spacing_scales_theta():
    p = FsParams(5, 20, 0.5)
    np.testing.assert_allclose(asymptotic_cov_m(p, spacing=0.2), asymptotic_cov_m(p.with_theta(0.1)), rtol=1e-14)
    np.testing.assert_allclose(asymptotic_cov_m(p, spacing=0.2), _series_cov(p, 0.2), rtol=1e-9)


@given(st.floats(0.5, 30), st.floats(4.5, 80))
def test_delta_matrix_is_jacobian(a, b):
    p = FsParams(a, b)
    m = np.array([moment(p, 1), moment(p, 2)])
    jac = np.empty((2, 2))
    for j in range(2):
        h = 1e-6 * m[j]
        up, dn = m.copy(), m.copy()
        up[j] += h
        dn[j] -= h
        jac[:, j] = (np.array(alpha_beta_from_moments(*up)) - np.array(alpha_beta_from_moments(*dn))) / (2 * h)
    np.testing.assert_allclose(delta_matrix(p), jac, rtol=1e-5, atol=1e-7 * np.abs(jac).max())


@pytest.mark.parametrize("variant", ["corrected", "beta_squared"])
def test_closed_form_matches_product_route(variant):
    for p in GRID27:
        closed = asymptotic_cov_ab(p, variant=variant)
        product = asymptotic_cov_ab(p, route="product", variant=variant)
        np.testing.assert_allclose(closed, product, rtol=1e-9)


def test_sigma22_example():
    s = asymptotic_cov_ab(FsParams(5, 20, 1.0))
    assert s[1, 1] == pytest.approx(400 * 324 * 23 / (10 * 16) / math.tanh(0.5), rel=1e-13)
    assert s[1, 1] == pytest.approx(40314.45, abs=0.01)


def test_positive_definite_on_grid():
    for p in GRID27:
        s = asymptotic_cov_ab(p)
        assert s[0, 0] > 0 and np.linalg.det(s) > 0


@given(st.floats(0.1, 1e3), st.floats(0.1, 1e3), st.floats(-0.99, 0.99))
def test_inv_sqrt_2x2(sa, sc, r):
    m = np.array([[sa * sa, r * sa * sc], [r * sa * sc, sc * sc]])
    w = inv_sqrt_2x2(m)
    np.testing.assert_allclose(w, w.T, atol=1e-12 * np.abs(w).max())
    np.testing.assert_allclose(w @ m @ w, np.eye(2), atol=1e-8)


def test_inv_sqrt_rejects():
    with pytest.raises(NotPositiveDefinite):
        inv_sqrt_2x2(np.array([[1.0, 2.0], [2.0, 1.0]]))
    with pytest.raises(NotPositiveDefinite):
        inv_sqrt_2x2(np.array([[1.0, 0.5], [0.4, 1.0]]))


# ---------------------------------------------------------------------------
# report
# ---------------------------------------------------------------------------


def test_estimate_report():
    p = FsParams(5, 20, 1.0)
    X = simulate_unit_paths(p, 1, 100_000, 77)[:, 0]
    rep = estimate(_path(X))
    assert rep.schema_version == 1 and rep.n_effective == 100_000
    assert rep.ci_alpha[0] < rep.alpha_hat < rep.ci_alpha[1]
    assert rep.ci_beta[0] < rep.beta_hat < rep.ci_beta[1]
    assert rep.theta_hat == pytest.approx(1.0, abs=0.1)
    cov = rep.cov_matrix
    assert cov[0, 1] == cov[1, 0]
    d = json.loads(rep.to_json())
    assert set(d) == {f for f in EstimationReport.__dataclass_fields__}
    np.testing.assert_allclose(studentize(rep, (rep.alpha_hat, rep.beta_hat)), 0.0)


def test_estimate_without_covariance():
    # a heavy-tailed FS(5, 7) sample gives beta_hat near 7 <= 8
    p = FsParams(5, 7, 1.0)
    X = simulate_unit_paths(p, 1, 50_000, 3)[:, 0]
    rep = estimate(_path(X), lag_steps=1)
    assert rep.beta_hat <= 8
    assert rep.cov_asymptotic is None and rep.ci_alpha is None
    assert any("covariance" in w for w in rep.warnings)
    d = json.loads(rep.to_json())
    assert d["cov_asymptotic"] is None and d["ci_beta"] is None
    with pytest.raises(NotPositiveDefinite):
        rep.cov_matrix


def test_estimate_level_validation():
    from fsdiffusion.errors import ValidationError

    with pytest.raises(ValidationError):
        estimate(_path(np.arange(1.0, 50.0)), level=1.5)
