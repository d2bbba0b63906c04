from __future__ import annotations

import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from fsdiffusion.errors import IndexOutOfSystem, TooFewPolynomials
from fsdiffusion.fsdist import FsParams, pdf
from fsdiffusion.fspoly import (
    build_system,
    eval_poly,
    gram_matrix,
    norm_constant,
    quadrature_norm,
    raw_coefficients,
    raw_poly_hypergeometric,
    recurrence_coeffs,
    recurrence_next,
    sturm_liouville_residual,
)

SYSTEMS = [(5.0, 20.0), (3.0, 12.0), (7.0, 30.0)]


def _quad_fs(p, f):
    g = lambda x: f(x) * pdf(p, x)
    return integrate.quad(g, 0, 1, limit=200, epsabs=1e-13)[0] + integrate.quad(g, 1, np.inf, limit=400, epsabs=1e-13)[0]


def test_system_size():
    assert len(build_system(FsParams(5, 20))) == 5  # F_0..F_4; beta/4 = 5 is excluded
    assert len(build_system(FsParams(5, 21))) == 6
    assert len(build_system(FsParams(3, 12))) == 3
    with pytest.raises(TooFewPolynomials):
        build_system(FsParams(5, 4))


def test_f0_is_one():
    f0 = build_system(FsParams(5, 20))[0]
    assert f0.degree == 0 and np.array_equal(f0.coeffs, [1.0])
    assert eval_poly(f0, 3.7) == 1.0


def test_raw_f1_f2_closed_forms():
    a, b = 5.0, 20.0
    p = FsParams(a, b)
    x = np.linspace(0.1, 6, 7)
    f1 = -a * (b - 2) * x + a * b
    f2 = a**2 * (b - 4) * (b - 6) * x**2 - 2 * a * b * (a + 2) * (b - 4) * x + a * b**2 * (a + 2)
    # each raw polynomial is proportional to its closed form; compare after matching the constant term
    r1 = np.polynomial.polynomial.polyval(x, raw_coefficients(p, 1))
    r2 = np.polynomial.polynomial.polyval(x, raw_coefficients(p, 2))
    np.testing.assert_allclose(r1 / r1[0] * f1[0], f1, rtol=1e-13)
    np.testing.assert_allclose(r2 / r2[0] * f2[0], f2, rtol=1e-13)


def test_rodrigues_symbolic():
    # Ft_n proportional to x^{1-a/2}(ax+b)^{(a+b)/2} d^n[x^{a/2-1+n}(ax+b)^{n-(a+b)/2}]
    x = sp.symbols("x", positive=True)
    a, b = sp.Rational(5), sp.Rational(20)
    p = FsParams(5, 20)
    for n in range(1, 5):
        expr = x ** (1 - a / 2) * (a * x + b) ** ((a + b) / 2) * sp.diff(
            x ** (a / 2 - 1 + n) * (a * x + b) ** (n - (a + b) / 2), x, n
        )
        poly = sp.Poly(sp.simplify(expr), x)
        coeffs = [float(c) for c in reversed(poly.all_coeffs())]
        raw = raw_coefficients(p, n)
        np.testing.assert_allclose(np.array(coeffs) / coeffs[-1], raw / raw[-1], rtol=1e-12)


@pytest.mark.parametrize("ab", SYSTEMS)
def test_orthonormal_exact_rule(ab):
    g = gram_matrix(FsParams(*ab))
    np.testing.assert_allclose(g, np.eye(len(g)), atol=1e-10)


@pytest.mark.parametrize("ab", SYSTEMS)
def test_orthonormal_adaptive_quadrature(ab):
    p = FsParams(*ab)
    system = build_system(p)
    for i, fi in enumerate(system):
        for j, fj in enumerate(system[: i + 1]):
            v = _quad_fs(p, lambda x: fi(x) * fj(x))
            assert v == pytest.approx(float(i == j), abs=1e-7)


def test_orthogonality_f2_f3():
    p = FsParams(5, 20)
    s = build_system(p)
    assert _quad_fs(p, lambda x: s[2](x) * s[3](x)) == pytest.approx(0.0, abs=1e-8)


@pytest.mark.parametrize("ab", SYSTEMS)
def test_centering(ab):
    p = FsParams(*ab)
    for f in build_system(p)[1:]:
        assert _quad_fs(p, f) == pytest.approx(0.0, abs=1e-7)


@pytest.mark.parametrize("ab", SYSTEMS + [(2.5, 9.0), (11.0, 41.0)])
def test_closed_form_norm_matches_quadrature(ab):
    p = FsParams(*ab)
    for n in range(p.n_polynomials + 1):
        raw = raw_coefficients(p, n)
        assert abs(norm_constant(p, n)) == pytest.approx(1 / math.sqrt(quadrature_norm(p, raw)), rel=1e-6)


def test_f1_vanishes_at_mean():
    p = FsParams(5, 20)
    assert eval_poly(build_system(p)[1], p.mean) == pytest.approx(0.0, abs=1e-14)


def test_eval_matches_hypergeometric_route():
    p = FsParams(5, 20)
    rng = np.random.default_rng(0)
    xs = rng.uniform(0.01, 8, 10)
    for n in range(p.n_polynomials + 1):
        got = np.polynomial.polynomial.polyval(xs, raw_coefficients(p, n))
        np.testing.assert_allclose(got, raw_poly_hypergeometric(p, n, xs), rtol=1e-10)


def test_degree_and_eigenvalues():
    p = FsParams(5, 21, 0.7)
    system = build_system(p)
    lam = [f.eigenvalue for f in system]
    assert all(f.degree == n and len(f.coeffs) == n + 1 and f.coeffs[-1] != 0 for n, f in enumerate(system))
    assert all(np.diff(lam) > 0)
    assert lam[-1] <= p.cutoff
    assert lam[2] == pytest.approx(0.7 * 2 * (21 - 4) / 19, rel=1e-15)


@given(st.floats(2.1, 15), st.floats(4.5, 45))
def test_eigenvalues_below_cutoff(a, b):
    p = FsParams(a, b)
    system = build_system(p)
    assert all(np.diff([f.eigenvalue for f in system]) > 0)
    assert system[-1].eigenvalue <= p.cutoff + 1e-12


@given(st.floats(2.1, 15), st.floats(4.5, 45))
def test_gram_identity_property(a, b):
    g = gram_matrix(FsParams(a, b))
    np.testing.assert_allclose(g, np.eye(len(g)), atol=1e-8)


@pytest.mark.parametrize("ab", SYSTEMS)
def test_recurrence_reproduces_system(ab):
    p = FsParams(*ab)
    system = build_system(p)
    for n in range(p.n_polynomials):
        nxt = recurrence_next(p, system[n], system[n - 1] if n else None)
        np.testing.assert_allclose(nxt.coeffs, system[n + 1].coeffs, rtol=1e-9, atol=1e-9 * np.max(np.abs(system[n + 1].coeffs)))
    with pytest.raises(IndexOutOfSystem):
        recurrence_next(p, system[-1], system[-2])


def test_recurrence_radicand_positive():
    p = FsParams(5, 20)
    an, bn = recurrence_coeffs(p, 1)
    assert an > 0 and math.isfinite(bn)


def test_recurrence_bn_is_expectation():
    p = FsParams(7, 30)
    system = build_system(p)
    for n in range(len(system)):
        if 2 * n + 1 >= p.beta / 2:
            break
        _, bn = recurrence_coeffs(p, n)
        assert _quad_fs(p, lambda x: x * system[n](x) ** 2) == pytest.approx(bn, rel=1e-8)


@pytest.mark.parametrize("ab", SYSTEMS)
def test_sturm_liouville_residual(ab):
    p = FsParams(*ab, 0.8)
    x = np.linspace(0.05, 10, 20)
    for f in build_system(p):
        r = sturm_liouville_residual(p, f, x)
        assert np.all(np.abs(r) <= 1e-8 * (1 + np.abs(f(x))))
        r2 = sturm_liouville_residual(p, f, x, form="selfadjoint")
        assert np.all(np.abs(r2) <= 1e-8 * p.alpha * (p.beta - 2) / p.theta * (1 + np.abs(f(x))))


def test_sturm_liouville_examples():
    p = FsParams(5, 20)
    s = build_system(p)
    assert sturm_liouville_residual(p, s[0], 2.0) == 0.0
    assert abs(sturm_liouville_residual(p, s[2], 1.0)) <= 1e-8
    assert abs(sturm_liouville_residual(p, s[1], 3.0)) <= 1e-8


def test_sturm_liouville_symbolic():
    x, a, b, th = sp.symbols("x alpha beta theta", positive=True)
    n = 2
    f2 = a**2 * (b - 4) * (b - 6) * x**2 - 2 * a * b * (a + 2) * (b - 4) * x + a * b**2 * (a + 2)
    lam = th * n * (b - 2 * n) / (b - 2)
    gen = 2 * th / (a * (b - 2)) * x * (a * x + b) * sp.diff(f2, x, 2) - th * (x - b / (b - 2)) * sp.diff(f2, x) + lam * f2
    assert sp.simplify(gen) == 0
