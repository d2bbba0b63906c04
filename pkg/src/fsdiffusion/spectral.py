"""Spectral representation of the Fisher-Snedecor transition density.

The generator has a finite discrete spectrum ``lambda_0 < ... < lambda_N``
(eigenfunctions ``F_n``) below the cutoff ``Lambda = theta beta^2 / (8 (beta - 2))``
and an absolutely continuous spectrum ``(Lambda, inf)``.  The transition
density splits accordingly into ``p = p_d + p_c``:

    p_d(x; x0, t) = fs(x) sum_n exp(-lambda_n t) F_n(x0) F_n(x)
    p_c(x; x0, t) = fs(x) B(alpha/2, beta/2) / (2 pi)
                    * int_0^inf exp(-lambda(k) t) |B_lambda(k)|^-2 f1(x0, k) f1(x, k) dk

with ``lambda(k) = Lambda + 2 theta k^2 / (beta - 2)`` and ``B_lambda`` the
connection coefficient of ``f1`` onto the growing solution at infinity.  The
integral over ``k`` is done with composite Gauss-Legendre panels truncated
where the exponential factor drops below ``1e-12``.

Writing the same integrand in the spectral variable ``lambda`` with the
squared gamma-modulus weight, the constant in front differs by the factor
``(beta - 2) / (2 theta)`` from the one obtained by substituting
``d lambda = 4 theta k dk / (beta - 2)`` into a ``k(lambda) d lambda`` measure.
Both normalizations are available (``constant="derived"`` or ``"unscaled"``);
only the derived one satisfies the semigroup property.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Literal

import numpy as np
from scipy import special as sc

from .errors import (
    MomentDoesNotExist,
    OutsideConvergence,
    QuadratureNotConverged,
    SpectralHypothesisViolated,
)
from .fsdist import FsParams, pdf
from .fspoly import FsPolynomial, build_system
from .specfun import ln_beta, hyp2f1

__all__ = [
    "SpectralContext",
    "ContinuationCoeffs",
    "DensityParts",
    "make_context",
    "continuation_coeffs",
    "f1",
    "f1_prime",
    "f4",
    "f4_prime",
    "wronskian",
    "wronskian_closed_form",
    "continuous_weight",
    "k_max_for",
    "continuum_constant_ratio",
    "transition_density",
    "transition_density_parts",
    "transition_kernel",
    "two_dim_density",
    "cross_poly_moment",
    "cross_raw_moments",
]

#: tail tolerance of the k-integral (value of the exponential damping at k_max)
K_TAIL = 1e-12
#: beyond this the double-precision evaluation of f1 is not trusted
K_LIMIT = 45.0
#: series route for f1 is used while 2 k sqrt|z| stays below this and |z| <= 1/2
_SERIES_GROWTH = 18.0

Constant = Literal["derived", "unscaled"]


@dataclass(frozen=True)
class SpectralContext:
    """Parameters plus the discrete spectral data they determine."""

    params: FsParams
    polys: tuple[FsPolynomial, ...] = field(repr=False)

    @property
    def N(self) -> int:
        return len(self.polys) - 1

    @cached_property
    def eigenvalues(self) -> np.ndarray:
        return np.array([self.params.eigenvalue(n) for n in range(self.N + 1)])

    @property
    def cutoff(self) -> float:
        return self.params.cutoff


def make_context(p: FsParams) -> SpectralContext:
    """Validate the spectral hypotheses and build the orthonormal system."""
    if not p.spectral_ok:
        raise SpectralHypothesisViolated(
            f"the spectral representation needs alpha > 2 off the even lattice (alpha = {p.alpha})"
        )
    if p.beta > 4:
        polys = tuple(build_system(p))
    else:
        polys = (FsPolynomial(0, np.array([1.0]), 1.0, 0.0, np.array([1.0])),)
    return SpectralContext(p, polys)


@dataclass(frozen=True)
class ContinuationCoeffs:
    """Roots and connection coefficients of the hypergeometric solutions at ``lambda``."""

    lam: float
    z_plus: complex
    z_minus: complex
    u_plus: complex
    u_minus: complex
    delta: complex
    B_coef: complex
    A_coef: complex

    @property
    def k_of_lambda(self) -> float:
        """``-i delta``, real and positive above the cutoff."""
        return (-1j * self.delta).real


def _delta(p: FsParams, lam: float) -> complex:
    return cmath.sqrt(p.beta**2 / 16 - lam * (p.beta - 2) / (2 * p.theta))


def continuation_coeffs(p: FsParams, lam: float) -> ContinuationCoeffs:
    a2, b4 = p.alpha / 2, p.beta / 4
    d = _delta(p, lam)
    zp, zm = -b4 + d, -b4 - d
    up, um = 1 - a2 + zp, 1 - a2 + zm
    B = sc.gamma(a2) * sc.gamma(2 * d) * sc.rgamma(zp) * sc.rgamma(1 - um)
    A = sc.gamma(a2) * sc.gamma(-2 * d) * sc.rgamma(zm) * sc.rgamma(1 - up)
    return ContinuationCoeffs(lam, zp, zm, up, um, d, complex(B), complex(A))


def _k_of(p: FsParams, lam: float) -> float:
    return math.sqrt(lam * (p.beta - 2) / (2 * p.theta) - p.beta**2 / 16)


def _lambda_of(p: FsParams, k):
    return p.cutoff + 2 * p.theta * np.asarray(k) ** 2 / (p.beta - 2)


def _series_pts(a, b, c, z: np.ndarray) -> np.ndarray:
    """Gauss series with per-point parameters (arrays shaped like ``z``)."""
    term = np.ones(z.shape, dtype=complex)
    total = term.copy()
    run = np.zeros(z.shape, dtype=int)
    for j in range(20_000):
        term = term * ((a + j) * (b + j) / ((c + j) * (j + 1))) * z
        total = total + term
        run = np.where(np.abs(term) <= 1e-16 * np.abs(total), run + 1, 0)
        if j % 4 == 3 and np.all(run >= 2):
            return total
    raise QuadratureNotConverged("continuation series did not converge")  # pragma: no cover


def _inner_pts(a, b, c, w: np.ndarray) -> np.ndarray:
    """``2F1(a, b; c; w)`` for ``-1 <= w < 0`` using the Pfaff transform where ``|w| > 1/2``."""
    out = np.empty(w.shape, dtype=complex)
    near = w >= -0.5
    if np.any(near):
        out[near] = _series_pts(a[near], b[near], c[near], w[near])
    far = ~near
    if np.any(far):
        wf = w[far]
        out[far] = np.exp(-a[far] * np.log1p(-wf)) * _series_pts(a[far], c[far] - b[far], c[far], wf / (wf - 1))
    return out


def _f1_grid(p: FsParams, k: np.ndarray, x: np.ndarray, explicit: bool = False) -> tuple[np.ndarray, float]:
    """``f1`` above the cutoff on the grid ``k`` (rows) by ``x`` (columns) and the max imaginary residue.

    Small ``|z|`` uses the power series, which has real coefficients
    ``((j - beta/4)^2 + k^2) / ((alpha/2 + j)(j + 1))``; elsewhere the ``1/z``
    connection formula is applied with complex gamma factors.  Its two terms
    are complex conjugates; ``explicit=True`` evaluates both so that the
    imaginary residue of the sum is a genuine accuracy diagnostic.
    """
    a2, b4 = p.alpha / 2, p.beta / 4
    K, X = np.meshgrid(np.asarray(k, dtype=float), np.asarray(x, dtype=float), indexing="ij")
    z = -p.alpha * X / p.beta
    out = np.empty(z.shape)
    series = (2 * K * np.sqrt(-z) < _SERIES_GROWTH) & (z >= -0.5)
    if np.any(series):
        zs, ks = z[series], K[series]
        term = np.ones_like(zs)
        total = term.copy()
        run = np.zeros(zs.shape, dtype=int)
        for j in range(20_000):
            term = term * (((j - b4) ** 2 + ks * ks) / ((a2 + j) * (j + 1))) * zs
            total = total + term
            run = np.where(np.abs(term) <= 1e-16 * np.abs(total), run + 1, 0)
            if j % 4 == 3 and np.all(run >= 2):
                break
        else:  # pragma: no cover - guarded by the growth bound above
            raise QuadratureNotConverged("f1 series did not converge")
        out[series] = total
    resid = 0.0
    rest = ~series
    if np.any(rest):
        zr, kr = z[rest], K[rest]
        a = -b4 + 1j * kr
        b = np.conj(a)
        c = np.full(zr.shape, a2, dtype=complex)
        w = 1.0 / zr
        logmz = np.log(-zr)
        t1 = sc.gamma(c) * sc.gamma(b - a) * sc.rgamma(b) * sc.rgamma(c - a) * np.exp(-a * logmz)
        t1 = t1 * _inner_pts(a, 1 - c + a, 1 - b + a, w)
        if explicit:
            t2 = sc.gamma(c) * sc.gamma(a - b) * sc.rgamma(a) * sc.rgamma(c - b) * np.exp(-b * logmz)
            v = t1 + t2 * _inner_pts(b, 1 - c + b, 1 - a + b, w)
        else:
            v = t1 + np.conj(t1)
        out[rest] = v.real
        resid = float(np.max(np.abs(v.imag) / np.maximum(np.abs(v.real), 1e-300)))
    return out, resid


def _f1_above(p: FsParams, k: float, x: np.ndarray) -> tuple[np.ndarray, float]:
    vals, resid = _f1_grid(p, np.array([k]), x, explicit=True)
    return vals[0], resid


def f1(p: FsParams, lam: float, x, *, with_residue: bool = False):
    """Solution ``2F1(z+, z-; alpha/2; -alpha x / beta)`` of the eigen-equation ``G f = -lam f``.

    Regular at 0 with ``f1(0) = 1``.  Above the cutoff the parameters are a
    conjugate pair and the value is real; with ``with_residue=True`` the
    largest relative imaginary part left by complex evaluation is returned
    as well.
    """
    xa = np.asarray(x, dtype=float)
    flat = np.atleast_1d(xa).ravel()
    if np.any(~(flat >= 0)):
        raise OutsideConvergence("f1 is evaluated on x >= 0")
    resid = 0.0
    if lam > p.cutoff:
        vals, resid = _f1_above(p, _k_of(p, lam), flat)
    else:
        d = _delta(p, lam).real
        zp, zm = -p.beta / 4 + d, -p.beta / 4 - d
        vals = np.asarray(hyp2f1(zp, zm, p.alpha / 2, -p.alpha * flat / p.beta), dtype=float)
    vals = vals.reshape(xa.shape)
    out = vals.item() if vals.ndim == 0 else vals
    return (out, resid) if with_residue else out


def _real_roots_s(p: FsParams, s: float) -> tuple[float, float, float]:
    lam = -s
    if lam > p.cutoff:
        raise OutsideConvergence("f4 is provided only below the continuous spectrum")
    d = _delta(p, lam).real
    return d, -p.beta / 4 + d, -p.beta / 4 - d


def f1_prime(p: FsParams, lam: float, x):
    """``d f1 / dx`` below the cutoff via the contiguous derivative of the Gauss function."""
    if lam > p.cutoff:
        raise OutsideConvergence("f1_prime is provided only below the continuous spectrum")
    d = _delta(p, lam).real
    zp, zm, c = -p.beta / 4 + d, -p.beta / 4 - d, p.alpha / 2
    xa = np.asarray(x, dtype=float)
    z = -p.alpha * xa / p.beta
    out = -(p.alpha / p.beta) * (zp * zm / c) * np.asarray(hyp2f1(zp + 1, zm + 1, c + 1, z))
    return out.item() if np.ndim(out) == 0 else out


def f4(p: FsParams, s: float, x):
    """Second fundamental solution ``y^(-z+) 2F1(z+, u+; 1 + 2 delta; -1/y)``, ``y = alpha x / beta``.

    Diagnostic only; ``s`` is the spectral variable (``G f = s f``).  The
    series in ``-1/y`` needs ``alpha x > beta``.  For ``s > 0`` this is the
    decreasing solution.
    """
    d, zp, _ = _real_roots_s(p, s)
    xa = np.asarray(x, dtype=float)
    y = p.alpha * xa / p.beta
    if np.any(~(y > 1)):
        raise OutsideConvergence("f4 needs alpha x > beta")
    up = 1 - p.alpha / 2 + zp
    out = y ** (-zp) * np.asarray(hyp2f1(zp, up, 1 + 2 * d, -1 / y))
    return out.item() if np.ndim(out) == 0 else out


def f4_prime(p: FsParams, s: float, x):
    d, zp, _ = _real_roots_s(p, s)
    xa = np.asarray(x, dtype=float)
    y = p.alpha * xa / p.beta
    if np.any(~(y > 1)):
        raise OutsideConvergence("f4 needs alpha x > beta")
    up, c = 1 - p.alpha / 2 + zp, 1 + 2 * d
    w = -1 / y
    g = np.asarray(hyp2f1(zp, up, c, w))
    dg = (zp * up / c) * np.asarray(hyp2f1(zp + 1, up + 1, c + 1, w))
    # d/dy [y^-z g(-1/y)] = -z y^(-z-1) g + y^(-z) g'(w) / y^2
    dy = -zp * y ** (-zp - 1) * g + y ** (-zp - 2) * dg
    out = (p.alpha / p.beta) * dy
    return out.item() if np.ndim(out) == 0 else out


def wronskian(p: FsParams, s: float, x):
    """``W(f4, f1) / s(x)`` from the computed solutions and derivatives (should not depend on ``x``)."""
    from .diffusion import scale_density

    lam = -s
    w = f4(p, s, x) * np.asarray(f1_prime(p, lam, x)) - np.asarray(f4_prime(p, s, x)) * f1(p, lam, x)
    return w / np.asarray(scale_density(p, x))


def wronskian_closed_form(p: FsParams, s: float) -> float:
    """``2 B delta alpha^(1 - alpha/2) beta^(-beta/2)``."""
    cc = continuation_coeffs(p, -s)
    val = 2 * cc.B_coef * cc.delta * p.alpha ** (1 - p.alpha / 2) * p.beta ** (-p.beta / 2)
    return float(val.real)


# ---------------------------------------------------------------------------
# transition density
# ---------------------------------------------------------------------------


def continuous_weight(p: FsParams, k) -> np.ndarray:
    """``B(alpha/2, beta/2) / (2 |B_lambda(k)|^2)``: the spectral weight per unit ``k``.

    Equals ``2 k^2 |B(a/2, b/2)^(1/2) Gamma(-b/4 + ik) Gamma(a/2 + b/4 + ik) / (Gamma(a/2) Gamma(1 + 2ik))|^2``.
    """
    k = np.asarray(k, dtype=float)
    a2, b4 = p.alpha / 2, p.beta / 4
    lg = (
        ln_beta(a2, 2 * b4)
        + 2 * sc.loggamma(-b4 + 1j * k).real
        + 2 * sc.loggamma(a2 + b4 + 1j * k).real
        - 2 * sc.gammaln(a2)
        - 2 * sc.loggamma(1 + 2j * k).real
    )
    return 2 * k * k * np.exp(lg)


def continuum_constant_ratio(p: FsParams) -> float:
    """Derived over unscaled normalization of the continuous part, ``(beta - 2) / (2 theta)``."""
    return (p.beta - 2) / (2 * p.theta)


def k_max_for(p: FsParams, t: float) -> float:
    """Truncation of the ``k`` integral where ``exp(-2 theta k^2 t / (beta - 2)) = K_TAIL``."""
    return math.sqrt(-math.log(K_TAIL) * (p.beta - 2) / (2 * p.theta * t))


@dataclass(frozen=True)
class _KRule:
    k: np.ndarray
    w: np.ndarray


def _k_rule(p: FsParams, t: float, panels: int, order: int) -> _KRule:
    km = k_max_for(p, t)
    if km > K_LIMIT:
        raise QuadratureNotConverged(
            f"t = {t:g} is too small: the continuous part needs k up to {km:.1f} (limit {K_LIMIT})"
        )
    g, gw = np.polynomial.legendre.leggauss(order)
    # k^2 spacing concentrates panels near 0, where the weight varies fastest
    edges = km * np.linspace(0.0, 1.0, panels + 1) ** 1.5
    half = np.diff(edges) / 2
    mid = (edges[:-1] + edges[1:]) / 2
    k = (mid[:, None] + half[:, None] * g[None, :]).ravel()
    w = (half[:, None] * gw[None, :]).ravel()
    return _KRule(k, w)


def _f1_matrix(p: FsParams, k: np.ndarray, x: np.ndarray) -> np.ndarray:
    return _f1_grid(p, k, x)[0]


def transition_kernel(
    ctx: SpectralContext,
    x,
    x0,
    t: float,
    *,
    constant: Constant = "derived",
    panels: int = 24,
    order: int = 20,
) -> tuple[np.ndarray, np.ndarray]:
    """Discrete and continuous parts as matrices of shape ``(len(x0), len(x))``."""
    p = ctx.params
    if not p.spectral_ok:
        raise SpectralHypothesisViolated(f"alpha = {p.alpha} violates the spectral hypotheses")
    if not t > 0:
        raise ValueError("t must be positive")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    fs_x = np.asarray(pdf(p, x))
    decay = np.exp(-ctx.eigenvalues * t)
    Fx = np.array([f(x) for f in ctx.polys]).reshape(len(ctx.polys), -1)
    F0 = np.array([f(x0) for f in ctx.polys]).reshape(len(ctx.polys), -1)
    pd = ((F0 * decay[:, None]).T @ Fx) * fs_x[None, :]

    rule = _k_rule(p, t, panels, order)
    weight = rule.w * continuous_weight(p, rule.k) * np.exp(-_lambda_of(p, rule.k) * t) / math.pi
    if constant == "unscaled":
        weight = weight / continuum_constant_ratio(p)
    elif constant != "derived":
        raise ValueError(f"unknown constant {constant!r}")
    Gx = _f1_matrix(p, rule.k, x)
    G0 = Gx if x0.shape == x.shape and np.array_equal(x0, x) else _f1_matrix(p, rule.k, x0)
    pc = ((G0 * weight[:, None]).T @ Gx) * fs_x[None, :]
    return pd, pc


@dataclass(frozen=True)
class DensityParts:
    p_d: np.ndarray
    p_c: np.ndarray
    p: np.ndarray
    n_clamped: int


def transition_density_parts(ctx: SpectralContext, x, x0: float, t: float, **kw) -> DensityParts:
    """``p_d``, ``p_c`` and the clamped total on the points ``x`` for one starting value."""
    pd, pc = transition_kernel(ctx, x, [x0], t, **kw)
    pd, pc = pd[0], pc[0]
    tot = pd + pc
    neg = tot < 0
    return DensityParts(pd, pc, np.where(neg, 0.0, tot), int(np.count_nonzero(neg)))


def transition_density(ctx: SpectralContext, x, x0: float, t: float, **kw):
    """``p(x; x0, t)``; tiny negative quadrature noise is clamped to 0."""
    out = transition_density_parts(ctx, x, x0, t, **kw).p
    return out.item() if np.ndim(x) == 0 else out


def two_dim_density(ctx: SpectralContext, x, y, t: float, **kw) -> np.ndarray:
    """Stationary joint density of ``(X_{s+t}, X_s)`` on the grid ``y`` (rows) by ``x`` (columns)."""
    pd, pc = transition_kernel(ctx, x, y, t, **kw)
    fy = np.atleast_1d(np.asarray(pdf(ctx.params, np.asarray(y, dtype=float))))
    return np.maximum(pd + pc, 0.0) * fy[:, None]


def cross_poly_moment(ctx: SpectralContext, i: int, j: int, t: float) -> float:
    """``E[F_i(X_{s+t}) F_j(X_s)] = exp(-lambda_j t) delta_ij``."""
    p = ctx.params
    if not p.beta > 2 * (i + j):
        raise MomentDoesNotExist(f"E[F_{i} F_{j}] needs beta > {2 * (i + j)}")
    if i > ctx.N or j > ctx.N:
        raise MomentDoesNotExist(f"F_{max(i, j)} is outside the system")
    return math.exp(-ctx.eigenvalues[j] * t) if i == j else 0.0


def cross_raw_moments(p: FsParams, t: float) -> tuple[float, float, float]:
    """``E[X_{s+t} X_s]``, ``E[X_{s+t} X_s^2]`` and ``E[X_{s+t}^2 X_s^2]`` in closed form."""
    a, b, th = p.alpha, p.beta, p.theta
    if not b > 8:
        raise MomentDoesNotExist("the mixed fourth moment needs beta > 8")
    e1 = math.exp(-th * t)
    e2 = math.exp(-2 * th * (b - 4) / (b - 2) * t)
    m11 = (2 * b**2 * (a + b - 2) / (a * (b - 4)) * e1 + b**2) / (b - 2) ** 2
    m12 = b**3 * (a + 2) / (a**2 * (b - 2) ** 2 * (b - 4) * (b - 6)) * (4 * (a + b - 2) * e1 + a * (b - 6))
    m22 = (
        8 * b**4 * (a + 2) * (a + b - 2) * (a + b - 4) / (a**3 * (b - 2) * (b - 4) ** 2 * (b - 6) ** 2 * (b - 8)) * e2
        + 8 * b**4 * (a + 2) ** 2 * (a + b - 2) / (a**3 * (b - 2) ** 2 * (b - 4) * (b - 6) ** 2) * e1
        + b**4 * (a + 2) ** 2 / (a**2 * (b - 2) ** 2 * (b - 4) ** 2)
    )
    return m11, m12, m22
