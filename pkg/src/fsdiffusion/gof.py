"""Stein-equation goodness-of-fit tests for the Fisher-Snedecor diffusion.

The Stein equation ``h(x) - E h(X) = G g(x)`` with the diffusion generator
``G`` reduces for ``f_h = g'`` to the first-order equation

    2 theta / (alpha (beta - 2)) x (alpha x + beta) f_h'(x) - theta (x - mean) f_h(x) = h(x) - E h(X)

solved by ``f_h = 2 / (sigma^2 fs) int_0^x (h - E h) fs``.  Taking ``h = F_j``
gives the moment conditions ``E F_j(X) = 0``; their partial sums along a
unit-spaced stationary path are asymptotically independent normals with
variances ``coth(lambda_j / 2)``, which yields chi-square tests.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Literal

import numpy as np
from numpy.polynomial import Polynomial
from scipy import integrate, special as sc

from .diffusion import diffusion_sq
from .errors import IndexOutOfSystem, QuadratureNotConverged, ValidationError
from .fsdist import FsParams, moment, pdf
from .fspoly import FsPolynomial, build_system
from .quadrature import fs_expectation
from .specfun import digamma, reg_inc_gamma_upper

__all__ = [
    "GofResult",
    "stein_solution",
    "stein_residual",
    "moment_condition_check",
    "coth_variance",
    "test_single",
    "test_joint",
    "score",
    "score_scaled_digamma",
    "robustness_matrix",
]

log = logging.getLogger(__name__)

Operator = Literal["generator", "scaled"]
SCHEMA_VERSION = 1


# ---------------------------------------------------------------------------
# Stein solution
# ---------------------------------------------------------------------------


def _operator_factor(p: FsParams, operator: Operator) -> float:
    """Multiplier turning the generator-form solution into the requested normalization.

    ``"scaled"`` is the generator multiplied by ``alpha (beta - 2) / theta``,
    for which ``h(x) = x`` gives the constant solution ``1 / (alpha (2 - beta))``.
    """
    if operator == "generator":
        return 1.0
    if operator == "scaled":
        return p.theta / (p.alpha * (p.beta - 2))
    raise ValueError(f"unknown operator {operator!r}")


def _poly_partial_integrals(p: FsParams, coeffs: np.ndarray, x: np.ndarray) -> tuple[np.ndarray, float]:
    """``int_0^x (h - E h) fs`` for polynomial ``h`` via incomplete beta functions.

    ``int_0^x y^k fs(y) dy = E[X^k] I_u(alpha/2 + k, beta/2 - k)`` with
    ``u = alpha x / (alpha x + beta)``.  Above the mean the complementary
    (upper tail) form is used, ``-int_x^inf``, which avoids cancellation.
    """
    a2, b2 = p.alpha / 2, p.beta / 2
    u = p.alpha * x / (p.alpha * x + p.beta)
    v = p.beta / (p.alpha * x + p.beta)
    lower = x <= p.mean
    mk = [moment(p, k) for k in range(len(coeffs))]
    eh = float(sum(c * m for c, m in zip(coeffs, mk)))
    acc = np.zeros_like(x)
    for k, c in enumerate(coeffs):
        if c == 0:
            continue
        lo = sc.betainc(a2 + k, b2 - k, u)
        hi = sc.betainc(b2 - k, a2 + k, v)
        # (h - Eh) integrates to zero over (0, inf): pick the side without cancellation
        term_lo = c * mk[k] * lo
        term_hi = -c * mk[k] * hi
        acc = acc + np.where(lower, term_lo, term_hi)
    # the constant E h is integrated the same way
    acc = acc - eh * np.where(lower, sc.betainc(a2, b2, u), -sc.betainc(b2, a2, v))
    return acc, eh


def stein_solution(
    p: FsParams,
    h: Callable | Polynomial | FsPolynomial,
    x,
    *,
    operator: Operator = "generator",
    epsrel: float = 1e-13,
):
    """Solution ``f_h(x)`` of the first-order Stein equation.

    Polynomial ``h`` (a :class:`numpy.polynomial.Polynomial` or an
    :class:`FsPolynomial`) uses the exact incomplete-beta route; any other
    callable is integrated by adaptive quadrature, from 0 below the mean and
    from infinity above it.
    """
    xa = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(~(xa > 0)):
        raise ValidationError("x must be positive")
    half_sigma2_fs = 0.5 * np.asarray(diffusion_sq(p, xa)) * np.asarray(pdf(p, xa))
    if isinstance(h, (Polynomial, FsPolynomial)):
        coeffs = np.asarray(h.coef if isinstance(h, Polynomial) else h.coeffs, dtype=float)
        if not p.beta > 2 * (len(coeffs) - 1):
            raise ValidationError("E h(X) is infinite for this polynomial")
        integral, _ = _poly_partial_integrals(p, coeffs, xa)
    else:
        eh = fs_expectation(p, h)
        integral = np.array([_quad_partial(p, h, eh, xi, epsrel) for xi in xa])
    out = integral / half_sigma2_fs * _operator_factor(p, operator)
    return out.item() if np.ndim(x) == 0 else out.reshape(np.shape(x))


def _quad_partial(p: FsParams, h: Callable, eh: float, x: float, epsrel: float) -> float:
    a, b = p.alpha, p.beta

    def g(u: float) -> float:
        if u <= 0.0 or u >= 1.0:
            return 0.0
        y = b * u / (a * (1 - u))
        return (float(h(y)) - eh) * pdf(p, y) * b / (a * (1 - u) ** 2)

    ux = a * x / (a * x + b)
    if x <= p.mean:
        val, err = integrate.quad(g, 0.0, ux, epsrel=epsrel, epsabs=0.0, limit=400)
    else:
        val, err = integrate.quad(g, ux, 1.0, epsrel=epsrel, epsabs=0.0, limit=400)
        val = -val
    if not math.isfinite(val) or err > max(1e-10 * abs(val), 1e-15):
        raise QuadratureNotConverged(f"Stein integral at x = {x:g} did not converge (error {err:g})")
    return val


def stein_residual(p: FsParams, h, f: Callable, x, *, step: float = 1e-4, operator: Operator = "generator"):
    """Residual of the first-order Stein equation for a candidate ``f`` (derivative by central differences)."""
    xa = np.asarray(x, dtype=float)
    eh = fs_expectation(p, h) if callable(h) and not isinstance(h, (Polynomial, FsPolynomial)) else None
    if eh is None:
        coeffs = np.asarray(h.coef if isinstance(h, Polynomial) else h.coeffs, dtype=float)
        eh = float(sum(c * moment(p, k) for k, c in enumerate(coeffs)))
    hs = step * np.maximum(xa, 1.0)
    fp = (np.asarray(f(xa + hs)) - np.asarray(f(xa - hs))) / (2 * hs)
    a, b, th = p.alpha, p.beta, p.theta
    lhs = 2 * th / (a * (b - 2)) * xa * (a * xa + b) * fp - th * (xa - p.mean) * np.asarray(f(xa))
    lhs = lhs / _operator_factor(p, operator)
    return lhs - (np.asarray(h(xa)) - eh)


# ---------------------------------------------------------------------------
# chi-square tests
# ---------------------------------------------------------------------------


@dataclass
class GofResult:
    statistic: float
    dof: int
    p_value: float
    per_poly_z: list[float]
    variance_diag: list[float]
    params_source: str = "known"
    n: int = 0
    spacing: float = 1.0
    warnings: list[str] = field(default_factory=list)
    schema_version: int = SCHEMA_VERSION

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    def reject(self, level: float = 0.05) -> bool:
        return self.p_value < level


def coth_variance(p: FsParams, j: int, spacing: float = 1.0) -> float:
    """Long-run variance ``coth(lambda_j spacing / 2)`` of ``F_j`` along the path."""
    return 1.0 / math.tanh(p.eigenvalue(j) * spacing / 2)


def _system(p: FsParams, m: int) -> list[FsPolynomial]:
    if m < 1:
        raise IndexOutOfSystem("at least one polynomial is required")
    if m > p.n_polynomials:
        raise IndexOutOfSystem(f"only {p.n_polynomials} polynomials exist for beta = {p.beta}")
    return build_system(p)[: m + 1]


def moment_condition_check(p: FsParams, sample, m: int | None = None) -> np.ndarray:
    """Sample means of ``F_1, ..., F_m``; ``m`` is truncated to the system size with a warning."""
    n_max = p.n_polynomials
    if m is None:
        m = n_max
    if m > n_max:
        log.warning("m = %d exceeds the system size %d; truncated", m, n_max)
        m = n_max
    x = np.asarray(sample, dtype=float)
    system = _system(p, m)
    return np.array([np.mean(f(x)) for f in system[1:]])


def _chi2_result(p, x, js, spacing, params_source) -> GofResult:
    x = np.asarray(x, dtype=float)
    n = len(x)
    if n < 2:
        raise ValidationError("need at least two observations")
    system = build_system(p)
    z, var = [], []
    for j in js:
        v = coth_variance(p, j, spacing)
        s = float(np.sum(system[j](x))) / math.sqrt(n)
        z.append(s / math.sqrt(v))
        var.append(v)
    stat = float(sum(zz * zz for zz in z))
    pv = float(reg_inc_gamma_upper(len(js) / 2, stat / 2))
    notes = []
    if params_source != "known":
        notes.append("parameters were estimated; the polynomial moment conditions are not robust to this")
    return GofResult(stat, len(js), pv, z, var, params_source, n, spacing, notes)


def test_single(p: FsParams, sample, j: int, *, spacing: float = 1.0, params_source: str = "known") -> GofResult:
    """One-degree-of-freedom test based on ``F_j``."""
    if not 1 <= j <= p.n_polynomials:
        raise IndexOutOfSystem(f"j = {j} is outside 1..{p.n_polynomials}")
    return _chi2_result(p, sample, [j], spacing, params_source)


def test_joint(p: FsParams, sample, m: int, *, spacing: float = 1.0, params_source: str = "known") -> GofResult:
    """Chi-square test with ``m`` degrees of freedom from ``F_1, ..., F_m``."""
    if not 1 <= m <= p.n_polynomials:
        raise IndexOutOfSystem(f"m = {m} is outside 1..{p.n_polynomials}")
    return _chi2_result(p, sample, list(range(1, m + 1)), spacing, params_source)


# keep pytest from collecting the two test functions above
test_single.__test__ = False
test_joint.__test__ = False


# ---------------------------------------------------------------------------
# score and robustness
# ---------------------------------------------------------------------------


def score(p: FsParams, x) -> np.ndarray:
    """Gradient of ``log fs(x)`` with respect to ``(alpha, beta)``; shape ``(2,) + x.shape``."""
    a, b = p.alpha, p.beta
    x = np.asarray(x, dtype=float)
    s = a * x + b
    da = (b * (1 - x) + s * np.log(a * x / s)) / (2 * s) - 0.5 * (digamma(a / 2) - digamma((a + b) / 2))
    db = (a * (x - 1) + s * np.log(b / s)) / (2 * s) + 0.5 * (digamma((a + b) / 2) - digamma(b / 2))
    return np.array([da, db])


def score_scaled_digamma(p: FsParams, x) -> np.ndarray:
    """Variant with the digamma differences multiplied by ``(alpha x + beta)`` instead of ``1/2``.

    Kept as a diagnostic only: it is not the gradient of the log density.
    """
    a, b = p.alpha, p.beta
    x = np.asarray(x, dtype=float)
    s = a * x + b
    da = (b * (1 - x) + s * np.log(a * x / s)) / (2 * s) - s * (digamma(a / 2) - digamma((a + b) / 2))
    db = (a * (x - 1) + s * np.log(b / s)) / (2 * s) + s * (digamma((a + b) / 2) - digamma(b / 2))
    return np.array([da, db])


def robustness_matrix(p: FsParams, m: int = 2) -> np.ndarray:
    """``E[F_j(X) score_k(X)]`` for ``j = 1..m`` (rows) and ``k`` in ``(alpha, beta)`` (columns)."""
    system = _system(p, m)
    out = np.empty((m, 2))
    for j in range(1, m + 1):
        for k in range(2):
            out[j - 1, k] = fs_expectation(p, lambda y, j=j, k=k: system[j](y) * score(p, y)[k])
    return out
