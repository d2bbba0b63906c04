"""The finite orthonormal polynomial system of the FS(alpha, beta) law.

``F_n`` for ``0 <= n <= N`` are orthonormal in ``L2(fs)`` and are the
eigenfunctions of the diffusion generator with eigenvalues
``lambda_n = theta n (beta - 2n) / (beta - 2)``.  ``N`` is the largest degree
with ``4N < beta``; beyond it the polynomials are no longer square integrable.

The unnormalized polynomial has the terminating hypergeometric form

    Ft_n(x) = (2 beta)^n (alpha/2)_n 2F1(-n, n - beta/2; alpha/2; -alpha x / beta)

(the same polynomial as the Rodrigues construction), and ``F_n = c_n Ft_n``
with ``c_n`` of sign ``(-1)^n`` so that every ``F_n`` has a positive leading
coefficient.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import polynomial as P

from .errors import IndexOutOfSystem, TooFewPolynomials
from .fsdist import FsParams
from .quadrature import fs_polynomial_rule
from .specfun import hyp2f1, ln_beta, ln_gamma

__all__ = [
    "FsPolynomial",
    "system_size",
    "raw_coefficients",
    "raw_poly_hypergeometric",
    "norm_constant",
    "quadrature_norm",
    "build_system",
    "eval_poly",
    "recurrence_coeffs",
    "recurrence_next",
    "sturm_liouville_residual",
    "gram_matrix",
]

log = logging.getLogger(__name__)

#: relative disagreement between closed-form and quadrature norms that triggers a fallback
NORM_TOL = 1e-6


@dataclass(frozen=True)
class FsPolynomial:
    """One orthonormal polynomial ``F_n``, coefficients in ascending order."""

    degree: int
    coeffs: np.ndarray
    norm_const: float
    eigenvalue: float
    raw_coeffs: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        for name in ("coeffs", "raw_coeffs"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if len(self.coeffs) != self.degree + 1 or self.coeffs[-1] == 0:
            raise ValueError("coefficient vector must have length degree + 1 with nonzero leading term")

    def __call__(self, x):
        return eval_poly(self, x)

    def derivative(self, x, order: int = 1):
        out = P.polyval(np.asarray(x, dtype=float), P.polyder(self.coeffs, order)) if order <= self.degree else np.zeros_like(np.asarray(x, dtype=float))
        return out.item() if np.ndim(out) == 0 else out


def system_size(p: FsParams) -> int:
    """Largest degree ``N`` with ``4N < beta``."""
    return p.n_polynomials


def _check_degree(p: FsParams, n: int) -> None:
    if not 0 <= n <= p.n_polynomials:
        raise IndexOutOfSystem(f"degree {n} is outside 0..{p.n_polynomials} for beta = {p.beta}")


def raw_coefficients(p: FsParams, n: int) -> np.ndarray:
    """Ascending monomial coefficients of the unnormalized ``Ft_n``."""
    a, b = p.alpha, p.beta
    scale = (2 * b) ** n * math.prod(a / 2 + k for k in range(n))
    coef = np.empty(n + 1)
    c = scale
    coef[0] = c
    for j in range(n):
        c *= (-n + j) * (n - b / 2 + j) / ((a / 2 + j) * (j + 1)) * (-a / b)
        coef[j + 1] = c
    return coef


def raw_poly_hypergeometric(p: FsParams, n: int, x):
    """``Ft_n(x)`` evaluated through the terminating Gauss function (second route)."""
    a, b = p.alpha, p.beta
    scale = (2 * b) ** n * math.prod(a / 2 + k for k in range(n))
    return scale * np.asarray(hyp2f1(-n, n - b / 2, a / 2, -a * np.asarray(x, dtype=float) / b))


def norm_constant(p: FsParams, n: int) -> float:
    """Closed-form ``c_n`` (with sign ``(-1)^n``) such that ``c_n Ft_n`` has unit norm."""
    a, b = p.alpha, p.beta
    if not b > 4 * n:
        raise IndexOutOfSystem(f"F_{n} is not square integrable for beta = {b}")
    log_prod = sum(math.log(b / 2 + k - 2 * n) for k in range(1, n + 1))
    log_sq = (
        ln_beta(a / 2, b / 2)
        - ln_gamma(n + 1)
        - 2 * n * math.log(2 * b)
        - ln_beta(a / 2 + n, b / 2 - 2 * n)
        - log_prod
    )
    return (-1) ** n * math.exp(0.5 * log_sq)


def quadrature_norm(p: FsParams, raw: np.ndarray) -> float:
    """``E[q(X)^2]`` for a polynomial ``q`` by the exact Gauss-Jacobi rule."""
    deg = len(raw) - 1
    x, w = fs_polynomial_rule(p, 2 * deg)
    return float(np.sum(w * P.polyval(x, raw) ** 2))


def build_system(p: FsParams) -> list[FsPolynomial]:
    """Orthonormal polynomials ``F_0, ..., F_N``.

    The closed-form normalizing constant is checked against an exact
    quadrature of ``Ft_n^2``; a disagreement beyond ``NORM_TOL`` is logged and
    the quadrature value is used instead.
    """
    if not p.beta > 4:
        raise TooFewPolynomials(f"beta must exceed 4 for F_1 to exist (beta = {p.beta})")
    system = []
    for n in range(p.n_polynomials + 1):
        raw = raw_coefficients(p, n)
        c_closed = norm_constant(p, n)
        c_quad = (-1) ** n / math.sqrt(quadrature_norm(p, raw))
        rel = abs(abs(c_closed) - abs(c_quad)) / abs(c_quad)
        if rel > NORM_TOL:
            log.warning("closed-form norm of F_%d differs from quadrature by %.3g; using quadrature", n, rel)
            c = c_quad
        else:
            c = c_closed
        system.append(FsPolynomial(n, c * raw, c, p.eigenvalue(n), raw))
    return system


def eval_poly(f: FsPolynomial, x):
    out = P.polyval(np.asarray(x, dtype=float), f.coeffs)
    return out.item() if np.ndim(out) == 0 else out


def recurrence_coeffs(p: FsParams, n: int) -> tuple[float, float]:
    """Coefficients ``(a_n, b_n)`` of ``x F_n = a_n F_{n+1} + b_n F_n + a_{n-1} F_{n-1}``.

    ``a_n`` is the ratio of consecutive leading coefficients (defined for
    ``n + 1 <= N``); ``b_n = E[X F_n(X)^2]``.
    """
    a, b = p.alpha, p.beta
    bn = b * n * (2 * n + a - 2) / (a * (4 * n - b - 2)) - b * (n + 1) * (2 * n + a) / (a * (4 * n - b + 2))
    if n + 1 > p.n_polynomials:
        return math.nan, bn
    rad = 2 * (n + 1) * (a + 2 * n) * (b - 2 * n) * (a + b - 2 * n - 2) / ((b - 4 * n) * (b - 4 * n - 4))
    an = b / (a * (b - 4 * n - 2)) * math.sqrt(rad)
    return an, bn


def recurrence_next(p: FsParams, f_n: FsPolynomial, f_nm1: FsPolynomial | None) -> FsPolynomial:
    """``F_{n+1}`` from the three-term recurrence."""
    n = f_n.degree
    if n + 1 > p.n_polynomials:
        raise IndexOutOfSystem(f"F_{n + 1} is outside the system (N = {p.n_polynomials})")
    an, bn = recurrence_coeffs(p, n)
    new = P.polysub(P.polymulx(f_n.coeffs), bn * f_n.coeffs)
    if n > 0:
        if f_nm1 is None:
            raise ValueError("F_{n-1} is required for n >= 1")
        a_prev, _ = recurrence_coeffs(p, n - 1)
        new = P.polysub(new, a_prev * np.pad(f_nm1.coeffs, (0, 2)))
    new = np.asarray(new)[: n + 2] / an
    raw = raw_coefficients(p, n + 1)
    return FsPolynomial(n + 1, new, new[-1] / raw[-1], p.eigenvalue(n + 1), raw)


def sturm_liouville_residual(p: FsParams, f: FsPolynomial, x, form: str = "generator"):
    """Residual of the eigen-equation for ``F_n`` at ``x``.

    ``form="generator"``: ``G F + lambda_n F`` with the diffusion generator
    ``G = 2 theta / (alpha (beta - 2)) x (alpha x + beta) d2 - theta (x - mean) d``.

    ``form="selfadjoint"``: the theta-free scaling
    ``2 x (alpha x + beta) F'' + alpha (beta - (beta - 2) x) F' + alpha n (beta - 2n) F``,
    which is the generator equation multiplied by ``alpha (beta - 2) / theta``.
    """
    a, b, th = p.alpha, p.beta, p.theta
    x = np.asarray(x, dtype=float)
    f0 = P.polyval(x, f.coeffs)
    f1 = P.polyval(x, P.polyder(f.coeffs, 1)) if f.degree >= 1 else 0.0 * x
    f2 = P.polyval(x, P.polyder(f.coeffs, 2)) if f.degree >= 2 else 0.0 * x
    n = f.degree
    if form == "generator":
        res = 2 * th / (a * (b - 2)) * x * (a * x + b) * f2 - th * (x - b / (b - 2)) * f1 + p.eigenvalue(n) * f0
    elif form == "selfadjoint":
        res = 2 * x * (a * x + b) * f2 + a * (b - (b - 2) * x) * f1 + a * n * (b - 2 * n) * f0
    else:
        raise ValueError(f"unknown form {form!r}")
    return res.item() if np.ndim(res) == 0 else res


def gram_matrix(p: FsParams, system: list[FsPolynomial] | None = None) -> np.ndarray:
    """``E[F_i F_j]`` for the whole system by the exact polynomial rule."""
    system = build_system(p) if system is None else system
    deg = 2 * system[-1].degree
    x, w = fs_polynomial_rule(p, deg)
    vals = np.array([eval_poly(f, x) for f in system])
    return (vals * w) @ vals.T
