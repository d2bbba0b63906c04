"""The Fisher-Snedecor FS(alpha, beta) law: density, moments and sampling."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special as sc

from .errors import InvalidParameters, MomentDoesNotExist
from .specfun import ln_beta, ln_gamma

__all__ = [
    "FsParams",
    "LATTICE_TOL",
    "pdf",
    "logpdf",
    "cdf",
    "sf",
    "moment",
    "moment_by_recurrence",
    "mean_var",
    "sample",
    "make_rng",
]

#: distance from the even lattice {4, 6, 8, ...} below which alpha is rejected
LATTICE_TOL = 1e-8


@dataclass(frozen=True)
class FsParams:
    """Parameter triple of the Fisher-Snedecor diffusion.

    ``alpha`` and ``beta`` are the degrees of freedom of the invariant law and
    ``theta`` is the autocorrelation rate.  Regime flags are derived, never
    assumed, so each caller checks the one it needs.
    """

    alpha: float
    beta: float
    theta: float = 1.0

    def __post_init__(self) -> None:
        for name in ("alpha", "beta", "theta"):
            v = getattr(self, name)
            if not isinstance(v, (int, float, np.floating, np.integer)) or not math.isfinite(v):
                raise InvalidParameters(f"{name} must be a finite real number, got {v!r}")
            object.__setattr__(self, name, float(v))
        if self.alpha <= 0:
            raise InvalidParameters(f"alpha must be positive, got {self.alpha}")
        if self.beta <= 2:
            raise InvalidParameters(f"beta must exceed 2, got {self.beta}")
        if self.theta <= 0:
            raise InvalidParameters(f"theta must be positive, got {self.theta}")

    @property
    def ergodic(self) -> bool:
        return self.alpha > 2

    @property
    def finite_variance(self) -> bool:
        return self.beta > 4

    @property
    def covariance_ok(self) -> bool:
        return self.beta > 8

    @property
    def on_even_lattice(self) -> bool:
        """True when alpha sits (within tolerance) on {4, 6, 8, ...}."""
        m = round(self.alpha / 2)
        return m >= 2 and abs(self.alpha - 2 * m) <= LATTICE_TOL

    @property
    def spectral_ok(self) -> bool:
        return self.alpha > 2 and not self.on_even_lattice

    @property
    def mean(self) -> float:
        return self.beta / (self.beta - 2)

    @property
    def n_polynomials(self) -> int:
        """Largest degree ``N`` of a square-integrable orthogonal polynomial.

        ``F_n`` has finite second moment iff ``4n < beta``.  When ``beta / 4`` is
        an integer the top candidate sits exactly at the cutoff and is excluded.
        """
        return math.ceil(self.beta / 4) - 1

    @property
    def cutoff(self) -> float:
        """Bottom of the continuous spectrum, ``theta beta^2 / (8 (beta - 2))``."""
        return self.theta * self.beta**2 / (8 * (self.beta - 2))

    def eigenvalue(self, n: int) -> float:
        return self.theta * n * (self.beta - 2 * n) / (self.beta - 2)

    def with_theta(self, theta: float) -> "FsParams":
        return FsParams(self.alpha, self.beta, theta)


def _log_norm(p: FsParams) -> float:
    return ln_beta(p.alpha / 2, p.beta / 2)


def logpdf(p: FsParams, x):
    """Log density, evaluated without forming the large power factors."""
    x = np.asarray(x, dtype=float)
    a, b = p.alpha, p.beta
    with np.errstate(divide="ignore", invalid="ignore"):
        xs = np.where(x > 0, x, 1.0)
        lse = np.log(a * xs + b)
        val = (a / 2) * (np.log(a * xs) - lse) + (b / 2) * (math.log(b) - lse) - np.log(xs) - _log_norm(p)
        # limit at zero: x^(a/2 - 1) behaviour
        at0 = (a / 2) * math.log(a / b) - _log_norm(p) if a == 2 else (-np.inf if a > 2 else np.inf)
        val = np.where(x > 0, val, np.where(x == 0, at0, -np.inf))
    return val.item() if val.ndim == 0 else val


def pdf(p: FsParams, x):
    """FS(alpha, beta) density.  Zero for ``x < 0``; the finite limit at 0 when alpha = 2."""
    lv = np.asarray(logpdf(p, x))
    out = np.exp(lv)
    return out.item() if out.ndim == 0 else out


def cdf(p: FsParams, x):
    """Distribution function via the regularized incomplete beta function."""
    x = np.maximum(np.asarray(x, dtype=float), 0.0)
    u = p.alpha * x / (p.alpha * x + p.beta)
    out = sc.betainc(p.alpha / 2, p.beta / 2, u)
    return out.item() if np.ndim(out) == 0 else out


def sf(p: FsParams, x):
    """Survival function ``P(X > x)`` without cancellation in the upper tail."""
    x = np.maximum(np.asarray(x, dtype=float), 0.0)
    v = p.beta / (p.alpha * x + p.beta)
    out = sc.betainc(p.beta / 2, p.alpha / 2, v)
    return out.item() if np.ndim(out) == 0 else out


def _check_moment(p: FsParams, n: int) -> None:
    if n < 0 or int(n) != n:
        raise ValueError(f"moment order must be a non-negative integer, got {n!r}")
    if not p.beta > 2 * n:
        raise MomentDoesNotExist(f"E[X^{n}] is infinite unless beta > {2 * n} (beta = {p.beta})")


def moment(p: FsParams, n: int) -> float:
    """Raw moment ``E[X^n]``, finite iff ``beta > 2n``."""
    _check_moment(p, n)
    if n == 0:
        return 1.0
    a2, b2 = p.alpha / 2, p.beta / 2
    lg = n * math.log(p.beta / p.alpha) + ln_gamma(a2 + n) + ln_gamma(b2 - n) - ln_gamma(a2) - ln_gamma(b2)
    return math.exp(lg)


def moment_by_recurrence(p: FsParams, n: int) -> float:
    """Raw moment built up from ``E[X^0] = 1`` with the two-term recurrence.

    The recurrence is the first-order relation

        (2(k+2)/(beta+2) - 1) E[X^(k+1)] = -(beta(alpha-2) + 2 beta (k+1)) / (alpha (beta+2)) E[X^k]

    which is kept deliberately independent of :func:`moment` so that the two
    can be checked against each other.
    """
    _check_moment(p, n)
    a, b = p.alpha, p.beta
    m = 1.0
    for k in range(n):
        lhs = 2 * (k + 2) / (b + 2) - 1
        rhs = -(b * (a - 2) + 2 * b * (k + 1)) / (a * (b + 2))
        m *= rhs / lhs
    return m


def mean_var(p: FsParams) -> tuple[float, float]:
    a, b = p.alpha, p.beta
    if not b > 4:
        raise MomentDoesNotExist(f"the variance is infinite unless beta > 4 (beta = {b})")
    return b / (b - 2), 2 * b**2 * (a + b - 2) / (a * (b - 2) ** 2 * (b - 4))


def make_rng(seed) -> np.random.Generator:
    """PCG64 generator from an integer seed or a ``SeedSequence``.

    Passing an existing ``Generator`` returns it unchanged.
    """
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.PCG64(seed))


def sample(p: FsParams, n: int, seed) -> np.ndarray:
    """Draw ``n`` i.i.d. values as ``(beta/alpha) G1 / G2`` with independent gamma variables."""
    if n < 1:
        raise ValueError("n must be at least 1")
    rng = make_rng(seed)
    g1 = rng.standard_gamma(p.alpha / 2, size=n)
    g2 = rng.standard_gamma(p.beta / 2, size=n)
    return (p.beta / p.alpha) * g1 / g2
