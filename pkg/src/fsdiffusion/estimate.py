"""Method-of-moments estimation for the Fisher-Snedecor diffusion.

``theta`` comes from the lag-``t`` sample autocorrelation, ``(alpha, beta)``
from the first two sample moments.  The asymptotic covariance of
``sqrt(n) (alpha_hat - alpha, beta_hat - beta)`` is available in closed form
and, independently, as the matrix product ``D Sigma D^T`` of the delta-method
Jacobian with the covariance of the sample moments.

All covariances assume unit-spaced observations; a path with spacing ``dt``
is handled by replacing ``theta`` with ``theta * dt`` in the hyperbolic
cotangent factors.

``variant="beta_squared"`` gives closed forms in which the cross covariance
of the two sample moments carries ``beta^2`` instead of the correct
``beta^3``.  It is kept only so that the difference can be demonstrated
against simulation.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import asdict, dataclass, field
from typing import Literal

import numpy as np
from scipy import stats

from .diffusion import SamplePath
from .errors import (
    AcfNonPositive,
    DegenerateSample,
    MomentDoesNotExist,
    MomentInversionFailed,
    NotPositiveDefinite,
    ValidationError,
)
from .fsdist import FsParams

__all__ = [
    "EstimationReport",
    "sample_acf",
    "estimate_theta",
    "estimate_alpha_beta",
    "alpha_beta_from_moments",
    "choose_lag",
    "asymptotic_cov_m",
    "delta_matrix",
    "asymptotic_cov_ab",
    "inv_sqrt_2x2",
    "studentize",
    "estimate",
    "SCHEMA_VERSION",
]

SCHEMA_VERSION = 1
Variant = Literal["corrected", "beta_squared"]


def _coth(x: float) -> float:
    return 1.0 / math.tanh(x)


def _values(path_or_values) -> np.ndarray:
    if isinstance(path_or_values, SamplePath):
        return path_or_values.values
    return np.asarray(path_or_values, dtype=float)


# ---------------------------------------------------------------------------
# point estimators
# ---------------------------------------------------------------------------


def sample_acf(path, lag_steps: int):
    """Pearson correlation of the pairs ``(X_i, X_{i+lag})``.

    Means and variances are computed separately for the leading and the
    lagged subsample.  Accepts a :class:`SamplePath` or an array whose first
    axis is time (extra axes are independent paths).
    """
    x = _values(path)
    n = x.shape[0]
    if not 1 <= lag_steps < n - 1:
        raise ValidationError(f"lag_steps must be in [1, {n - 2}], got {lag_steps}")
    lead, lagd = x[:-lag_steps], x[lag_steps:]
    ml, mg = lead.mean(axis=0), lagd.mean(axis=0)
    vl = (lead * lead).mean(axis=0) - ml * ml
    vg = (lagd * lagd).mean(axis=0) - mg * mg
    if np.any(vl <= 0) or np.any(vg <= 0):
        raise DegenerateSample("a subsample has zero variance")
    cov = (lead * lagd).mean(axis=0) - ml * mg
    r = cov / np.sqrt(vl * vg)
    return r.item() if np.ndim(r) == 0 else r


def estimate_theta(path, lag_steps: int, dt: float | None = None):
    """``theta_hat = -log|rho_hat(t)| / t`` with ``t = lag_steps * dt``."""
    if dt is None:
        if not isinstance(path, SamplePath):
            raise ValidationError("dt is required when passing raw values")
        dt = path.spacing
    rho = np.asarray(sample_acf(path, lag_steps))
    if np.any(rho < 0):
        warnings.warn("negative sample autocorrelation; its absolute value is used", AcfNonPositive, stacklevel=2)
    r = np.abs(rho)
    if np.any(r >= 1):
        warnings.warn("sample autocorrelation is 1; theta_hat set to 0", AcfNonPositive, stacklevel=2)
    with np.errstate(divide="ignore"):
        th = -np.log(np.minimum(r, 1.0)) / (lag_steps * dt)
    return th.item() if th.ndim == 0 else th


def alpha_beta_from_moments(m1, m2):
    """Invert the first two moments: ``beta = 2 m1 / (m1 - 1)``, ``alpha = 2 m1^2 / (m2 (2 - m1) - m1^2)``."""
    m1 = np.asarray(m1, dtype=float)
    m2 = np.asarray(m2, dtype=float)
    den = m2 * (2 - m1) - m1 * m1
    if np.any(m1 <= 1) or np.any(den <= 0):
        raise MomentInversionFailed("the sample moments are inconsistent with an FS(alpha > 0, beta > 2) law")
    a = 2 * m1 * m1 / den
    b = 2 * m1 / (m1 - 1)
    if a.ndim == 0:
        return a.item(), b.item()
    return a, b


def estimate_alpha_beta(path) -> tuple:
    """``(alpha_hat, beta_hat, m1, m2)`` from a path or an array (time on axis 0)."""
    x = _values(path)
    if x.shape[0] < 2:
        raise DegenerateSample("need at least two observations")
    m1 = x.mean(axis=0)
    m2 = (x * x).mean(axis=0)
    a, b = alpha_beta_from_moments(m1, m2)
    if np.ndim(m1) == 0:
        return a, b, float(m1), float(m2)
    return a, b, m1, m2


def choose_lag(path, dt: float, target: float = 1.0) -> tuple[int, float]:
    """Two-pass lag choice aiming at ``theta_hat * t ~ target``.

    The first pass doubles the lag until the sample autocorrelation drops
    below 0.5 and estimates ``theta`` there; the second pass uses the lag
    with ``theta_hat * lag * dt`` closest to ``target``.
    """
    x = _values(path)
    n = x.shape[0]
    lag = 1
    while lag < n // 4 and sample_acf(x, lag) > 0.5:
        lag *= 2
    th1 = -math.log(max(abs(sample_acf(x, lag)), 1e-300)) / (lag * dt)
    final = int(round(target / (th1 * dt))) if th1 > 0 else lag
    return max(1, min(final, n // 4)), th1


# ---------------------------------------------------------------------------
# asymptotic covariance
# ---------------------------------------------------------------------------


def _require_beta8(p: FsParams) -> None:
    if not p.beta > 8:
        raise MomentDoesNotExist(f"the asymptotic covariance needs beta > 8 (beta = {p.beta})")


def asymptotic_cov_m(p: FsParams, spacing: float = 1.0, variant: Variant = "corrected") -> np.ndarray:
    """Asymptotic covariance of ``sqrt(n) (m1_bar, m2_bar)`` for observations ``spacing`` apart."""
    _require_beta8(p)
    a, b = p.alpha, p.beta
    th = p.theta * spacing
    c1 = _coth(th / 2)
    s11 = 2 * b**2 * (a + b - 2) / (a * (b - 2) ** 2 * (b - 4)) * c1
    power = 3 if variant == "corrected" else 2
    if variant not in ("corrected", "beta_squared"):
        raise ValueError(f"unknown variant {variant!r}")
    s12 = 4 * b**power * (a + 2) * (a + b - 2) / (a**2 * (b - 2) ** 2 * (b - 4) * (b - 6)) * c1
    lam2 = 2 * th * (b - 4) / (b - 2)
    s22 = (
        b**4 * (a + 2) * ((a + 4) * (a + 6) * (b - 2) * (b - 4) - a * (a + 2) * (b - 6) * (b - 8))
        / (a**3 * (b - 2) ** 2 * (b - 4) ** 2 * (b - 6) * (b - 8))
        + 16 * b**4 * (a + 2) * (a + b - 2) * (a + b - 4)
        / (a**3 * (b - 2) * (b - 4) ** 2 * (b - 6) ** 2 * (b - 8))
        / math.expm1(lam2)
        + 16 * b**4 * (a + 2) ** 2 * (a + b - 2) / (a**3 * (b - 2) ** 2 * (b - 4) * (b - 6) ** 2) / math.expm1(th)
    )
    return np.array([[s11, s12], [s12, s22]])


def delta_matrix(p: FsParams) -> np.ndarray:
    """Jacobian of ``(m1, m2) -> (alpha, beta)`` at the population moments."""
    a, b = p.alpha, p.beta
    return np.array(
        [
            [a * (a + 2) * (b - 2) * (3 * b - 8) / (2 * b * (b - 4)), -(a**2) * (b - 2) * (b - 4) / (2 * b**2)],
            [-((b - 2) ** 2) / 2, 0.0],
        ]
    )


def _closed_form_ab(p: FsParams, spacing: float, variant: Variant) -> np.ndarray:
    a, b = p.alpha, p.beta
    th = p.theta * spacing
    c1 = _coth(th / 2)
    c2 = _coth(th * (b - 4) / (b - 2))
    o22 = b**2 * (b - 2) ** 2 * (a + b - 2) / (2 * a * (b - 4)) * c1
    if variant == "corrected":
        o11 = (
            a * (a + 2) ** 2 * (b - 8) ** 2 * (b - 2) ** 2 * (a + b - 2) / (2 * (b - 6) ** 2 * (b - 4) ** 3) * c1
            + 2 * a * (a + 2) * (b - 2) * (a + b - 4) * (a + b - 2) / ((b - 8) * (b - 6) ** 2) * c2
        )
        o12 = -b * (a + 2) * (b - 8) * (b - 2) ** 2 * (a + b - 2) / (2 * (b - 6) * (b - 4) ** 2) * c1
    elif variant == "beta_squared":
        poly = -3072 + b * (6528 + b * (-4736 + b * (1548 + b * (-232 + 13 * b))))
        o11 = (
            a * (a + 2) * (b - 2) * (a + b - 2) / (2 * b * (b - 4) ** 3 * (b - 6) ** 2)
            * ((a + 2) * poly / (b - 2) * c1 + 4 * b * (b - 4) ** 3 * (a + b - 4) / (b - 8) * c2)
        )
        o12 = -(a + 2) * (b - 2) * (a + b - 2) * (b * (b - 4) * (3 * b - 16) - 32) / (2 * (b - 4) ** 2 * (b - 6)) * c1
    else:
        raise ValueError(f"unknown variant {variant!r}")
    return np.array([[o11, o12], [o12, o22]])


def asymptotic_cov_ab(
    p: FsParams,
    spacing: float = 1.0,
    *,
    route: Literal["closed", "product"] = "closed",
    variant: Variant = "corrected",
) -> np.ndarray:
    """Asymptotic covariance of ``sqrt(n) (alpha_hat - alpha, beta_hat - beta)``.

    ``route="closed"`` evaluates the closed-form entries, ``route="product"``
    forms ``D Sigma D^T``; the two are independent computations of the same
    matrix.
    """
    _require_beta8(p)
    if route == "closed":
        return _closed_form_ab(p, spacing, variant)
    if route == "product":
        D = delta_matrix(p)
        S = asymptotic_cov_m(p, spacing, variant)
        return D @ S @ D.T
    raise ValueError(f"unknown route {route!r}")


def inv_sqrt_2x2(m: np.ndarray) -> np.ndarray:
    """Symmetric inverse square root of a 2x2 positive definite matrix."""
    a, b, c = float(m[0, 0]), float(m[0, 1]), float(m[1, 1])
    if abs(m[0, 1] - m[1, 0]) > 1e-12 * max(abs(a), abs(c), 1.0):
        raise NotPositiveDefinite("matrix is not symmetric")
    tr, det = a + c, a * c - b * b
    if not (det > 0 and tr > 0):
        raise NotPositiveDefinite(f"matrix is not positive definite (det = {det:g})")
    disc = math.hypot((a - c) / 2, b)
    l1, l2 = tr / 2 + disc, tr / 2 - disc
    if l2 <= 0:
        # rounding pushed the small eigenvalue through zero
        l2 = det / l1
    if disc == 0:
        v = np.eye(2)
    else:
        # eigenvector of l1 in a form stable for either sign of (a - c)
        if a >= c:
            v1 = np.array([l1 - c, b])
        else:
            v1 = np.array([b, l1 - a])
        v1 /= np.hypot(*v1)
        v = np.column_stack([v1, [-v1[1], v1[0]]])
    return v @ np.diag([l1**-0.5, l2**-0.5]) @ v.T


# ---------------------------------------------------------------------------
# report
# ---------------------------------------------------------------------------


@dataclass
class EstimationReport:
    theta_hat: float
    alpha_hat: float
    beta_hat: float
    m1: float
    m2: float
    lag_t: float
    lag_steps: int
    spacing: float
    n_effective: int
    level: float
    cov_asymptotic: list | None = None
    ci_alpha: tuple[float, float] | None = None
    ci_beta: tuple[float, float] | None = None
    warnings: list[str] = field(default_factory=list)
    schema_version: int = SCHEMA_VERSION

    def to_json(self) -> str:
        d = asdict(self)
        for k in ("ci_alpha", "ci_beta"):
            if d[k] is not None:
                d[k] = list(d[k])
        return json.dumps(d, indent=2, sort_keys=True)

    @property
    def cov_matrix(self) -> np.ndarray:
        if self.cov_asymptotic is None:
            raise NotPositiveDefinite("no covariance available (beta_hat <= 8)")
        return np.array(self.cov_asymptotic)


def estimate(
    path: SamplePath,
    lag_steps: int | None = None,
    level: float = 0.95,
    variant: Variant = "corrected",
) -> EstimationReport:
    """Full estimation pipeline: ``theta_hat``, ``(alpha_hat, beta_hat)``, covariance and intervals."""
    if not 0 < level < 1:
        raise ValidationError("level must lie in (0, 1)")
    dt = path.spacing
    notes: list[str] = []
    if lag_steps is None:
        lag_steps, _ = choose_lag(path, dt)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", AcfNonPositive)
        theta_hat = estimate_theta(path, lag_steps, dt)
    notes.extend(str(w.message) for w in caught)
    a, b, m1, m2 = estimate_alpha_beta(path)
    n = len(path)
    rep = EstimationReport(theta_hat, a, b, m1, m2, lag_steps * dt, lag_steps, dt, n, level, warnings=notes)
    if not b > 8:
        rep.warnings.append(f"beta_hat = {b:.4g} <= 8: the asymptotic covariance does not exist")
        return rep
    if not theta_hat > 0:
        rep.warnings.append("theta_hat is not positive: covariance omitted")
        return rep
    if a <= 2:
        rep.warnings.append(f"alpha_hat = {a:.4g} <= 2: outside the ergodic regime the covariance is only formal")
    cov = asymptotic_cov_ab(FsParams(a, b, theta_hat), dt, variant=variant)
    if not (np.linalg.det(cov) > 0 and cov[0, 0] > 0):
        rep.warnings.append("estimated covariance is not positive definite")
        return rep
    rep.cov_asymptotic = cov.tolist()
    z = stats.norm.ppf(0.5 + level / 2)
    ha, hb = z * math.sqrt(cov[0, 0] / n), z * math.sqrt(cov[1, 1] / n)
    rep.ci_alpha = (a - ha, a + ha)
    rep.ci_beta = (b - hb, b + hb)
    return rep


def studentize(report: EstimationReport, truth: tuple[float, float]) -> np.ndarray:
    """``sqrt(n) Sigma_hat^(-1/2) (alpha_hat - alpha, beta_hat - beta)``."""
    w = inv_sqrt_2x2(report.cov_matrix)
    d = np.array([report.alpha_hat - truth[0], report.beta_hat - truth[1]])
    return math.sqrt(report.n_effective) * (w @ d)

