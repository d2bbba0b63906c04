"""The Fisher-Snedecor diffusion

    dX = -theta (X - beta/(beta-2)) dt + sqrt(4 theta X (alpha X + beta) / (alpha (beta-2))) dW

its coefficients, scale and speed, boundary behaviour and path simulation.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Literal

import numpy as np

from .errors import DegenerateSample, MomentDoesNotExist, StepTooLarge, UnclassifiedParameter, ValidationError
from .fsdist import FsParams, make_rng, sample
from .specfun import beta as beta_fn

__all__ = [
    "drift",
    "diffusion_coeff",
    "diffusion_sq",
    "sigma_sigma_prime",
    "growth_constant",
    "scale_density",
    "speed_density",
    "speed_mass",
    "BoundaryReport",
    "classify_boundaries",
    "cond_mean",
    "acf",
    "lamperti_drift",
    "SamplePath",
    "simulate",
    "iter_ensemble",
    "write_path_csv",
    "read_path_csv",
    "FLOOR",
    "MAX_THETA_DT",
]

Scheme = Literal["euler", "milstein", "moment"]
FLOOR = 1e-12
MAX_THETA_DT = 0.5


def _arr(x):
    return np.asarray(x, dtype=float)


def _ret(v):
    return v.item() if np.ndim(v) == 0 else v


def drift(p: FsParams, x):
    return _ret(-p.theta * (_arr(x) - p.beta / (p.beta - 2)))


def diffusion_sq(p: FsParams, x):
    """Squared diffusion coefficient ``sigma^2(x)``."""
    x = _arr(x)
    return _ret(4 * p.theta * x * (p.alpha * x + p.beta) / (p.alpha * (p.beta - 2)))


def diffusion_coeff(p: FsParams, x):
    return _ret(np.sqrt(np.maximum(_arr(diffusion_sq(p, x)), 0.0)))


def sigma_sigma_prime(p: FsParams, x):
    """``sigma(x) sigma'(x) = (sigma^2)'(x) / 2``, the Milstein correction factor."""
    return _ret(2 * p.theta * (2 * p.alpha * _arr(x) + p.beta) / (p.alpha * (p.beta - 2)))


def growth_constant(p: FsParams) -> float:
    """``K`` with ``sigma^2(x) <= K (1 + x^2)`` on the whole half line."""
    return p.theta * (p.beta + 2 * math.sqrt(p.alpha)) ** 2 / (p.alpha * (p.beta - 2))


def scale_density(p: FsParams, x):
    x = _arr(x)
    a, b = p.alpha, p.beta
    return _ret(np.exp(-(a / 2) * np.log(x) + ((a + b) / 2 - 1) * np.log(a * x + b)))


def speed_density(p: FsParams, x):
    x = _arr(x)
    a, b = p.alpha, p.beta
    pref = a * (b - 2) / (2 * p.theta)
    return _ret(pref * np.exp((a / 2 - 1) * np.log(x) - ((a + b) / 2) * np.log(a * x + b)))


def speed_mass(p: FsParams) -> float:
    """Total mass of the speed measure; the invariant density is ``speed / mass``."""
    a, b = p.alpha, p.beta
    return a * (b - 2) / (2 * p.theta) * a ** (-a / 2) * b ** (-b / 2) * beta_fn(a / 2, b / 2)


@dataclass(frozen=True)
class BoundaryReport:
    left_feller: str
    right_feller: str
    left_lp_lc: str
    right_lp_lc: str
    cutoff_lambda: float
    left_osc: str
    right_osc: str

    def right_oscillatory(self, lam: float) -> bool:
        return lam > self.cutoff_lambda


def classify_boundaries(p: FsParams) -> BoundaryReport:
    """Feller type, limit point/circle type and oscillation of the boundaries 0 and infinity."""
    m = round(p.alpha / 2)
    if m >= 1 and abs(p.alpha - 2 * m) <= 1e-8:
        raise UnclassifiedParameter(f"alpha = {p.alpha} lies on the excluded lattice 2, 4, 6, ...")
    return BoundaryReport(
        left_feller="regular" if p.alpha < 2 else "entrance",
        right_feller="natural",
        left_lp_lc="limit_circle" if p.alpha < 4 else "limit_point",
        right_lp_lc="limit_point",
        cutoff_lambda=p.cutoff,
        left_osc="non_oscillatory",
        right_osc="non_oscillatory for lambda <= cutoff, oscillatory above",
    )


def cond_mean(p: FsParams, x0, t):
    e = np.exp(-p.theta * _arr(t))
    return _ret(_arr(x0) * e + p.mean * (1 - e))


def acf(p: FsParams, t):
    if not p.finite_variance:
        raise MomentDoesNotExist("the autocorrelation needs beta > 4")
    return _ret(np.exp(-p.theta * _arr(t)))


def lamperti_drift(p: FsParams, y):
    """Drift of the unit-diffusion process ``Y`` obtained by the Lamperti transform."""
    a, b, th = p.alpha, p.beta, p.theta
    return _ret((a - b - 1) / 2 * math.sqrt(th / (b - 2)) * np.tanh(_arr(y) * math.sqrt(b * th / (b - 2))))


# ---------------------------------------------------------------------------
# paths
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SamplePath:
    """Observation times and values of one trajectory.

    ``dt`` is the common spacing when the grid is uniform, otherwise ``None``.
    ``origin`` records how the path was produced, e.g.
    ``{"kind": "simulated", "seed": 7, "scheme": "euler"}``.
    """

    times: np.ndarray
    values: np.ndarray
    dt: float | None
    origin: dict = field(default_factory=dict)
    clamp_count: int = 0

    def __post_init__(self) -> None:
        t = np.array(self.times, dtype=float)
        v = np.array(self.values, dtype=float)
        if t.ndim != 1 or t.shape != v.shape:
            raise ValidationError("times and values must be 1-d arrays of equal length")
        if len(t) > 1 and np.any(np.diff(t) <= 0):
            raise ValidationError("times must be strictly increasing")
        if np.any(~(v > 0)):
            raise ValidationError("path values must be positive")
        t.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)

    def __len__(self) -> int:
        return len(self.values)

    @property
    def spacing(self) -> float:
        if self.dt is None:
            raise DegenerateSample("the path is not uniformly spaced")
        return self.dt


def _phi(r: float, h: float) -> float:
    """``(1 - exp(-r h)) / r`` with its limit ``h`` at ``r = 0``."""
    return h if abs(r * h) < 1e-14 else -math.expm1(-r * h) / r


def _moment_step_coeffs(p: FsParams, h: float) -> tuple[float, ...]:
    """Coefficients of the exact conditional mean ``A1 + E1 x`` and variance ``q2 x^2 + q1 x + q0`` over a step ``h``."""
    a, b, th = p.alpha, p.beta, p.theta
    mu = b / (b - 2)
    c = 4 * th / (a * (b - 2))
    kappa = 2 * th - c * a
    bb = 2 * th * mu + c * b
    e1 = math.exp(-th * h)
    e2 = math.exp(-kappa * h)
    a1 = -mu * math.expm1(-th * h)
    # (e1 - e2) / (kappa - theta) computed without cancellation
    g = e1 * _phi(kappa - th, h)
    b1 = bb * g
    b0 = bb * mu * _phi(kappa, h) - bb * mu * g
    q2 = math.exp(-2 * th * h) * math.expm1(c * a * h)
    q1 = b1 - 2 * a1 * e1
    q0 = b0 - a1 * a1
    return a1, e1, q2, q1, q0


class _Stepper:
    def __init__(self, p: FsParams, h: float, scheme: Scheme):
        if h <= 0:
            raise ValidationError("dt must be positive")
        if p.theta * h > MAX_THETA_DT:
            raise StepTooLarge(f"theta * dt = {p.theta * h:g} exceeds {MAX_THETA_DT}")
        if scheme not in ("euler", "milstein", "moment"):
            raise ValidationError(f"unknown scheme {scheme!r}")
        self.p, self.h, self.scheme = p, h, scheme
        a, b, th = p.alpha, p.beta, p.theta
        self.mu = b / (b - 2)
        self.c = 4 * th / (a * (b - 2))
        self.sqh = math.sqrt(h)
        if scheme == "moment":
            self.coeffs = _moment_step_coeffs(p, h)

    def __call__(self, x: np.ndarray, rng: np.random.Generator) -> tuple[np.ndarray, int]:
        p, h = self.p, self.h
        if self.scheme == "moment":
            a1, e1, q2, q1, q0 = self.coeffs
            m = a1 + e1 * x
            v = np.maximum((q2 * x + q1) * x + q0, 1e-300)
            new = rng.standard_gamma(m * m / v) * (v / m)
        else:
            z = rng.standard_normal(x.shape)
            s2 = self.c * x * (p.alpha * x + p.beta)
            new = x + p.theta * (self.mu - x) * h + np.sqrt(np.maximum(s2, 0.0)) * self.sqh * z
            if self.scheme == "milstein":
                ssp = 0.5 * self.c * (2 * p.alpha * x + p.beta)
                new = new + 0.5 * ssp * h * (z * z - 1.0)
        low = new < FLOOR
        n_low = int(np.count_nonzero(low))
        if n_low:
            new = np.where(low, FLOOR, new)
        return new, n_low


def _initial(p: FsParams, x0, n: int, rng: np.random.Generator) -> np.ndarray:
    if isinstance(x0, str):
        if x0 != "stationary":
            raise ValidationError(f"x0 must be positive or 'stationary', got {x0!r}")
        return sample(p, n, rng)
    x0 = float(x0)
    if not x0 > 0:
        raise ValidationError("x0 must be positive")
    return np.full(n, x0)


def simulate(
    p: FsParams,
    x0: float | str,
    t_end: float,
    dt: float,
    scheme: Scheme = "euler",
    seed: int = 0,
    *,
    record_every: int = 1,
) -> SamplePath:
    """Simulate one path on the grid ``0, dt, 2 dt, ...`` up to ``t_end``.

    ``x0="stationary"`` draws the start from FS(alpha, beta).  Values falling
    below ``FLOOR`` are set to it and counted in ``clamp_count``.  With
    ``record_every = k`` only every k-th step is kept, so the returned spacing
    is ``k * dt``.

    ``scheme="moment"`` draws each step from a gamma law whose mean and
    variance equal the exact conditional mean and variance over ``dt``.  It
    stays positive without clamping and preserves the first two stationary
    moments and the autocorrelation for any step size.
    """
    if not t_end >= dt:
        raise ValidationError("t_end must be at least dt")
    n_steps = int(round(t_end / dt))
    if record_every < 1:
        raise ValidationError("record_every must be >= 1")
    rng = make_rng(seed)
    step = _Stepper(p, dt, scheme)
    x = _initial(p, x0, 1, rng)
    n_rec = n_steps // record_every
    values = np.empty(n_rec + 1)
    values[0] = x[0]
    clamps = 0
    for i in range(n_steps):
        x, c = step(x, rng)
        clamps += c
        if (i + 1) % record_every == 0:
            values[(i + 1) // record_every] = x[0]
    h = dt * record_every
    times = h * np.arange(n_rec + 1)
    origin = {"kind": "simulated", "seed": seed if isinstance(seed, int) else None, "scheme": scheme}
    return SamplePath(times, values, h, origin, clamps)


def iter_ensemble(
    p: FsParams,
    n_paths: int,
    n_records: int,
    record_dt: float,
    substeps: int,
    scheme: Scheme = "moment",
    seed=0,
    x0: float | str = "stationary",
    block: int = 1000,
) -> Iterator[tuple[np.ndarray, int]]:
    """Simulate ``n_paths`` independent paths side by side and yield recorded values in blocks.

    Yields ``(values, clamps)`` with ``values`` of shape ``(rows, n_paths)``.
    The first block starts with the initial state, so ``n_records + 1`` rows
    are produced in total.  Paths are reproducible for a given
    ``(seed, n_paths)``.
    """
    rng = make_rng(seed)
    h = record_dt / substeps
    step = _Stepper(p, h, scheme)
    x = _initial(p, x0, n_paths, rng)
    buf = [x.copy()]
    clamps = 0
    for _ in range(n_records):
        for _ in range(substeps):
            x, c = step(x, rng)
            clamps += c
        buf.append(x.copy())
        if len(buf) >= block:
            yield np.array(buf), clamps
            buf, clamps = [], 0
    if buf:
        yield np.array(buf), clamps


def write_path_csv(path: SamplePath, file) -> None:
    """Write ``t,x`` rows with 17 significant digits to a path or an open text stream."""
    if hasattr(file, "write"):
        file.write("t,x\n")
        file.writelines(f"{t:.17g},{x:.17g}\n" for t, x in zip(path.times, path.values))
        return
    with open(file, "w", newline="") as fh:
        write_path_csv(path, fh)


def read_path_csv(file: str | Path) -> SamplePath:
    with open(file, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["t", "x"]:
            raise ValidationError(f"{file}: expected header 't,x'")
        rows = [(float(r[0]), float(r[1])) for r in reader if r]
    if len(rows) < 2:
        raise DegenerateSample(f"{file}: need at least two observations")
    t = np.array([r[0] for r in rows])
    v = np.array([r[1] for r in rows])
    d = np.diff(t)
    dt = float(np.mean(d)) if np.allclose(d, d[0], rtol=1e-9, atol=0) else None
    return SamplePath(t, v, dt, {"kind": "ingested", "file": str(file)})
