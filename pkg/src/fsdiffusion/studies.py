"""Seeded Monte Carlo studies: CLT coverage, theta consistency, test size and power.

Replications are grouped into batches that are simulated side by side;
wide batches amortize the per-step overhead of the simulation loop.
Every batch receives its own child of ``SeedSequence(seed)``, and results are
reassembled in batch order, so the output depends only on the seed and the
batch size, never on the number of worker processes.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats

from .diffusion import SamplePath, iter_ensemble
from .errors import FsError
from .estimate import estimate, studentize
from .fsdist import FsParams, make_rng
from .gof import test_joint, test_single

__all__ = [
    "StudySummary",
    "simulate_unit_paths",
    "substeps_for",
    "clt_study",
    "theta_study",
    "gof_size_study",
    "gof_power_study",
    "matched_mean_gamma",
    "matched_mean_lognormal",
    "scaled_uniform",
]

#: theta * h of the inner simulation step used by the studies
STUDY_THETA_H = 0.05


@dataclass
class StudySummary:
    study: str
    params: dict
    reps: int
    seed: int
    summary: dict
    rows: list[dict] = field(default_factory=list)
    schema_version: int = 1

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)


def substeps_for(theta: float, record_dt: float) -> int:
    return max(1, math.ceil(theta * record_dt / STUDY_THETA_H))


def simulate_unit_paths(p: FsParams, n_paths: int, n_obs: int, seed, record_dt: float = 1.0) -> np.ndarray:
    """``n_obs`` stationary observations ``record_dt`` apart for each of ``n_paths`` paths, shape ``(n_obs, n_paths)``."""
    blocks = [
        b
        for b, _ in iter_ensemble(
            p, n_paths, n_obs - 1, record_dt, substeps_for(p.theta, record_dt), "moment", seed, "stationary", 10_000
        )
    ]
    return np.concatenate(blocks, axis=0)


def _batches(reps: int, batch: int, seed: int) -> list[tuple[int, np.random.SeedSequence]]:
    n_b = math.ceil(reps / batch)
    children = np.random.SeedSequence(seed).spawn(n_b)
    return [(min(batch, reps - i * batch), children[i]) for i in range(n_b)]


def _run(fn, jobs: list, workers: int | None) -> list:
    workers = workers or int(os.environ.get("FSDIFF_WORKERS", "1"))
    if workers <= 1 or len(jobs) == 1:
        return [fn(*j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, *zip(*jobs)))


# ---------------------------------------------------------------------------
# CLT for (alpha_hat, beta_hat)
# ---------------------------------------------------------------------------


def _clt_batch(p: FsParams, size: int, ss, n: int, level: float) -> list[dict]:
    X = simulate_unit_paths(p, size, n, ss)
    times = np.arange(n, dtype=float)
    rows = []
    for i in range(size):
        path = SamplePath(times, X[:, i], 1.0, {"kind": "simulated"})
        try:
            rep = estimate(path, level=level)
            z = studentize(rep, (p.alpha, p.beta))
            rows.append(
                {
                    "alpha_hat": rep.alpha_hat,
                    "beta_hat": rep.beta_hat,
                    "theta_hat": rep.theta_hat,
                    "z_alpha": float(z[0]),
                    "z_beta": float(z[1]),
                    "cover_alpha": bool(rep.ci_alpha[0] <= p.alpha <= rep.ci_alpha[1]),
                    "cover_beta": bool(rep.ci_beta[0] <= p.beta <= rep.ci_beta[1]),
                }
            )
        except FsError as exc:
            rows.append({"error": exc.code})
    return rows


def clt_study(
    p: FsParams = FsParams(5, 20, 1.0),
    reps: int = 500,
    n: int = 100_000,
    seed: int = 20240501,
    level: float = 0.95,
    batch: int = 250,
    workers: int | None = None,
) -> StudySummary:
    """Studentized ``(alpha_hat, beta_hat)`` over ``reps`` unit-spaced stationary paths of length ``n``."""
    jobs = [(p, size, ss, n, level) for size, ss in _batches(reps, batch, seed)]
    rows = [r for part in _run(_clt_batch, jobs, workers) for r in part]
    ok = [r for r in rows if "error" not in r]
    za = np.array([r["z_alpha"] for r in ok])
    zb = np.array([r["z_beta"] for r in ok])
    summary = {
        "n_ok": len(ok),
        "ks_alpha": stats.kstest(za, "norm").statistic,
        "ks_alpha_p": stats.kstest(za, "norm").pvalue,
        "ks_beta": stats.kstest(zb, "norm").statistic,
        "ks_beta_p": stats.kstest(zb, "norm").pvalue,
        "coverage_alpha": float(np.mean([r["cover_alpha"] for r in ok])),
        "coverage_beta": float(np.mean([r["cover_beta"] for r in ok])),
        "mean_z": [float(za.mean()), float(zb.mean())],
        "sd_z": [float(za.std(ddof=1)), float(zb.std(ddof=1))],
    }
    return StudySummary("coverage", asdict(p), reps, seed, summary, rows)


# ---------------------------------------------------------------------------
# theta consistency
# ---------------------------------------------------------------------------


def _theta_batch(p: FsParams, size: int, ss, n: int, dt: float, lag_steps: int) -> list[dict]:
    from .estimate import estimate_theta

    X = simulate_unit_paths(p, size, n, ss, record_dt=dt)
    th = np.atleast_1d(estimate_theta(X, lag_steps, dt))
    return [{"theta_hat": float(t)} for t in th]


def theta_study(
    p: FsParams = FsParams(5, 20, 0.5),
    reps: int = 200,
    n: int = 200_000,
    dt: float = 1.0,
    lag_steps: int = 2,
    tol: float = 0.05,
    seed: int = 20240502,
    batch: int = 100,
    workers: int | None = None,
) -> StudySummary:
    """``theta_hat`` from the lag ``lag_steps * dt`` autocorrelation of paths sampled every ``dt``.

    The default observes ``n`` unit-spaced values, the same sampling as the
    CLT study.  A fine grid such as ``dt=0.02`` covers only ``n * dt`` time
    units, and the estimator's spread then grows like ``1 / sqrt(n * dt)``.
    """
    jobs = [(p, size, ss, n, dt, lag_steps) for size, ss in _batches(reps, batch, seed)]
    rows = [r for part in _run(_theta_batch, jobs, workers) for r in part]
    th = np.array([r["theta_hat"] for r in rows])
    summary = {
        "fraction_within_tol": float(np.mean(np.abs(th - p.theta) <= tol)),
        "tol": tol,
        "mean": float(th.mean()),
        "sd": float(th.std(ddof=1)),
    }
    return StudySummary("theta", asdict(p), reps, seed, summary, rows)


# ---------------------------------------------------------------------------
# goodness-of-fit size and power
# ---------------------------------------------------------------------------


def _gof_rows(p: FsParams, X: np.ndarray, m_values) -> list[dict]:
    rows = []
    for i in range(X.shape[1]):
        row = {}
        for m in m_values:
            res = test_single(p, X[:, i], 1) if m == 1 else test_joint(p, X[:, i], m)
            row[f"p_m{m}"] = res.p_value
        rows.append(row)
    return rows


def _size_batch(p: FsParams, size: int, ss, n: int, m_values) -> list[dict]:
    return _gof_rows(p, simulate_unit_paths(p, size, n, ss), m_values)


def gof_size_study(
    p: FsParams = FsParams(5, 20, 1.0),
    reps: int = 1000,
    n: int = 10_000,
    m_values: tuple[int, ...] = (1, 2),
    level: float = 0.05,
    seed: int = 20240503,
    batch: int = 100,
    workers: int | None = None,
) -> StudySummary:
    """Rejection rates under the null on unit-spaced stationary paths."""
    jobs = [(p, size, ss, n, tuple(m_values)) for size, ss in _batches(reps, batch, seed)]
    rows = [r for part in _run(_size_batch, jobs, workers) for r in part]
    summary = {}
    for m in m_values:
        pv = np.array([r[f"p_m{m}"] for r in rows])
        summary[f"size_m{m}"] = float(np.mean(pv < level))
        summary[f"ks_uniform_m{m}"] = float(stats.kstest(pv, "uniform").statistic)
    return StudySummary("size", asdict(p), reps, seed, summary, rows)


def matched_mean_gamma(p: FsParams, n: int, seed, shape: float | None = None) -> np.ndarray:
    """I.i.d. gamma draws with the FS mean; the default shape ``alpha/2`` is the numerator gamma of the F ratio."""
    k = p.alpha / 2 if shape is None else shape
    return make_rng(seed).gamma(k, p.mean / k, size=n)


def matched_mean_lognormal(p: FsParams, n: int, seed, sigma: float = 0.5) -> np.ndarray:
    return make_rng(seed).lognormal(math.log(p.mean) - sigma**2 / 2, sigma, size=n)


def scaled_uniform(p: FsParams, n: int, seed) -> np.ndarray:
    """Uniform on ``(0, 2 mean)``, matched in mean."""
    return make_rng(seed).uniform(0.0, 2 * p.mean, size=n)


_ALTERNATIVES = {"gamma": matched_mean_gamma, "lognormal": matched_mean_lognormal, "uniform": scaled_uniform}


def gof_power_study(
    p: FsParams = FsParams(5, 20, 1.0),
    reps: int = 1000,
    n: int = 10_000,
    alternative: str = "gamma",
    m: int = 2,
    level: float = 0.05,
    seed: int = 20240504,
) -> StudySummary:
    """Rejection rate of the joint test against i.i.d. data from a mean-matched alternative."""
    try:
        draw = _ALTERNATIVES[alternative]
    except KeyError:
        raise ValueError(f"unknown alternative {alternative!r}") from None
    children = np.random.SeedSequence(seed).spawn(reps)
    rows = []
    for ss in children:
        x = draw(p, n, ss)
        res = test_joint(p, x, m)
        rows.append({"p_value": res.p_value, "statistic": res.statistic})
    power = float(np.mean([r["p_value"] < level for r in rows]))
    summary = {"power": power, "alternative": alternative, "m": m, "level": level}
    return StudySummary("power", asdict(p), reps, seed, summary, rows)
