"""``fsdiff`` command line front end.

Every subcommand writes its data to ``--out`` (or standard output when the
option is omitted) and all diagnostics to standard error.  Failures are
reported as a single JSON envelope on standard error::

    {"error": {"code": "SPECTRAL_HYPOTHESIS", "message": "...", "exit_status": 1}, "schema_version": 1}

Exit status is 0 on success, 1 for invalid input and 2 for a numerical
failure.  Options are resolved as command line flag, then the JSON file given
by ``--config``, then the built-in default.
"""

from __future__ import annotations

import argparse
import io
import json
import logging
import sys
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from . import studies
from .diffusion import read_path_csv, simulate, write_path_csv
from .errors import FsError, SpectralHypothesisViolated, ValidationError
from .estimate import estimate
from .fsdist import FsParams
from .fspoly import build_system
from .gof import test_joint, test_single
from .spectral import make_context, transition_density_parts

__all__ = ["RunConfig", "run", "main", "build_parser"]

log = logging.getLogger("fsdiffusion.cli")

SCHEMA_VERSION = 1
COMMANDS = ("simulate", "estimate", "test", "density", "poly", "replicate")
STOCHASTIC = ("simulate", "replicate")
STUDIES = ("coverage", "size", "power", "theta")


class UsageError(ValidationError):
    code = "USAGE"


@dataclass
class RunConfig:
    """Resolved options of one invocation.

    Only the fields relevant to ``command`` are read.  ``panels`` and
    ``order`` set the Gauss-Legendre rule over the continuous spectrum used by
    ``density``.
    """

    command: str
    alpha: float | None = None
    beta: float | None = None
    theta: float = 1.0
    seed: int | None = None
    input: str | None = None
    out: str | None = None
    # simulate
    x0: float | None = None
    stationary: bool = False
    t_end: float = 100.0
    dt: float | None = None
    scheme: str = "euler"
    record_every: int = 1
    # estimate
    lag_steps: int | None = None
    level: float = 0.95
    # test
    m: int | None = None
    j: int | None = None
    # density
    t: float | None = None
    grid: str | None = None
    panels: int = 24
    order: int = 20
    # poly
    max_degree: int | None = None
    # replicate
    study: str | None = None
    reps: int | None = None
    n: int | None = None
    workers: int | None = None
    alternative: str = "gamma"

    def params(self) -> FsParams:
        if self.alpha is None or self.beta is None:
            raise UsageError(f"{self.command} requires --alpha and --beta")
        return FsParams(self.alpha, self.beta, self.theta)

    def validate(self) -> None:
        if self.command not in COMMANDS:
            raise UsageError(f"unknown command {self.command!r}")
        if self.command in STOCHASTIC and self.seed is None:
            raise UsageError(f"{self.command} requires an explicit --seed")
        if self.seed is not None and not 0 <= self.seed < 2**64:
            raise UsageError("seed must be an unsigned 64-bit integer")
        for name in ("panels", "order", "record_every"):
            if getattr(self, name) <= 0:
                raise UsageError(f"{name} must be positive")
        for name in ("dt", "t_end", "t", "reps", "n", "workers"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise UsageError(f"{name} must be positive")
        if not 0 < self.level < 1:
            raise UsageError("level must lie in (0, 1)")
        if self.command in ("estimate", "test") and self.input is None:
            raise UsageError(f"{self.command} requires --in")


# ---------------------------------------------------------------------------
# command implementations
# ---------------------------------------------------------------------------


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w", newline="") as fh:
            fh.write(text)


def _simulate(cfg: RunConfig) -> None:
    p = cfg.params()
    if cfg.stationary == (cfg.x0 is not None):
        raise UsageError("give exactly one of --x0 and --stationary")
    dt = cfg.dt if cfg.dt is not None else 0.01 / p.theta
    path = simulate(p, "stationary" if cfg.stationary else cfg.x0, cfg.t_end, dt, cfg.scheme, cfg.seed, record_every=cfg.record_every)
    if path.clamp_count:
        log.warning("%d steps were clamped at the positivity floor", path.clamp_count)
    write_path_csv(path, sys.stdout if cfg.out is None else cfg.out)


def _estimate(cfg: RunConfig) -> None:
    rep = estimate(read_path_csv(cfg.input), cfg.lag_steps, cfg.level)
    for w in rep.warnings:
        log.warning(w)
    _emit(rep.to_json() + "\n", cfg.out)


def _test(cfg: RunConfig) -> None:
    p = cfg.params()
    if cfg.m is not None and cfg.j is not None:
        raise UsageError("give at most one of --m and --j")
    path = read_path_csv(cfg.input)
    if cfg.j is not None:
        res = test_single(p, path.values, cfg.j, spacing=path.spacing)
    else:
        res = test_joint(p, path.values, 2 if cfg.m is None else cfg.m, spacing=path.spacing)
    _emit(res.to_json() + "\n", cfg.out)


def _parse_grid(text: str | None) -> np.ndarray:
    if text is None:
        raise UsageError("density requires --grid x_min,x_max,n")
    try:
        lo, hi, n = text.split(",")
        lo, hi, n = float(lo), float(hi), int(n)
    except ValueError:
        raise UsageError(f"malformed --grid {text!r}; expected x_min,x_max,n") from None
    if not (0 < lo < hi and n >= 2):
        raise UsageError("grid needs 0 < x_min < x_max and n >= 2")
    return np.linspace(lo, hi, n)


def _density(cfg: RunConfig) -> None:
    p = cfg.params()
    if not p.spectral_ok:
        raise SpectralHypothesisViolated(f"alpha = {p.alpha} is outside the spectral regime (alpha > 2, not in {{4, 6, 8, ...}})")
    if cfg.x0 is None or cfg.t is None:
        raise UsageError("density requires --x0 and --t")
    x = _parse_grid(cfg.grid)
    parts = transition_density_parts(make_context(p), x, cfg.x0, cfg.t, panels=cfg.panels, order=cfg.order)
    if parts.n_clamped:
        log.warning("%d negative density values were set to 0", parts.n_clamped)
    buf = io.StringIO()
    buf.write("x,p_d,p_c,p\n")
    for row in zip(x, parts.p_d, parts.p_c, parts.p):
        buf.write(",".join(f"{v:.17g}" for v in row) + "\n")
    _emit(buf.getvalue(), cfg.out)


def _poly(cfg: RunConfig) -> None:
    p = cfg.params()
    system = build_system(p)
    top = len(system) - 1 if cfg.max_degree is None else min(cfg.max_degree, len(system) - 1)
    if cfg.max_degree is not None and cfg.max_degree > len(system) - 1:
        log.warning("max degree truncated to %d, the size of the polynomial system", top)
    buf = io.StringIO()
    buf.write(",".join(["n", "eigenvalue", "norm_const"] + [f"c{k}" for k in range(top + 1)]) + "\n")
    for f in system[: top + 1]:
        coeffs = list(f.coeffs) + [0.0] * (top - f.degree)
        buf.write(",".join(f"{v:.17g}" for v in [f.degree, f.eigenvalue, f.norm_const, *coeffs]) + "\n")
    _emit(buf.getvalue(), cfg.out)


def _replicate(cfg: RunConfig) -> None:
    if cfg.study not in STUDIES:
        raise UsageError(f"--study must be one of {', '.join(STUDIES)}")
    kw: dict = {"seed": cfg.seed}
    if cfg.reps is not None:
        kw["reps"] = cfg.reps
    if cfg.n is not None:
        kw["n"] = cfg.n
    if cfg.alpha is not None or cfg.beta is not None:
        kw["p"] = cfg.params()
    if cfg.study != "power":
        kw["workers"] = cfg.workers
    if cfg.study == "coverage":
        res = studies.clt_study(level=cfg.level, **kw)
    elif cfg.study == "size":
        res = studies.gof_size_study(**kw)
    elif cfg.study == "power":
        res = studies.gof_power_study(alternative=cfg.alternative, m=2 if cfg.m is None else cfg.m, **kw)
    else:
        res = studies.theta_study(**kw)
    _emit(res.to_json() + "\n", cfg.out)


_HANDLERS = {
    "simulate": _simulate,
    "estimate": _estimate,
    "test": _test,
    "density": _density,
    "poly": _poly,
    "replicate": _replicate,
}


def run(cfg: RunConfig) -> int:
    """Execute one command; returns the exit status and reports failures on standard error."""
    try:
        cfg.validate()
        _HANDLERS[cfg.command](cfg)
    except FsError as exc:
        return _fail(exc.code, str(exc), exc.exit_status)
    except (OSError, ValueError, TypeError) as exc:
        return _fail("IO" if isinstance(exc, OSError) else "VALIDATION", str(exc), 1)
    except ArithmeticError as exc:
        return _fail("NUMERIC", str(exc), 2)
    return 0


def _fail(code: str, message: str, status: int) -> int:
    env = {"error": {"code": code, "message": message, "exit_status": status}, "schema_version": SCHEMA_VERSION}
    sys.stderr.write(json.dumps(env, sort_keys=True) + "\n")
    return status


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    # every option defaults to SUPPRESS so unset flags never hide config-file values
    ap = _Parser(prog="fsdiff", description="Fisher-Snedecor diffusion toolkit", argument_default=argparse.SUPPRESS)
    ap.add_argument("--log-level", default="WARNING")
    sub = ap.add_subparsers(dest="command", parser_class=_Parser)

    def common(sp, params=True):
        sp.add_argument("--config", help="JSON file with option values (flags take precedence)")
        sp.add_argument("--out")
        if params:
            sp.add_argument("--alpha", type=float)
            sp.add_argument("--beta", type=float)
            sp.add_argument("--theta", type=float)

    sp = sub.add_parser("simulate", help="simulate a path and write it as t,x CSV", argument_default=argparse.SUPPRESS)
    common(sp)
    g = sp.add_mutually_exclusive_group()
    g.add_argument("--x0", type=float)
    g.add_argument("--stationary", action="store_true")
    sp.add_argument("--t-end", dest="t_end", type=float)
    sp.add_argument("--dt", type=float, help="step size (default 0.01 / theta)")
    sp.add_argument("--scheme", choices=("euler", "milstein", "moment"))
    sp.add_argument("--record-every", dest="record_every", type=int)
    sp.add_argument("--seed", type=int)

    sp = sub.add_parser("estimate", help="method-of-moments estimation from a path CSV", argument_default=argparse.SUPPRESS)
    common(sp, params=False)
    sp.add_argument("--in", dest="input")
    sp.add_argument("--lag-steps", dest="lag_steps", type=int)
    sp.add_argument("--level", type=float)

    sp = sub.add_parser("test", help="polynomial moment goodness-of-fit test", argument_default=argparse.SUPPRESS)
    common(sp)
    sp.add_argument("--in", dest="input")
    g = sp.add_mutually_exclusive_group()
    g.add_argument("--m", type=int)
    g.add_argument("--j", type=int)

    sp = sub.add_parser("density", help="transition density on a grid as x,p_d,p_c,p CSV", argument_default=argparse.SUPPRESS)
    common(sp)
    sp.add_argument("--x0", type=float)
    sp.add_argument("--t", type=float)
    sp.add_argument("--grid", help="x_min,x_max,n")
    sp.add_argument("--panels", type=int)
    sp.add_argument("--order", type=int)

    sp = sub.add_parser("poly", help="orthonormal polynomial coefficients as CSV", argument_default=argparse.SUPPRESS)
    common(sp)
    sp.add_argument("--max-degree", dest="max_degree", type=int)

    sp = sub.add_parser("replicate", help="seeded Monte Carlo studies", argument_default=argparse.SUPPRESS)
    common(sp)
    sp.add_argument("--study", choices=STUDIES)
    sp.add_argument("--reps", type=int)
    sp.add_argument("--n", type=int)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--workers", type=int, help="worker processes (or FSDIFF_WORKERS)")
    sp.add_argument("--level", type=float)
    sp.add_argument("--alternative", choices=("gamma", "lognormal", "uniform"))
    sp.add_argument("--m", type=int)
    return ap


_FIELDS = {f.name for f in fields(RunConfig)} - {"command"}


def resolve_config(argv: list[str] | None = None) -> RunConfig:
    """Merge flags over the optional ``--config`` JSON file over defaults."""
    ns = vars(build_parser().parse_args(argv))
    command = ns.pop("command", None)
    if command is None:
        raise UsageError(f"a command is required: {', '.join(COMMANDS)}")
    ns.pop("log_level", None)
    merged: dict = {}
    cfg_file = ns.pop("config", None)
    if cfg_file is not None:
        try:
            data = json.loads(Path(cfg_file).read_text())
        except json.JSONDecodeError as exc:
            raise UsageError(f"{cfg_file}: invalid JSON ({exc})") from None
        if not isinstance(data, dict):
            raise UsageError(f"{cfg_file}: expected a JSON object")
        unknown = set(data) - _FIELDS
        if unknown:
            raise UsageError(f"{cfg_file}: unknown keys {sorted(unknown)}")
        merged.update(data)
    merged.update(ns)
    return RunConfig(command=command, **merged)


def main(argv: list[str] | None = None) -> int:
    args = sys.argv[1:] if argv is None else argv
    level = "WARNING"
    if "--log-level" in args:
        i = args.index("--log-level")
        level = args[i + 1] if i + 1 < len(args) else level
    logging.basicConfig(level=getattr(logging, str(level).upper(), logging.WARNING), stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
    except FsError as exc:
        return _fail(exc.code, str(exc), exc.exit_status)
    except OSError as exc:
        return _fail("IO", str(exc), 1)
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
