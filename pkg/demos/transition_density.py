"""Transition density of the FS(5, 20) diffusion relaxing to its invariant law.

Run with ``python demos/transition_density.py``.  Prints the density started
at ``x0 = 3`` for a few horizons next to the stationary density, and the mass
and mean of each as a check.
"""

from __future__ import annotations

import numpy as np

from fsdiffusion import FsParams, make_context, pdf
from fsdiffusion.diffusion import cond_mean
from fsdiffusion.quadrature import arcsinh_grid
from fsdiffusion.spectral import transition_kernel


def main() -> None:
    p = FsParams(5, 20, 0.5)
    ctx = make_context(p)
    x0 = 3.0
    horizons = (0.5, 2.0, 8.0, 16.0)
    show = np.array([0.25, 0.5, 1.0, 1.5, 2.0, 3.0, 4.0, 6.0])

    print(f"FS({p.alpha:g}, {p.beta:g}) diffusion, theta = {p.theta:g}, x0 = {x0:g}")
    print(f"{len(ctx.eigenvalues)} discrete eigenvalues below the cutoff {p.cutoff:.4f}")
    print("      x " + "".join(f"   t={t:<6g}" for t in horizons) + "  stationary")
    cols = [transition_kernel(ctx, show, [x0], t) for t in horizons]
    for i, x in enumerate(show):
        row = "".join(f"  {(pd + pc)[0, i]:9.5f}" for pd, pc in cols)
        print(f"  {x:5.2f} {row}  {pdf(p, x):9.5f}")

    x, dx = arcsinh_grid(p, 8.0, n_panels=60, order=16)
    print("\n    t     mass      mean   exact mean")
    for t in horizons:
        pd, pc = transition_kernel(ctx, x, [x0], t)
        dens = (pd + pc)[0]
        print(f"  {t:4g}  {dens @ dx:.8f}  {(x * dens) @ dx:.6f}  {cond_mean(p, x0, t):.6f}")


if __name__ == "__main__":
    main()
