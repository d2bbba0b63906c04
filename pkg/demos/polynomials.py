"""The finite orthonormal polynomial system and how its size depends on beta.

Run with ``python demos/polynomials.py``.
"""

from __future__ import annotations

import numpy as np

from fsdiffusion import FsParams, build_system
from fsdiffusion.fspoly import gram_matrix


def main() -> None:
    for beta in (5.0, 9.0, 12.0, 20.0, 41.0):
        p = FsParams(5, beta)
        system = build_system(p)
        err = np.max(np.abs(gram_matrix(p, system) - np.eye(len(system))))
        lams = ", ".join(f"{f.eigenvalue:.3f}" for f in system[1:])
        print(f"beta = {beta:4g}: N = {len(system) - 1}, eigenvalues [{lams}], cutoff {p.cutoff:.3f}, max |G - I| = {err:.1e}")

    p = FsParams(5, 20)
    print("\nF_n(x) for FS(5, 20):")
    xs = np.array([0.2, 0.6, 1.0, 1.5, 2.5, 4.0])
    print("   x  " + "".join(f"   F_{n}   " for n in range(p.n_polynomials + 1)))
    system = build_system(p)
    for x in xs:
        print(f" {x:4.1f} " + "".join(f"{f(x):9.4f} " for f in system))


if __name__ == "__main__":
    main()
