"""Quadrature rules adapted to the FS(alpha, beta) weight.

If ``X ~ FS(alpha, beta)`` then ``U = alpha X / (alpha X + beta)`` is
Beta(alpha/2, beta/2).  Expectations of polynomials in ``X`` therefore become
Gauss-Jacobi integrals on ``[0, 1]`` after the factor ``(1 - U)^d`` that clears
the poles of ``x(u)`` is moved into the weight.  The resulting rule is exact up
to rounding for every polynomial of degree ``<= d``.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
from scipy import integrate
from scipy import special as sc

from .errors import MomentDoesNotExist, QuadratureNotConverged
from .fsdist import FsParams, pdf

__all__ = ["fs_polynomial_rule", "fs_expectation", "arcsinh_grid"]


@lru_cache(maxsize=64)
def _rule(alpha: float, beta: float, degree: int, n_nodes: int) -> tuple[np.ndarray, np.ndarray]:
    a, b = alpha / 2, beta / 2
    jb = b - 1 - degree
    t, w = sc.roots_jacobi(n_nodes, jb, a - 1)
    u = (1 + t) / 2
    x = beta * u / (alpha * (1 - u))
    log_scale = -(a + b - degree - 1) * math.log(2) - sc.betaln(a, b)
    weights = w * np.exp(log_scale + degree * np.log1p(-u))
    x.setflags(write=False)
    weights.setflags(write=False)
    return x, weights


def fs_polynomial_rule(p: FsParams, degree: int, n_nodes: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights with ``sum(w * q(x)) == E[q(X)]`` for ``deg q <= degree``.

    Requires ``beta > 2 * degree`` (otherwise the expectation is infinite).
    """
    if not p.beta > 2 * degree:
        raise MomentDoesNotExist(f"polynomials of degree {degree} are not integrable for beta = {p.beta}")
    if n_nodes is None:
        n_nodes = degree // 2 + 2
    return _rule(p.alpha, p.beta, int(degree), int(n_nodes))


def fs_expectation(p: FsParams, h, *, epsrel: float = 1e-12, epsabs: float = 1e-14) -> float:
    """``E[h(X)]`` for a general integrand by adaptive quadrature on the Beta scale."""
    a, b = p.alpha, p.beta

    def integrand(u: float) -> float:
        if u <= 0.0 or u >= 1.0:
            return 0.0
        x = b * u / (a * (1 - u))
        jac = b / (a * (1 - u) ** 2)
        return float(h(x)) * pdf(p, x) * jac

    val, err = integrate.quad(integrand, 0.0, 1.0, epsrel=epsrel, epsabs=epsabs, limit=400)
    if not math.isfinite(val) or err > max(1e3 * epsabs, 1e3 * epsrel * abs(val), 1e-8):
        raise QuadratureNotConverged(f"expectation did not converge (estimate {val}, error {err})")
    return val


def arcsinh_grid(p: FsParams, s_max: float, n_panels: int = 40, order: int = 16) -> tuple[np.ndarray, np.ndarray]:
    """Composite Gauss-Legendre nodes ``x`` and ``dx``-weights on ``(0, x(s_max))``.

    The grid is uniform in ``s = arcsinh(sqrt(alpha x / beta))``, the variable in
    which the spectral solutions oscillate at a constant rate.
    """
    t, w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(0.0, s_max, n_panels + 1)
    half = np.diff(edges) / 2
    mid = (edges[:-1] + edges[1:]) / 2
    s = (mid[:, None] + half[:, None] * t[None, :]).ravel()
    ws = (half[:, None] * w[None, :]).ravel()
    scale = p.beta / p.alpha
    x = scale * np.sinh(s) ** 2
    dx = scale * np.sinh(2 * s) * ws
    return x, dx
