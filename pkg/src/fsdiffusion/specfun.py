"""Special functions used throughout the package.

Gamma-family functions are thin, domain-checked wrappers over
:mod:`scipy.special`.  The Gauss hypergeometric function is implemented here
because the package needs complex (conjugate) parameters with a real argument,
a combination scipy does not cover, and because the choice of evaluation route
matters for accuracy on the negative real axis.

Routes for ``hyp2f1(a, b, c, z)`` with real ``z < 1``:

* ``series``: the defining power series, for ``|z| < 1``.
* ``pfaff``: ``(1 - z)^(-a) 2F1(a, c - b; c; z / (z - 1))``, which maps the
  negative axis into ``[0, 1)``.
* ``inversion``: the two-term connection formula to argument ``1/z``, whose
  inner functions are evaluated by ``series`` or ``pfaff``.
"""

from __future__ import annotations

import math
from typing import Literal

import numpy as np
from scipy import special as sc

from .errors import DegenerateContinuation, DomainError, NonconvergentSeries

__all__ = [
    "ln_gamma",
    "abs_gamma_complex",
    "beta",
    "ln_beta",
    "digamma",
    "reg_inc_gamma_upper",
    "hyp2f1",
    "hyp2f1_terminating",
    "Z_SWITCH",
    "SERIES_CAP",
    "INTEGER_TOL",
]

Z_SWITCH = 0.5
SERIES_CAP = 10_000
INTEGER_TOL = 1e-8
# Below this distance of (a - b) from an integer the inversion formula loses
# more than ~3 digits to cancellation, so the automatic route avoids it.
_AUTO_INVERSION_MARGIN = 1e-3

Route = Literal["auto", "series", "pfaff", "inversion"]


def _check_positive(name: str, x) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if np.any(~(arr > 0)):
        raise DomainError(f"{name} must be positive, got {x!r}")
    return arr


def _out(value: np.ndarray):
    return value.item() if np.ndim(value) == 0 else value


def ln_gamma(x):
    """Natural log of the gamma function for positive real ``x``."""
    return _out(sc.gammaln(_check_positive("x", x)))


def abs_gamma_complex(x: float, y: float) -> float:
    """Modulus ``|Gamma(x + iy)|``.

    Symmetric in ``y`` by construction.  Raises :class:`DomainError` at the
    poles ``y = 0, x = 0, -1, -2, ...``.
    """
    x = float(x)
    y = abs(float(y))
    if y == 0.0:
        if x <= 0 and x == math.floor(x):
            raise DomainError(f"Gamma has a pole at {x}")
        return float(np.exp(sc.gammaln(x)))
    return float(np.exp(sc.loggamma(complex(x, y)).real))


def ln_beta(a, b):
    _check_positive("a", a)
    _check_positive("b", b)
    return _out(sc.betaln(a, b))


def beta(a, b):
    """Euler Beta function ``B(a, b)`` for positive arguments."""
    return _out(np.exp(np.asarray(ln_beta(a, b))))


def digamma(x):
    return _out(sc.psi(_check_positive("x", x)))


def reg_inc_gamma_upper(s, x):
    """Regularized upper incomplete gamma ``Q(s, x) = Gamma(s, x) / Gamma(s)``."""
    s = _check_positive("s", s)
    x = np.asarray(x, dtype=float)
    if np.any(~(x >= 0)):
        raise DomainError(f"x must be non-negative, got {x!r}")
    return _out(sc.gammaincc(s, x))


# ---------------------------------------------------------------------------
# Gauss hypergeometric function
# ---------------------------------------------------------------------------


def _nonpositive_integer(v: complex, tol: float = 0.0) -> int | None:
    """Return ``n`` if ``v == -n`` for an integer ``n >= 0``, else ``None``."""
    v = complex(v)
    if v.imag != 0.0:
        return None
    r = round(v.real)
    if r <= 0 and abs(v.real - r) <= tol:
        return int(-r)
    return None


def _distance_to_integer(v: complex) -> float:
    v = complex(v)
    return math.hypot(v.real - round(v.real), v.imag)


def hyp2f1_terminating(a, b, c, z, n: int):
    """Exact polynomial ``sum_{k<=n} (a)_k (b)_k / ((c)_k k!) z^k``."""
    z = np.asarray(z)
    dtype = complex if _is_complex(a, b) else float
    coef = np.ones(n + 1, dtype=dtype)
    for k in range(n):
        coef[k + 1] = coef[k] * (a + k) * (b + k) / ((c + k) * (k + 1))
    # Horner in z
    out = np.full(z.shape, coef[n], dtype=dtype)
    for k in range(n - 1, -1, -1):
        out = out * z + coef[k]
    return out


def _is_complex(*vals) -> bool:
    return any(isinstance(v, complex) or np.iscomplexobj(v) for v in vals)


def _series(a, b, c, z: np.ndarray, tol: float, max_terms: int) -> np.ndarray:
    if np.any(np.abs(z) >= 1):
        raise NonconvergentSeries("power series needs |z| < 1")
    dtype = complex if _is_complex(a, b) else float
    term = np.ones(z.shape, dtype=dtype)
    total = term.copy()
    run = np.zeros(z.shape, dtype=int)
    for k in range(max_terms):
        term = term * ((a + k) * (b + k) / ((c + k) * (k + 1))) * z
        total = total + term
        small = np.abs(term) <= tol * np.abs(total)
        run = np.where(small, run + 1, 0)
        # two consecutive small terms guard against an accidental near-zero term
        if np.all(run >= 2):
            return total
    raise NonconvergentSeries(f"series did not converge within {max_terms} terms")


def _pfaff(a, b, c, z: np.ndarray, tol: float, max_terms: int) -> np.ndarray:
    if np.any(z > 0.5):
        raise DomainError("the Pfaff route is used only for z <= 1/2")
    w = z / (z - 1.0)
    inner = _series(a, c - b, c, w, tol, max_terms)
    return np.exp(-a * np.log1p(-z)) * inner


def _inner(a, b, c, w: np.ndarray, tol: float, max_terms: int) -> np.ndarray:
    n = _nonpositive_integer(a) if _nonpositive_integer(b) is None else _nonpositive_integer(b)
    if n is not None:
        return hyp2f1_terminating(a, b, c, w, n)
    out = np.empty(w.shape, dtype=complex if _is_complex(a, b) else float)
    near = np.abs(w) <= Z_SWITCH
    if np.any(near):
        out[near] = _series(a, b, c, w[near], tol, max_terms)
    if np.any(~near):
        out[~near] = _pfaff(a, b, c, w[~near], tol, max_terms)
    return out


def _rgamma_ratio(c, num, d1, d2):
    """Gamma(c) Gamma(num) / (Gamma(d1) Gamma(d2)), zero when a denominator has a pole."""
    return sc.gamma(c) * sc.gamma(num) * sc.rgamma(d1) * sc.rgamma(d2)


def _inversion(a, b, c, z: np.ndarray, tol: float, max_terms: int) -> np.ndarray:
    if np.any(z >= 0):
        raise DomainError("the 1/z continuation is used only for z < 0")
    if _distance_to_integer(a - b) <= INTEGER_TOL:
        raise DegenerateContinuation(f"a - b = {a - b!r} is an integer")
    as_complex = _is_complex(a, b)
    w = 1.0 / z
    logmz = np.log(-z)
    t1 = _rgamma_ratio(c, b - a, b, c - a) * np.exp(-a * logmz) * _inner(a, 1 - c + a, 1 - b + a, w, tol, max_terms)
    t2 = _rgamma_ratio(c, a - b, a, c - b) * np.exp(-b * logmz) * _inner(b, 1 - c + b, 1 - a + b, w, tol, max_terms)
    out = t1 + t2
    return out if as_complex else np.real(out)


def hyp2f1(a, b, c, z, *, method: Route = "auto", tol: float = 1e-15, max_terms: int = SERIES_CAP):
    """Gauss hypergeometric function ``2F1(a, b; c; z)`` for real ``z < 1``.

    Parameters
    ----------
    a, b : float or complex
        Numerator parameters.  Complex values are supported; a conjugate pair
        gives a real function value (returned as complex with tiny imaginary
        part, callers take the real part).
    c : float
        Denominator parameter, not a non-positive integer unless the series
        terminates first.
    z : float or array_like
        Real argument(s), ``z < 1``.
    method : {"auto", "series", "pfaff", "inversion"}
        Evaluation route.  ``auto`` sums the series for ``|z| <= 0.5`` and for
        ``0.5 < z < 1``, uses the ``1/z`` connection formula for ``z < -0.5`` and
        falls back to the Pfaff transform when ``a - b`` is close to an integer.
    tol : float
        Relative stopping tolerance on the series terms.
    max_terms : int
        Series cap; exceeding it raises :class:`NonconvergentSeries`.

    Notes
    -----
    When ``a`` or ``b`` is a non-positive integer the terminating polynomial is
    returned for every ``z``, independent of ``method``.
    """
    if not (isinstance(a, complex) or isinstance(b, complex)):
        a, b = float(a), float(b)
    c = float(c)
    zarr = np.asarray(z, dtype=float)
    if np.any(~(zarr < 1)):
        raise DomainError("hyp2f1 is evaluated only for real z < 1")

    n_a, n_b = _nonpositive_integer(a), _nonpositive_integer(b)
    n_term = min(n for n in (n_a, n_b) if n is not None) if (n_a is not None or n_b is not None) else None
    n_c = _nonpositive_integer(c)
    if n_c is not None and (n_term is None or n_term > n_c):
        raise DomainError(f"c = {c} is a non-positive integer")
    if n_term is not None:
        return _out(hyp2f1_terminating(a, b, c, zarr, n_term))

    flat = np.atleast_1d(zarr).ravel()
    if method == "series":
        out = _series(a, b, c, flat, tol, max_terms)
    elif method == "pfaff":
        out = _pfaff(a, b, c, flat, tol, max_terms)
    elif method == "inversion":
        out = _inversion(a, b, c, flat, tol, max_terms)
    elif method == "auto":
        out = np.empty(flat.shape, dtype=complex if _is_complex(a, b) else float)
        direct = flat >= -Z_SWITCH
        if np.any(direct):
            out[direct] = _series(a, b, c, flat[direct], tol, max_terms)
        far = ~direct
        if np.any(far):
            if _distance_to_integer(a - b) > _AUTO_INVERSION_MARGIN:
                out[far] = _inversion(a, b, c, flat[far], tol, max_terms)
            else:
                out[far] = _pfaff(a, b, c, flat[far], tol, max_terms)
    else:
        raise ValueError(f"unknown method {method!r}")
    return _out(out.reshape(zarr.shape))
