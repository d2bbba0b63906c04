"""Fisher-Snedecor diffusion: distribution, polynomials, simulation, spectral density, estimation and testing."""

from __future__ import annotations

from .errors import FsError
from .fsdist import FsParams, cdf, logpdf, moment, pdf, sample
from .fspoly import FsPolynomial, build_system
from .diffusion import SamplePath, simulate
from .spectral import make_context, transition_density
from .estimate import EstimationReport, estimate
from .gof import GofResult, test_joint, test_single

__all__ = [
    "FsError",
    "FsParams",
    "pdf",
    "logpdf",
    "cdf",
    "moment",
    "sample",
    "FsPolynomial",
    "build_system",
    "SamplePath",
    "simulate",
    "make_context",
    "transition_density",
    "EstimationReport",
    "estimate",
    "GofResult",
    "test_single",
    "test_joint",
]

__version__ = "0.1.0"
