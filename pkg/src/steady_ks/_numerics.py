"""Small numerical helpers shared by the solver, the energy code and the minimizer."""

from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy.special import gammaln

POWER_FLOOR = 1e-300


def clamped_power(x, p: float):
    """Return ``x**p`` for ``x > 0`` and exactly 0 where ``x <= 0``.

    The power is taken as ``exp(p * log(x))`` with ``x`` floored at 1e-300, so
    fractional exponents never see a negative base just past a root.
    """
    x = np.asarray(x, dtype=float)
    out = np.exp(p * np.log(np.maximum(x, POWER_FLOOR)))
    return np.where(x > 0.0, out, 0.0)


def sphere_area(N: int) -> float:
    """Surface area of the unit sphere S^{N-1} in R^N."""
    return float(np.exp(np.log(2.0) + 0.5 * N * np.log(np.pi) - gammaln(0.5 * N)))


def ball_volume(N: int, R: float) -> float:
    return sphere_area(N) * R**N / N


@lru_cache(maxsize=None)
def gauss_legendre(q: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights mapped to [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(q)
    return 0.5 * (x + 1.0), 0.5 * w
