"""Free energy of radial densities, the Newtonian potential and the HLS lower bound.

For a radial density rho on R^N the potential V = Gamma * rho, with
Gamma(x) = 1 / ((N-2) sigma_N |x|^{N-2}), reduces to

    V(r) = [ r^{2-N} I(r) + J(r) ] / (N-2),
    I(r) = int_0^r rho(s) s^{N-1} ds,   J(r) = int_r^inf rho(s) s ds.

Densities are described by cell breakpoints plus a vectorised evaluator that is
smooth inside each cell; every integral is a per-cell Gauss-Legendre sum, which
is exact for piecewise-constant densities.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from functools import cached_property
from typing import Callable

import numpy as np
from scipy.special import gammaln

from ._numerics import clamped_power, gauss_legendre, sphere_area
from .lane_emden import RadialProfile, check_regime


@dataclass(frozen=True, eq=False)
class RadialDensity:
    """Nonnegative radial density, zero beyond ``edges[-1]``."""

    N: int
    edges: np.ndarray
    func: Callable[[np.ndarray], np.ndarray]
    quad_order: int = 8

    def __post_init__(self):
        edges = np.asarray(self.edges, dtype=float)
        if edges[0] != 0.0 or np.any(np.diff(edges) <= 0):
            raise ValueError("density edges must start at 0 and increase strictly")
        object.__setattr__(self, "edges", edges)

    # -- constructors ----------------------------------------------------------

    @classmethod
    def piecewise_constant(cls, N: int, edges, values, quad_order: int = 8) -> "RadialDensity":
        edges = np.asarray(edges, dtype=float)
        values = np.asarray(values, dtype=float)
        if values.shape != (len(edges) - 1,):
            raise ValueError("need one value per cell")
        if np.any(values < 0):
            raise ValueError("density must be nonnegative")

        def func(r):
            idx = np.clip(np.searchsorted(edges, r, side="right") - 1, 0, len(values) - 1)
            return np.where((r >= 0) & (r <= edges[-1]), values[idx], 0.0)

        return cls(N, edges, func, quad_order)

    @classmethod
    def uniform_ball(cls, N: int, R: float, level: float = 1.0) -> "RadialDensity":
        return cls.piecewise_constant(N, [0.0, R], [level])

    @classmethod
    def from_samples(cls, N: int, r, rho, quad_order: int = 8) -> "RadialDensity":
        """Piecewise-linear interpolant of samples on a grid starting at r = 0."""
        r = np.asarray(r, dtype=float)
        rho = np.asarray(rho, dtype=float)
        if np.any(rho < 0):
            raise ValueError("density must be nonnegative")
        return cls(N, r, lambda x: np.interp(x, r, rho, right=0.0), quad_order)

    @classmethod
    def from_profile(cls, profile: RadialProfile, grading: int = 40) -> "RadialDensity":
        """psi^{1/(m-1)} of a profile, with geometric refinement towards R*.

        The refinement absorbs the endpoint singularity of psi^{1/(m-1)} when m > 2.
        """
        r = np.asarray(profile.r, dtype=float)
        last = r[-1] - r[-2]
        extra = profile.r_star - last * 0.5 ** np.arange(1, grading + 1)
        edges = np.unique(np.concatenate([r, extra]))
        return cls(profile.params.N, edges, profile.density)

    # -- quadrature ------------------------------------------------------------

    @property
    def outer_radius(self) -> float:
        return float(self.edges[-1])

    @property
    def sigma(self) -> float:
        return sphere_area(self.N)

    def values(self, r):
        return self.func(np.asarray(r, dtype=float))

    @cached_property
    def _nodes(self):
        t, w = gauss_legendre(self.quad_order)
        a, b = self.edges[:-1, None], self.edges[1:, None]
        X = a + (b - a) * t
        W = (b - a) * w
        return X, W, self.values(X)

    @cached_property
    def _cells(self):
        X, W, rho = self._nodes
        Ic = np.sum(W * rho * X ** (self.N - 1), axis=1)
        Jc = np.sum(W * rho * X, axis=1)
        cumI = np.concatenate([[0.0], np.cumsum(Ic)])
        tailJ = np.concatenate([np.cumsum(Jc[::-1])[::-1], [0.0]])
        return cumI, tailJ

    @cached_property
    def mass(self) -> float:
        return float(self.sigma * self._cells[0][-1])

    def cumulative(self, x):
        """(I(x), J(x)) at arbitrary radii."""
        x = np.asarray(x, dtype=float)
        shape = x.shape
        x = x.ravel()
        cumI, tailJ = self._cells
        n = len(self.edges) - 1
        k = np.clip(np.searchsorted(self.edges, x, side="right") - 1, 0, n - 1)
        left = self.edges[k]
        xx = np.clip(x, 0.0, self.outer_radius)
        t, w = gauss_legendre(self.quad_order)
        X = left[:, None] + (xx - left)[:, None] * t
        W = (xx - left)[:, None] * w
        rho = self.values(X)
        I = cumI[k] + np.sum(W * rho * X ** (self.N - 1), axis=1)
        J = tailJ[k] - np.sum(W * rho * X, axis=1)
        J = np.maximum(J, 0.0)
        return I.reshape(shape), J.reshape(shape)

    def mass_inside(self, x: float) -> float:
        return float(self.sigma * self.cumulative(np.array([x]))[0][0])

    def potential(self, x):
        x = np.asarray(x, dtype=float)
        I, J = self.cumulative(x)
        with np.errstate(divide="ignore", invalid="ignore"):
            inner = np.where(x > 0, I * np.abs(x) ** (2 - self.N), 0.0)
        return (inner + J) / (self.N - 2)

    def integrate(self, f: Callable[[np.ndarray, np.ndarray], np.ndarray]) -> float:
        """sigma_N int f(r, rho(r)) r^{N-1} dr over the cells."""
        X, W, rho = self._nodes
        return float(self.sigma * np.sum(W * f(X, rho) * X ** (self.N - 1)))

    def power_integral(self, q: float) -> float:
        """int rho^q dx."""
        return self.integrate(lambda r, rho: clamped_power(rho, q))

    @cached_property
    def pairing(self) -> float:
        """int rho V dx."""
        X, W, rho = self._nodes
        V = self.potential(X)
        return float(self.sigma * np.sum(W * rho * V * X ** (self.N - 1)))

    def cross_pairing(self, other: "RadialDensity") -> float:
        """int rho V[other] dx."""
        X, W, rho = self._nodes
        return float(self.sigma * np.sum(W * rho * other.potential(X) * X ** (self.N - 1)))


def newtonian_potential(density: RadialDensity, r=None):
    """V = Gamma * rho at the given radii (default: the density breakpoints)."""
    return density.potential(density.edges if r is None else r)


@dataclass(frozen=True)
class EnergyReport:
    mass: float
    entropy: float
    interaction: float
    total: float
    lower_bound: float

    @property
    def above_bound(self) -> bool:
        return self.total >= self.lower_bound

    def to_json(self) -> str:
        data = asdict(self)
        data["above_bound"] = self.above_bound
        return json.dumps(data, indent=2)


def sharp_hls_constant(N: int) -> float:
    """Lieb's sharp constant for int int f(x) f(y) |x-y|^{-(N-2)} <= C ||f||_{2N/(N+2)}^2."""
    log_c = (
        0.5 * (N - 2) * np.log(np.pi)
        - gammaln(0.5 * (N + 2))
        - (2.0 / N) * (gammaln(0.5 * N) - gammaln(N))
    )
    return float(np.exp(log_c))


@dataclass(frozen=True)
class HLSConfig:
    N: int
    m: float
    C_HLS: float | None = None

    def __post_init__(self):
        if self.C_HLS is None:
            object.__setattr__(self, "C_HLS", sharp_hls_constant(self.N))

    @property
    def theta(self) -> float:
        return (self.N - 2) * self.m / (2.0 * self.N * (self.m - 1.0))


@dataclass(frozen=True)
class LowerBoundBreakdown:
    R0: float
    bound: float
    f1_at_R0: float
    f2_at_R0: float
    log_magnitude: float  # log(-bound), finite even when bound overflows


def _exp(x: float) -> float:
    with np.errstate(over="ignore"):
        return float(np.exp(x))


def energy_lower_bound(M: float, N: int, m: float, cfg: HLSConfig | None = None) -> LowerBoundBreakdown:
    """Mass-only lower bound on the free energy over all densities of mass M.

    R0 is where r^m/(m-1) meets C M^{2/N} r^{2-2/N} / (2 (N-2) sigma_N); the bound is
    -C M^{1+2/N} R0^{1-2/N} / ((N-2) sigma_N). Everything is formed in logs, since
    the exponent 1/(m-2+2/N) blows up near the critical case; values beyond the
    float range saturate to inf (the bound to -inf, which is still a lower bound).
    """
    if not M > 0:
        raise ValueError("mass must be positive")
    cfg = cfg or HLSConfig(N, m)
    log_scale = np.log(cfg.C_HLS) - np.log((N - 2) * sphere_area(N))
    log_k2 = log_scale + (2.0 / N) * np.log(M) - np.log(2.0)
    log_R0 = (np.log(m - 1.0) + log_k2) / (m - 2.0 + 2.0 / N)
    log_mag = float(log_scale + (1.0 + 2.0 / N) * np.log(M) + (1.0 - 2.0 / N) * log_R0)
    return LowerBoundBreakdown(
        _exp(log_R0),
        -_exp(log_mag),
        _exp(m * log_R0 - np.log(m - 1.0)),
        _exp(log_k2 + (2.0 - 2.0 / N) * log_R0),
        log_mag,
    )


def energy(density: RadialDensity, m: float, cfg: HLSConfig | None = None) -> EnergyReport:
    """E[rho] = 1/(m-1) int rho^m - 1/2 int rho V, with the lower bound for its mass."""
    check_regime(density.N, m)
    entropy = density.power_integral(m) / (m - 1.0)
    interaction = 0.5 * density.pairing
    M = density.mass
    bound = energy_lower_bound(M, density.N, m, cfg).bound if M > 0 else 0.0
    return EnergyReport(M, entropy, interaction, entropy - interaction, bound)


def hls_pairing_bound(density: RadialDensity, cfg: HLSConfig) -> tuple[float, float]:
    """(int rho V, C/((N-2) sigma_N) ||rho||_1^{2/N} ||rho||_{2-2/N}^{2-2/N})."""
    N = density.N
    q = 2.0 - 2.0 / N
    bound = (
        cfg.C_HLS / ((N - 2) * sphere_area(N))
        * density.mass ** (2.0 / N) * density.power_integral(q)
    )
    return density.pairing, float(bound)
