"""Scaling symmetry psi_alpha(r) = alpha * Psi(alpha^mu r) and the mass map alpha <-> M."""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass

import numpy as np

from ._numerics import clamped_power, sphere_area
from .lane_emden import (
    CriticalCaseError,
    ProfileParams,
    RadialProfile,
    Tolerances,
    check_regime,
    critical_exponent,
    solve_profile,
)


def mu_exponent(m: float) -> float:
    if not m > 1:
        raise ValueError(f"scaling exponent needs m > 1, got {m}")
    return (2.0 - m) / (2.0 * (m - 1.0))


@dataclass(frozen=True)
class ScalingLaw:
    N: int
    m: float

    @property
    def mu(self) -> float:
        return mu_exponent(self.m)

    @property
    def mass_exponent(self) -> float:
        """e in M(alpha) = alpha^e M(1); positive exactly when m > 2 - 2/N."""
        return 1.0 / (self.m - 1.0) - self.mu * self.N

    @property
    def sigma_N(self) -> float:
        return sphere_area(self.N)


@dataclass(frozen=True)
class MassMap:
    canonical: RadialProfile
    M1_of_1: float
    law: ScalingLaw
    M1_error: float = 0.0

    def r_star(self, alpha: float) -> float:
        return alpha ** (-self.law.mu) * self.canonical.r_star

    def mass(self, alpha: float) -> float:
        return alpha**self.law.mass_exponent * self.M1_of_1


def mass_of_profile(profile: RadialProfile, with_error: bool = False):
    """sigma_N * int_0^R* psi^{1/(m-1)} s^{N-1} ds.

    Per-cell Gauss-Legendre on the profile grid, geometrically refined towards R*
    where psi^{1/(m-1)} loses smoothness for m > 2. With ``with_error`` the gap to a
    half-order rule is returned as an error estimate.
    """
    from .free_energy import RadialDensity

    fine = RadialDensity.from_profile(profile)
    if not with_error:
        return fine.mass
    coarse = RadialDensity(fine.N, fine.edges, fine.func, quad_order=fine.quad_order // 2)
    return fine.mass, float(abs(fine.mass - coarse.mass))


_CACHE: dict = {}
_CACHE_LOCK = threading.Lock()


def canonical_profile(N: int, m: float, tol: Tolerances | None = None) -> MassMap:
    """Solve the alpha = 1 profile once per (N, m, tol) and cache its mass."""
    check_regime(N, m)
    tol = tol or Tolerances()
    key = (int(N), float(m), tol)
    hit = _CACHE.get(key)
    if hit is not None:
        return hit
    profile = solve_profile(ProfileParams(N, m, 1.0), tol)
    mass, err = mass_of_profile(profile, with_error=True)
    result = MassMap(profile, mass, ScalingLaw(int(N), float(m)), err)
    with _CACHE_LOCK:
        return _CACHE.setdefault(key, result)


def rescale(mass_map: MassMap, alpha: float) -> RadialProfile:
    """Profile with central value alpha obtained from the canonical one."""
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    base = mass_map.canonical
    mu = mass_map.law.mu
    shrink = alpha ** (-mu)
    amp, slope = alpha, alpha ** (1.0 + mu)
    dense = None
    if base.dense is not None:
        inner = base.dense

        def dense(r):
            psi, dpsi = inner(np.asarray(r) / shrink)
            return amp * psi, slope * dpsi

    return RadialProfile(
        params=ProfileParams(base.params.N, base.params.m, alpha),
        r=base.r * shrink,
        psi=base.psi * amp,
        dpsi=base.dpsi * slope,
        r_star=base.r_star * shrink,
        steps=None if base.steps is None else base.steps * shrink,
        r_star_error=base.r_star_error * shrink,
        dense=dense,
    )


def alpha_of_mass(N: int, m: float, M: float, tol: Tolerances | None = None) -> float:
    """Unique central value whose profile carries mass M (inverts M = alpha^e M1(1))."""
    if math.isclose(m, critical_exponent(N), rel_tol=1e-9):
        raise CriticalCaseError(
            f"critical case m = 2 - 2/N = {critical_exponent(N)!r}: every stationary state "
            "has the same mass, so alpha(M) is not defined"
        )
    if not M > 0:
        raise ValueError(f"mass must be positive, got {M}")
    mass_map = canonical_profile(N, m, tol)
    return (M / mass_map.M1_of_1) ** (1.0 / mass_map.law.mass_exponent)


def profile_for_mass(N: int, m: float, M: float, tol: Tolerances | None = None) -> RadialProfile:
    return rescale(canonical_profile(N, m, tol), alpha_of_mass(N, m, M, tol))


def mass_within(mass_map: MassMap, alpha: float, R: float) -> float:
    """M2(alpha, R): mass of psi_alpha^{1/(m-1)} inside B_R (saturates at R*)."""
    from .free_energy import RadialDensity

    law = mass_map.law
    reach = min(R * alpha**law.mu, mass_map.canonical.r_star)
    density = RadialDensity.from_profile(mass_map.canonical)
    return alpha**law.mass_exponent * density.mass_inside(reach)


def mass_law_slope(N: int, m: float, alphas=(0.5, 1.0, 2.0), tol: Tolerances | None = None) -> float:
    """Least-squares slope of log M against log alpha from independent solves."""
    masses = [mass_of_profile(solve_profile(ProfileParams(N, m, a), tol)) for a in alphas]
    return float(np.polyfit(np.log(alphas), np.log(masses), 1)[0])
