"""Obstacle-problem characterisation of the stationary density.

A global minimiser U with potential V satisfies (m/(m-1)) U^{m-1} = (V + C)_+ for a
constant C. On a Lane-Emden profile U^{m-1} = psi, so inside the support
(m/(m-1)) psi - V is constant and equals -V(R*), and V + C <= 0 outside.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from ._numerics import clamped_power
from .free_energy import RadialDensity
from .lane_emden import RadialProfile

BOUNDARY_EXCLUSION = 1e-4
OUTSIDE_SAMPLES = 201


def _density_for(profile: RadialProfile, density: RadialDensity | None) -> RadialDensity:
    return density if density is not None else RadialDensity.from_profile(profile)


def chat_constant(profile: RadialProfile, density: RadialDensity | None = None) -> tuple[float, float]:
    """(C from the mass average of F(U) U, C from -V(R*)).

    F(U) = (m/(m-1)) psi - V, so the average is (1/M) int F(U) U dx.
    """
    rho = _density_for(profile, density)
    k = profile.params.m / (profile.params.m - 1.0)
    M = rho.mass
    if not M > 0:
        raise ValueError("profile carries no mass")
    avg = rho.integrate(lambda r, u: (k * profile(r)[0] - rho.potential(r)) * u) / M
    boundary = -float(rho.potential(profile.r_star))
    return float(avg), boundary


@dataclass(frozen=True)
class ObstacleReport:
    c_hat: float
    c_hat_boundary: float
    inside_residual: float
    inside_relative: float
    outside_margin: float
    c_hat_consistency: float
    passed: bool
    violations: tuple[str, ...] = field(default=())

    def to_dict(self) -> dict:
        return {
            "c_hat": self.c_hat,
            "c_hat_boundary": self.c_hat_boundary,
            "inside_residual": self.inside_residual,
            "inside_relative": self.inside_relative,
            "outside_margin": self.outside_margin,
            "c_hat_consistency": self.c_hat_consistency,
            "passed": self.passed,
            "violations": list(self.violations),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def verify_obstacle(
    profile: RadialProfile,
    density: RadialDensity | None = None,
    tol: float = 1e-7,
    outside_tol: float = 1e-10,
    consistency_tol: float = 1e-8,
) -> ObstacleReport:
    """Check (m/(m-1)) psi = V + C inside the support and V + C <= 0 on (R*, 3R*].

    The inside residual sup |(m/(m-1)) psi - V - C| is taken at the profile's sample
    radii up to R*(1 - 1e-4); ``tol`` applies to it relative to (m/(m-1)) alpha, the
    size of (m/(m-1)) psi at the centre. Never raises on a failed check.
    """
    prm = profile.params
    k = prm.m / (prm.m - 1.0)
    violations = []
    try:
        rho = _density_for(profile, density)
        c_avg, c_bnd = chat_constant(profile, rho)
    except (ValueError, FloatingPointError) as exc:
        nan = float("nan")
        return ObstacleReport(nan, nan, nan, nan, nan, nan, False, (f"cannot evaluate: {exc}",))

    r = np.asarray(profile.r)
    psi = np.asarray(profile.psi)
    inner = r <= profile.r_star * (1.0 - BOUNDARY_EXCLUSION)
    F = k * psi[inner] - rho.potential(r[inner])
    inside = float(np.max(np.abs(F - c_avg)))
    relative = inside / (k * abs(prm.alpha))
    if not relative <= tol:
        violations.append(f"relative inside residual {relative!r} exceeds {tol!r}")

    outer = np.linspace(profile.r_star, 3.0 * profile.r_star, OUTSIDE_SAMPLES)[1:]
    margin = float(np.min(-(rho.potential(outer) + c_avg)))
    if margin < -outside_tol:
        violations.append(f"V + C is positive outside the support (margin {margin!r})")

    consistency = abs(c_avg - c_bnd)
    if not consistency <= consistency_tol * max(abs(c_bnd), 1e-300):
        violations.append(f"mass-average and boundary values of C differ by {consistency!r}")

    if not np.isfinite([inside, margin, consistency]).all():
        violations.append("non-finite values in the residuals")
    return ObstacleReport(
        c_avg, c_bnd, inside, relative, margin, consistency, not violations, tuple(violations)
    )


def laplacian_residual(profile: RadialProfile, exclusion: float = BOUNDARY_EXCLUSION) -> float:
    """max |(m/(m-1)) Lap psi + psi^{1/(m-1)}| / alpha^{1/(m-1)} by central differences.

    Uses the uniform sample grid, away from r = 0 and from the last 1e-4 R* of the support.
    """
    prm = profile.params
    r, psi = np.asarray(profile.r), np.asarray(profile.psi)
    h = r[1] - r[0]
    if not np.allclose(np.diff(r), h, rtol=1e-9, atol=0):
        raise ValueError("laplacian_residual needs a uniform grid")
    rc = r[1:-1]
    d2 = (psi[2:] - 2.0 * psi[1:-1] + psi[:-2]) / h**2
    d1 = (psi[2:] - psi[:-2]) / (2.0 * h)
    lap = d2 + (prm.N - 1) / rc * d1
    res = prm.m / (prm.m - 1.0) * lap + clamped_power(psi[1:-1], prm.p)
    keep = rc <= profile.r_star * (1.0 - exclusion) - h
    return float(np.max(np.abs(res[keep])) / prm.alpha**prm.p)


@dataclass(frozen=True)
class FlatnessReport:
    delta: float
    hs: tuple[float, ...]
    values: tuple[float, ...]
    tol: float

    @property
    def decreasing(self) -> bool:
        return all(b < a for a, b in zip(self.values, self.values[1:]))

    @property
    def final_below_tol(self) -> bool:
        return self.values[-1] < self.tol

    @property
    def passed(self) -> bool:
        return self.decreasing and self.final_below_tol

    def to_dict(self) -> dict:
        return {
            "delta": self.delta,
            "hs": list(self.hs),
            "values": list(self.values),
            "tol": self.tol,
            "decreasing": self.decreasing,
            "final_below_tol": self.final_below_tol,
        }


def boundary_flatness(
    profile: RadialProfile,
    delta: float,
    hs=(1e-2, 1e-3, 1e-4),
    tol: float = 1e-3,
    samples: int = 257,
) -> FlatnessReport:
    """max of |d/dr psi^{1 + delta/(m-1)}| over [R*(1 - h), R*) for each h.

    |d/dr psi^{1+q}| = (1 + q) psi^q |psi'| with q = delta/(m-1). For delta = 0 the
    limit is |psi'(R*)| > 0, which is reported rather than asserted to vanish.
    """
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    q = delta / (profile.params.m - 1.0)
    R = profile.r_star
    values = []
    for h in hs:
        r = np.linspace(R * (1.0 - h), R, samples)[:-1]
        psi, dpsi = profile(r)
        g = (1.0 + q) * clamped_power(psi, q) * np.abs(dpsi) if q > 0 else np.abs(dpsi)
        values.append(float(np.max(g)))
    return FlatnessReport(float(delta), tuple(float(h) for h in hs), tuple(values), float(tol))
