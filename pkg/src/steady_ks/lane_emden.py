"""Radial Lane-Emden profiles for the diffusion-dominated Keller-Segel steady state.

The profile psi solves

    psi'' + (N-1)/r psi' = -(m-1)/m psi^{1/(m-1)},   psi(0) = alpha, psi'(0) = 0,

and the stationary density is psi^{1/(m-1)} on [0, R*], where R* is the first
zero of psi. Two independent constructions are provided: adaptive Runge-Kutta
shooting from a series startup (``solve_profile``) and a Picard iteration on
the equivalent integral equation for W = psi' (``picard_oracle``).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import make_interp_spline
from scipy.optimize import brentq

from ._numerics import clamped_power, gauss_legendre

CRITICAL_RTOL = 1e-9


class CriticalCaseError(ValueError):
    """Raised for the fair-competition exponent m = 2 - 2/N."""


class ProfileError(RuntimeError):
    """Numerical failure while constructing a profile."""


def critical_exponent(N: int) -> float:
    return 2.0 - 2.0 / N


def check_regime(N: int, m: float) -> None:
    """Reject anything outside the diffusion-dominated regime N >= 3, m > 2 - 2/N."""
    if int(N) != N or N < 3:
        raise ValueError(f"dimension N must be an integer >= 3, got {N}")
    m_c = critical_exponent(N)
    if math.isclose(m, m_c, rel_tol=CRITICAL_RTOL, abs_tol=0.0):
        raise CriticalCaseError(
            f"critical case m = 2 - 2/N = {m_c!r}: all stationary states share one "
            "mass, so the central value cannot be recovered from the mass"
        )
    if m < m_c:
        raise ValueError(
            f"requires m > 2 - 2/N = {m_c!r} (diffusion-dominated regime), got m = {m!r}"
        )


@dataclass(frozen=True)
class ProfileParams:
    N: int
    m: float
    alpha: float

    def __post_init__(self):
        check_regime(self.N, self.m)
        if not (self.alpha > 0 and math.isfinite(self.alpha)):
            raise ValueError(f"alpha must be positive and finite, got {self.alpha}")
        object.__setattr__(self, "N", int(self.N))
        object.__setattr__(self, "m", float(self.m))
        object.__setattr__(self, "alpha", float(self.alpha))

    @property
    def p(self) -> float:
        """Exponent 1/(m-1) linking psi to the density."""
        return 1.0 / (self.m - 1.0)

    @property
    def mu(self) -> float:
        return (2.0 - self.m) / (2.0 * (self.m - 1.0))

    @property
    def source_coeff(self) -> float:
        return (self.m - 1.0) / self.m

    @property
    def curvature(self) -> float:
        """c in psi ~ alpha - c r^2 / 2 near the origin."""
        return self.source_coeff * self.alpha**self.p / self.N

    @property
    def quartic_coeff(self) -> float:
        """Coefficient of r^4 in the series of psi at the origin."""
        return (
            self.source_coeff * self.p * self.alpha ** (self.p - 1.0) * self.curvature
            / (8.0 * (self.N + 2))
        )


@dataclass(frozen=True)
class Tolerances:
    rtol: float = 1e-10
    atol_scale: float = 1e-13
    root_tol: float = 1e-12
    n_points: int = 2048
    safety: float = 50.0
    max_step_fraction: float = 1.0 / 200.0
    r0: float | None = None
    estimate_error: bool = True


def default_startup_radius(params: ProfileParams) -> float:
    """min(0.01 alpha^-mu, radius where the quartic series term reaches 1e-14 alpha)."""
    quartic = (1e-14 * params.alpha / params.quartic_coeff) ** 0.25
    return min(0.01 * params.alpha ** (-params.mu), quartic)


def series_startup(params: ProfileParams, r0: float) -> tuple[float, float]:
    """Second-order expansion (psi(r0), psi'(r0)) about the regular centre."""
    if not r0 > 0:
        raise ValueError(f"startup radius must be positive, got {r0}")
    c = params.curvature
    psi0 = params.alpha - 0.5 * c * r0**2
    if psi0 <= 0.5 * params.alpha:
        raise ValueError(f"startup radius {r0} too large: series value {psi0} <= alpha/2")
    return psi0, -c * r0


def lane_emden_rhs(params: ProfileParams):
    N, p, k = params.N, params.p, params.source_coeff

    def rhs(r, y):
        psi, dpsi = y
        return np.array([dpsi, -(N - 1) / r * dpsi - k * clamped_power(psi, p)])

    return rhs


@dataclass(frozen=True)
class RadialProfile:
    """Sampled Lane-Emden profile on [0, R*] with an optional dense evaluator.

    ``r``, ``psi`` and ``dpsi`` are a uniform resampling of the solution; ``steps``
    holds the integrator's accepted radii. ``dense`` maps radii to (psi, psi') at
    solver accuracy; without it the samples are interpolated by quintic splines.
    """

    params: ProfileParams
    r: np.ndarray
    psi: np.ndarray
    dpsi: np.ndarray
    r_star: float
    steps: np.ndarray | None = None
    r_star_error: float = 0.0
    dense: Callable | None = field(default=None, repr=False, compare=False)

    @cached_property
    def _splines(self):
        return make_interp_spline(self.r, self.psi, k=5), make_interp_spline(self.r, self.dpsi, k=5)

    def __call__(self, r):
        """(psi, psi') at arbitrary radii; both are 0 beyond the support."""
        r = np.asarray(r, dtype=float)
        inside = (r >= 0) & (r < self.r_star)
        rr = np.clip(r, 0.0, self.r_star)
        if self.dense is not None:
            psi, dpsi = self.dense(rr)
        else:
            s_psi, s_dpsi = self._splines
            psi, dpsi = s_psi(rr), s_dpsi(rr)
        psi = np.where(inside, np.maximum(psi, 0.0), 0.0)
        dpsi = np.where(inside, dpsi, 0.0)
        return psi, dpsi

    def density(self, r):
        """Stationary density psi^{1/(m-1)}, zero outside the support."""
        return clamped_power(self(r)[0], self.params.p)

    def derivative_bound(self) -> float:
        """Upper bound (m-1) R* alpha^{1/(m-1)} / (m N) on sup |psi'|."""
        prm = self.params
        return prm.source_coeff * self.r_star * prm.alpha**prm.p / prm.N

    def invariant_violations(self, tol: float = 1e-12) -> list[str]:
        prm = self.params
        out = []
        if self.psi[0] != prm.alpha or self.dpsi[0] != 0.0:
            out.append("centre values differ from (alpha, 0)")
        if np.any(np.diff(self.r) <= 0) or self.r[0] != 0.0:
            out.append("grid is not strictly increasing from 0")
        if self.r[-1] != self.r_star:
            out.append("last grid point is not r_star")
        interior = slice(1, -1)
        if np.any(self.psi[interior] <= 0):
            out.append("psi not positive inside the support")
        if np.any(self.dpsi[interior] >= 0):
            out.append("psi' not negative inside the support")
        if abs(self.psi[-1]) > tol * prm.alpha:
            out.append("psi(r_star) not within startup tolerance of 0")
        if np.max(np.abs(self.dpsi)) > self.derivative_bound() * (1 + 1e-9):
            out.append("sup |psi'| exceeds (m-1) R* alpha^{1/(m-1)} / (m N)")
        return out

    # -- serialization -------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "N": self.params.N,
            "m": self.params.m,
            "alpha": self.params.alpha,
            "r_star": float(self.r_star),
            "r": [float(x) for x in self.r],
            "psi": [float(x) for x in self.psi],
            "dpsi": [float(x) for x in self.dpsi],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    def to_csv(self) -> str:
        rows = ["r,psi,dpsi"]
        rows += [f"{float(a)!r},{float(b)!r},{float(c)!r}" for a, b, c in zip(self.r, self.psi, self.dpsi)]
        return "\n".join(rows) + "\n"

    @classmethod
    def from_dict(cls, data: dict) -> "RadialProfile":
        params = ProfileParams(data["N"], data["m"], data["alpha"])
        return cls(
            params=params,
            r=np.asarray(data["r"], dtype=float),
            psi=np.asarray(data["psi"], dtype=float),
            dpsi=np.asarray(data["dpsi"], dtype=float),
            r_star=float(data["r_star"]),
        )

    @classmethod
    def from_csv(cls, text: str, N: int, m: float) -> "RadialProfile":
        lines = [ln for ln in text.strip().splitlines() if ln.strip()]
        if lines[0].replace(" ", "") != "r,psi,dpsi":
            raise ValueError("profile CSV must start with the header 'r,psi,dpsi'")
        r, psi, dpsi = np.array([[float(x) for x in ln.split(",")] for ln in lines[1:]]).T
        return cls(ProfileParams(N, m, psi[0]), r, psi, dpsi, float(r[-1]))

    @classmethod
    def load(cls, path, N: int | None = None, m: float | None = None) -> "RadialProfile":
        path = Path(path)
        text = path.read_text()
        if path.suffix.lower() == ".csv":
            if N is None or m is None:
                raise ValueError("CSV profiles carry no parameters; N and m are required")
            return cls.from_csv(text, N, m)
        return cls.from_dict(json.loads(text))


def _integrate(params: ProfileParams, tol: Tolerances):
    """Shoot from the series startup to the first zero of psi."""
    r0 = tol.r0 if tol.r0 is not None else default_startup_radius(params)
    psi0, dpsi0 = series_startup(params, r0)
    scale = params.alpha ** (-params.mu)
    r_guess = math.sqrt(2.0 * params.N / params.source_coeff)
    r_max = tol.safety * scale * r_guess

    def crossing(r, y):
        return y[0]

    crossing.terminal = True
    crossing.direction = -1

    atol = tol.atol_scale * np.array([params.alpha, params.alpha / scale])
    sol = solve_ivp(
        lane_emden_rhs(params), (r0, r_max), [psi0, dpsi0], method="DOP853",
        rtol=tol.rtol, atol=atol, dense_output=True, events=crossing,
        max_step=tol.max_step_fraction * scale * r_guess,
    )
    if sol.status == -1:
        raise ProfileError(f"integrator failed before the support radius: {sol.message}")
    if sol.status != 1 or len(sol.t_events[0]) == 0:
        raise ProfileError(
            f"psi did not vanish before r = {r_max:.6g}; finite support is guaranteed, "
            "so the integrator is misconfigured"
        )
    # the event root is already on the dense output; tighten it with brentq
    t_hit = float(sol.t_events[0][0])
    lo = sol.t[-2] if len(sol.t) > 1 else r0
    f = lambda r: float(sol.sol(r)[0])
    if f(lo) > 0 > f(sol.t[-1]):
        r_star = brentq(f, lo, sol.t[-1], xtol=1e-15 * t_hit, rtol=4 * np.finfo(float).eps, maxiter=200)
    else:
        r_star = t_hit
    if abs(f(r_star)) > tol.root_tol * params.alpha:
        raise ProfileError(f"root refinement stalled: |psi(R*)| = {abs(f(r_star)):.3e}")
    return sol, r0, float(r_star)


def solve_profile(params: ProfileParams, tol: Tolerances | None = None) -> RadialProfile:
    """Integrate the Lane-Emden equation up to its support radius R*."""
    tol = tol or Tolerances()
    sol, r0, r_star = _integrate(params, tol)

    alpha, c, q = params.alpha, params.curvature, params.quartic_coeff

    def dense(r):
        # below r0 the fourth-order series is more accurate than the startup pair
        r = np.asarray(r, dtype=float)
        shape = r.shape
        r = r.ravel()
        near = r < r0
        y = sol.sol(np.where(near, r0, r))
        psi = np.where(near, alpha - 0.5 * c * r**2 + q * r**4, y[0])
        dpsi = np.where(near, -c * r + 4 * q * r**3, y[1])
        return psi.reshape(shape), dpsi.reshape(shape)

    r = np.linspace(0.0, r_star, tol.n_points)
    r[-1] = r_star
    psi, dpsi = dense(r)
    psi[0], dpsi[0] = alpha, 0.0
    psi[-1] = 0.0

    err = 0.0
    if tol.estimate_error:
        # truncation part: largest gap to a looser and a tighter solve;
        # round-off part: one ulp of R* per accepted step
        gaps = [
            abs(_integrate(params, replace(tol, rtol=f * tol.rtol, atol_scale=f * tol.atol_scale))[2] - r_star)
            for f in (10.0, 0.1)
        ]
        err = max(gaps) + len(sol.t) * np.finfo(float).eps * r_star

    steps = np.append(sol.t[sol.t < r_star], r_star)
    profile = RadialProfile(params, r, psi, dpsi, r_star, steps=steps, r_star_error=err, dense=dense)
    bad = profile.invariant_violations(tol=tol.root_tol)
    if bad:
        raise ProfileError("solved profile violates invariants: " + "; ".join(bad))
    return profile


# -- Picard oracle ---------------------------------------------------------------


@dataclass(frozen=True)
class PicardSolution:
    params: ProfileParams
    delta: float
    r: np.ndarray
    W: np.ndarray
    iterations: int
    residual: float
    coeffs: np.ndarray = field(repr=False)

    def __call__(self, r):
        """W at arbitrary radii in [0, delta]."""
        x = 2.0 * np.asarray(r, dtype=float) / self.delta - 1.0
        return np.polynomial.chebyshev.chebval(x, self.coeffs)

    def psi(self, r):
        """psi(r) = alpha + int_0^r W."""
        anti = np.polynomial.chebyshev.chebint(self.coeffs, lbnd=-1.0) * (self.delta / 2.0)
        x = 2.0 * np.asarray(r, dtype=float) / self.delta - 1.0
        return self.params.alpha + np.polynomial.chebyshev.chebval(x, anti)


def contraction_delta(params: ProfileParams, eps: float | None = None) -> float:
    """Interval length that keeps the integral map a contraction on L^1(0, delta).

    delta_1 keeps the map inside the set of non-positive W with L^1 norm <= eps;
    the Lipschitz constant of s -> s^{1/(m-1)} then caps delta once more.
    """
    a = params.alpha
    eps = a if eps is None else eps
    p, N, m = params.p, params.N, params.m
    top = (a + eps) ** p
    delta1 = min(1.0, N * m * a / ((m - 1) * top), math.sqrt(2 * eps * N * m / ((m - 1) * top)))
    base = a - (m - 1) * delta1 / (N * m) * top
    if base <= 0:
        base = a - 0.5 * (m - 1) * delta1 / (N * m) * top
    q = (2.0 - m) / (m - 1.0)
    lip = max(2.0**q / (m - 1) * (a + eps) ** q, base**q)
    return min(delta1, math.sqrt(N * m / (lip * (m - 1))))


def default_picard_delta(params: ProfileParams) -> float:
    return min(contraction_delta(params), 0.1 * params.alpha ** (-params.mu))


def picard_oracle(
    params: ProfileParams,
    delta: float | None = None,
    max_iter: int = 200,
    tol: float = 1e-15,
    degree: int = 48,
    quad_order: int = 64,
) -> PicardSolution:
    """Fixed-point iteration W <- F(W) for the integral form of the equation.

    F(W)(r) = -(m-1)/(m r^{N-1}) int_0^r s^{N-1} (alpha + int_0^s W)^{1/(m-1)} ds,
    written with s = r t as -(m-1)/m * r * int_0^1 t^{N-1} psi(r t)^{1/(m-1)} dt and
    discretised by Chebyshev collocation in r and Gauss-Legendre in t.
    """
    delta = default_picard_delta(params) if delta is None else float(delta)
    if not delta > 0:
        raise ValueError("delta must be positive")
    cheb = np.polynomial.chebyshev
    n = degree + 1
    x = np.cos(np.pi * (np.arange(n) + 0.5) / n)[::-1]
    r = 0.5 * delta * (x + 1.0)
    t, w = gauss_legendre(quad_order)
    tw = w * t ** (params.N - 1)
    rt = r[:, None] * t[None, :]
    xt = 2.0 * rt / delta - 1.0
    k, a, p = params.source_coeff, params.alpha, params.p

    def apply(coeffs):
        anti = cheb.chebint(coeffs, lbnd=-1.0) * (delta / 2.0)
        psi = a + cheb.chebval(xt, anti)
        if np.any(psi <= 0):
            raise ProfileError("Picard iterate left the positive cone; delta is too large")
        return -k * r * (clamped_power(psi, p) @ tw)

    # L1(0, delta) norm of a Chebyshev series, by Gauss-Legendre on the interval
    gx, gw = gauss_legendre(quad_order)
    def l1(coeffs):
        return 0.5 * delta * float(np.sum(gw * np.abs(cheb.chebval(2 * gx - 1, coeffs))))

    coeffs = np.zeros(n)
    residual = np.inf
    for it in range(1, max_iter + 1):
        new = cheb.chebfit(x, apply(coeffs), degree)
        residual = l1(new - coeffs)
        coeffs = new
        if residual <= tol * max(1.0, l1(coeffs)):
            break
    else:
        raise ProfileError(
            f"Picard iteration did not converge in {max_iter} steps (residual {residual:.3e}); "
            "delta is probably outside the contraction regime"
        )
    grid = np.linspace(0.0, delta, 201)
    Wg = cheb.chebval(2 * grid / delta - 1, coeffs)
    Wg[0] = 0.0
    return PicardSolution(params, delta, grid, np.minimum(Wg, 0.0), it, residual, coeffs)


# -- a posteriori check ----------------------------------------------------------


def ode_residual(profile: RadialProfile, step: float | None = None) -> float:
    """Max |psi'' + (N-1)/r psi' + (m-1)/m psi^{1/(m-1)}| over grid midpoints.

    psi'' is a central difference of the dense psi' when one is attached, otherwise
    the derivative of a quintic spline through the sampled psi'.
    """
    prm = profile.params
    mid = 0.5 * (profile.r[1:] + profile.r[:-1])
    if profile.dense is not None:
        h = step if step is not None else 1e-5 * profile.r_star
        mid = mid[(mid > h) & (mid < profile.r_star - h)]
        psi, dpsi = profile.dense(mid)
        d2 = (profile.dense(mid + h)[1] - profile.dense(mid - h)[1]) / (2 * h)
    else:
        s_psi, s_dpsi = profile._splines
        psi, dpsi = s_psi(mid), s_dpsi(mid)
        d2 = s_dpsi.derivative()(mid)
    res = d2 + (prm.N - 1) / mid * dpsi + prm.source_coeff * clamped_power(psi, prm.p)
    return float(np.max(np.abs(res)))
