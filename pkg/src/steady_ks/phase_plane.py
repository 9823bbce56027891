"""Logarithmic phase plane for the Lane-Emden equation.

With u = -((m-1)/m) r psi^{1/(m-1)} / psi' and v = -r psi' / psi, and s = log r,
the equation becomes the autonomous system

    du/ds = u (N - u - v/(m-1)),    dv/ds = v (-(N-2) + u + v).

A profile leaves P3 = (N, 0) along its unstable manifold as s -> -inf, u decreases
monotonically, and v blows up as r -> R*. The line z_eps(u) = (m-1)(1+eps)(N-u)
is a barrier that the trajectory stays above.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from ._numerics import clamped_power
from .lane_emden import RadialProfile, check_regime, default_startup_radius

BARRIER_SLACK = 1e-6
BOUNDARY_GAP = 1e-6


@dataclass(frozen=True)
class PhaseState:
    s: float
    u_hat: float
    v_hat: float


@dataclass(frozen=True, eq=False)
class PhasePath:
    """Phase states of one profile stored column-wise, ordered by increasing s."""

    s: np.ndarray
    u: np.ndarray
    v: np.ndarray

    def __len__(self) -> int:
        return len(self.s)

    def __getitem__(self, i) -> PhaseState:
        return PhaseState(float(self.s[i]), float(self.u[i]), float(self.v[i]))

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    @classmethod
    def from_states(cls, states) -> "PhasePath":
        states = list(states)
        return cls(
            np.array([st.s for st in states], dtype=float),
            np.array([st.u_hat for st in states], dtype=float),
            np.array([st.v_hat for st in states], dtype=float),
        )


def phase_coordinates(r, psi, dpsi, m: float):
    """(u, v) from samples of (psi, psi') at radii r."""
    r, psi, dpsi = (np.asarray(a, dtype=float) for a in (r, psi, dpsi))
    k = (m - 1.0) / m
    u = -k * r * clamped_power(psi, 1.0 / (m - 1.0)) / dpsi
    v = -r * dpsi / psi
    return u, v


def to_phase(profile: RadialProfile, radii=None, r0: float | None = None) -> PhasePath:
    """Phase states along a profile.

    By default the profile's own grid radii in [2 r0, R*(1 - 1e-6)] are used, where
    r0 is the series startup radius. Explicit ``radii`` are evaluated through the
    profile's dense evaluator (or spline).
    """
    prm = profile.params
    if radii is None:
        r0 = default_startup_radius(prm) if r0 is None else r0
        r = np.asarray(profile.r)
        keep = (r >= 2.0 * r0) & (r <= profile.r_star * (1.0 - BOUNDARY_GAP))
        r, psi, dpsi = r[keep], np.asarray(profile.psi)[keep], np.asarray(profile.dpsi)[keep]
    else:
        r = np.asarray(radii, dtype=float)
        psi, dpsi = profile(r)
    if np.any(r <= 0):
        raise ValueError("phase variables are undefined at r <= 0")
    if np.any(psi <= 0):
        raise ValueError("phase variables need psi > 0 (radius outside the open support)")
    if np.any(dpsi >= 0):
        raise ValueError("phase variables need psi' < 0 at every evaluated radius")
    u, v = phase_coordinates(r, psi, dpsi, prm.m)
    return PhasePath(np.log(r), u, v)


def vector_field(state, N: int, m: float):
    """(du/ds, dv/ds) at a PhaseState or at arrays (u, v)."""
    if isinstance(state, PhaseState):
        u, v = state.u_hat, state.v_hat
    else:
        u, v = state
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    du = u * (N - u - v / (m - 1.0))
    dv = v * (-(N - 2.0) + u + v)
    if du.ndim == 0:
        return float(du), float(dv)
    return du, dv


def jacobian(u: float, v: float, N: int, m: float) -> np.ndarray:
    return np.array(
        [
            [N - 2.0 * u - v / (m - 1.0), -u / (m - 1.0)],
            [v, -(N - 2.0) + u + 2.0 * v],
        ]
    )


@dataclass(frozen=True)
class FixedPoint:
    name: str
    location: tuple[float, float]
    eigenvalues: tuple[float, float]
    eigenvectors: tuple[tuple[float, float], tuple[float, float]]
    numeric_eigenvalues: tuple[float, float]
    defective: bool = False

    @property
    def eigenvalue_error(self) -> float:
        return float(np.max(np.abs(np.sort(self.eigenvalues) - np.sort(self.numeric_eigenvalues))))


@dataclass(frozen=True)
class FixedPointReport:
    N: int
    m: float
    points: tuple[FixedPoint, FixedPoint, FixedPoint]

    def __getitem__(self, name: str) -> FixedPoint:
        for pt in self.points:
            if pt.name == name:
                return pt
        raise KeyError(name)

    @property
    def max_eigenvalue_error(self) -> float:
        return max(pt.eigenvalue_error for pt in self.points)

    def to_dict(self) -> dict:
        return {
            "N": self.N,
            "m": self.m,
            "points": [
                {
                    "name": pt.name,
                    "location": list(pt.location),
                    "eigenvalues": list(pt.eigenvalues),
                    "eigenvectors": [list(e) for e in pt.eigenvectors],
                    "numeric_eigenvalues": list(pt.numeric_eigenvalues),
                    "defective": pt.defective,
                }
                for pt in self.points
            ],
            "max_eigenvalue_error": self.max_eigenvalue_error,
        }


def _unit(x, y):
    n = float(np.hypot(x, y))
    return (x / n, y / n)


def fixed_points(N: int, m: float) -> FixedPointReport:
    """P1, P2, P3 with analytic eigenpairs, checked against a numeric eigen-solve."""
    check_regime(N, m)
    lam2 = N - (N - 2.0) / (m - 1.0)
    p2_first = _unit(lam2 - (N - 2.0), N - 2.0)
    specs = [
        ("P1", (0.0, 0.0), (float(N), -(N - 2.0)), ((1.0, 0.0), (0.0, 1.0))),
        ("P2", (0.0, N - 2.0), (lam2, N - 2.0), (p2_first, (0.0, 1.0))),
        ("P3", (float(N), 0.0), (-float(N), 2.0), ((1.0, 0.0), _unit(-N / (m - 1.0), N + 2.0))),
    ]
    points = []
    for name, loc, lams, vecs in specs:
        num = np.linalg.eigvals(jacobian(*loc, N, m))
        num = tuple(float(x) for x in np.sort(num.real))
        defective = bool(np.isclose(lams[0], lams[1], rtol=0, atol=1e-12))
        points.append(FixedPoint(name, loc, tuple(float(x) for x in lams), vecs, num, defective))
    return FixedPointReport(int(N), float(m), tuple(points))


@dataclass(frozen=True)
class BarrierParams:
    N: int
    m: float
    epsilon: float

    def z(self, u):
        return (self.m - 1.0) * (1.0 + self.epsilon) * (self.N - np.asarray(u, dtype=float))

    @property
    def z_at_zero(self) -> float:
        return float(self.z(0.0))


def barrier_epsilon(N: int, m: float) -> BarrierParams:
    check_regime(N, m)
    eps = (2.0 - m) / m if m < 2.0 else 2.0 / N
    out = BarrierParams(int(N), float(m), eps)
    if not out.z_at_zero > N - 2:
        raise ArithmeticError(f"barrier start z(0) = {out.z_at_zero} does not exceed N - 2")
    return out


@dataclass(frozen=True)
class InvariantReport:
    """Worst margins of the four trajectory checks; positive means satisfied."""

    u_margin: float
    decrease_margin: float
    barrier_margin: float
    max_v: float
    diverged: bool
    violations: tuple[str, ...] = ()
    notes: tuple[str, ...] = field(default=())

    @property
    def passed(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        return {
            "u_margin": self.u_margin,
            "decrease_margin": self.decrease_margin,
            "barrier_margin": self.barrier_margin,
            "max_v": self.max_v,
            "diverged": self.diverged,
            "passed": self.passed,
            "violations": list(self.violations),
            "notes": list(self.notes),
        }


def check_invariants(states, N: int, m: float, slack: float = BARRIER_SLACK) -> InvariantReport:
    """Check u < N, u decreasing in s, v >= z_eps(u) - slack and max v > N - 2.

    Never raises on a violated check; failures are listed in the report. A path
    that stops before v exceeds N - 2 is noted as "divergence not yet observed".
    """
    path = states if isinstance(states, PhasePath) else PhasePath.from_states(states)
    barrier = barrier_epsilon(N, m)
    violations, notes = [], []
    if len(path) == 0:
        return InvariantReport(np.nan, np.nan, np.nan, np.nan, False, ("empty trajectory",))
    order = np.argsort(path.s, kind="stable")
    u, v = path.u[order], path.v[order]

    u_margin = float(np.min(N - u))
    if not u_margin > 0:
        violations.append(f"u reaches {float(np.max(u))!r} >= N = {N}")

    decrease = -np.diff(u)
    decrease_margin = float(np.min(decrease)) if decrease.size else np.inf
    if not decrease_margin > 0:
        violations.append("u is not strictly decreasing in s")

    below = u < N
    barrier_margin = float(np.min(v[below] - barrier.z(u[below]))) if np.any(below) else np.inf
    if barrier_margin < -slack:
        violations.append(f"v drops below the barrier by {-barrier_margin!r}")

    if np.any(u < 0) or np.any(v < 0):
        violations.append("state left the first quadrant")

    max_v = float(np.max(v))
    diverged = max_v > N - 2
    if not diverged:
        notes.append("divergence not yet observed")
    return InvariantReport(
        u_margin, decrease_margin, barrier_margin, max_v, diverged, tuple(violations), tuple(notes)
    )


@dataclass(frozen=True, eq=False)
class ManifoldTrajectory:
    s: np.ndarray
    u: np.ndarray
    v: np.ndarray
    dense: Callable = field(repr=False)

    def __call__(self, s):
        """(u, v) at manifold time s, within [0, s[-1]]."""
        return self.dense(np.asarray(s, dtype=float))

    def time_of_u(self, u: float) -> float:
        """Manifold time at which u takes the given value (u is monotone along it)."""
        return float(brentq(lambda t: self.dense(t)[0] - u, self.s[0], self.s[-1], xtol=1e-14, rtol=1e-15))


def integrate_unstable_manifold(
    N: int, m: float, offset: float = 1e-6, v_stop: float = 1e4, s_max: float = 200.0, rtol: float = 1e-12
) -> ManifoldTrajectory:
    """Forward solution of the autonomous system from P3 along its unstable eigenvector."""
    report = fixed_points(N, m)
    ex, ey = report["P3"].eigenvectors[1]
    if ey < 0:
        ex, ey = -ex, -ey
    y0 = [N + offset * ex, offset * ey]

    def rhs(s, y):
        return list(vector_field((y[0], y[1]), N, m))

    def blowup(s, y):
        return y[1] - v_stop

    blowup.terminal = True
    sol = solve_ivp(rhs, (0.0, s_max), y0, method="DOP853", rtol=rtol, atol=1e-14, events=blowup,
                    dense_output=True)
    s = np.linspace(0.0, sol.t[-1], 2001)
    u, v = sol.sol(s)
    return ManifoldTrajectory(s, u, v, sol.sol)


def manifold_discrepancy(profile: RadialProfile, trajectory: ManifoldTrajectory | None = None) -> float:
    """Max relative gap between a profile's phase path and the unstable manifold of P3.

    The system is autonomous, so the two agree up to a shift in s; the shift is fixed
    where u = N/2 and the paths are then compared pointwise, relative to max(1, v).
    """
    prm = profile.params
    traj = trajectory or integrate_unstable_manifold(prm.N, prm.m)
    path = to_phase(profile)
    half = 0.5 * prm.N
    i = int(np.argmin(np.abs(path.u - half)))
    shift = traj.time_of_u(path.u[i]) - path.s[i]
    t = path.s + shift
    ok = (t >= traj.s[0]) & (t <= traj.s[-1])
    u, v = traj(t[ok])
    scale = np.maximum(1.0, path.v[ok])
    return float(max(np.max(np.abs(u - path.u[ok]) / scale), np.max(np.abs(v - path.v[ok]) / scale)))
