"""Direct minimisation of the free energy over radial densities of mass M in a ball.

Densities are piecewise constant on n uniform radial cells of B_R. The interaction
uses the exact potential of such a density averaged over each cell, which gives a
symmetric matrix A with

    E(rho) = sum_i vol_i rho_i^m / (m-1) - rho^T A rho / 2,
    dE/drho_i = vol_i ((m/(m-1)) rho_i^{m-1} - Vbar_i),   Vbar = A rho / vol.

Projected gradient descent with backtracking then runs on {rho >= 0, sum vol rho = M}.
"""

from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from ._numerics import ball_volume, clamped_power, gauss_legendre, sphere_area
from .free_energy import RadialDensity, energy_lower_bound
from .lane_emden import check_regime


@lru_cache(maxsize=16)
def _interaction_matrix(N: int, R: float, n: int) -> np.ndarray:
    """A_ij = sigma_N int_{cell i} V[1_{cell j}](s) s^{N-1} ds, exact.

    The integrand is a polynomial of degree at most N + 1 on each cell, so a
    Gauss rule with N//2 + 2 nodes integrates it without error.
    """
    edges = np.linspace(0.0, R, n + 1)
    a, b = edges[:-1], edges[1:]
    t, w = gauss_legendre(N // 2 + 2)
    X = a[:, None] + (b - a)[:, None] * t  # (n, q)
    Wt = (b - a)[:, None] * w
    x = X[:, :, None]
    aj, bj = a[None, None, :], b[None, None, :]
    below = (bj**2 - aj**2) / 2.0
    with np.errstate(divide="ignore", invalid="ignore"):
        above = x ** (2 - N) * (bj**N - aj**N) / N
        inside = x ** (2 - N) * (x**N - aj**N) / N + (bj**2 - x**2) / 2.0
    V = np.where(x <= aj, below, np.where(x >= bj, above, inside)) / (N - 2)
    A = sphere_area(N) * np.einsum("iq,iqj->ij", Wt * X ** (N - 1), V)
    A = 0.5 * (A + A.T)
    A.setflags(write=False)
    return A


@dataclass(frozen=True, eq=False)
class DiscreteDensity:
    N: int
    R: float
    values: np.ndarray
    M: float

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim != 1 or len(values) < 1:
            raise ValueError("values must be a 1-D array of cell densities")
        if np.any(values < 0):
            raise ValueError("cell densities must be nonnegative")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def n(self) -> int:
        return len(self.values)

    @property
    def edges(self) -> np.ndarray:
        return np.linspace(0.0, self.R, self.n + 1)

    @property
    def midpoints(self) -> np.ndarray:
        e = self.edges
        return 0.5 * (e[:-1] + e[1:])

    @property
    def volumes(self) -> np.ndarray:
        return cell_volumes(self.N, self.R, self.n)

    @property
    def mass(self) -> float:
        return float(np.dot(self.volumes, self.values))

    def with_values(self, values) -> "DiscreteDensity":
        return DiscreteDensity(self.N, self.R, values, self.M)

    def to_radial(self) -> RadialDensity:
        return RadialDensity.piecewise_constant(self.N, self.edges, self.values)

    def cell_potential(self) -> np.ndarray:
        """Cell averages of the exact Newtonian potential of this density."""
        return _interaction_matrix(self.N, float(self.R), self.n) @ self.values / self.volumes

    def to_csv(self) -> str:
        rows = ["r,rho"] + [f"{float(r)!r},{float(v)!r}" for r, v in zip(self.midpoints, self.values)]
        return "\n".join(rows) + "\n"


def cell_volumes(N: int, R: float, n: int) -> np.ndarray:
    e = np.linspace(0.0, R, n + 1)
    return sphere_area(N) * (e[1:] ** N - e[:-1] ** N) / N


def init_uniform(N: int, M: float, R: float, n: int) -> DiscreteDensity:
    if not R > 0:
        raise ValueError("ball radius must be positive")
    if n < 16:
        raise ValueError("need at least 16 cells")
    if not M > 0:
        raise ValueError("mass must be positive")
    return DiscreteDensity(N, float(R), np.full(n, M / ball_volume(N, R)), float(M))


def discrete_energy(density: DiscreteDensity, m: float) -> tuple[float, np.ndarray]:
    """(E, dE/drho) of the piecewise-constant density."""
    rho = density.values
    vol = density.volumes
    A = _interaction_matrix(density.N, float(density.R), density.n)
    Arho = A @ rho
    value = float(np.dot(vol, clamped_power(rho, m)) / (m - 1.0) - 0.5 * np.dot(rho, Arho))
    grad = vol * (m / (m - 1.0) * clamped_power(rho, m - 1.0)) - Arho
    return value, grad


def project_mass(y: np.ndarray, vol: np.ndarray, M: float) -> np.ndarray:
    """Closest point to y in the vol-weighted norm on {x >= 0, sum vol x = M}.

    The solution is max(y - lam, 0), with the threshold lam found by water filling.
    """
    order = np.argsort(-y, kind="stable")
    ys, vs = y[order], vol[order]
    W = np.cumsum(vs)
    S = np.cumsum(vs * ys)
    lam = (S - M) / W
    k = int(np.nonzero(ys > lam)[0][-1])
    x = np.maximum(y - lam[k], 0.0)
    return x * (M / np.dot(vol, x))


@dataclass(frozen=True)
class MinimizeOptions:
    tol: float = 1e-10
    patience: int = 20
    kkt_tol: float = 1e-6
    max_iter: int = 50000
    max_halvings: int = 60


def kkt_residual(density: DiscreteDensity, m: float) -> tuple[float, float]:
    """(residual, C) for the discrete obstacle conditions.

    With F = (m/(m-1)) rho^{m-1} - Vbar and C the mass-weighted mean of F over the
    active cells, the residual is max(|F - C| on active cells, (C - F)_+ on empty
    ones), relative to max(|C|, (m/(m-1)) max rho^{m-1}).
    """
    rho, vol = density.values, density.volumes
    F = m / (m - 1.0) * clamped_power(rho, m - 1.0) - density.cell_potential()
    active = rho > 0
    weights = vol[active] * rho[active]
    C = float(np.dot(weights, F[active]) / weights.sum())
    worst = float(np.max(np.abs(F[active] - C)))
    if np.any(~active):
        worst = max(worst, float(np.max(np.maximum(C - F[~active], 0.0))))
    scale = max(abs(C), m / (m - 1.0) * float(np.max(rho)) ** (m - 1.0))
    return worst / scale, C


@dataclass(frozen=True, eq=False)
class MinimizeResult:
    density: DiscreteDensity
    m: float
    energy: float
    iterations: int
    kkt_residual: float
    converged: bool
    c_hat: float
    lower_bound: float
    history: np.ndarray = field(repr=False, default_factory=lambda: np.empty(0))

    def to_dict(self) -> dict:
        d = self.density
        return {
            "N": d.N,
            "m": self.m,
            "mass": d.M,
            "radius": d.R,
            "cells": d.n,
            "energy": self.energy,
            "lower_bound": self.lower_bound,
            "iterations": self.iterations,
            "kkt_residual": self.kkt_residual,
            "c_hat": self.c_hat,
            "converged": self.converged,
        }


def minimize(
    N: int,
    m: float,
    M: float,
    R: float,
    n: int,
    opts: MinimizeOptions | None = None,
    start: DiscreteDensity | None = None,
) -> MinimizeResult:
    """Projected gradient descent for the discrete free energy on B_R.

    Steps are taken in the vol-weighted metric, so the trial point is
    P(rho - t F) with F the per-volume gradient. The initial step is 1/L with L the
    largest diagonal entry m rho^{m-2} of the entropy Hessian (the interaction part
    is concave), halved until the usual sufficient-decrease test holds.
    """
    check_regime(N, m)
    opts = opts or MinimizeOptions()
    dens = start if start is not None else init_uniform(N, M, R, n)
    vol = dens.volumes
    rho = dens.values.copy()
    E, g = discrete_energy(dens, m)
    history = [E]
    converged = False
    it = 0
    for it in range(1, opts.max_iter + 1):
        F = g / vol
        rmax = float(np.max(rho))
        t = 1.0 / (m * rmax ** (m - 2.0))
        for _ in range(opts.max_halvings):
            trial = project_mass(rho - t * F, vol, M)
            d = trial - rho
            E_new, g_new = discrete_energy(dens.with_values(trial), m)
            if E_new <= E + np.dot(g, d) + 0.5 / t * np.dot(vol, d * d) and E_new <= E:
                break
            t *= 0.5
        else:
            break
        rho, E, g = trial, E_new, g_new
        history.append(E)
        if it >= opts.patience and abs(history[-1 - opts.patience] - E) <= opts.tol * abs(E):
            converged = True
            break
        if it % opts.patience == 0:
            if kkt_residual(dens.with_values(rho), m)[0] < opts.kkt_tol:
                converged = True
                break
    final = dens.with_values(rho)
    kkt, C = kkt_residual(final, m)
    # backtracking also stalls at round-off once the iterate is stationary
    converged = converged or kkt < opts.kkt_tol
    bound = energy_lower_bound(M, N, m).bound
    return MinimizeResult(final, float(m), E, it, kkt, converged, C, bound, np.asarray(history))


def _minimize_star(args):
    N, m, M, R, n, opts = args
    res = minimize(N, m, M, R, n, opts)
    return res.energy, res.converged, res.kkt_residual


@dataclass(frozen=True)
class MuCurve:
    radii: tuple[float, ...]
    cells: tuple[int, ...]
    energies: tuple[float, ...]
    converged: tuple[bool, ...]
    slack: float

    @property
    def nonincreasing(self) -> bool:
        e = self.energies
        return all(b <= a + self.slack * abs(a) for a, b in zip(e, e[1:]))

    def to_csv(self) -> str:
        rows = ["R,mu"] + [f"{float(r)!r},{float(e)!r}" for r, e in zip(self.radii, self.energies)]
        return "\n".join(rows) + "\n"


def mu_curve(
    N: int,
    m: float,
    M: float,
    radii,
    n: int,
    opts: MinimizeOptions | None = None,
    slack: float = 1e-8,
    jobs: int = 1,
) -> MuCurve:
    """Discrete mu_{M,R} for increasing R on nested grids.

    All radii share the cell width R_max / n, so the admissible set for a smaller
    ball embeds in that of a larger one and the discrete minima can only decrease.
    """
    radii = [float(r) for r in radii]
    if any(b <= a for a, b in zip(radii, radii[1:])):
        raise ValueError("radii must be strictly increasing")
    h = radii[-1] / n
    cells = [max(16, int(round(r / h))) for r in radii]
    radii_used = [c * h for c in cells]
    tasks = [(N, m, M, r, c, opts) for r, c in zip(radii_used, cells)]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            out = list(pool.map(_minimize_star, tasks))
    else:
        out = [_minimize_star(t) for t in tasks]
    return MuCurve(
        tuple(radii_used), tuple(cells), tuple(o[0] for o in out), tuple(o[1] for o in out), slack
    )


def l1_distance(density: DiscreteDensity, target, quad_order: int = 8) -> float:
    """int |rho - target| dx with the target averaged over each cell by Gauss."""
    t, w = gauss_legendre(quad_order)
    e = density.edges
    X = e[:-1, None] + (e[1:] - e[:-1])[:, None] * t
    W = (e[1:] - e[:-1])[:, None] * w * X ** (density.N - 1)
    vals = np.asarray(target(X), dtype=float)
    diff = np.abs(density.values[:, None] - vals)
    return float(sphere_area(density.N) * np.sum(W * diff))


def result_json(result: MinimizeResult) -> str:
    return json.dumps(result.to_dict(), indent=2)


__all__ = [
    "DiscreteDensity",
    "MinimizeOptions",
    "MinimizeResult",
    "MuCurve",
    "cell_volumes",
    "discrete_energy",
    "init_uniform",
    "kkt_residual",
    "l1_distance",
    "minimize",
    "mu_curve",
    "project_mass",
]
