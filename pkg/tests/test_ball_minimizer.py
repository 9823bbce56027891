from __future__ import annotations

import json
import math

import numpy as np
import pytest

from conftest import SINC_MASS, SINC_R_STAR, matrix_profile
from steady_ks.ball_minimizer import (
    DiscreteDensity,
    MinimizeOptions,
    cell_volumes,
    discrete_energy,
    init_uniform,
    kkt_residual,
    l1_distance,
    minimize,
    mu_curve,
    project_mass,
    result_json,
)
from steady_ks.free_energy import RadialDensity, energy, energy_lower_bound
from steady_ks.lane_emden import CriticalCaseError


@pytest.fixture(scope="module")
def sinc_minimizer():
    return minimize(3, 2.0, SINC_MASS, 6.0, 512)


def test_init_unit_ball():
    d = init_uniform(3, 4 * math.pi / 3, 1.0, 64)
    np.testing.assert_allclose(d.values, 1.0, rtol=1e-14)
    assert d.mass == pytest.approx(4 * math.pi / 3, rel=1e-14)


def test_init_dimension_four():
    d = init_uniform(4, 1.0, 2.0, 32)
    np.testing.assert_allclose(d.values, 1.0 / (math.pi**2 / 2 * 2**4), rtol=1e-14)
    assert d.mass == pytest.approx(1.0, rel=1e-14)


def test_init_rejections():
    with pytest.raises(ValueError):
        init_uniform(3, 1.0, 0.0, 64)
    with pytest.raises(ValueError):
        init_uniform(3, 1.0, 1.0, 8)
    with pytest.raises(ValueError):
        init_uniform(3, -1.0, 1.0, 64)
    with pytest.raises(ValueError):
        DiscreteDensity(3, 1.0, [1.0, -1.0], 1.0)


def test_cell_volumes_sum_to_ball():
    for N in (3, 4, 5):
        vol = cell_volumes(N, 2.0, 100)
        assert vol.sum() == pytest.approx(math.pi ** (N / 2) * 2.0**N / math.gamma(N / 2 + 1), rel=1e-13)


def test_values_are_copied():
    raw = np.ones(32)
    d = DiscreteDensity(3, 1.0, raw, 1.0)
    raw[0] = 5.0
    assert d.values[0] == 1.0
    with pytest.raises(ValueError):
        d.values[0] = 2.0


def test_unit_ball_energy_converges():
    target = 16 * math.pi / 15
    prev = None
    for n in (64, 512):
        E, _ = discrete_energy(init_uniform(3, 4 * math.pi / 3, 1.0, n), 2.0)
        assert abs(E - target) <= 1e-3 * target
        prev = E
    assert prev == pytest.approx(target, rel=1e-10)


def test_cell_potential_matches_continuum():
    # cell averages of the exact potential against Gauss averages of free_energy's V
    rng = np.random.default_rng(11)
    d = DiscreteDensity(3, 2.0, rng.random(40), 1.0)
    V = d.to_radial().potential
    e = d.edges
    t, w = np.polynomial.legendre.leggauss(10)
    X = 0.5 * (e[:-1, None] + e[1:, None]) + 0.5 * (e[1:] - e[:-1])[:, None] * t
    W = 0.5 * (e[1:] - e[:-1])[:, None] * w * X**2 * 4 * math.pi
    avg = np.sum(W * V(X), axis=1) / d.volumes
    np.testing.assert_allclose(d.cell_potential(), avg, rtol=1e-11)


def test_discrete_energy_matches_free_energy():
    rng = np.random.default_rng(5)
    for m in (2.0, 3.0, 1.5):
        d = DiscreteDensity(3, 2.0, rng.random(48), 1.0)
        E, _ = discrete_energy(d, m)
        assert E == pytest.approx(energy(d.to_radial(), m).total, rel=1e-11)


@pytest.mark.parametrize("N,m", [(3, 2.0), (3, 3.0), (4, 1.8), (5, 2.5)])
def test_gradient_finite_differences(N, m):
    rng = np.random.default_rng(1000 + N)
    for _ in range(10):
        d = DiscreteDensity(N, 1.5, 0.5 + rng.random(24), 1.0)
        _, grad = discrete_energy(d, m)
        direction = rng.standard_normal(24)
        step = 1e-6
        hi, _ = discrete_energy(d.with_values(d.values + step * direction), m)
        lo, _ = discrete_energy(d.with_values(d.values - step * direction), m)
        fd = (hi - lo) / (2 * step)
        exact = float(np.dot(grad, direction))
        assert abs(fd - exact) <= 1e-6 * abs(exact)


def test_empty_cells():
    rng = np.random.default_rng(2)
    vals = rng.random(32)
    vals[20:] = 0.0
    d = DiscreteDensity(3, 1.0, vals, 1.0)
    E, grad = discrete_energy(d, 2.0)
    np.testing.assert_allclose(grad[20:], -d.volumes[20:] * d.cell_potential()[20:], rtol=1e-13)
    assert E == pytest.approx(energy(d.to_radial(), 2.0).total, rel=1e-11)


def test_projection_properties():
    rng = np.random.default_rng(9)
    vol = cell_volumes(3, 2.0, 50)
    for M in (0.1, 1.0, 30.0):
        y = rng.standard_normal(50)
        x = project_mass(y, vol, M)
        assert np.all(x >= 0)
        assert np.dot(vol, x) == pytest.approx(M, rel=1e-14)
        # optimality: no feasible random point is closer in the weighted norm
        for _ in range(20):
            z = project_mass(rng.standard_normal(50), vol, M)
            assert np.dot(vol, (x - y) ** 2) <= np.dot(vol, (z - y) ** 2) + 1e-12


def test_projection_keeps_feasible_points():
    vol = cell_volumes(3, 1.0, 20)
    x = np.linspace(1.0, 0.0, 20)
    M = float(np.dot(vol, x))
    np.testing.assert_allclose(project_mass(x, vol, M), x, atol=1e-14)


def test_sinc_oracle(sinc_minimizer, sinc_profile):
    res = sinc_minimizer
    target = energy(RadialDensity.from_profile(sinc_profile), 2.0).total
    assert res.converged
    assert abs(res.energy - target) <= 0.01 * abs(target)
    assert l1_distance(res.density, sinc_profile.density) <= 0.02 * SINC_MASS
    assert res.energy >= res.lower_bound
    assert res.density.mass == pytest.approx(SINC_MASS, rel=1e-12)


def test_sinc_minimizer_support_and_constant(sinc_minimizer):
    d = sinc_minimizer.density
    active = d.values > 0
    last = int(np.nonzero(active)[0][-1])
    assert np.all(active[: last + 1])
    assert d.edges[last + 1] == pytest.approx(SINC_R_STAR, abs=2 * d.R / d.n)
    assert sinc_minimizer.c_hat == pytest.approx(-2.0, rel=0.02)


def test_energy_history_nonincreasing(sinc_minimizer):
    assert np.all(np.diff(sinc_minimizer.history) <= 0)


def test_small_ball_saturates():
    res = minimize(3, 2.0, SINC_MASS, 3.0, 256)
    assert res.density.values[-1] > 0
    assert np.all(res.density.values > 0)
    assert res.energy >= energy_lower_bound(SINC_MASS, 3, 2.0).bound


@pytest.mark.parametrize("N,m", [(3, 1.5), (4, 3.0)])
def test_other_exponents(N, m):
    prof = matrix_profile(N, m)
    M = RadialDensity.from_profile(prof).mass
    res = minimize(N, m, M, 1.4 * prof.r_star, 384)
    assert res.converged
    assert l1_distance(res.density, prof.density) <= 0.02 * M
    assert res.kkt_residual < 1e-3


def test_kkt_residual_flags_uniform_start():
    d = init_uniform(3, SINC_MASS, 6.0, 128)
    assert kkt_residual(d, 2.0)[0] > 0.1


def test_minimize_rejects_critical():
    with pytest.raises(CriticalCaseError):
        minimize(3, 4 / 3, 1.0, 2.0, 32)


def test_non_convergence_is_flagged():
    res = minimize(3, 2.0, SINC_MASS, 6.0, 128, MinimizeOptions(max_iter=2))
    assert not res.converged and res.iterations == 2


def test_result_json(sinc_minimizer):
    data = json.loads(result_json(sinc_minimizer))
    assert data["converged"] is True and data["cells"] == 512
    assert data["energy"] == sinc_minimizer.energy


def test_mu_curve():
    curve = mu_curve(3, 2.0, SINC_MASS, [3, 4, 5, 6, 8], 512)
    assert curve.radii == pytest.approx((3.0, 4.0, 5.0, 6.0, 8.0))
    assert curve.nonincreasing
    assert abs(curve.energies[-1] - curve.energies[-2]) <= 0.005 * abs(curve.energies[-2])
    assert curve.to_csv().splitlines()[0] == "R,mu"


def test_mu_curve_single_radius_and_order():
    assert len(mu_curve(3, 2.0, 10.0, [2.0], 64).energies) == 1
    with pytest.raises(ValueError):
        mu_curve(3, 2.0, 10.0, [2.0, 1.0], 64)


def test_mu_curve_parallel_matches_serial():
    a = mu_curve(3, 2.0, 10.0, [1.5, 2.0, 3.0], 96)
    b = mu_curve(3, 2.0, 10.0, [1.5, 2.0, 3.0], 96, jobs=2)
    assert a.energies == b.energies
