from __future__ import annotations

import json
import math

import numpy as np
import pytest
from scipy.special import gamma

from conftest import MATRIX, SINC_MASS, matrix_profile
from steady_ks.free_energy import (
    HLSConfig,
    RadialDensity,
    energy,
    energy_lower_bound,
    hls_pairing_bound,
    newtonian_potential,
    sharp_hls_constant,
)

UNIT = RadialDensity.uniform_ball(3, 1.0)


def truncated_gaussian(N, width, R, n=400):
    r = np.linspace(0.0, R, n + 1)
    return RadialDensity.from_samples(N, r, np.exp(-((r / width) ** 2)))


def test_uniform_ball_potential():
    V = newtonian_potential(UNIT, np.array([0.0, 0.5, 1.0, 2.0, 4.0]))
    np.testing.assert_allclose(V, [0.5, 0.5 - 0.25 / 6, 1 / 3, 1 / 6, 1 / 12], rtol=1e-13)
    r = np.linspace(0, 1, 33)
    np.testing.assert_allclose(newtonian_potential(UNIT, r), 0.5 - r**2 / 6, rtol=1e-13)


def test_uniform_ball_energy():
    rep = energy(UNIT, 2.0)
    assert rep.mass == pytest.approx(4 * math.pi / 3, rel=1e-14)
    assert rep.entropy == pytest.approx(4 * math.pi / 3, rel=1e-13)
    assert rep.interaction == pytest.approx(4 * math.pi / 15, abs=1e-8)
    assert rep.total == pytest.approx(16 * math.pi / 15, rel=1e-12)


@pytest.mark.parametrize("N", [3, 4, 5, 6])
def test_uniform_ball_self_energy_any_dimension(N):
    # int rho V over the unit ball equals 2 sigma_N / (N (N-2) (N+2)) for rho = 1
    sigma = 2 * math.pi ** (N / 2) / math.gamma(N / 2)
    ball = RadialDensity.uniform_ball(N, 1.0)
    assert ball.pairing == pytest.approx(2 * sigma / (N * (N - 2) * (N + 2)), rel=1e-12)


def test_zero_density():
    zero = RadialDensity.piecewise_constant(3, [0.0, 1.0, 2.0], [0.0, 0.0])
    assert np.all(newtonian_potential(zero) == 0)
    rep = energy(zero, 2.0)
    assert rep.total == 0 and rep.lower_bound == 0
    assert hls_pairing_bound(zero, HLSConfig(3, 2.0)) == (0.0, 0.0)


@pytest.mark.parametrize("m", [2.0, 3.0, 1.5])
def test_doubling_density(m):
    base = energy(UNIT, m)
    doubled = energy(RadialDensity.uniform_ball(3, 1.0, level=2.0), m)
    assert doubled.entropy == pytest.approx(2**m * base.entropy, rel=1e-13)
    assert doubled.interaction == pytest.approx(4 * base.interaction, rel=1e-13)


def test_reject_negative_density():
    with pytest.raises(ValueError):
        RadialDensity.piecewise_constant(3, [0, 1, 2], [1.0, -0.1])
    with pytest.raises(ValueError):
        RadialDensity.piecewise_constant(3, [0.5, 1], [1.0])


def test_far_field():
    for dens in (UNIT, truncated_gaussian(3, 0.7, 2.5), truncated_gaussian(5, 1.0, 3.0)):
        N, R = dens.N, dens.outer_radius
        target = dens.mass / ((N - 2) * dens.sigma)
        V = float(newtonian_potential(dens, np.array([2 * R]))[0])
        assert abs(V * (2 * R) ** (N - 2) - target) <= 1e-8 * target


def test_potential_nonincreasing():
    rng = np.random.default_rng(7)
    for _ in range(5):
        dens = RadialDensity.piecewise_constant(4, np.linspace(0, 3, 31), rng.random(30))
        V = newtonian_potential(dens, np.linspace(0, 6, 601))
        assert np.all(np.diff(V) <= 1e-14 * V[0])
        assert np.all(V > 0)


def test_cross_pairing_symmetry():
    rng = np.random.default_rng(3)
    a = RadialDensity.piecewise_constant(3, np.linspace(0, 2, 21), rng.random(20))
    b = truncated_gaussian(3, 0.8, 3.0)
    assert a.cross_pairing(b) == pytest.approx(b.cross_pairing(a), rel=1e-10)
    assert a.cross_pairing(a) == pytest.approx(a.pairing, rel=1e-14)


def test_lane_emden_potential_at_support(sinc_profile):
    dens = RadialDensity.from_profile(sinc_profile)
    assert dens.mass == pytest.approx(SINC_MASS, rel=1e-10)
    assert float(newtonian_potential(dens, np.array([sinc_profile.r_star]))[0]) == pytest.approx(2.0, rel=1e-10)


def test_sharp_constant_against_lieb_formula():
    # general Lieb constant for |x|^{-lam}, specialised to lam = N - 2
    for N in range(3, 9):
        lam = N - 2.0
        lieb = (
            math.pi ** (lam / 2)
            * gamma(N / 2 - lam / 2)
            / gamma(N - lam / 2)
            * (gamma(N / 2) / gamma(N)) ** (-1 + lam / N)
        )
        assert sharp_hls_constant(N) == pytest.approx(lieb, rel=1e-12)
    assert sharp_hls_constant(3) == pytest.approx(4 / 3 * (16 / math.pi) ** (1 / 3), rel=1e-12)


@pytest.mark.parametrize("N", [3, 4, 5])
def test_sharp_constant_attained_by_extremal(N):
    # f = (1 + r^2)^{-(N+2)/2} gives equality in the double-integral inequality
    R = 2000.0
    edges = np.concatenate([[0.0], np.geomspace(1e-3, R, 1200)])
    f = RadialDensity(N, edges, lambda r: (1 + r**2) ** (-(N + 2) / 2), quad_order=12)
    double = (N - 2) * f.sigma * f.pairing
    p = 2 * N / (N + 2)
    norm_sq = f.power_integral(p) ** (2 / p)
    assert double / norm_sq == pytest.approx(sharp_hls_constant(N), rel=1e-4)


def test_lane_emden_pairing_within_bound(sinc_profile):
    dens = RadialDensity.from_profile(sinc_profile)
    pairing, bound = hls_pairing_bound(dens, HLSConfig(3, 2.0))
    assert 0 < pairing <= bound


def test_uniform_ball_pairing_is_twice_interaction():
    pairing, bound = hls_pairing_bound(UNIT, HLSConfig(3, 2.0))
    assert pairing == pytest.approx(8 * math.pi / 15, rel=1e-13)
    assert pairing <= bound


def test_hls_config_theta():
    for N in (3, 4, 5):
        crit = 2 - 2 / N
        for m in (crit + 1e-3, 2.0, 5.0):
            assert 0 < HLSConfig(N, m).theta < 1
    assert HLSConfig(3, 2.0, C_HLS=5.0).C_HLS == 5.0


@pytest.mark.parametrize("N,m", MATRIX)
def test_lower_bound_breakdown(N, m):
    for M in (0.5, 1.0, 10.0, 1e3):
        lb = energy_lower_bound(M, N, m)
        assert lb.f1_at_R0 == pytest.approx(lb.f2_at_R0, rel=1e-12)
        assert lb.bound <= 0


@pytest.mark.parametrize("N,m", [(3, 2.0), (3, 1.5), (5, 3.0)])
def test_lower_bound_mass_exponent(N, m):
    expo = 1 + 2 / N + (2 / N) * (1 - 2 / N) / (m - 2 + 2 / N)
    ratio = energy_lower_bound(2.0, N, m).bound / energy_lower_bound(1.0, N, m).bound
    assert math.log2(ratio) == pytest.approx(expo, rel=1e-12)


def test_lower_bound_rejects_nonpositive_mass():
    with pytest.raises(ValueError):
        energy_lower_bound(0.0, 3, 2.0)


def test_larger_constant_lowers_bound():
    sharp = energy_lower_bound(5.0, 3, 2.0).bound
    loose = energy_lower_bound(5.0, 3, 2.0, HLSConfig(3, 2.0, C_HLS=2 * sharp_hls_constant(3))).bound
    assert loose < sharp


def test_energy_above_bound_on_corpus():
    corpus = []
    for M in (1.0, 10.0, 100.0):
        R = (3 * M / (4 * math.pi)) ** (1 / 3)
        corpus.append((RadialDensity.uniform_ball(3, R), 2.0))
    for N, width in ((3, 0.3), (3, 2.0), (4, 1.0), (5, 0.5)):
        corpus.append((truncated_gaussian(N, width, 4 * width), 2.0))
    for N, m in MATRIX:
        corpus.append((RadialDensity.from_profile(matrix_profile(N, m)), m))
    for dens, m in corpus:
        rep = energy(dens, m)
        assert rep.above_bound and rep.total >= rep.lower_bound


def test_energy_report_json():
    data = json.loads(energy(UNIT, 2.0).to_json())
    assert set(data) == {"mass", "entropy", "interaction", "total", "lower_bound", "above_bound"}
    assert data["above_bound"] is True


def test_critical_exponent_rejected():
    with pytest.raises(ValueError):
        energy(UNIT, 4 / 3)
