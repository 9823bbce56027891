"""Property-based checks of the structural invariants."""

from __future__ import annotations

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from steady_ks.ball_minimizer import DiscreteDensity, cell_volumes, discrete_energy, project_mass
from steady_ks.free_energy import HLSConfig, RadialDensity, energy_lower_bound
from steady_ks.phase_plane import barrier_epsilon, fixed_points, jacobian, vector_field
from steady_ks.scaling import ScalingLaw, alpha_of_mass, canonical_profile, mass_of_profile, rescale

FAST = settings(max_examples=60, deadline=None)


@st.composite
def regime(draw, n_max=8, m_max=5.0):
    N = draw(st.integers(3, n_max))
    crit = 2.0 - 2.0 / N
    m = draw(st.floats(crit + 1e-3, m_max))
    return N, m


@FAST
@given(regime())
def test_mass_exponent_and_theta(params):
    N, m = params
    assert ScalingLaw(N, m).mass_exponent > 0
    assert 0 < HLSConfig(N, m).theta < 1


@FAST
@given(regime())
def test_barrier_starts_above_p2(params):
    N, m = params
    b = barrier_epsilon(N, m)
    assert b.epsilon > 0
    assert b.z_at_zero > N - 2


@FAST
@given(regime(), st.floats(0.0, 10.0), st.floats(0.0, 50.0))
def test_axes_are_invariant(params, u, v):
    N, m = params
    assert vector_field((0.0, v), N, m)[0] == 0.0
    assert vector_field((u, 0.0), N, m)[1] == 0.0


@FAST
@given(regime())
def test_fixed_point_eigenpairs(params):
    N, m = params
    for pt in fixed_points(N, m).points:
        assert max(abs(x) for x in vector_field(pt.location, N, m)) < 1e-12
        J = jacobian(*pt.location, N, m)
        for lam, vec in zip(pt.eigenvalues, pt.eigenvectors):
            np.testing.assert_allclose(J @ np.array(vec), lam * np.array(vec), atol=1e-10)


@FAST
@given(
    st.lists(st.floats(-5.0, 5.0), min_size=16, max_size=64),
    st.floats(0.1, 4.0),
    st.floats(1e-3, 1e3),
)
def test_projection_is_feasible_and_idempotent(y, R, M):
    y = np.array(y)
    vol = cell_volumes(3, R, len(y))
    x = project_mass(y, vol, M)
    assert np.all(x >= 0)
    assert abs(np.dot(vol, x) - M) <= 1e-12 * M
    np.testing.assert_allclose(project_mass(x, vol, M), x, atol=1e-12 * max(1.0, x.max()))


@FAST
@given(regime(), st.floats(1e-2, 1e3), st.floats(1.1, 10.0))
def test_lower_bound_homogeneity(params, M, lam):
    N, m = params
    expo = 1 + 2 / N + (2 / N) * (1 - 2 / N) / (m - 2 + 2 / N)
    a = energy_lower_bound(M, N, m)
    b = energy_lower_bound(lam * M, N, m)
    assert a.bound <= 0 and b.bound <= 0
    # in logs: near the critical exponent the bound spans hundreds of decades
    la, lb = a.log_magnitude, b.log_magnitude
    assert abs(lb - la - expo * np.log(lam)) <= 1e-10 * (1 + abs(la) + abs(lb))


@FAST
@given(st.integers(3, 6), st.lists(st.floats(0.0, 10.0), min_size=4, max_size=24), st.floats(0.2, 3.0))
def test_potential_nonincreasing(N, values, R):
    dens = RadialDensity.piecewise_constant(N, np.linspace(0, R, len(values) + 1), values)
    V = dens.potential(np.linspace(0.0, 2 * R, 200))
    assert np.all(np.diff(V) <= 1e-12 * max(V[0], 1e-300))


@FAST
@given(st.integers(3, 5), st.sampled_from([1.6, 2.0, 3.0]), st.lists(st.floats(0.0, 10.0), min_size=16, max_size=40))
def test_discrete_energy_above_lower_bound(N, m, values):
    if m <= 2 - 2 / N or not any(values):
        return
    d = DiscreteDensity(N, 1.5, values, 1.0)
    E, _ = discrete_energy(d, m)
    assert E >= energy_lower_bound(d.mass, N, m).bound


@settings(max_examples=25, deadline=None)
@given(st.sampled_from([(3, 2.0), (3, 1.5), (4, 3.0), (5, 2.0)]), st.floats(1e-2, 1e4))
def test_alpha_of_mass_round_trip(params, M):
    N, m = params
    prof = rescale(canonical_profile(N, m), alpha_of_mass(N, m, M))
    np.testing.assert_allclose(mass_of_profile(prof), M, rtol=1e-8)
