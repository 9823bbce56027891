from __future__ import annotations

import math

import pytest

from steady_ks.lane_emden import ProfileParams, solve_profile

# admissible (N, m) pairs from N in {3, 4, 5}, m in {1.5, 2, 3}
MATRIX = [(N, m) for N in (3, 4, 5) for m in (1.5, 2.0, 3.0) if m > 2.0 - 2.0 / N]

SINC_R_STAR = math.pi * math.sqrt(2.0)
SINC_MASS = 8.0 * math.sqrt(2.0) * math.pi**2

_PROFILES: dict = {}


def matrix_profile(N: int, m: float, alpha: float = 1.0):
    key = (N, m, alpha)
    if key not in _PROFILES:
        _PROFILES[key] = solve_profile(ProfileParams(N, m, alpha))
    return _PROFILES[key]


@pytest.fixture(scope="session")
def sinc_profile():
    return matrix_profile(3, 2.0)


@pytest.fixture(params=MATRIX, ids=[f"N{N}-m{m:g}" for N, m in MATRIX])
def matrix_case(request):
    N, m = request.param
    return matrix_profile(N, m)


ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])
