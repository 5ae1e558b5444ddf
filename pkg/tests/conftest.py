"""Shared fixtures. The solved coarse level is expensive enough to cache."""

import numpy as np
import pytest

from artifact import verification as ver
from artifact.solver import solve


@pytest.fixture(scope="session")
def solved_t1_n16():
    """Test 1 at the coarsest ladder level, solved once for the session."""
    case = ver.make_test(1)
    disc = ver.build_level(case, 16, 16, "bp")
    shared = ver.assemble_shared(disc)
    system = ver.coupled_system(disc, shared, "intersect")
    x, report = solve(system)
    return disc, shared, system, x, report


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240817)
