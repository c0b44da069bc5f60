"""
pytest configuration and fixtures for the harmonic map benchmarks.

Provides reusable fixtures for:
- Small uniform meshes and Lagrange spaces
- Problem initial iterates
- Hypothesis property-based testing configuration
- The --run-slow switch for table reproduction tests
"""

import os
import sys
from pathlib import Path

import pytest

# Add project paths
sys.path.insert(0, str(Path(__file__).parent.parent / "tools"))

# Configure Hypothesis profiles
try:
    from hypothesis import settings, Verbosity, Phase

    # Default profile: balanced speed and coverage
    settings.register_profile(
        "default",
        max_examples=50,
        deadline=None,  # numpy assembly is slow to warm up
    )

    # CI profile: more thorough testing
    settings.register_profile(
        "ci",
        max_examples=300,
        deadline=None,
        phases=[Phase.explicit, Phase.reuse, Phase.generate, Phase.shrink],
    )

    # Dev profile: fast iteration
    settings.register_profile(
        "dev",
        max_examples=10,
        deadline=None,
    )

    # Debug profile: verbose output
    settings.register_profile(
        "debug",
        max_examples=10,
        verbosity=Verbosity.verbose,
        deadline=None,
    )

    settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

except ImportError:
    pass  # Hypothesis not installed


def pytest_addoption(parser):
    parser.addoption(
        "--run-slow", action="store_true", default=False,
        help="run slow tests that reproduce published benchmark tables",
    )


def pytest_collection_modifyitems(config, items):
    if config.getoption("--run-slow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --run-slow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def mesh_2d():
    from simplicial_mesh import build_uniform_mesh
    return build_uniform_mesh(2, 2)


@pytest.fixture
def mesh_3d():
    from simplicial_mesh import build_uniform_mesh
    return build_uniform_mesh(3, 1)


@pytest.fixture
def p1_start():
    """Problem 1 initial iterate on the level-2 P1 space."""
    from benchmark_problems import get_problem, initial_coefficients
    from lagrange_space import lagrange_space
    from simplicial_mesh import build_uniform_mesh
    space = lagrange_space(build_uniform_mesh(2, 2), 1)
    return initial_coefficients(get_problem("p1"), space)


@pytest.fixture
def radial_start_3d():
    """x/|x| interpolated on the level-1 cube, P1."""
    from benchmark_problems import get_problem, initial_coefficients
    from lagrange_space import lagrange_space
    from simplicial_mesh import build_uniform_mesh
    space = lagrange_space(build_uniform_mesh(3, 1), 1)
    return initial_coefficients(get_problem("p2a"), space)
