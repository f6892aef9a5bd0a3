"""Shared fixtures: one canonical instance of each built-in problem."""
import numpy as np
import pytest

from gaspin import Bratu, Decomposition, PlaneCompression, Quadratic, Rosenbrock


@pytest.fixture(scope="session")
def quadratic32():
    return Quadratic(32, matrix="laplacian")


@pytest.fixture(scope="session")
def rosenbrock16():
    return Rosenbrock(16)


@pytest.fixture(scope="session")
def bratu8():
    return Bratu(grid=8)


@pytest.fixture(scope="session")
def elasticity4():
    return PlaneCompression(mesh=4)


@pytest.fixture(scope="session")
def all_problems(quadratic32, rosenbrock16, bratu8, elasticity4):
    return [quadratic32, rosenbrock16, bratu8, elasticity4]


def feasible_point(problem, seed=0, scale=0.1):
    """Deterministic feasible sample near the origin."""
    rng = np.random.default_rng(seed)
    for _ in range(40):
        u = scale * rng.standard_normal(problem.dim)
        if problem.feasible(u):
            return u
        scale *= 0.5
    return np.zeros(problem.dim)


@pytest.fixture
def four_blocks():
    def make(n):
        return Decomposition.contiguous(n, 4)
    return make
