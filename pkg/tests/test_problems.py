"""Objective-contract tests for the built-in problems."""
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gaspin import (Bratu, CorruptedGradient, DoubleWell, Quadratic, Rosenbrock,
                    fd_check_gradient, fd_hessian_matrix, model_hessian)
from gaspin.problems import InfeasiblePointError, directional_derivative_fd

from conftest import feasible_point


def test_quadratic_value_example():
    # J(u) = 0.5*||u - u*||^2 with u* = (1, 2) at u = 0.
    p = Quadratic(2, matrix="identity", target=np.array([1.0, 2.0]))
    assert p.value(np.zeros(2)) == pytest.approx(2.5, abs=0.0)
    np.testing.assert_allclose(p.gradient(np.zeros(2)), [-1.0, -2.0])


def test_quadratic_gradient_zero_at_target():
    p = Quadratic(8, matrix="laplacian")
    g = p.gradient(p.target)
    assert np.max(np.abs(g)) <= 1e-12


def test_rosenbrock_minimum_and_hessian():
    p = Rosenbrock(2)
    assert p.value(np.ones(2)) == 0.0
    assert np.max(np.abs(p.gradient(np.ones(2)))) <= 1e-12
    expected = np.array([[802.0, -400.0], [-400.0, 200.0]])
    np.testing.assert_allclose(p.hessian_matrix(np.ones(2)), expected)
    # Cross-check the frozen matrix against a finite-difference oracle.
    fd = fd_hessian_matrix(p, np.ones(2))
    np.testing.assert_allclose(fd, expected, rtol=0, atol=5e-3)


def test_bratu_value_matches_direct_formula():
    p = Bratu(grid=5, lam=2.0)
    u = feasible_point(p, seed=3, scale=0.3)
    h = 1.0 / (p.grid + 1)
    direct = 0.5 * u @ (p.matrix @ u) - p.lam * h * h * np.sum(np.exp(u))
    assert p.value(u) == pytest.approx(direct, rel=1e-14)


def test_gradient_fd_consistency(all_problems):
    for problem in all_problems:
        u = feasible_point(problem, seed=11)
        assert fd_check_gradient(problem, u) <= 1e-5


def test_hessian_fd_consistency(all_problems):
    rng = np.random.default_rng(5)
    for problem in all_problems:
        u = feasible_point(problem, seed=7)
        dense = problem.hessian_matrix(u)
        v = rng.standard_normal(problem.dim)
        fd = directional_derivative_fd(problem, u, v)
        err = np.linalg.norm(dense @ v - fd) / max(1.0, np.linalg.norm(dense @ v))
        assert err <= 1e-4


def test_evaluations_are_pure(all_problems):
    for problem in all_problems:
        u = feasible_point(problem, seed=23)
        assert problem.value(u) == problem.value(u.copy())
        np.testing.assert_array_equal(problem.gradient(u),
                                      problem.gradient(u.copy()))


def test_hessian_operator_symmetric(all_problems):
    rng = np.random.default_rng(1)
    for problem in all_problems:
        u = feasible_point(problem, seed=2)
        op = problem.hessian(u)
        for _ in range(50):
            v = rng.standard_normal(problem.dim)
            w = rng.standard_normal(problem.dim)
            lhs = float(op.apply(v) @ w)
            rhs = float(v @ op.apply(w))
            assert abs(lhs - rhs) <= 1e-12 * max(1.0, abs(lhs))


def test_dimension_mismatch_rejected(quadratic32):
    with pytest.raises(ValueError):
        quadratic32.value(np.zeros(7))


@given(st.integers(min_value=2, max_value=12), st.integers(min_value=0, max_value=4))
@settings(max_examples=25, deadline=None)
def test_rosenbrock_gradient_fd_property(dim, seed):
    p = Rosenbrock(dim)
    rng = np.random.default_rng(seed)
    u = rng.uniform(-1.5, 1.5, size=dim)
    assert fd_check_gradient(p, u) <= 1e-6


def test_preset_starts_are_deterministic(all_problems):
    for problem in all_problems:
        for idx in range(3):
            a = problem.preset_start(idx)
            b = problem.preset_start(idx)
            np.testing.assert_array_equal(a, b)
            assert problem.feasible(a)


def test_hessian_modes(rosenbrock16):
    u = rosenbrock16.preset_start(1)
    analytic = model_hessian(rosenbrock16, u, "analytic").dense()
    fd = model_hessian(rosenbrock16, u, "fd").dense()
    assert np.max(np.abs(analytic - fd)) <= 1e-3 * max(1.0, np.max(np.abs(analytic)))
    spd = model_hessian(rosenbrock16, u, "spd").dense()
    lam = np.linalg.eigvalsh(spd)
    assert lam.min() >= 0.0
    with pytest.raises(ValueError):
        model_hessian(rosenbrock16, u, "bogus")


def test_spd_mode_floors_negative_curvature():
    p = Rosenbrock(2)
    u = np.array([0.0, 1.0])  # indefinite Hessian here
    assert np.linalg.eigvalsh(p.hessian_matrix(u)).min() < 0
    spd = model_hessian(p, u, "spd").dense()
    lam = np.linalg.eigvalsh(spd)
    assert lam.min() >= 1e-8 * lam.max() * (1 - 1e-12)


def test_corrupted_gradient_breaks_fd_check(quadratic32):
    bad = CorruptedGradient(quadratic32, offset=1e-2)
    u = feasible_point(bad, seed=4)
    assert fd_check_gradient(bad, u) > 1e-6
    assert bad.value(u) == quadratic32.value(u)


def test_doublewell_is_multimodal():
    p = DoubleWell(dim=2, tilt=0.0, coupling=0.0)
    for u in (np.array([1.0, 1.0]), np.array([-1.0, -1.0]),
              np.array([1.0, -1.0])):
        assert np.max(np.abs(p.gradient(u))) <= 1e-12


def test_infeasible_gradient_raises():
    from gaspin import PlaneCompression
    p = PlaneCompression(mesh=2)
    u = 50.0 * np.random.default_rng(0).standard_normal(p.dim)
    assert not p.feasible(u)
    assert p.value(u) is None
    with pytest.raises(InfeasiblePointError):
        p.gradient(u)
