"""Smooth minimization problems with analytic derivatives.

A problem exposes value / gradient / dense Hessian on flat float64 vectors.
``value`` returns ``None`` at infeasible points (barrier energies); gradient
and Hessian evaluations at infeasible points raise ``InfeasiblePointError``.
All evaluations are pure: the same iterate yields bitwise-identical results.
"""

from __future__ import annotations

import numpy as np

from .linalg import SymmetricOperator, spd_floor

__all__ = [
    "Problem",
    "InfeasiblePointError",
    "Quadratic",
    "Rosenbrock",
    "Bratu",
    "DoubleWell",
    "CorruptedGradient",
    "model_hessian",
    "fd_gradient",
    "fd_check_gradient",
    "fd_hessian_matrix",
    "directional_derivative_fd",
    "HESSIAN_MODES",
]

HESSIAN_MODES = ("analytic", "fd", "spd")


class InfeasiblePointError(ValueError):
    """Derivative information was requested at an infeasible point."""


class Problem:
    """Base class for n-dimensional smooth minimization problems."""

    dim: int

    def value(self, u: np.ndarray) -> float | None:
        """Objective value, or ``None`` if ``u`` is infeasible."""
        raise NotImplementedError

    def gradient(self, u: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def hessian_matrix(self, u: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def hessian(self, u: np.ndarray) -> SymmetricOperator:
        return SymmetricOperator(self.hessian_matrix(u))

    def feasible(self, u: np.ndarray) -> bool:
        return self.value(u) is not None

    def preset_start(self, index: int) -> np.ndarray:
        """Deterministic far-from-optimum start; indices 0..4 are provided."""
        rng = np.random.default_rng(7000 + index)
        return rng.uniform(-1.0, 1.0, self.dim)

    def _check(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if u.shape != (self.dim,):
            raise ValueError(f"expected shape ({self.dim},), got {u.shape}")
        return u


class Quadratic(Problem):
    """J(u) = 0.5 (u - t)' A (u - t) for a symmetric positive definite A.

    ``matrix`` is either an explicit array or one of the named kinds
    "identity" / "laplacian" (tridiagonal second-difference matrix, which
    couples neighbouring entries and hence neighbouring subdomains).
    """

    def __init__(self, dim: int, matrix="identity", target=None):
        self.dim = int(dim)
        if isinstance(matrix, str):
            if matrix == "identity":
                a = np.eye(self.dim)
            elif matrix == "laplacian":
                a = 2.0 * np.eye(self.dim)
                idx = np.arange(self.dim - 1)
                a[idx, idx + 1] = -1.0
                a[idx + 1, idx] = -1.0
            else:
                raise ValueError(f"unknown quadratic matrix kind {matrix!r}")
        else:
            a = np.asarray(matrix, dtype=float)
            if a.shape != (self.dim, self.dim):
                raise ValueError("matrix shape does not match dimension")
        self.matrix = 0.5 * (a + a.T)
        if target is None:
            target = np.sin(1.0 + np.arange(self.dim))
        self.target = np.asarray(target, dtype=float)
        if self.target.shape != (self.dim,):
            raise ValueError("target shape does not match dimension")

    def value(self, u):
        u = self._check(u)
        d = u - self.target
        return float(0.5 * (d @ (self.matrix @ d)))

    def gradient(self, u):
        u = self._check(u)
        return self.matrix @ (u - self.target)

    def hessian_matrix(self, u):
        self._check(u)
        return self.matrix.copy()

    def preset_start(self, index):
        rng = np.random.default_rng(2000 + index)
        return self.target + 10.0 * rng.standard_normal(self.dim)


class Rosenbrock(Problem):
    """Chained Rosenbrock function; unique minimizer at the all-ones vector."""

    def __init__(self, dim: int):
        if dim < 2:
            raise ValueError("Rosenbrock needs dim >= 2")
        self.dim = int(dim)

    def value(self, u):
        u = self._check(u)
        head, tail = u[:-1], u[1:]
        return float(np.sum(100.0 * (tail - head**2) ** 2 + (1.0 - head) ** 2))

    def gradient(self, u):
        u = self._check(u)
        g = np.zeros_like(u)
        head, tail = u[:-1], u[1:]
        resid = tail - head**2
        g[:-1] += -400.0 * head * resid - 2.0 * (1.0 - head)
        g[1:] += 200.0 * resid
        return g

    def hessian_matrix(self, u):
        u = self._check(u)
        h = np.zeros((self.dim, self.dim))
        head, tail = u[:-1], u[1:]
        i = np.arange(self.dim - 1)
        h[i, i] += -400.0 * (tail - head**2) + 800.0 * head**2 + 2.0
        h[i + 1, i + 1] += 200.0
        h[i, i + 1] += -400.0 * head
        h[i + 1, i] += -400.0 * head
        return h

    def preset_start(self, index):
        if index == 0:
            u = np.ones(self.dim)
            u[::2] = -1.2
            return u
        rng = np.random.default_rng(1000 + index)
        return rng.uniform(-2.0, 2.0, self.dim)


class Bratu(Problem):
    """Finite-difference energy whose stationarity condition is the Bratu
    equation -lap(u) = lam * exp(u) on the unit square with zero boundary.

    ``grid`` interior points per side (n = grid**2), five-point Laplacian,
    J(u) = 0.5 u'Au - lam h^2 sum(exp(u)).  For moderate ``lam`` the stable
    branch solution is a strict local minimizer; the functional is unbounded
    below far outside that basin, so preset starts stay within it.
    """

    def __init__(self, grid: int = 16, lam: float = 2.0):
        if grid < 2:
            raise ValueError("grid must be at least 2")
        self.grid = int(grid)
        self.lam = float(lam)
        self.dim = self.grid**2
        self.h = 1.0 / (self.grid + 1)
        n, p = self.dim, self.grid
        a = 4.0 * np.eye(n)
        for row in range(n):
            ix, iy = row % p, row // p
            if ix + 1 < p:
                a[row, row + 1] = -1.0
            if ix > 0:
                a[row, row - 1] = -1.0
            if iy + 1 < p:
                a[row, row + p] = -1.0
            if iy > 0:
                a[row, row - p] = -1.0
        self.matrix = a
        x = np.arange(1, p + 1) * self.h
        xx, yy = np.meshgrid(x, x)
        self._bump = (np.sin(np.pi * xx) * np.sin(np.pi * yy)).ravel()

    def value(self, u):
        u = self._check(u)
        return float(0.5 * (u @ (self.matrix @ u))
                     - self.lam * self.h**2 * np.sum(np.exp(u)))

    def gradient(self, u):
        u = self._check(u)
        return self.matrix @ u - self.lam * self.h**2 * np.exp(u)

    def hessian_matrix(self, u):
        u = self._check(u)
        return self.matrix - self.lam * self.h**2 * np.diag(np.exp(u))

    def preset_start(self, index):
        if index == 0:
            return np.zeros(self.dim)
        if index == 1:
            return 0.5 * self._bump
        if index == 2:
            return -0.75 * self._bump
        rng = np.random.default_rng(3000 + index)
        return rng.uniform(-0.5, 0.5, self.dim)


class DoubleWell(Problem):
    """Tilted coupled double-well: sum (u_i^2-1)^2 + t_i u_i + coupling term.

    Deliberately multi-modal; used to exercise the disagreement path of
    solver comparisons.
    """

    def __init__(self, dim: int = 4, tilt: float = 0.1, coupling: float = 0.1):
        self.dim = int(dim)
        self.coupling = float(coupling)
        signs = np.where(np.arange(self.dim) % 2 == 0, 1.0, -1.0)
        self.tilt = tilt * signs

    def value(self, u):
        u = self._check(u)
        v = float(np.sum((u**2 - 1.0) ** 2 + self.tilt * u))
        v += self.coupling * float(np.sum((u[1:] - u[:-1]) ** 2))
        return v

    def gradient(self, u):
        u = self._check(u)
        g = 4.0 * u * (u**2 - 1.0) + self.tilt
        g[:-1] += -2.0 * self.coupling * (u[1:] - u[:-1])
        g[1:] += 2.0 * self.coupling * (u[1:] - u[:-1])
        return g

    def hessian_matrix(self, u):
        u = self._check(u)
        h = np.diag(12.0 * u**2 - 4.0)
        i = np.arange(self.dim - 1)
        h[i, i] += 2.0 * self.coupling
        h[i + 1, i + 1] += 2.0 * self.coupling
        h[i, i + 1] += -2.0 * self.coupling
        h[i + 1, i] += -2.0 * self.coupling
        return h

    def preset_start(self, index):
        rng = np.random.default_rng(4000 + index)
        return 0.25 * rng.standard_normal(self.dim)


class CorruptedGradient(Problem):
    """Wrapper returning a deliberately wrong gradient.

    Exists so the consistency-check harness has a guaranteed failure case.
    """

    def __init__(self, inner: Problem, offset: float = 1e-2):
        self.inner = inner
        self.dim = inner.dim
        self.offset = float(offset)

    def value(self, u):
        return self.inner.value(u)

    def gradient(self, u):
        g = self.inner.gradient(u).copy()
        g[0] += self.offset
        return g

    def hessian_matrix(self, u):
        return self.inner.hessian_matrix(u)

    def feasible(self, u):
        return self.inner.feasible(u)

    def preset_start(self, index):
        return self.inner.preset_start(index)


def model_hessian(problem: Problem, u: np.ndarray, mode: str = "analytic",
                  fd_step: float = 1e-6) -> SymmetricOperator:
    """Model Hessian at ``u``: analytic, finite-difference, or SPD-clamped.

    "fd" differences the analytic gradient column by column and symmetrizes;
    "spd" clamps the analytic spectrum from below at 1e-8 of its largest
    absolute eigenvalue.
    """
    if mode == "analytic":
        return SymmetricOperator(problem.hessian_matrix(u))
    if mode == "fd":
        return SymmetricOperator(fd_hessian_matrix(problem, u, h=fd_step))
    if mode == "spd":
        return SymmetricOperator(spd_floor(problem.hessian_matrix(u)))
    raise ValueError(f"unknown hessian mode {mode!r}; expected one of {HESSIAN_MODES}")


def fd_gradient(problem: Problem, u: np.ndarray, h: float = 1e-6) -> np.ndarray:
    """Central-difference gradient; raises if any probe point is infeasible."""
    u = np.asarray(u, dtype=float)
    g = np.zeros_like(u)
    for i in range(u.shape[0]):
        e = np.zeros_like(u)
        e[i] = h
        jp, jm = problem.value(u + e), problem.value(u - e)
        if jp is None or jm is None:
            raise InfeasiblePointError(f"finite-difference probe {i} is infeasible")
        g[i] = (jp - jm) / (2.0 * h)
    return g


def fd_check_gradient(problem: Problem, u: np.ndarray, h: float = 1e-6) -> float:
    """Max-norm relative mismatch between analytic and central FD gradients.

    The error is scaled by max(1, ||g||_inf) so that near-critical points do
    not blow the ratio up.
    """
    g = problem.gradient(u)
    fd = fd_gradient(problem, u, h=h)
    scale = max(1.0, float(np.max(np.abs(g))))
    return float(np.max(np.abs(fd - g)) / scale)


def fd_hessian_matrix(problem: Problem, u: np.ndarray, h: float = 1e-6) -> np.ndarray:
    """Symmetrized central-difference Hessian built from gradient columns."""
    u = np.asarray(u, dtype=float)
    n = u.shape[0]
    cols = np.zeros((n, n))
    for i in range(n):
        e = np.zeros(n)
        e[i] = h
        cols[:, i] = (problem.gradient(u + e) - problem.gradient(u - e)) / (2.0 * h)
    return 0.5 * (cols + cols.T)


def directional_derivative_fd(problem: Problem, u: np.ndarray, v: np.ndarray,
                              h: float = 1e-6) -> np.ndarray:
    """Central finite difference of the gradient along ``v``; oracle for Bv."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    return (problem.gradient(u + h * v) - problem.gradient(u - h * v)) / (2.0 * h)
