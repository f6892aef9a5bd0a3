"""Dense symmetric operators and small linear-algebra helpers.

Problem Hessians and subdomain blocks at the scales this package targets
(n up to a few thousand) are handled as dense arrays; everything here is
built on numpy.linalg.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "SymmetricOperator",
    "EighFactorization",
    "SingularOperatorError",
    "power_iteration_norm",
    "spd_floor",
    "invertibility_shift",
    "conjugate_gradient",
]


class SingularOperatorError(ValueError):
    """Raised when an inverse application is requested of a singular block."""


class SymmetricOperator:
    """Symmetric linear operator backed by a dense matrix.

    The stored matrix is symmetrized on construction (``(M + M.T) / 2``),
    which leaves already-symmetric input bitwise unchanged and makes the
    symmetry exact otherwise.  Applications are counted so that solvers can
    report cumulative operation totals.
    """

    def __init__(self, matrix: np.ndarray):
        matrix = np.asarray(matrix, dtype=float)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise ValueError(f"expected a square matrix, got shape {matrix.shape}")
        self._matrix = 0.5 * (matrix + matrix.T)
        self.applications = 0

    @property
    def dim(self) -> int:
        return self._matrix.shape[0]

    def apply(self, v: np.ndarray) -> np.ndarray:
        """Return B @ v, counting the application."""
        v = np.asarray(v, dtype=float)
        if v.shape != (self.dim,):
            raise ValueError(f"operand shape {v.shape} does not match dim {self.dim}")
        self.applications += 1
        return self._matrix @ v

    def dense(self) -> np.ndarray:
        """Materialize the operator as a dense array (copy)."""
        return self._matrix.copy()

    def norm2(self, tol: float = 1e-6, max_iters: int = 200, seed: int = 0) -> float:
        """Power-iteration estimate of the spectral norm (not counted)."""
        return power_iteration_norm(lambda v: self._matrix @ v, self.dim,
                                    tol=tol, max_iters=max_iters, seed=seed)


class EighFactorization:
    """Eigendecomposition-backed factorization of a symmetric matrix.

    Used for the repeated subdomain-block solves; detects singularity
    explicitly instead of relying on LU pivot behaviour.
    """

    def __init__(self, matrix: np.ndarray, rel_cutoff: float = 1e-14):
        matrix = np.asarray(matrix, dtype=float)
        self.eigenvalues, self.eigenvectors = np.linalg.eigh(matrix)
        scale = np.max(np.abs(self.eigenvalues)) if matrix.size else 0.0
        self._singular = scale == 0.0 or np.min(np.abs(self.eigenvalues)) <= rel_cutoff * scale

    @property
    def singular(self) -> bool:
        return self._singular

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        if self._singular:
            raise SingularOperatorError("block is singular to working precision")
        q = self.eigenvectors
        return q @ ((q.T @ rhs) / self.eigenvalues)


def power_iteration_norm(apply, n: int, tol: float = 1e-6, max_iters: int = 200,
                         seed: int = 0) -> float:
    """Estimate the spectral norm of a symmetric operator by power iteration.

    Deterministic: the start vector comes from a seeded generator.  Stops on
    relative stagnation of the Rayleigh estimate or after ``max_iters``.
    """
    if n == 0:
        return 0.0
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(n)
    v /= np.linalg.norm(v)
    estimate = 0.0
    for _ in range(max_iters):
        w = apply(v)
        norm_w = float(np.linalg.norm(w))
        if norm_w == 0.0:
            return 0.0
        if abs(norm_w - estimate) <= tol * max(norm_w, np.finfo(float).tiny):
            return norm_w
        estimate = norm_w
        v = w / norm_w
    return estimate


def spd_floor(matrix: np.ndarray, rel_floor: float = 1e-8) -> np.ndarray:
    """Clamp the spectrum of a symmetric matrix from below.

    Eigenvalues below ``rel_floor * max(|lambda|)`` are raised to that floor,
    producing a positive-definite modification suitable as a model Hessian.
    """
    matrix = 0.5 * (matrix + matrix.T)
    lam, q = np.linalg.eigh(matrix)
    scale = np.max(np.abs(lam)) if lam.size else 0.0
    floor = rel_floor * scale if scale > 0.0 else rel_floor
    clamped = np.maximum(lam, floor)
    if np.all(clamped == lam):
        return matrix
    out = (q * clamped) @ q.T
    return 0.5 * (out + out.T)


def invertibility_shift(matrix: np.ndarray, floor: float = 1e-8) -> np.ndarray:
    """Shift a symmetric matrix by sigma*I so its spectrum clears the floor.

    The floor is relative to the spectral scale, floor * max(1, max|lambda|),
    so the shifted matrix stays invertible to working precision no matter how
    large the block is.  sigma = max(0, effective_floor - lambda_min); the
    identity shift keeps the matrix's eigenvectors and hence perturbs the
    operator as little as possible while guaranteeing invertibility.
    """
    matrix = 0.5 * (matrix + matrix.T)
    if not matrix.size:
        return matrix
    lam = np.linalg.eigvalsh(matrix)
    effective = floor * max(1.0, float(np.max(np.abs(lam))))
    sigma = max(0.0, effective - float(lam[0]))
    if sigma == 0.0:
        return matrix
    return matrix + sigma * np.eye(matrix.shape[0])


def conjugate_gradient(apply, b: np.ndarray, tol: float = 1e-10,
                       max_iters: int | None = None) -> np.ndarray:
    """Plain CG for symmetric positive-definite ``apply``; x0 = 0.

    Stops when ||r|| <= tol * ||b||.  Used only where an operator inverse
    must be applied without a dense materialization.
    """
    n = b.shape[0]
    if max_iters is None:
        max_iters = 10 * n
    x = np.zeros_like(b)
    r = b.copy()
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        return x
    d = r.copy()
    rr = float(r @ r)
    for _ in range(max_iters):
        if np.sqrt(rr) <= tol * bnorm:
            break
        ad = apply(d)
        dad = float(d @ ad)
        if dad <= 0.0:
            raise SingularOperatorError("CG encountered non-positive curvature")
        alpha = rr / dad
        x += alpha * d
        r -= alpha * ad
        rr_next = float(r @ r)
        d = r + (rr_next / rr) * d
        rr = rr_next
    return x
