"""Domain decomposition of flat dof vectors and the additive Schwarz operator.

A decomposition is a list of index sets S^k covering 0..n-1 (disjoint unless
overlap is requested).  Transfer operators are pure index gather/scatter:
``prolongate`` embeds local coordinates with zeros elsewhere, ``restrict`` is
its adjoint, and ``project`` extracts the norm-minimizing local coordinates
(identical to ``restrict`` for coordinate subspaces).

Local objectives are built so their gradient at the current base point equals
the restricted global gradient: H^k(v) = J^k(v) + <dg^k, v - base> with
dg^k = R^k g - grad(J^k)(base).  With the default frozen-complement J^k the
correction vanishes identically; for any other local model it repairs the
first-order mismatch.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import (EighFactorization, SymmetricOperator, conjugate_gradient,
                     power_iteration_norm)
from .problems import Problem

__all__ = [
    "Decomposition",
    "FrozenSubproblem",
    "CorrectedLocalObjective",
    "LocalObjective",
    "local_objective",
    "SchwarzOperator",
]


class Decomposition:
    """Cover of 0..n-1 by subdomain index sets.

    ``contiguous(n, blocks, overlap)`` builds near-equal contiguous ranges,
    each extended by ``overlap`` indices on both sides.
    """

    def __init__(self, n: int, index_sets):
        self.n = int(n)
        sets = []
        seen = np.zeros(self.n, dtype=int)
        for k, s in enumerate(index_sets):
            s = np.asarray(s, dtype=int)
            if s.size == 0:
                raise ValueError(f"subdomain {k} is empty")
            if np.any(s < 0) or np.any(s >= self.n):
                raise ValueError(f"subdomain {k} has out-of-range indices")
            if np.any(np.diff(s) <= 0):
                raise ValueError(f"subdomain {k} must be strictly increasing")
            seen[s] += 1
            sets.append(s)
        if np.any(seen == 0):
            raise ValueError("index sets do not cover every dof")
        self.index_sets = tuple(sets)
        self.multiplicity = seen
        self.overlapping = bool(np.any(seen > 1))

    @staticmethod
    def contiguous(n: int, blocks: int, overlap: int = 0) -> "Decomposition":
        if blocks < 1 or blocks > n:
            raise ValueError("need 1 <= blocks <= n")
        if overlap < 0:
            raise ValueError("overlap must be non-negative")
        bounds = np.linspace(0, n, blocks + 1).astype(int)
        sets = []
        for k in range(blocks):
            lo = max(0, bounds[k] - overlap)
            hi = min(n, bounds[k + 1] + overlap)
            sets.append(np.arange(lo, hi))
        return Decomposition(n, sets)

    @property
    def n_subdomains(self) -> int:
        return len(self.index_sets)

    def local_dim(self, k: int) -> int:
        return self.index_sets[k].size

    def prolongate(self, k: int, v_local: np.ndarray) -> np.ndarray:
        """Scatter local coordinates into a zero-padded global vector."""
        v_local = np.asarray(v_local, dtype=float)
        if v_local.shape != (self.local_dim(k),):
            raise ValueError(f"local vector shape {v_local.shape} does not match "
                             f"subdomain {k} of size {self.local_dim(k)}")
        out = np.zeros(self.n)
        out[self.index_sets[k]] = v_local
        return out

    def restrict(self, k: int, v: np.ndarray) -> np.ndarray:
        """Adjoint of ``prolongate``: gather the subdomain entries."""
        v = np.asarray(v, dtype=float)
        if v.shape != (self.n,):
            raise ValueError(f"global vector shape {v.shape} does not match n={self.n}")
        return v[self.index_sets[k]].copy()

    def project(self, k: int, v: np.ndarray) -> np.ndarray:
        """Local coordinates of the best subspace approximation to ``v``."""
        return self.restrict(k, v)


class FrozenSubproblem(Problem):
    """Global objective restricted to a subdomain, complement frozen.

    J^k(v) = J(embed(v)) where ``embed`` replaces the subdomain entries of the
    ``reference`` vector by ``v``.  The reference is typically the current
    iterate; passing a zero vector yields the zero-complement restriction.
    """

    def __init__(self, problem: Problem, decomp: Decomposition, k: int,
                 reference: np.ndarray):
        self.problem = problem
        self.decomp = decomp
        self.k = int(k)
        self.reference = np.asarray(reference, dtype=float).copy()
        if self.reference.shape != (decomp.n,):
            raise ValueError("reference shape does not match decomposition")
        self.indices = decomp.index_sets[self.k]
        self.dim = self.indices.size

    def embed(self, v: np.ndarray) -> np.ndarray:
        v = self._check(v)
        full = self.reference.copy()
        full[self.indices] = v
        return full

    def value(self, v):
        return self.problem.value(self.embed(v))

    def gradient(self, v):
        return self.problem.gradient(self.embed(v))[self.indices].copy()

    def hessian_matrix(self, v):
        h = self.problem.hessian_matrix(self.embed(v))
        return h[np.ix_(self.indices, self.indices)]

    def feasible(self, v):
        return self.problem.feasible(self.embed(v))


class CorrectedLocalObjective(Problem):
    """H(v) = J_k(v) + <dg, v - base>: first-order consistent local model."""

    def __init__(self, local_problem: Problem, base: np.ndarray, delta_g: np.ndarray):
        self.local_problem = local_problem
        self.base = np.asarray(base, dtype=float).copy()
        self.delta_g = np.asarray(delta_g, dtype=float).copy()
        self.dim = local_problem.dim
        if self.base.shape != (self.dim,) or self.delta_g.shape != (self.dim,):
            raise ValueError("base / correction shapes do not match local problem")

    def value(self, v):
        inner = self.local_problem.value(v)
        if inner is None:
            return None
        return inner + float(self.delta_g @ (np.asarray(v, dtype=float) - self.base))

    def gradient(self, v):
        return self.local_problem.gradient(v) + self.delta_g

    def hessian_matrix(self, v):
        return self.local_problem.hessian_matrix(v)

    def feasible(self, v):
        return self.local_problem.feasible(v)


@dataclass
class LocalObjective:
    """Subdomain objective bundle handed to the local solvers."""

    k: int
    base: np.ndarray
    objective: CorrectedLocalObjective
    delta_g: np.ndarray


def local_objective(decomp: Decomposition, k: int, problem: Problem,
                    u: np.ndarray, g: np.ndarray,
                    local_problem: Problem | None = None) -> LocalObjective:
    """Build the corrected subdomain objective at the current iterate.

    ``local_problem`` defaults to the frozen-complement restriction of the
    global objective, for which the gradient correction is exactly zero.
    """
    if local_problem is None:
        local_problem = FrozenSubproblem(problem, decomp, k, reference=u)
    base = decomp.project(k, u)
    delta_g = decomp.restrict(k, g) - local_problem.gradient(base)
    objective = CorrectedLocalObjective(local_problem, base, delta_g)
    return LocalObjective(k=k, base=base, objective=objective, delta_g=delta_g)


class SchwarzOperator:
    """Additive combination C of symmetric subdomain blocks B^k.

    The inverse application sum(I^k (B^k)^-1 R^k) is available for any
    decomposition.  For disjoint subdomains the forward operator is the block
    sum C = sum(I^k B^k R^k), the exact inverse of the former; with overlap
    the forward application solves the inverse operator by CG (tolerance
    1e-10, cap 10 n), which is well defined for positive-definite blocks.
    """

    def __init__(self, decomp: Decomposition, blocks):
        if len(blocks) != decomp.n_subdomains:
            raise ValueError("need one block per subdomain")
        self.decomp = decomp
        self.blocks = []
        for k, b in enumerate(blocks):
            b = np.asarray(b, dtype=float)
            nk = decomp.local_dim(k)
            if b.shape != (nk, nk):
                raise ValueError(f"block {k} has shape {b.shape}, expected ({nk}, {nk})")
            self.blocks.append(0.5 * (b + b.T))
        self.factors: list[EighFactorization | None] = [None] * len(self.blocks)
        self.applications = 0
        self.solves = 0

    @property
    def n(self) -> int:
        return self.decomp.n

    def factor(self, k: int) -> EighFactorization:
        if self.factors[k] is None:
            self.factors[k] = EighFactorization(self.blocks[k])
        return self.factors[k]

    def apply_C(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        if self.decomp.overlapping:
            return conjugate_gradient(self.apply_Cinv, v, tol=1e-10,
                                      max_iters=10 * self.n)
        out = np.zeros(self.n)
        for k, idx in enumerate(self.decomp.index_sets):
            out[idx] += self.blocks[k] @ v[idx]
            self.applications += 1
        return out

    def apply_Cinv(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        out = np.zeros(self.n)
        for k, idx in enumerate(self.decomp.index_sets):
            out[idx] += self.factor(k).solve(v[idx])
            self.solves += 1
        return out

    def norm(self, tol: float = 1e-6, max_iters: int = 200, seed: int = 0) -> float:
        """Power-iteration estimate of ||C||_2 (seeded, deterministic)."""
        return power_iteration_norm(self.apply_C, self.n, tol=tol,
                                    max_iters=max_iters, seed=seed)

    def dense(self) -> np.ndarray:
        """Materialize C column by column; intended for small n."""
        cols = [self.apply_C(col) for col in np.eye(self.n)]
        return np.array(cols).T

    def operator(self) -> SymmetricOperator:
        return SymmetricOperator(self.dense())
