"""Plane hyperelasticity on a structured triangulation of the unit square.

The stored energy is a polyconvex law written in the Green strain
E = (F'F - I)/2 and the deformation determinant det F:

    W = 3(a+b) + (2a+4b) tr E + 2b (tr E)^2 - 2b tr(E^2) + Gamma(det F)
    Gamma(d) = c d^2 - d_coef * log d

with constants derived from the Lame parameters so the undeformed state is
stress free.  Points with det F <= 0 anywhere are infeasible (log barrier).

Discretization: m x m cells split into two P1 triangles each, one-point
quadrature (exact here since the gradient is constant per triangle),
Dirichlet data on the left edge, dead-load volume force, homogeneous
Neumann elsewhere.  The optimization vector holds the free dofs only.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .problems import InfeasiblePointError, Problem

__all__ = [
    "lame_parameters",
    "EnergyConstants",
    "elastic_energy_density",
    "elastic_energy_density_gradient",
    "PlaneCompression",
]


def lame_parameters(young: float, poisson: float) -> tuple[float, float]:
    """First and second Lame parameters from Young's modulus and Poisson ratio."""
    lam = young * poisson / ((1.0 + poisson) * (1.0 - 2.0 * poisson))
    mu = young / (2.0 * (1.0 + poisson))
    return lam, mu


@dataclass(frozen=True)
class EnergyConstants:
    """Coefficients of the stored-energy law for one material."""

    a: float
    b: float
    c: float
    d: float

    @staticmethod
    def from_lame(lam: float, mu: float) -> "EnergyConstants":
        c = -lam / 4.0 - mu
        d = 3.0 * lam / 4.0 + mu
        gamma_prime_1 = 2.0 * c - d
        a = mu + gamma_prime_1 / 2.0
        b = -mu / 2.0 - gamma_prime_1 / 2.0
        return EnergyConstants(a=a, b=b, c=c, d=d)

    @staticmethod
    def from_young_poisson(young: float, poisson: float) -> "EnergyConstants":
        return EnergyConstants.from_lame(*lame_parameters(young, poisson))

    def gamma(self, det: np.ndarray) -> np.ndarray:
        return self.c * det**2 - self.d * np.log(det)

    def gamma_prime(self, det: np.ndarray) -> np.ndarray:
        return 2.0 * self.c * det - self.d / det

    def gamma_second(self, det: np.ndarray) -> np.ndarray:
        return 2.0 * self.c + self.d / det**2


def _cofactor(f: np.ndarray) -> np.ndarray:
    """Cofactor matrices of a (..., 2, 2) batch: d(det F)/dF."""
    cof = np.empty_like(f)
    cof[..., 0, 0] = f[..., 1, 1]
    cof[..., 0, 1] = -f[..., 1, 0]
    cof[..., 1, 0] = -f[..., 0, 1]
    cof[..., 1, 1] = f[..., 0, 0]
    return cof


def _density_batch(grad_u: np.ndarray, k: EnergyConstants):
    """W, dW/dF, det F for a (..., 2, 2) batch of displacement gradients."""
    f = grad_u + np.eye(2)
    det = f[..., 0, 0] * f[..., 1, 1] - f[..., 0, 1] * f[..., 1, 0]
    c_mat = np.einsum("...ji,...jk->...ik", f, f)
    e = 0.5 * (c_mat - np.eye(2))
    tr_e = np.trace(e, axis1=-2, axis2=-1)
    tr_e2 = np.einsum("...ij,...ji->...", e, e)
    safe = np.where(det > 0.0, det, 1.0)
    w = (3.0 * (k.a + k.b) + (2.0 * k.a + 4.0 * k.b) * tr_e
         + 2.0 * k.b * tr_e**2 - 2.0 * k.b * tr_e2 + k.gamma(safe))
    cof = _cofactor(f)
    p = ((2.0 * k.a + 4.0 * k.b + 4.0 * k.b * tr_e)[..., None, None] * f
         - 4.0 * k.b * np.einsum("...ij,...jk->...ik", f, e)
         + k.gamma_prime(safe)[..., None, None] * cof)
    return w, p, det


def elastic_energy_density(grad_u: np.ndarray, constants: EnergyConstants) -> float | None:
    """Pointwise stored energy; ``None`` when det(I + grad_u) <= 0."""
    grad_u = np.asarray(grad_u, dtype=float)
    w, _, det = _density_batch(grad_u, constants)
    if det <= 0.0:
        return None
    return float(w)


def elastic_energy_density_gradient(grad_u: np.ndarray,
                                    constants: EnergyConstants) -> np.ndarray:
    """dW/dF at a single displacement gradient; raises when infeasible."""
    grad_u = np.asarray(grad_u, dtype=float)
    _, p, det = _density_batch(grad_u, constants)
    if det <= 0.0:
        raise InfeasiblePointError("deformation determinant is not positive")
    return p


def _density_hessian_batch(grad_u: np.ndarray, k: EnergyConstants) -> np.ndarray:
    """d2W/dF2 as a (..., 2, 2, 2, 2) batch, indices [i, p, k, l]."""
    f = grad_u + np.eye(2)
    det = f[..., 0, 0] * f[..., 1, 1] - f[..., 0, 1] * f[..., 1, 0]
    c_mat = np.einsum("...ji,...jk->...ik", f, f)
    e = 0.5 * (c_mat - np.eye(2))
    tr_e = np.trace(e, axis1=-2, axis2=-1)
    cof = _cofactor(f)
    fft = np.einsum("...ij,...kj->...ik", f, f)
    eye = np.eye(2)
    eps = np.array([[0.0, 1.0], [-1.0, 0.0]])
    coef = (2.0 * k.a + 4.0 * k.b + 4.0 * k.b * tr_e)

    h = 4.0 * k.b * np.einsum("...ip,...kl->...ipkl", f, f)
    h += coef[..., None, None, None, None] * np.einsum("ik,pl->ipkl", eye, eye)
    h -= 4.0 * k.b * np.einsum("ik,...lp->...ipkl", eye, e)
    h -= 2.0 * k.b * np.einsum("...il,...kp->...ipkl", f, f)
    h -= 2.0 * k.b * np.einsum("...ik,pl->...ipkl", fft, eye)
    h += k.gamma_second(det)[..., None, None, None, None] * np.einsum(
        "...ip,...kl->...ipkl", cof, cof)
    h += k.gamma_prime(det)[..., None, None, None, None] * np.einsum(
        "ik,pl->ipkl", eps, eps)
    return h


class PlaneCompression(Problem):
    """Hyperelastic unit square, left edge displaced, dead load elsewhere.

    Parameters
    ----------
    mesh : cells per side (two triangles each).
    young, poisson : material constants (Lame parameters derived).
    compression : prescribed x-displacement of the left edge as a fraction
        of the domain width; -0.1 displaces the edge by 10% of the width.
    force : dead-load volume force entering the objective as + f . u.
    """

    def __init__(self, mesh: int = 8, young: float = 30.0, poisson: float = 0.3,
                 compression: float = -0.1, force=(0.0, 3.0)):
        if mesh < 1:
            raise ValueError("mesh must be at least 1")
        self.mesh = int(mesh)
        self.young = float(young)
        self.poisson = float(poisson)
        self.compression = float(compression)
        self.force = np.asarray(force, dtype=float)
        if self.force.shape != (2,):
            raise ValueError("force must have two components")
        self.constants = EnergyConstants.from_young_poisson(self.young, self.poisson)

        m = self.mesh
        self.h = 1.0 / m
        side = m + 1
        self.n_nodes = side * side
        ix, iy = np.meshgrid(np.arange(side), np.arange(side), indexing="ij")
        self.coords = np.stack([ix.ravel() * self.h, iy.ravel() * self.h], axis=1)
        node = lambda i, j: i * side + j  # noqa: E731 - local index helper

        tris = []
        for i in range(m):
            for j in range(m):
                n00, n10 = node(i, j), node(i + 1, j)
                n01, n11 = node(i, j + 1), node(i + 1, j + 1)
                tris.append((n00, n10, n01))
                tris.append((n11, n01, n10))
        self.triangles = np.asarray(tris, dtype=int)
        self.areas = np.full(len(tris), 0.5 * self.h**2)

        # P1 shape-function gradients per triangle: rows of inv([p1-p0, p2-p0]).
        p = self.coords[self.triangles]
        dm = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]], axis=2)
        dminv = np.linalg.inv(dm)
        grads = np.empty((len(tris), 3, 2))
        grads[:, 1, :] = dminv[:, 0, :]
        grads[:, 2, :] = dminv[:, 1, :]
        grads[:, 0, :] = -grads[:, 1, :] - grads[:, 2, :]
        self.shape_grads = grads

        left = np.flatnonzero(self.coords[:, 0] == 0.0)
        fixed_mask = np.zeros(2 * self.n_nodes, dtype=bool)
        fixed_mask[2 * left] = True
        fixed_mask[2 * left + 1] = True
        self.fixed_dofs = np.flatnonzero(fixed_mask)
        self.free_dofs = np.flatnonzero(~fixed_mask)
        self.dim = self.free_dofs.size
        self._template = np.zeros(2 * self.n_nodes)
        self._template[2 * left] = self.compression  # width is 1.0

        dofs = np.empty((len(tris), 6), dtype=int)
        dofs[:, 0::2] = 2 * self.triangles
        dofs[:, 1::2] = 2 * self.triangles + 1
        self._elem_dofs = dofs

    # -- assembly helpers -------------------------------------------------

    def full_field(self, u: np.ndarray) -> np.ndarray:
        """Embed free dofs into the full nodal vector with Dirichlet data."""
        u = self._check(u)
        full = self._template.copy()
        full[self.free_dofs] = u
        return full

    def _deformation(self, full: np.ndarray) -> np.ndarray:
        nodal = full.reshape(self.n_nodes, 2)
        return np.einsum("tai,taj->tij", nodal[self.triangles], self.shape_grads)

    def value(self, u):
        full = self.full_field(u)
        grad_u = self._deformation(full)
        w, _, det = _density_batch(grad_u, self.constants)
        if np.any(det <= 0.0):
            return None
        nodal = full.reshape(self.n_nodes, 2)
        centroid = nodal[self.triangles].mean(axis=1)
        return float(np.sum(self.areas * (w + centroid @ self.force)))

    def gradient(self, u):
        full = self.full_field(u)
        grad_u = self._deformation(full)
        _, p, det = _density_batch(grad_u, self.constants)
        if np.any(det <= 0.0):
            raise InfeasiblePointError("deformation determinant is not positive")
        contrib = np.einsum("t,tij,taj->tai", self.areas, p, self.shape_grads)
        contrib += (self.areas[:, None, None] / 3.0) * self.force
        g_full = np.zeros(2 * self.n_nodes)
        np.add.at(g_full, self._elem_dofs, contrib.reshape(-1, 6))
        return g_full[self.free_dofs]

    def hessian_matrix(self, u):
        full = self.full_field(u)
        grad_u = self._deformation(full)
        _, _, det = _density_batch(grad_u, self.constants)
        if np.any(det <= 0.0):
            raise InfeasiblePointError("deformation determinant is not positive")
        h = _density_hessian_batch(grad_u, self.constants)
        k_elem = np.einsum("t,tipkl,tap,tbl->taibk", self.areas, h,
                           self.shape_grads, self.shape_grads).reshape(-1, 6, 6)
        k_full = np.zeros((2 * self.n_nodes, 2 * self.n_nodes))
        rows = self._elem_dofs
        np.add.at(k_full, (rows[:, :, None], rows[:, None, :]), k_elem)
        k_free = k_full[np.ix_(self.free_dofs, self.free_dofs)]
        return 0.5 * (k_free + k_free.T)

    # -- starts ------------------------------------------------------------

    def preset_start(self, index):
        if index == 0:
            return np.zeros(self.dim)
        rng = np.random.default_rng(5000 + index)
        x, y = self.coords[:, 0], self.coords[:, 1]
        cx = rng.uniform(-1.0, 1.0, 3)
        cy = rng.uniform(-1.0, 1.0, 3)
        ux = (cx[0] * np.sin(np.pi * x) * np.sin(np.pi * y)
              + cx[1] * x * (1.0 - y) + cx[2] * np.sin(np.pi * y) * x)
        uy = (cy[0] * np.sin(np.pi * y) * np.sin(np.pi * x)
              + cy[1] * y * x + cy[2] * x * (1.0 - x) * y)
        field = np.stack([ux, uy], axis=1).ravel()[self.free_dofs]
        amp = 0.4
        for _ in range(30):
            if self.value(amp * field) is not None:
                break
            amp *= 0.5
        return amp * field
