"""Periodic correctors and the homogenized tensor on the unit cell."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse.linalg as spla
from scipy.spatial import cKDTree

from .errors import ConstraintError, InternalConsistencyError
from .fem import (
    MeanZero,
    Periodic,
    assemble_load,
    assemble_masses,
    assemble_stiffness,
    p1_gradients,
    reduce_system,
)
from .geometry import Mesh2D, measures

__all__ = [
    "CorrectorSet",
    "solve_correctors",
    "effective_tensor",
    "corrector_eval",
    "homogenize",
    "export_cell_csv",
]


@dataclass(eq=False)
class CorrectorSet:
    """Nodal correctors ``N[k]`` on the cell mesh, with the discrete cell measures.

    ``N`` has shape ``(2, nv)``; row ``k`` solves the cell problem driven by
    the unit vector ``e_k``.
    """

    mesh: Mesh2D
    N: np.ndarray
    area: float
    perimeter: float
    residuals: tuple[float, float]
    _locator: object = field(default=None, repr=False)

    def gradients(self) -> np.ndarray:
        """Per-triangle gradients ``(nt, 2, 2)``, indexed ``[t, k, :] = grad N_k``."""
        grads, _ = p1_gradients(self.mesh)
        return np.einsum("kti,tid->tkd", self.N[:, self.mesh.triangles], grads)


def solve_correctors(mesh: Mesh2D, a) -> CorrectorSet:
    """Solve ``int_Y a (grad N_k + e_k) . grad phi = 0`` for periodic ``phi``.

    The periodic system is bordered with the mean-zero constraint (weights are
    the lumped masses), so the representative with zero mean is returned.
    """
    if mesh.periodic_pairs is None:
        raise ConstraintError("cell mesh carries no periodic pairing")
    K = assemble_stiffness(mesh, a)
    M, _ = assemble_masses(mesh)
    (Kp,), pmap = reduce_system([K], Periodic(mesh.periodic_pairs))
    weights = pmap.restrict(M @ np.ones(mesh.n_vertices))
    (Kz,), zmap = reduce_system([Kp], MeanZero(weights))
    try:
        lu = spla.splu(Kz.tocsc())
    except RuntimeError as exc:
        raise ConstraintError(f"singular corrector system ({exc}); check the periodic pairing") from exc

    N = np.empty((2, mesh.n_vertices))
    residuals = []
    for k in range(2):
        e = np.zeros(2)
        e[k] = 1.0
        rhs = zmap.restrict(pmap.restrict(-assemble_load(mesh, a, e)))
        sol = lu.solve(rhs)
        scale = max(np.linalg.norm(rhs), np.finfo(float).tiny)
        res = float(np.linalg.norm(Kz @ sol - rhs) / scale)
        if not np.isfinite(res) or res > 1e-10:
            raise ConstraintError(f"corrector system residual {res:.3e} exceeds 1e-10")
        residuals.append(res)
        N[k] = pmap.extend(zmap.extend(sol))
    area, perimeter = measures(mesh)
    return CorrectorSet(mesh, N, area, perimeter, tuple(residuals))


def effective_tensor(mesh: Mesh2D, a, correctors: CorrectorSet) -> np.ndarray:
    """``a_eff[i, j] = |Y|^{-1} int_Y a_ik (delta_kj + d_k N_j)`` by centroid quadrature."""
    _, area = p1_gradients(mesh)
    A = np.asarray(a(mesh.centroids()), dtype=float)
    G = correctors.gradients()  # [t, j, k] = d_k N_j
    total = np.eye(2)[None] + np.swapaxes(G, 1, 2)  # [t, k, j] = delta_kj + d_k N_j
    flux = np.einsum("tik,tkj->tij", A, total)
    aeff = np.einsum("t,tij->ij", area, flux) / correctors.area
    asym = abs(aeff[0, 1] - aeff[1, 0])
    if asym > 1e-10 * max(1.0, np.abs(aeff).max()):
        raise InternalConsistencyError(f"effective tensor asymmetry {asym:.3e}; corrector solve is inconsistent")
    return 0.5 * (aeff + aeff.T)


def homogenize(mesh: Mesh2D, a) -> tuple[CorrectorSet, np.ndarray]:
    corr = solve_correctors(mesh, a)
    return corr, effective_tensor(mesh, a, corr)


class _Locator:
    def __init__(self, mesh: Mesh2D):
        self.mesh = mesh
        p = mesh.vertices[mesh.triangles]
        self.p0 = p[:, 0]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        det = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
        self.inv = np.stack(
            [np.column_stack([d2[:, 1], -d2[:, 0]]), np.column_stack([-d1[:, 1], d1[:, 0]])], axis=1
        ) / det[:, None, None]
        self.tree = cKDTree(mesh.centroids())

    def _bary(self, t, y):
        lam12 = np.einsum("nij,nj->ni", self.inv[t], y - self.p0[t])
        return np.column_stack([1 - lam12.sum(axis=1), lam12])

    def locate(self, y: np.ndarray, tol: float = 1e-12):
        n = len(y)
        tri = np.full(n, -1)
        bary = np.zeros((n, 3))
        kq = min(12, self.mesh.n_triangles)
        _, cand = self.tree.query(y, k=kq)
        cand = cand.reshape(n, kq)
        for c in range(kq):
            todo = np.flatnonzero(tri < 0)
            if todo.size == 0:
                break
            t = cand[todo, c]
            lam = self._bary(t, y[todo])
            ok = np.all(lam >= -tol, axis=1)
            tri[todo[ok]] = t[ok]
            bary[todo[ok]] = lam[ok]
        for i in np.flatnonzero(tri < 0):
            lam = self._bary(np.arange(self.mesh.n_triangles), np.broadcast_to(y[i], (self.mesh.n_triangles, 2)))
            ok = np.flatnonzero(np.all(lam >= -tol, axis=1))
            if ok.size:
                tri[i] = ok[0]
                bary[i] = lam[ok[0]]
        return tri, bary


def corrector_eval(correctors: CorrectorSet, z: np.ndarray, scale: float = 1.0):
    """Evaluate ``N(z / scale)`` by P1 interpolation at the cell-periodic image.

    Returns
    -------
    values : (n, 2) array, ``values[:, k] = N_k``
    grad_cell : (n, 2, 2) array, ``grad_cell[:, k] = grad_zeta N_k`` (per triangle)
    in_hole : (n,) bool, True where the image falls inside the hole; the
        values there are NaN.
    """
    z = np.atleast_2d(np.asarray(z, dtype=float))
    y = z / scale
    y = y - np.floor(y)
    if correctors._locator is None:
        correctors._locator = _Locator(correctors.mesh)
    tri, bary = correctors._locator.locate(y)
    in_hole = tri < 0
    values = np.full((len(y), 2), np.nan)
    grads = np.full((len(y), 2, 2), np.nan)
    ok = ~in_hole
    conn = correctors.mesh.triangles[tri[ok]]
    values[ok] = np.einsum("ni,kni->nk", bary[ok], correctors.N[:, conn])
    grads[ok] = correctors.gradients()[tri[ok]]
    return values, grads, in_hole


def export_cell_csv(path, aeff: np.ndarray, area: float, perimeter: float) -> None:
    row = [aeff[0, 0], aeff[0, 1], aeff[1, 1], area, perimeter]
    Path(path).write_text("a11,a12,a22,cellArea,holePerimeter\n" + ",".join(repr(float(v)) for v in row) + "\n")
