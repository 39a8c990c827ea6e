"""P1 finite-element assembly and constraint reduction.

Matrices are ``scipy.sparse.csr_matrix`` objects, made exactly symmetric by
averaging with the transpose after assembly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import CoefficientError, ConstraintError
from .geometry import EdgeTag, Mesh2D

__all__ = [
    "ConstantMatrix",
    "Laminate",
    "Checker",
    "QField",
    "p1_gradients",
    "assemble_stiffness",
    "assemble_masses",
    "assemble_weighted_mass",
    "assemble_load",
    "Dirichlet",
    "Periodic",
    "MeanZero",
    "IndexMap",
    "reduce_system",
    "dump_matrix",
]


# --------------------------------------------------------------------------
# coefficient fields


def _frac(y):
    return y - np.floor(y)


@dataclass(frozen=True)
class ConstantMatrix:
    """Spatially constant SPD matrix ``a(y) = A``."""

    matrix: tuple = ((1.0, 0.0), (0.0, 1.0))

    def __call__(self, y: np.ndarray) -> np.ndarray:
        A = np.asarray(self.matrix, dtype=float)
        return np.broadcast_to(A, (len(y), 2, 2)).copy()


@dataclass(frozen=True)
class Laminate:
    """Layered medium ``a(y) = alpha(y1) I`` with piecewise-constant ``alpha``.

    ``values[i]`` applies on ``[breaks[i-1], breaks[i])`` of the unit period,
    with ``breaks`` strictly inside ``(0, 1)``.
    """

    values: tuple = (1.0, 4.0)
    breaks: tuple = (0.5,)

    def __post_init__(self):
        if len(self.values) != len(self.breaks) + 1:
            raise CoefficientError("laminate needs len(values) == len(breaks) + 1")

    def alpha(self, y: np.ndarray) -> np.ndarray:
        idx = np.searchsorted(np.asarray(self.breaks, dtype=float), _frac(y[:, 0]), side="right")
        return np.asarray(self.values, dtype=float)[idx]

    def __call__(self, y: np.ndarray) -> np.ndarray:
        return self.alpha(y)[:, None, None] * np.eye(2)

    def harmonic_mean(self) -> float:
        w = np.diff(np.concatenate([[0.0], self.breaks, [1.0]]))
        return float(1.0 / np.sum(w / np.asarray(self.values)))

    def arithmetic_mean(self) -> float:
        w = np.diff(np.concatenate([[0.0], self.breaks, [1.0]]))
        return float(np.sum(w * np.asarray(self.values)))


@dataclass(frozen=True)
class Checker:
    """Checkerboard ``alpha I`` with ``values[0]`` on the diagonal quarters of the cell."""

    values: tuple = (1.0, 4.0)

    def __call__(self, y: np.ndarray) -> np.ndarray:
        u = _frac(y)
        parity = (np.floor(2 * u[:, 0]) + np.floor(2 * u[:, 1])) % 2
        alpha = np.where(parity == 0, self.values[0], self.values[1])
        return alpha[:, None, None] * np.eye(2)


def _bump(x: np.ndarray, radius: float) -> np.ndarray:
    s2 = np.sum(x * x, axis=-1) / radius**2
    out = np.zeros_like(s2)
    inside = s2 < 1
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - s2[inside]))
    return out


@dataclass(frozen=True)
class QField:
    """Boundary coefficient ``q(x) = q0 + x^T H x / 2 + c3 x1^3 bump(x)``.

    ``bump`` is a smooth radial cutoff equal to 1 at the origin with support
    in ``|x| < bump_radius``, so ``q(0) = q0`` and the Hessian at 0 is ``H``.
    """

    q0: float = 1.0
    H: tuple = ((2.0, 0.0), (0.0, 4.0))
    c3: float = 0.0
    bump_radius: float = 0.5

    def __post_init__(self):
        H = np.asarray(self.H, dtype=float)
        if H.shape != (2, 2) or not np.array_equal(H, H.T):
            raise CoefficientError("H must be a symmetric 2x2 matrix")
        if self.q0 < 0 or np.linalg.eigvalsh(H)[0] < 0:
            raise CoefficientError("q must be non-negative: need q0 >= 0 and H positive semidefinite")

    @property
    def hessian(self) -> np.ndarray:
        return np.asarray(self.H, dtype=float)

    @property
    def value_at_origin(self) -> float:
        return float(self.q0)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        H = self.hessian
        val = self.q0 + 0.5 * np.einsum("...i,ij,...j->...", x, H, x)
        if self.c3:
            val = val + self.c3 * x[..., 0] ** 3 * _bump(x, self.bump_radius)
        return val

    def scaled(self, factor: float) -> "QField":
        H = tuple(tuple(factor * v for v in row) for row in self.hessian.tolist())
        return QField(factor * self.q0, H, factor * self.c3, self.bump_radius)

    def shifted(self, c: float) -> "QField":
        return QField(self.q0 + c, self.H, self.c3, self.bump_radius)

    def check_hypotheses(self, points: np.ndarray) -> None:
        """Check positivity and the strict minimum at 0 on sample points."""
        if self.q0 <= 0:
            raise CoefficientError("q(0) must be positive")
        if np.linalg.eigvalsh(self.hessian)[0] <= 0:
            raise CoefficientError("Hessian of q at 0 must be positive definite")
        vals = self(points)
        if np.min(vals) < self.q0 - 1e-14:
            raise CoefficientError(
                f"q drops below q(0) = {self.q0} (min sampled {np.min(vals):.6g}); 0 is not the global minimum"
            )


# --------------------------------------------------------------------------
# element kernels


def p1_gradients(mesh: Mesh2D) -> tuple[np.ndarray, np.ndarray]:
    """Barycentric gradients ``(nt, 3, 2)`` and areas ``(nt,)``."""
    p = mesh.vertices[mesh.triangles]
    d1 = p[:, 1] - p[:, 0]
    d2 = p[:, 2] - p[:, 0]
    det = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
    grads = np.empty((len(p), 3, 2))
    grads[:, 1, 0] = d2[:, 1] / det
    grads[:, 1, 1] = -d2[:, 0] / det
    grads[:, 2, 0] = -d1[:, 1] / det
    grads[:, 2, 1] = d1[:, 0] / det
    grads[:, 0] = -grads[:, 1] - grads[:, 2]
    return grads, 0.5 * det


def _coo(rows, cols, vals, n) -> sp.csr_matrix:
    A = sp.coo_matrix((vals.ravel(), (rows.ravel(), cols.ravel())), shape=(n, n)).tocsr()
    A.sum_duplicates()
    return ((A + A.T) * 0.5).tocsr()


def _element_pattern(conn: np.ndarray):
    k = conn.shape[1]
    rows = np.repeat(conn, k, axis=1)
    cols = np.tile(conn, (1, k))
    return rows, cols


def _sample_coefficient(a, y: np.ndarray) -> np.ndarray:
    A = np.asarray(a(y), dtype=float)
    if not np.allclose(A, np.swapaxes(A, 1, 2), rtol=0, atol=1e-14):
        raise CoefficientError("coefficient a(y) is not symmetric")
    # 2x2 SPD iff trace > 0 and det > 0
    tr = A[:, 0, 0] + A[:, 1, 1]
    det = A[:, 0, 0] * A[:, 1, 1] - A[:, 0, 1] * A[:, 1, 0]
    if np.any(tr <= 0) or np.any(det <= 0):
        raise CoefficientError("coefficient a(y) is not positive definite at some sample point")
    return A


def assemble_stiffness(mesh: Mesh2D, a, scale: float = 1.0) -> sp.csr_matrix:
    """``K_ij = sum_T |T| a(c_T / scale) grad(phi_i) . grad(phi_j)`` with centroid ``c_T``."""
    grads, area = p1_gradients(mesh)
    A = _sample_coefficient(a, mesh.centroids() / scale)
    Ke = area[:, None, None] * np.einsum("tik,tkl,tjl->tij", grads, A, grads)
    rows, cols = _element_pattern(mesh.triangles)
    return _coo(rows, cols, Ke, mesh.n_vertices)


_P1_MASS = np.array([[2.0, 1.0, 1.0], [1.0, 2.0, 1.0], [1.0, 1.0, 2.0]]) / 12.0
_GAUSS2 = 0.5 * (1 + np.array([-1.0, 1.0]) / np.sqrt(3.0))

# 6-point rule exact for degree 4 (barycentric coordinates, weights sum to 1)
_TRI_A, _TRI_B = 0.445948490915965, 0.091576213509771
_TRI_WA, _TRI_WB = 0.223381589678011, 0.109951743655322
_TRI_POINTS = np.array(
    [
        [_TRI_A, _TRI_A, 1 - 2 * _TRI_A],
        [_TRI_A, 1 - 2 * _TRI_A, _TRI_A],
        [1 - 2 * _TRI_A, _TRI_A, _TRI_A],
        [_TRI_B, _TRI_B, 1 - 2 * _TRI_B],
        [_TRI_B, 1 - 2 * _TRI_B, _TRI_B],
        [1 - 2 * _TRI_B, _TRI_B, _TRI_B],
    ]
)
_TRI_WEIGHTS = np.array([_TRI_WA] * 3 + [_TRI_WB] * 3)


def _evaluate(q, x: np.ndarray) -> np.ndarray:
    if q is None:
        return np.ones(x.shape[:-1])
    if np.isscalar(q):
        return np.full(x.shape[:-1], float(q))
    return np.asarray(q(x), dtype=float)


def assemble_masses(mesh: Mesh2D, q=None, tag: EdgeTag = EdgeTag.HOLE) -> tuple[sp.csr_matrix, sp.csr_matrix]:
    """Volume mass ``M`` (exact P1) and boundary mass ``S`` weighted by ``q`` on tagged edges.

    ``q`` may be ``None`` (unit weight), a scalar, or a callable on ``(..., 2)``
    point arrays.  ``S`` uses 2-point Gauss quadrature on each edge.
    """
    n = mesh.n_vertices
    area = mesh.signed_areas()
    rows, cols = _element_pattern(mesh.triangles)
    M = _coo(rows, cols, area[:, None, None] * _P1_MASS, n)

    e = mesh.tagged_edges(tag)
    if len(e) == 0:
        return M, sp.csr_matrix((n, n))
    xa = mesh.vertices[e[:, 0]]
    xb = mesh.vertices[e[:, 1]]
    length = np.hypot(*(xb - xa).T)
    Se = np.zeros((len(e), 2, 2))
    for t in _GAUSS2:
        phi = np.array([1 - t, t])
        qv = _evaluate(q, xa + t * (xb - xa))
        Se += 0.5 * (length * qv)[:, None, None] * np.outer(phi, phi)
    r2, c2 = _element_pattern(e)
    S = _coo(r2, c2, Se, n)
    return M, S


def assemble_weighted_mass(mesh: Mesh2D, weight: Callable[[np.ndarray], np.ndarray],
                           vertices: np.ndarray | None = None) -> sp.csr_matrix:
    """``int w phi_i phi_j`` with a degree-4 rule; ``vertices`` overrides mesh coordinates."""
    verts = mesh.vertices if vertices is None else vertices
    p = verts[mesh.triangles]
    d1 = p[:, 1] - p[:, 0]
    d2 = p[:, 2] - p[:, 0]
    area = 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])
    Me = np.zeros((len(p), 3, 3))
    for bary, w in zip(_TRI_POINTS, _TRI_WEIGHTS):
        x = np.einsum("i,tik->tk", bary, p)
        Me += (w * area * _evaluate(weight, x))[:, None, None] * np.outer(bary, bary)
    rows, cols = _element_pattern(mesh.triangles)
    return _coo(rows, cols, Me, len(verts))


def assemble_load(mesh: Mesh2D, a, direction: np.ndarray, scale: float = 1.0) -> np.ndarray:
    """Vector ``b_i = sum_T |T| (a(c_T/scale) e) . grad(phi_i)`` for a fixed vector ``e``."""
    grads, area = p1_gradients(mesh)
    A = _sample_coefficient(a, mesh.centroids() / scale)
    flux = A @ np.asarray(direction, dtype=float)
    be = area[:, None] * np.einsum("tik,tk->ti", grads, flux)
    return np.bincount(mesh.triangles.ravel(), weights=be.ravel(), minlength=mesh.n_vertices)


# --------------------------------------------------------------------------
# reduction


@dataclass(frozen=True)
class Dirichlet:
    """Eliminate the listed vertices (homogeneous Dirichlet values)."""

    vertices: np.ndarray

    @classmethod
    def from_tags(cls, mesh: Mesh2D, *tags: EdgeTag) -> "Dirichlet":
        return cls(mesh.tagged_vertices(*tags))


@dataclass(frozen=True)
class Periodic:
    """Merge each slave vertex into its master; ``pairs[i] = -1`` for non-slaves."""

    pairs: np.ndarray


@dataclass(frozen=True)
class MeanZero:
    """Border the system with the constraint ``weights . u = 0`` (Lagrange multiplier)."""

    weights: np.ndarray


@dataclass
class IndexMap:
    """Maps between full vertex vectors and reduced unknowns."""

    n_full: int
    n_reduced: int
    prolongation: sp.csr_matrix | None = None
    multiplier: bool = False
    _cache: dict = field(default_factory=dict, repr=False)

    def restrict(self, f: np.ndarray) -> np.ndarray:
        """Reduce a right-hand side (``P^T f``, plus a zero multiplier entry)."""
        g = f if self.prolongation is None else self.prolongation.T @ f
        if self.multiplier:
            pad = np.zeros((1,) + g.shape[1:])
            g = np.concatenate([g, pad], axis=0)
        return g

    def extend(self, u: np.ndarray) -> np.ndarray:
        """Scatter a reduced solution back to full vertex values."""
        if self.multiplier:
            u = u[:-1]
        return u if self.prolongation is None else self.prolongation @ u


def _prolongation_dirichlet(n: int, removed: np.ndarray) -> sp.csr_matrix:
    keep = np.setdiff1d(np.arange(n), removed)
    return sp.csr_matrix((np.ones(keep.size), (keep, np.arange(keep.size))), shape=(n, keep.size))


def _prolongation_periodic(n: int, pairs: np.ndarray) -> sp.csr_matrix:
    pairs = np.asarray(pairs)
    if pairs.shape != (n,):
        raise ConstraintError(f"pairing map has shape {pairs.shape}, expected ({n},)")
    slaves = np.flatnonzero(pairs >= 0)
    masters = pairs[slaves]
    if np.any(masters >= n) or np.any(pairs[masters] >= 0) or np.any(masters == slaves):
        raise ConstraintError("pairing map is not a map onto master vertices")
    free = np.flatnonzero(pairs < 0)
    col = np.full(n, -1)
    col[free] = np.arange(free.size)
    col[slaves] = col[masters]
    return sp.csr_matrix((np.ones(n), (np.arange(n), col)), shape=(n, free.size))


def reduce_system(matrices: Sequence[sp.spmatrix], mode) -> tuple[list[sp.csr_matrix], IndexMap]:
    """Apply a Dirichlet, Periodic or MeanZero reduction to each matrix.

    Dirichlet and Periodic modes return ``P^T A P``; MeanZero returns the
    bordered saddle matrix ``[[A, w], [w^T, 0]]``.
    """
    n = matrices[0].shape[0]
    for A in matrices:
        if A.shape != (n, n):
            raise ConstraintError("inconsistent matrix dimensions")
    if isinstance(mode, MeanZero):
        w = np.asarray(mode.weights, dtype=float).reshape(-1, 1)
        if w.shape[0] != n:
            raise ConstraintError("mean-zero weights have the wrong length")
        out = [sp.bmat([[A, sp.csr_matrix(w)], [sp.csr_matrix(w.T), None]], format="csr") for A in matrices]
        return out, IndexMap(n, n + 1, None, multiplier=True)
    if isinstance(mode, Dirichlet):
        P = _prolongation_dirichlet(n, np.asarray(mode.vertices, dtype=np.int64))
    elif isinstance(mode, Periodic):
        P = _prolongation_periodic(n, mode.pairs)
    else:
        raise TypeError(f"unknown reduction mode {mode!r}")
    out = []
    for A in matrices:
        R = (P.T @ A @ P).tocsr()
        out.append(((R + R.T) * 0.5).tocsr())
    return out, IndexMap(n, P.shape[1], P)


def dump_matrix(A: sp.spmatrix, path) -> None:
    """Coordinate text format, one ``i j value`` triple per line."""
    C = sp.coo_matrix(A)
    with open(path, "w") as fh:
        for i, j, v in zip(C.row.tolist(), C.col.tolist(), C.data.tolist()):
            fh.write(f"{i} {j} {v!r}\n")
