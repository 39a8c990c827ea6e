"""Periodicity-cell and perforated-domain triangulations.

The cell mesh is an O-grid between a regular polygonal hole and the unit
square: rays from the cell centre through the hole vertices (and the four
corners) are split into radial layers, and every quadrilateral of the grid is
cut into four triangles through its centre.  The construction commutes with
all eight symmetries of the square whenever ``n_seg`` is a multiple of four,
so tensors computed on it inherit the symmetry exactly.

The perforated mesh is a tiling of scaled copies of the cell mesh.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, GeometryError

__all__ = [
    "EdgeTag",
    "Region",
    "CellGeometry",
    "DomainSpec",
    "Mesh2D",
    "build_cell_mesh",
    "build_perforated_mesh",
    "measures",
    "check_mesh",
    "dump_mesh",
]


class EdgeTag(enum.IntEnum):
    HOLE = 1
    OUTER = 2
    DIRICHLET = 3


class Region(enum.Enum):
    CELL = "cell"
    PERFORATED = "perforated"


@dataclass(frozen=True)
class CellGeometry:
    """Unit cell ``[0, 1]^2`` with a polygonal hole.

    ``hole_radius = 0`` means no hole; the cell is then meshed as a
    structured square grid of spacing ``h``.
    """

    hole_radius: float = 0.25
    n_seg: int = 64
    h: float = 1.0 / 16
    hole_center: tuple[float, float] = (0.5, 0.5)

    def __post_init__(self):
        if not self.h > 0:
            raise GeometryError(f"mesh size h must be positive, got {self.h}")
        if self.hole_radius < 0:
            raise GeometryError("hole_radius must be non-negative")
        if self.hole_radius == 0:
            return
        if self.n_seg < 8 or self.n_seg % 2:
            raise GeometryError(f"n_seg must be even and >= 8, got {self.n_seg}")
        if not np.allclose(self.hole_center, (0.5, 0.5), rtol=0, atol=1e-15):
            raise GeometryError("only holes centred at (0.5, 0.5) are supported")
        clearance = 0.5 - self.hole_radius
        if not self.hole_radius + self.h < 0.5:
            raise GeometryError(
                f"hole clearance violated: hole_radius + h = {self.hole_radius + self.h:g} "
                f"must be < {clearance + self.hole_radius:g} (distance from centre to cell boundary)"
            )

    @property
    def has_hole(self) -> bool:
        return self.hole_radius > 0


@dataclass(frozen=True)
class DomainSpec:
    """Square ``(-L, L)^2`` tiled by ``n = 2L/eps`` cells per side."""

    epsilon: float
    half_width: float = 1.0
    cell: CellGeometry = field(default_factory=CellGeometry)

    def __post_init__(self):
        if not (self.epsilon > 0 and self.half_width > 0):
            raise ConfigurationError("epsilon and half_width must be positive")
        ratio = 2 * self.half_width / self.epsilon
        if abs(ratio - round(ratio)) > 1e-9 * max(1.0, ratio) or round(ratio) < 1:
            raise ConfigurationError(
                f"2L/eps = {ratio:.12g} is not a positive integer (L={self.half_width}, eps={self.epsilon})"
            )

    @property
    def cells_per_side(self) -> int:
        return int(round(2 * self.half_width / self.epsilon))

    @property
    def origin_at_corner(self) -> bool:
        """True when x = 0 is a vertex of the cell tiling (even cell count)."""
        return self.cells_per_side % 2 == 0


@dataclass(frozen=True, eq=False)
class Mesh2D:
    """Conforming P1 triangulation with tagged boundary edges.

    Attributes
    ----------
    vertices : (nv, 2) float array
    triangles : (nt, 3) int array, counterclockwise
    edges : (ne, 2) int array of boundary edges
    edge_tags : (ne,) int array of :class:`EdgeTag` values
    periodic_pairs : (nv,) int array or None
        ``periodic_pairs[i]`` is the master of slave vertex ``i`` and ``-1``
        for vertices that are not slaves.  Cell meshes only.
    cell_vertex : (nv,) int array or None
        For perforated meshes, the cell-mesh vertex each vertex was copied from.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    edges: np.ndarray
    edge_tags: np.ndarray
    region: Region
    periodic_pairs: np.ndarray | None = None
    cell_vertex: np.ndarray | None = None
    scale: float = 1.0

    def __post_init__(self):
        for name in ("vertices", "triangles", "edges", "edge_tags", "periodic_pairs", "cell_vertex"):
            arr = getattr(self, name)
            if arr is not None:
                arr.setflags(write=False)

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_triangles(self) -> int:
        return self.triangles.shape[0]

    def signed_areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def centroids(self) -> np.ndarray:
        return self.vertices[self.triangles].mean(axis=1)

    def tagged_edges(self, *tags: EdgeTag) -> np.ndarray:
        mask = np.isin(self.edge_tags, [int(t) for t in tags])
        return self.edges[mask]

    def tagged_vertices(self, *tags: EdgeTag) -> np.ndarray:
        return np.unique(self.tagged_edges(*tags))

    @property
    def boundary_edges(self) -> list[tuple[tuple[int, int], EdgeTag]]:
        return [((int(a), int(b)), EdgeTag(int(t))) for (a, b), t in zip(self.edges, self.edge_tags)]


def _orient(vertices: np.ndarray, tris: np.ndarray) -> np.ndarray:
    p = vertices[tris]
    d1 = p[:, 1] - p[:, 0]
    d2 = p[:, 2] - p[:, 0]
    neg = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0] < 0
    tris = tris.copy()
    tris[neg, 1], tris[neg, 2] = tris[neg, 2].copy(), tris[neg, 1].copy()
    return tris


def _ray_angles(geom: CellGeometry) -> np.ndarray:
    n = geom.n_seg
    sub = max(1, int(round(4.0 / (n * geom.h))))
    angles = 2 * np.pi * np.arange(n * sub) / (n * sub)
    corners = np.pi / 4 + np.pi / 2 * np.arange(4)
    missing = [c for c in corners if np.min(np.abs(angles - c)) > 1e-12]
    return np.sort(np.concatenate([angles, missing]))


def _polygon_radius(phi: np.ndarray, r: float, n: int) -> np.ndarray:
    step = 2 * np.pi / n
    k = np.floor(phi / step + 1e-12)
    on_vertex = np.abs(phi / step - np.round(phi / step)) < 1e-12
    rho = r * np.cos(np.pi / n) / np.cos(phi - (k + 0.5) * step)
    return np.where(on_vertex, r, rho)


def _snap_unit(x: np.ndarray) -> np.ndarray:
    x = x.copy()
    for target in (0.0, 0.5, 1.0):
        x[np.abs(x - target) < 1e-13] = target
    return x


def _periodic_pairs(vertices: np.ndarray) -> np.ndarray:
    """Map vertices on ``y1 = 1`` / ``y2 = 1`` to their master on the opposite face.

    Slave coordinates are overwritten so that matching tangential coordinates
    agree bit for bit; ``vertices`` is modified in place.
    """
    nv = vertices.shape[0]
    pairs = np.full(nv, -1, dtype=np.int64)
    on_b = np.flatnonzero(
        (vertices[:, 0] == 0) | (vertices[:, 0] == 1) | (vertices[:, 1] == 0) | (vertices[:, 1] == 1)
    )
    masters = on_b[(vertices[on_b, 0] < 1) & (vertices[on_b, 1] < 1)]
    keys = {}
    for m in masters:
        keys[tuple(np.round(vertices[m] * 1e10).astype(np.int64))] = m
    for s in on_b:
        y = vertices[s]
        if y[0] < 1 and y[1] < 1:
            continue
        image = np.where(y == 1, 0.0, y)
        key = tuple(np.round(image * 1e10).astype(np.int64))
        if key not in keys:
            raise GeometryError(f"no periodic partner for boundary vertex {y}")
        m = keys[key]
        if np.max(np.abs(vertices[m] - image)) > 1e-12:
            raise GeometryError(f"periodic partner mismatch at {y}")
        pairs[s] = m
        vertices[s] = np.where(y == 1, 1.0, vertices[m])
    return pairs


def _square_grid(h: float):
    n = max(1, int(round(1.0 / h)))
    t = np.arange(n + 1) / n
    X, Y = np.meshgrid(t, t, indexing="ij")
    vertices = np.column_stack([X.ravel(), Y.ravel()])

    def vid(i, j):
        return i * (n + 1) + j

    tris = []
    for i in range(n):
        for j in range(n):
            a, b, c, d = vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)
            # alternating diagonals: mirror-symmetric for even n
            if (i + j) % 2 == 0:
                tris += [(a, b, c), (a, c, d)]
            else:
                tris += [(a, b, d), (b, c, d)]
    tris = np.array(tris, dtype=np.int64)
    edges = []
    for k in range(n):
        edges += [
            (vid(k, 0), vid(k + 1, 0)),
            (vid(n, k), vid(n, k + 1)),
            (vid(k + 1, n), vid(k, n)),
            (vid(0, k + 1), vid(0, k)),
        ]
    edges = np.array(edges, dtype=np.int64)
    tags = np.full(len(edges), int(EdgeTag.OUTER), dtype=np.int64)
    return vertices, tris, edges, tags


def _ogrid(geom: CellGeometry):
    r = geom.hole_radius
    phi = _ray_angles(geom)
    N = phi.size
    c = np.array(geom.hole_center)
    direction = np.column_stack([np.cos(phi), np.sin(phi)])
    inner = c + _polygon_radius(phi, r, geom.n_seg)[:, None] * direction
    outer = c + (0.5 / np.max(np.abs(direction), axis=1))[:, None] * direction
    outer = _snap_unit(outer)

    d_mid = 0.5 - r
    d_corner = np.sqrt(0.5) - r
    m = max(1, int(np.ceil(0.5 * (d_mid + d_corner) / geom.h - 1e-9)))
    t = np.arange(m + 1) / m
    rings = inner[None, :, :] + t[:, None, None] * (outer - inner)[None, :, :]
    rings[-1] = outer
    ring_vertices = rings.reshape(-1, 2)

    def vid(i, k):
        return i * N + (k % N)

    base = (m + 1) * N
    centers = np.empty((m * N, 2))
    tris = []
    for i in range(m):
        for k in range(N):
            a, b, cc, d = vid(i, k), vid(i, k + 1), vid(i + 1, k + 1), vid(i + 1, k)
            e = base + i * N + k
            centers[i * N + k] = 0.25 * (
                ring_vertices[a] + ring_vertices[b] + ring_vertices[cc] + ring_vertices[d]
            )
            tris += [(a, b, e), (b, cc, e), (cc, d, e), (d, a, e)]
    vertices = np.vstack([ring_vertices, centers])
    tris = np.array(tris, dtype=np.int64)
    ks = np.arange(N)
    hole_edges = np.column_stack([vid(0, ks), vid(0, ks + 1)])
    outer_edges = np.column_stack([vid(m, ks), vid(m, ks + 1)])
    edges = np.vstack([hole_edges, outer_edges]).astype(np.int64)
    tags = np.concatenate(
        [np.full(N, int(EdgeTag.HOLE)), np.full(N, int(EdgeTag.OUTER))]
    ).astype(np.int64)
    return vertices, tris, edges, tags


def build_cell_mesh(geom: CellGeometry) -> Mesh2D:
    """Mesh the periodicity cell ``[0,1]^2`` minus the polygonal hole.

    Hole edges are tagged ``HOLE``, the square boundary ``OUTER``; periodic
    pairs identify the faces ``y1 = 1`` and ``y2 = 1`` with ``y1 = 0`` and
    ``y2 = 0`` (corners all map to the origin).
    """
    if geom.has_hole:
        vertices, tris, edges, tags = _ogrid(geom)
    else:
        vertices, tris, edges, tags = _square_grid(geom.h)
    vertices = vertices.copy()
    pairs = _periodic_pairs(vertices)
    tris = _orient(vertices, tris)
    mesh = Mesh2D(vertices, tris, edges, tags, Region.CELL, periodic_pairs=pairs)
    return mesh


def build_perforated_mesh(spec: DomainSpec, cell_mesh: Mesh2D | None = None) -> Mesh2D:
    """Tile ``(-L, L)^2`` with ``n^2`` copies of the cell mesh scaled by ``eps``.

    Interface vertices shared by neighbouring cells are merged exactly (the
    cell mesh makes opposite faces coincide bit for bit), hole edges keep the
    ``HOLE`` tag and edges on the outer square become ``DIRICHLET``.
    """
    if cell_mesh is None:
        cell_mesh = build_cell_mesh(spec.cell)
    n = spec.cells_per_side
    L, eps = spec.half_width, spec.epsilon
    cv = cell_mesh.vertices
    ncv = cv.shape[0]
    I, J = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    offsets = np.column_stack([I.ravel(), J.ravel()]).astype(float)
    ncell = offsets.shape[0]

    # unit coordinates i + y are exact on shared faces
    unit = (offsets[:, None, :] + cv[None, :, :]).reshape(-1, 2)
    uniq, inverse = np.unique(unit, axis=0, return_inverse=True)
    inverse = inverse.ravel()
    cell_vertex = np.empty(uniq.shape[0], dtype=np.int64)
    cell_vertex[inverse] = np.tile(np.arange(ncv), ncell)

    shift = (np.arange(ncell) * ncv)[:, None, None]
    tris = inverse[(cell_mesh.triangles[None, :, :] + shift).reshape(-1, 3)]

    hole = cell_mesh.tagged_edges(EdgeTag.HOLE)
    outer = cell_mesh.tagged_edges(EdgeTag.OUTER)
    hole_edges = inverse[(hole[None] + shift).reshape(-1, 2)]
    outer_all = inverse[(outer[None] + shift).reshape(-1, 2)]
    ua = uniq[outer_all[:, 0]]
    ub = uniq[outer_all[:, 1]]
    on_bdry = np.zeros(len(outer_all), dtype=bool)
    for axis in (0, 1):
        for val in (0.0, float(n)):
            on_bdry |= (ua[:, axis] == val) & (ub[:, axis] == val)
    dir_edges = outer_all[on_bdry]
    edges = np.vstack([hole_edges, dir_edges]).astype(np.int64)
    tags = np.concatenate(
        [np.full(len(hole_edges), int(EdgeTag.HOLE)), np.full(len(dir_edges), int(EdgeTag.DIRICHLET))]
    ).astype(np.int64)

    vertices = -L + eps * uniq
    return Mesh2D(
        vertices, tris, edges, tags, Region.PERFORATED, cell_vertex=cell_vertex, scale=eps
    )


def measures(mesh: Mesh2D) -> tuple[float, float]:
    """Discrete area of the mesh and total length of its ``HOLE`` edges."""
    area = float(mesh.signed_areas().sum())
    e = mesh.tagged_edges(EdgeTag.HOLE)
    if len(e) == 0:
        return area, 0.0
    d = mesh.vertices[e[:, 1]] - mesh.vertices[e[:, 0]]
    return area, float(np.hypot(d[:, 0], d[:, 1]).sum())


def check_mesh(mesh: Mesh2D) -> None:
    """Raise :class:`GeometryError` unless the mesh is a valid conforming triangulation."""
    if np.any(mesh.signed_areas() <= 0):
        raise GeometryError("mesh has non-positive triangle areas")
    t = mesh.triangles
    all_edges = np.sort(np.vstack([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]]), axis=1)
    uniq, counts = np.unique(all_edges, axis=0, return_counts=True)
    if np.any(counts > 2):
        raise GeometryError("an edge is shared by more than two triangles")
    single = {tuple(e) for e in uniq[counts == 1]}
    tagged = {tuple(e) for e in np.sort(mesh.edges, axis=1)}
    if single != tagged:
        raise GeometryError(
            f"boundary edge set mismatch: {len(single - tagged)} untagged, {len(tagged - single)} spurious"
        )


def dump_mesh(mesh: Mesh2D, path: str | Path) -> None:
    """Write the plain-text debug format ``NV NT NE`` / vertices / triangles / edges."""
    names = {EdgeTag.HOLE: "HOLE", EdgeTag.OUTER: "OUTER", EdgeTag.DIRICHLET: "DIRICHLET"}
    lines = [f"{mesh.n_vertices} {mesh.n_triangles} {len(mesh.edges)}"]
    lines += [f"{x!r} {y!r}" for x, y in mesh.vertices.tolist()]
    lines += [f"{i} {j} {k}" for i, j, k in mesh.triangles.tolist()]
    lines += [f"{i} {j} {names[EdgeTag(t)]}" for (i, j), t in zip(mesh.edges.tolist(), mesh.edge_tags.tolist())]
    Path(path).write_text("\n".join(lines) + "\n")
