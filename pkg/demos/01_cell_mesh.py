"""Mesh the periodicity cell and tile it into the perforated square."""

import numpy as np

from specloc.geometry import CellGeometry, DomainSpec, EdgeTag, build_cell_mesh, build_perforated_mesh, measures

geom = CellGeometry(hole_radius=0.25, n_seg=64, h=1 / 16)
cell = build_cell_mesh(geom)
area, perimeter = measures(cell)
print(f"cell: {cell.n_vertices} vertices, {cell.n_triangles} triangles")
print(f"discrete |Y| = {area:.10f}   (disk value {1 - np.pi / 16:.10f})")
print(f"discrete |S| = {perimeter:.10f}   (disk value {np.pi / 2:.10f})")

# opposite faces coincide node for node, so the periodic pairing is exact
pairs = cell.periodic_pairs
print("slave vertices:", int(np.sum(pairs >= 0)))

for eps in (1 / 2, 1 / 4, 1 / 8):
    mesh = build_perforated_mesh(DomainSpec(eps, 1.0, geom), cell)
    a, s = measures(mesh)
    n = round(2 / eps)
    print(f"eps = 1/{round(1 / eps)}  cells per side {n:2d}  vertices {mesh.n_vertices:7d}  holes {n * n:4d}  "
          f"area {a:.6f}  hole length {s:.4f}  outer edges {len(mesh.tagged_edges(EdgeTag.DIRICHLET))}")
