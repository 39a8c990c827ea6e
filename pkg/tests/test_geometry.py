import numpy as np
import pytest
from hypothesis import given, strategies as st

from specloc.errors import ConfigurationError, GeometryError
from specloc.geometry import (
    CellGeometry,
    DomainSpec,
    EdgeTag,
    Region,
    build_cell_mesh,
    build_perforated_mesh,
    check_mesh,
    dump_mesh,
    measures,
)


def polygon_area(r, n):
    return 0.5 * n * r * r * np.sin(2 * np.pi / n)


def polygon_perimeter(r, n):
    return 2 * n * r * np.sin(np.pi / n)


def test_no_hole_square_has_eight_triangles():
    mesh = build_cell_mesh(CellGeometry(hole_radius=0.0, h=0.5))
    assert mesh.n_triangles == 8
    assert measures(mesh) == pytest.approx((1.0, 0.0), abs=1e-15)
    check_mesh(mesh)


def test_reference_cell_measures(ref_cell):
    area, perim = measures(ref_cell)
    assert len(ref_cell.tagged_edges(EdgeTag.HOLE)) == 64
    assert perim == pytest.approx(polygon_perimeter(0.25, 64), abs=1e-12)
    assert perim == pytest.approx(1.57016, abs=1e-5)
    assert area == pytest.approx(1 - polygon_area(0.25, 64), abs=1e-12)
    assert area == pytest.approx(0.80397, abs=1e-5)


def test_measures_tend_to_disk_values():
    errs = []
    for n in (16, 64, 256):
        a, p = measures(build_cell_mesh(CellGeometry(0.25, n, 1 / 16)))
        errs.append(abs(a - (1 - np.pi / 16)) + abs(p - np.pi / 2))
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] < 1e-3


def test_reference_cell_is_valid(ref_cell):
    check_mesh(ref_cell)
    assert ref_cell.region is Region.CELL
    assert np.all(ref_cell.signed_areas() > 0)


def test_no_vertex_inside_hole(ref_cell):
    d = np.linalg.norm(ref_cell.vertices - 0.5, axis=1)
    # the inscribed circle of the 64-gon has radius r cos(pi/64)
    assert d.min() >= 0.25 * np.cos(np.pi / 64) - 1e-12


def test_periodic_partners_match(ref_cell):
    v = ref_cell.vertices
    pairs = ref_cell.periodic_pairs
    right = np.flatnonzero((v[:, 0] == 1.0) & (v[:, 1] > 0) & (v[:, 1] < 1))
    assert np.all(v[pairs[right], 0] == 0.0)
    assert np.max(np.abs(v[pairs[right], 1] - v[right, 1])) <= 1e-12
    left = np.flatnonzero((v[:, 0] == 0.0) & (v[:, 1] > 0) & (v[:, 1] < 1))
    assert set(left.tolist()) == set(pairs[right].tolist())
    # the three non-origin corners all collapse onto the origin
    corners = np.flatnonzero(np.all((v == 0) | (v == 1), axis=1) & (v.sum(axis=1) > 0))
    assert np.all(pairs[corners] == np.flatnonzero(np.all(v == 0, axis=1))[0])


def test_reflection_symmetry(ref_cell):
    v = ref_cell.vertices
    key = {tuple(np.round(p, 12)) for p in v}
    for flipped in (np.column_stack([1 - v[:, 0], v[:, 1]]), np.column_stack([v[:, 0], 1 - v[:, 1]])):
        assert all(tuple(np.round(p, 12)) in key for p in flipped)


@pytest.mark.parametrize("kwargs", [
    dict(hole_radius=0.45, h=0.1),
    dict(hole_radius=0.25, n_seg=7),
    dict(hole_radius=0.25, n_seg=6),
    dict(hole_radius=0.25, hole_center=(0.4, 0.5)),
])
def test_infeasible_cell_rejected(kwargs):
    with pytest.raises(GeometryError):
        CellGeometry(**kwargs)


def test_domain_divisibility():
    assert DomainSpec(2 / 3).cells_per_side == 3
    with pytest.raises(ConfigurationError):
        DomainSpec(0.3)
    assert DomainSpec(0.25).origin_at_corner
    assert not DomainSpec(2 / 3).origin_at_corner


def test_perforated_mesh_tiling(ref_cell):
    spec = DomainSpec(0.5)
    mesh = build_perforated_mesh(spec, ref_cell)
    area, perim = measures(mesh)
    ca, cp = measures(ref_cell)
    assert perim == pytest.approx(16 * 0.5 * cp, rel=1e-12)
    assert perim == pytest.approx(12.5613, abs=1e-4)
    assert area == pytest.approx(16 * 0.25 * ca, rel=1e-12)
    check_mesh(mesh)
    # outer boundary edges all sit on |x_i| = 1
    e = mesh.tagged_edges(EdgeTag.DIRICHLET)
    assert np.all(np.isclose(np.abs(mesh.vertices[e]).max(axis=2), 1.0))
    d = mesh.vertices[e[:, 1]] - mesh.vertices[e[:, 0]]
    assert np.hypot(d[:, 0], d[:, 1]).sum() == pytest.approx(8.0, abs=1e-12)


@given(st.sampled_from([1, 2, 3, 4, 6]), st.sampled_from([0.0, 0.2, 0.3]))
def test_tiling_measures_property(n, r):
    geom = CellGeometry(r, 16, 0.125)
    cell = build_cell_mesh(geom)
    eps = 2.0 / n
    mesh = build_perforated_mesh(DomainSpec(eps, 1.0, geom), cell)
    ca, cp = measures(cell)
    area, perim = measures(mesh)
    assert area == pytest.approx(n * n * eps * eps * ca, abs=1e-12)
    assert perim == pytest.approx(n * n * eps * cp, abs=1e-12)
    assert np.all(mesh.signed_areas() > 0)


def test_minimum_point_is_cell_corner():
    mesh = build_perforated_mesh(DomainSpec(0.25, 1.0, CellGeometry(0.25, 16, 0.125)))
    assert np.min(np.linalg.norm(mesh.vertices, axis=1)) == 0.0


def test_dump_format(tmp_path, coarse_cell):
    path = tmp_path / "mesh.txt"
    dump_mesh(coarse_cell, path)
    lines = path.read_text().splitlines()
    nv, nt, ne = map(int, lines[0].split())
    assert (nv, nt, ne) == (coarse_cell.n_vertices, coarse_cell.n_triangles, len(coarse_cell.edges))
    assert len(lines) == 1 + nv + nt + ne
    tags = {ln.split()[2] for ln in lines[1 + nv + nt:]}
    assert tags == {"HOLE", "OUTER"}
