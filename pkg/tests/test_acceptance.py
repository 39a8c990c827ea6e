"""End-to-end acceptance gate, one test per criterion.

Each test records a PASS/FAIL line (shown in the terminal summary) before
asserting.  The default sweep is solved once per session; expect a few
minutes in total.
"""

import dataclasses
import time

import numpy as np
import pytest
import scipy.sparse as sp

from specloc.asymptotics import (
    StudyConfig,
    ansatz_error,
    ansatz_functions,
    convergence_study,
    solve_full,
    trace_identity_check,
)
from specloc.cell_problem import homogenize
from specloc.effective import OscillatorSpec, _fd_1d, analytic_spectrum, build_oscillator, numeric_oscillator
from specloc.eigensolve import DENSE_LIMIT, dense_oracle, smallest_eigenpairs
from specloc.fem import (
    ConstantMatrix,
    Dirichlet,
    Laminate,
    QField,
    assemble_masses,
    assemble_stiffness,
    reduce_system,
)
from specloc.geometry import CellGeometry, DomainSpec, EdgeTag, build_cell_mesh, build_perforated_mesh, measures

SWEEP = [1 / 2, 1 / 3, 1 / 4, 1 / 6, 1 / 8]
Q_DEFAULT = QField(1.0, ((2.0, 0.0), (0.0, 4.0)))  # q = 1 + x1^2 + 2 x2^2
Q_ISO = QField(1.0, ((2.0, 0.0), (0.0, 2.0)))  # q = 1 + |x|^2


def strictly_decreasing(values) -> bool:
    return bool(np.all(np.diff(np.asarray(values)) < 0))


@pytest.fixture(scope="module")
def default_sweep():
    return convergence_study(SWEEP, StudyConfig(q=Q_DEFAULT), j_list=(1,))


@pytest.fixture(scope="module")
def isotropic_sweep():
    return convergence_study(SWEEP, StudyConfig(q=Q_ISO), j_list=(2,))


@pytest.fixture(scope="module")
def minmax_solves():
    spec = DomainSpec(1 / 4, 1.0, CellGeometry())
    return {
        "robin": solve_full(spec, None, Q_DEFAULT, k=6),
        "robin_2q": solve_full(spec, None, Q_DEFAULT.scaled(2.0), k=6),
        "neumann": solve_full(spec, None, Q_DEFAULT, k=6, hole_condition="neumann"),
        "dirichlet": solve_full(spec, None, Q_DEFAULT, k=6, hole_condition="dirichlet"),
    }


def test_criterion_01_identity_homogenization(criterion):
    t0 = time.perf_counter()
    _, aeff = homogenize(build_cell_mesh(CellGeometry(0.0, h=1 / 16)), ConstantMatrix())
    elapsed = time.perf_counter() - t0
    err = float(np.max(np.abs(aeff - np.eye(2))))
    ok = err <= 1e-10 and elapsed < 1.0
    criterion(1, ok, f"max|a_eff - I| = {err:.1e}, {elapsed:.2f} s")
    assert ok


def test_criterion_02_laminate(criterion):
    t0 = time.perf_counter()
    _, aeff = homogenize(build_cell_mesh(CellGeometry(0.0, h=1 / 64)), Laminate((1.0, 4.0), (0.5,)))
    elapsed = time.perf_counter() - t0
    err = float(np.max(np.abs(aeff - np.diag([1.6, 2.5]))))
    ok = err <= 1e-3 and elapsed < 10.0
    criterion(2, ok, f"a_eff diag = ({aeff[0, 0]:.6f}, {aeff[1, 1]:.6f}), max err {err:.1e}, {elapsed:.2f} s")
    assert ok


def test_criterion_03_perforated_isotropy(criterion):
    _, coarse = homogenize(build_cell_mesh(CellGeometry(0.25, 64, 1 / 16)), ConstantMatrix())
    _, fine = homogenize(build_cell_mesh(CellGeometry(0.25, 64, 1 / 32)), ConstantMatrix())
    ev = np.linalg.eigvalsh(coarse)
    aniso = abs(coarse[0, 0] - coarse[1, 1])
    off = abs(coarse[0, 1])
    rel = abs(fine[0, 0] - coarse[0, 0]) / fine[0, 0]
    ok = aniso <= 1e-6 and off <= 1e-8 and np.all((ev > 0) & (ev < 1)) and rel < 0.01
    criterion(3, ok, f"a11 = {coarse[0, 0]:.6f} (h), {fine[0, 0]:.6f} (h/2), |a11-a22| = {aniso:.1e}, "
                     f"|a12| = {off:.1e}, level change {100 * rel:.2f}%")
    assert ok


def test_criterion_04_oscillator_cross_validation(criterion):
    details, ok = [], True
    for A, Q in [(np.eye(2), np.eye(2)), (np.diag([4.0, 1.0]), np.diag([1.0, 9.0]))]:
        spec = OscillatorSpec(A, Q)
        exact = analytic_spectrum(spec, 6).values
        num = numeric_oscillator(spec, box=8.0, h=1 / 16, k=6)
        err = float(np.max(np.abs(num.values - exact)))
        ok &= err <= 1e-2
        details.append(f"max err {err:.1e}")
        if np.allclose(A, np.eye(2)) and np.allclose(Q, np.eye(2)):
            sizes = [int(num.multiplicity[i - 1]) for i in (1, 2, 4)]
            ok &= sizes == [1, 2, 3]
            details.append(f"multiplicities {tuple(sizes)}")
    criterion(4, ok, ", ".join(details))
    assert ok


def _coarse_pencils():
    """Every coarse (<= 2000 unknown) pencil used in the suite, with its shift."""
    out = []
    sq = build_cell_mesh(CellGeometry(0.0, h=1 / 16))
    K = assemble_stiffness(sq, ConstantMatrix())
    M, _ = assemble_masses(sq)
    (Kr, Mr), _ = reduce_system([K, M], Dirichlet.from_tags(sq, EdgeTag.OUTER))
    out.append(("dirichlet square", Kr, Mr, 0.0))

    geom = CellGeometry(0.25, 16, 0.2)
    mesh = build_perforated_mesh(DomainSpec(0.5, 1.0, geom))
    area, perim = measures(build_cell_mesh(geom))
    K = assemble_stiffness(mesh, ConstantMatrix(), 0.5)
    M, S = assemble_masses(mesh, Q_DEFAULT, EdgeTag.HOLE)
    outer = Dirichlet.from_tags(mesh, EdgeTag.DIRICHLET)
    (A, B), _ = reduce_system([K + S, M], outer)
    out.append(("robin eps=1/2", A, B, 0.9 * (perim / area) / 0.5))
    (A, B), _ = reduce_system([K, M], outer)
    out.append(("neumann eps=1/2", A, B, 0.0))
    (A, B), _ = reduce_system([K, M], Dirichlet.from_tags(mesh, EdgeTag.DIRICHLET, EdgeTag.HOLE))
    out.append(("hole-dirichlet eps=1/2", A, B, 0.0))

    n, box = 31, 4.0
    hh = 2 * box / (n + 1)
    D2, _ = _fd_1d(n, hh)
    z = -box + hh * np.arange(1, n + 1)
    Z1, Z2 = np.meshgrid(z, z, indexing="ij")
    I = sp.identity(n, format="csr")
    H = -(sp.kron(D2, I) + sp.kron(I, D2)) + sp.diags((Z1**2 + Z2**2).ravel())
    out.append(("oscillator grid", ((H + H.T) * 0.5).tocsr(), sp.identity(n * n, format="csr"), 0.0))
    return out


def test_criterion_05_eigensolver_oracle(criterion):
    worst, ok = 0.0, True
    for name, A, B, sigma in _coarse_pencils():
        assert A.shape[0] <= DENSE_LIMIT
        got = np.array([p.value for p in smallest_eigenpairs(A, B, 6, sigma=sigma)])
        ref = np.array([p.value for p in dense_oracle(A, B, 6)])
        rel = float(np.max(np.abs(got - ref) / np.abs(ref)))
        worst = max(worst, rel)
        ok &= rel <= 1e-9
    criterion(5, ok, f"worst relative deviation {worst:.1e} over {len(_coarse_pencils())} pencils")
    assert ok


def test_criterion_06_spectrum_structure(criterion, default_sweep, minmax_solves):
    batches = [(f"sweep eps={e:.4g}", v, o) for e, (v, o) in default_sweep.batches.items()]
    batches += [(name, r.values, r.orthonormality_error()) for name, r in minmax_solves.items()]
    bad = [name for name, v, o in batches if not (v[0] > 0 and np.all(np.diff(v) >= 0) and o <= 1e-8)]
    worst = max(o for _, _, o in batches)
    ok = not bad and len(default_sweep.batches) == len(SWEEP)
    criterion(6, ok, f"{len(batches)} batches, max M-orthonormality error {worst:.1e}" + (f", bad: {bad}" if bad else ""))
    assert ok


def test_criterion_07_sandwich(criterion, default_sweep):
    sw = default_sweep.sandwich
    ok = sw is not None and bool(np.all(sw.mu1 > 0)) and sw.ratio <= 3.0
    criterion(7, ok, "mu1 = [" + ", ".join(f"{m:.4f}" for m in sw.mu1) + f"], max/min {sw.ratio:.3f}")
    assert ok


def test_criterion_08_rate_trend(criterion, default_sweep):
    err = default_sweep.column(1, "abs_err")
    fit = default_sweep.fits[1]
    ok = strictly_decreasing(err) and fit is not None and fit.rate >= 0.15 and fit.r2 >= 0.9
    criterion(8, ok, "|mu1_eps - mu1| = [" + ", ".join(f"{e:.4f}" for e in err)
              + f"], rate {fit.rate:.3f}, R^2 {fit.r2:.3f}")
    assert ok


def test_criterion_09_localization(criterion, default_sweep):
    mass = default_sweep.column(1, "loc_mass")
    ok = strictly_decreasing(mass) and mass[-1] <= 0.2
    criterion(9, ok, "outside mass (gamma=0.5) = [" + ", ".join(f"{m:.4f}" for m in mass)
              + f"], need <= 0.2 at eps=1/8")
    assert ok


def test_criterion_10_ansatz(criterion, default_sweep, isotropic_sweep):
    err = default_sweep.column(1, "ansatz_err")
    decreasing = strictly_decreasing(err)

    # Procrustes fixed point on a real mesh: the ansatz fed back as discrete data
    cell = build_cell_mesh(CellGeometry())
    corr, aeff = homogenize(cell, ConstantMatrix())
    osc = build_oscillator(aeff, corr.area, corr.perimeter, Q_ISO)
    spectrum = analytic_spectrum(osc, 6)
    res = solve_full(DomainSpec(1 / 4, 1.0, CellGeometry()), None, Q_ISO, k=6, cell_mesh=cell)
    cluster = spectrum.cluster_indices(2)
    labels = [spectrum.labels[i - 1] for i in cluster]
    vectors = res.vectors.copy()
    vectors[:, [i - 1 for i in cluster]] = ansatz_functions(res, corr, osc, labels)
    fake = dataclasses.replace(res, vectors=vectors)
    self_err = ansatz_error(fake, cluster, corr, osc, labels).error

    pair = ansatz_error(res, cluster, corr, osc, labels)
    beta_ok = pair.beta.shape == (2, 2) and np.allclose(pair.beta @ pair.beta.T, np.eye(2), atol=1e-12)
    resolved = all(bool(r.cluster_resolved) for r in isotropic_sweep.rows)
    ok = decreasing and self_err <= 1e-10 and cluster == [2, 3] and beta_ok and resolved
    criterion(10, ok, "ansatz error = [" + ", ".join(f"{e:.4f}" for e in err)
              + f"], self-test {self_err:.1e}, isotropic cluster {cluster} resolved at all eps: {resolved}")
    assert ok


def test_criterion_11_trace_identity(criterion):
    cell = build_cell_mesh(CellGeometry())
    area, perim = measures(cell)
    ratios, const_gap = [], 0.0
    for eps in (1 / 2, 1 / 4, 1 / 8):
        mesh = build_perforated_mesh(DomainSpec(eps, 1.0, CellGeometry()), cell)
        x = mesh.vertices
        w = np.cos(np.pi * x[:, 0] / 2) * np.cos(np.pi * x[:, 1] / 2)
        gap, bound = trace_identity_check(mesh, w, perim / area, eps)
        ratios.append(gap / bound)
        one = np.ones(mesh.n_vertices)
        g1, _ = trace_identity_check(mesh, one, perim / area, eps)
        _, S = assemble_masses(mesh)
        const_gap = max(const_gap, g1 / (one @ S @ one))
    spread = max(ratios) / min(ratios)
    ok = spread <= 2.0 and const_gap <= 1e-10
    criterion(11, ok, "gap/bound = [" + ", ".join(f"{r:.3e}" for r in ratios)
              + f"], spread factor {spread:.2f} (need <= 2), constant-field gap {const_gap:.1e}")
    assert ok


def test_criterion_12_minmax(criterion, minmax_solves):
    r, r2 = minmax_solves["robin"].values, minmax_solves["robin_2q"].values
    neu, dir_ = minmax_solves["neumann"].values, minmax_solves["dirichlet"].values
    monotone = bool(np.all(r2 >= r))
    between = bool(np.all(neu <= r) and np.all(r <= dir_))
    ok = monotone and between
    criterion(12, ok, f"lambda1: neumann {neu[0]:.3f} <= robin {r[0]:.3f} (2q: {r2[0]:.3f}) <= hole-dirichlet {dir_[0]:.3f}")
    assert ok
