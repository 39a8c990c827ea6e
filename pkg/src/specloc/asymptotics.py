"""Full perforated-domain eigenproblem and the quantities tracked as eps -> 0.

Conventions: eigenvalue indices ``j`` are 1-based throughout this module,
matching the ``j`` column of the study CSV.
"""

from __future__ import annotations

import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .cell_problem import CorrectorSet, corrector_eval, homogenize
from .effective import (
    OscillatorSpec,
    SpectrumList,
    analytic_spectrum,
    build_oscillator,
    eigenfunction_eval,
)
from .eigensolve import smallest_eigenpairs
from .errors import EigensolverError, SpeclocError
from .fem import (
    ConstantMatrix,
    Dirichlet,
    QField,
    assemble_masses,
    assemble_stiffness,
    assemble_weighted_mass,
    reduce_system,
)
from .geometry import (
    CellGeometry,
    DomainSpec,
    EdgeTag,
    Mesh2D,
    build_cell_mesh,
    build_perforated_mesh,
    measures,
)

log = logging.getLogger(__name__)

SANDWICH_MAX_RATIO = 3.0

__all__ = [
    "FullSolveResult",
    "solve_full",
    "extract_mu",
    "outside_mass",
    "localization_mass",
    "SandwichReport",
    "sandwich_check",
    "RescaledField",
    "rescale_eigenfunction",
    "AnsatzResult",
    "procrustes_error",
    "ansatz_functions",
    "ansatz_error",
    "trace_identity_check",
    "RateFit",
    "fit_rate",
    "StudyConfig",
    "StudyRow",
    "StudyReport",
    "convergence_study",
]


@dataclass(eq=False)
class FullSolveResult:
    """Eigenpairs of the eps-problem with ``u^T M u = 1``.

    ``vectors`` has one column per eigenpair, expanded to all mesh vertices
    (zeros on eliminated Dirichlet vertices).
    """

    epsilon: float
    values: np.ndarray
    vectors: np.ndarray
    residuals: np.ndarray
    mesh: Mesh2D
    stiffness: sp.csr_matrix
    mass: sp.csr_matrix
    boundary_mass: sp.csr_matrix
    kappa0: float
    cell_area: float
    cell_perimeter: float
    shift: float
    hole_condition: str = "robin"

    @property
    def mu(self) -> np.ndarray:
        return extract_mu(self.values, self.epsilon, self.kappa0)

    def orthonormality_error(self) -> float:
        G = self.vectors.T @ (self.mass @ self.vectors)
        return float(np.max(np.abs(G - np.eye(G.shape[0]))))


def solve_full(
    spec: DomainSpec,
    a=None,
    q: QField | None = None,
    k: int = 6,
    tol: float = 1e-8,
    shift: float | None = None,
    shift_factor: float = 0.9,
    hole_condition: str = "robin",
    block_size: int = 4,
    seed: int = 0,
    cell_mesh: Mesh2D | None = None,
) -> FullSolveResult:
    """Smallest ``k`` eigenpairs of ``(K + S) u = lam M u`` on the perforated domain.

    ``hole_condition`` selects the condition on the hole boundaries:
    ``"robin"`` (the Fourier condition with coefficient ``q``),
    ``"neumann"`` (``S = 0``) or ``"dirichlet"`` (hole vertices eliminated).
    The default shift is ``shift_factor * kappa0 / eps`` for the Robin
    problem and 0 otherwise.
    """
    a = ConstantMatrix() if a is None else a
    q = QField() if q is None else q
    if cell_mesh is None:
        cell_mesh = build_cell_mesh(spec.cell)
    mesh = build_perforated_mesh(spec, cell_mesh)
    area, perimeter = measures(cell_mesh)
    eps = spec.epsilon
    kappa0 = (perimeter / area) * q.value_at_origin if area > 0 else 0.0

    K = assemble_stiffness(mesh, a, scale=eps)
    M, S = assemble_masses(mesh, q, EdgeTag.HOLE)
    if hole_condition == "robin":
        A = K + S
        removed = Dirichlet.from_tags(mesh, EdgeTag.DIRICHLET)
    elif hole_condition == "neumann":
        A = K
        removed = Dirichlet.from_tags(mesh, EdgeTag.DIRICHLET)
    elif hole_condition == "dirichlet":
        A = K
        removed = Dirichlet.from_tags(mesh, EdgeTag.DIRICHLET, EdgeTag.HOLE)
    else:
        raise ValueError(f"unknown hole condition {hole_condition!r}")
    (Ar, Mr), imap = reduce_system([A, M], removed)
    if shift is None:
        shift = shift_factor * kappa0 / eps if hole_condition == "robin" else 0.0
    try:
        pairs = smallest_eigenpairs(Ar, Mr, k, sigma=shift, tol=tol, block_size=block_size, seed=seed)
    except EigensolverError as exc:
        raise type(exc)(f"eps={eps!r}: {exc}", exc.residuals) from exc
    values = np.array([p.value for p in pairs])
    red = np.column_stack([p.vector for p in pairs])
    red = red / np.sqrt(np.einsum("ij,ij->j", red, Mr @ red))
    vectors = imap.extend(red)
    return FullSolveResult(
        eps, values, vectors, np.array([p.residual for p in pairs]), mesh, K, M, S,
        kappa0, area, perimeter, shift, hole_condition,
    )


def extract_mu(lam, eps: float, kappa0: float):
    """``sqrt(eps) * (lam - kappa0 / eps)``; scalar in, scalar out."""
    mu = math.sqrt(eps) * (np.asarray(lam, dtype=float) - kappa0 / eps)
    return float(mu) if mu.ndim == 0 else mu


def outside_mass(mesh: Mesh2D, u: np.ndarray, gamma: float, center=(0.0, 0.0)) -> float:
    """``int |u|^2`` over triangles whose centroid lies at distance >= gamma from ``center``."""
    far = np.linalg.norm(mesh.centroids() - np.asarray(center), axis=1) >= gamma
    area = mesh.signed_areas()[far]
    ut = u[mesh.triangles[far]]
    # exact P1 element mass: |T|/12 * (sum u_i^2 + (sum u_i)^2)
    return float(np.sum(area / 12.0 * (np.sum(ut**2, axis=1) + np.sum(ut, axis=1) ** 2)))


def localization_mass(result: FullSolveResult, j: int, gamma: float) -> float:
    """Mass of ``u_j`` outside the ball of radius ``gamma`` around the minimum of ``q``."""
    return outside_mass(result.mesh, result.vectors[:, j - 1], gamma)


@dataclass
class SandwichReport:
    """Per-eps slacks ``lam1 - kappa0/eps`` and ``mu1``, plus sweep-level bounds."""

    eps: np.ndarray
    lower_slack: np.ndarray
    mu1: np.ndarray
    c_min: float
    c_max: float
    ratio: float
    flags: list[str]

    @property
    def clean(self) -> bool:
        return not self.flags


def sandwich_check(eps: Sequence[float], lam1: Sequence[float], kappa0: float,
                   max_ratio: float = SANDWICH_MAX_RATIO) -> SandwichReport:
    """Check ``kappa0/eps + O(1) <= lam1 <= kappa0/eps + O(eps^-1/2)`` across a sweep.

    Flags are raised when ``mu1`` is not positive or when its max/min ratio
    exceeds ``max_ratio`` (unbounded drift).
    """
    eps = np.asarray(eps, dtype=float)
    lam1 = np.asarray(lam1, dtype=float)
    lower = lam1 - kappa0 / eps
    mu1 = np.sqrt(eps) * lower
    flags = []
    if np.any(mu1 <= 0):
        bad = eps[mu1 <= 0]
        flags.append(f"mu1 <= 0 at eps={bad.tolist()}")
    c_min, c_max = float(np.min(mu1)), float(np.max(mu1))
    ratio = c_max / c_min if c_min > 0 else math.inf
    if ratio > max_ratio:
        flags.append(f"mu1 max/min ratio {ratio:.3g} exceeds {max_ratio:g}")
    return SandwichReport(eps, lower, mu1, c_min, c_max, ratio, flags)


@dataclass
class RescaledField:
    """Nodal field on the stretched coordinates ``z = x / eps^{1/4}``."""

    z: np.ndarray
    values: np.ndarray
    mass: sp.csr_matrix  # L2(dz) mass matrix on the stretched mesh


def rescale_eigenfunction(result: FullSolveResult, j: int) -> RescaledField:
    """``v(z) = u_j(eps^{1/4} z)``, renormalized to unit discrete ``L2(dz)`` norm."""
    s = result.epsilon ** 0.25
    Mz = result.mass / (s * s)
    v = result.vectors[:, j - 1]
    v = v / math.sqrt(v @ (Mz @ v))
    return RescaledField(result.mesh.vertices / s, v, Mz)


@dataclass
class AnsatzResult:
    error: float
    errors: np.ndarray
    beta: np.ndarray
    resolved: bool
    discrete_mu: np.ndarray


def procrustes_error(X: np.ndarray, Y: np.ndarray, G) -> tuple[np.ndarray, np.ndarray]:
    """Best orthogonal mixing ``beta`` of the columns of ``Y`` towards ``X`` in the ``G`` norm.

    Returns ``(errors, beta)`` where ``errors[p] = ||X[:, p] - (Y beta)[:, p]||_G``.
    """
    C = Y.T @ (G @ X)
    U, _, Vt = np.linalg.svd(np.atleast_2d(C))
    beta = U @ Vt
    R = X - Y @ beta
    errors = np.sqrt(np.maximum(np.einsum("ij,ij->j", R, G @ R), 0.0))
    return errors, beta


def _same_template(mesh: Mesh2D, cell: Mesh2D) -> bool:
    """True when ``mesh`` was tiled from ``cell``, so correctors can be copied node by node."""
    cv = mesh.cell_vertex
    if cv is None or int(cv.max()) >= cell.n_vertices:
        return False
    unit = (mesh.vertices - mesh.vertices.min(axis=0)) / mesh.scale
    d = cell.vertices[cv] - unit
    return bool(np.max(np.abs(d - np.round(d))) < 1e-9)


def ansatz_functions(result: FullSolveResult, correctors: CorrectorSet, osc: OscillatorSpec,
                     labels: Sequence[tuple]) -> np.ndarray:
    """Nodal values of ``v_k(z) + eps^{3/4} N(x/eps) . grad v_k(z)``, one column per label."""
    eps = result.epsilon
    z = result.mesh.vertices / eps ** 0.25
    mesh = result.mesh
    if _same_template(mesh, correctors.mesh):
        Nz = correctors.N[:, mesh.cell_vertex].T
    else:
        Nz, _, in_hole = corrector_eval(correctors, mesh.vertices, scale=eps)
        Nz = np.where(in_hole[:, None], 0.0, Nz)
    cols = []
    for lab in labels:
        v, g = eigenfunction_eval(osc, lab, z, grad=True)
        cols.append(v + eps ** 0.75 * np.einsum("nk,nk->n", Nz, g))
    return np.column_stack(cols)


def ansatz_error(
    result: FullSolveResult,
    cluster: Sequence[int],
    correctors: CorrectorSet,
    spec: OscillatorSpec,
    labels: Sequence[tuple] | None = None,
) -> AnsatzResult:
    """Distance in the ``||.||_{eps,Q}`` norm from the discrete cluster to the two-term ansatz.

    ``cluster`` lists 1-based eigen indices.  Both the discrete eigenvectors and
    the ansatz functions ``v_k + eps^{3/4} N(x/eps) . grad v_k`` are normalized
    in discrete ``L2(dz)`` before the orthogonal (Procrustes) alignment.
    """
    cluster = list(cluster)
    if labels is None:
        labels = analytic_spectrum(spec, max(cluster)).labels
        labels = [labels[j - 1] for j in cluster]
    s = result.epsilon ** 0.25
    z = result.mesh.vertices / s
    Mz = result.mass / (s * s)
    G = result.stiffness + assemble_weighted_mass(
        result.mesh, lambda p: np.einsum("ni,ij,nj->n", p, spec.Q, p), vertices=z
    )

    X = result.vectors[:, [j - 1 for j in cluster]]
    X = X / np.sqrt(np.einsum("ij,ij->j", X, Mz @ X))
    Y = ansatz_functions(result, correctors, spec, labels)
    Y = Y / np.sqrt(np.einsum("ij,ij->j", Y, Mz @ Y))
    errors, beta = procrustes_error(X, Y, G)

    mu = result.mu
    inside = mu[[j - 1 for j in cluster]]
    spread = float(np.ptp(inside))
    lo, hi = cluster[0] - 1, cluster[-1] - 1
    gaps = []
    if lo > 0:
        gaps.append(inside.min() - mu[lo - 1])
    if hi + 1 < len(mu):
        gaps.append(mu[hi + 1] - inside.max())
    resolved = all(g > spread for g in gaps)
    return AnsatzResult(float(errors.max()), errors, beta, resolved, inside)


def trace_identity_check(mesh: Mesh2D, w: np.ndarray, ratio: float, eps: float) -> tuple[float, float]:
    """Gap ``|eps^-1 ratio int w^2 - int_Sigma w^2|`` and bound ``||w|| ||grad w||``."""
    M, S = assemble_masses(mesh, None, EdgeTag.HOLE)
    K = assemble_stiffness(mesh, ConstantMatrix(), scale=eps)
    vol = float(w @ (M @ w))
    surf = float(w @ (S @ w))
    gap = abs(ratio * vol / eps - surf)
    bound = math.sqrt(vol) * math.sqrt(max(float(w @ (K @ w)), 0.0))
    return gap, bound


@dataclass
class RateFit:
    """Least-squares fit ``log err = log C + rate * log eps``."""

    rate: float
    constant: float
    r2: float
    n_points: int
    converged: bool

    def to_dict(self, j: int) -> dict:
        return {"j": j, "rate": self.rate, "constant": self.constant, "r2": self.r2}


def fit_rate(eps: Sequence[float], err: Sequence[float], min_rate: float = 0.05) -> RateFit | None:
    """Log-log least squares; ``None`` with fewer than three usable points."""
    eps = np.asarray(eps, dtype=float)
    err = np.asarray(err, dtype=float)
    ok = np.isfinite(err) & (err > 0) & (eps > 0)
    if ok.sum() < 3:
        return None
    x, y = np.log(eps[ok]), np.log(err[ok])
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return RateFit(float(slope), float(math.exp(intercept)), r2, int(ok.sum()), bool(slope >= min_rate))


@dataclass(frozen=True)
class StudyConfig:
    """Everything a sweep needs besides the list of eps values."""

    half_width: float = 1.0
    hole_radius: float = 0.25
    n_seg: int = 64
    h: float = 1.0 / 16
    a: object = field(default_factory=ConstantMatrix)
    q: QField = field(default_factory=lambda: QField(1.0, ((2.0, 0.0), (0.0, 4.0))))
    k: int = 6
    tol: float = 1e-8
    shift_factor: float = 0.9
    block_size: int = 4
    gamma: float = 0.5
    seed: int = 0

    @property
    def cell(self) -> CellGeometry:
        return CellGeometry(self.hole_radius, self.n_seg, self.h)


@dataclass
class StudyRow:
    eps: float
    j: int
    lam: float
    mu_eps: float
    mu_eff: float
    loc_mass: float
    ansatz_err: float
    cluster_resolved: bool
    sandwich_flag: bool = False
    error: str = ""

    @property
    def abs_err(self) -> float:
        return abs(self.mu_eps - self.mu_eff)


@dataclass
class StudyReport:
    rows: list[StudyRow]
    fits: dict[int, RateFit | None]
    oscillator: OscillatorSpec
    spectrum: SpectrumList
    aeff: np.ndarray
    sandwich: SandwichReport | None
    batches: dict = field(default_factory=dict)  # eps -> (eigenvalues, M-orthonormality error)

    def column(self, j: int, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows if r.j == j])

    def eps_values(self, j: int = 1) -> np.ndarray:
        return self.column(j, "eps")

    def to_csv(self, path) -> None:
        head = "eps,j,lambda,mu_eps,mu_eff,abs_err,loc_mass,ansatz_err,sandwich_flag"
        lines = [head]
        for r in self.rows:
            vals = [r.eps, r.j, r.lam, r.mu_eps, r.mu_eff, r.abs_err, r.loc_mass, r.ansatz_err]
            lines.append(
                ",".join(repr(float(v)) if not isinstance(v, int) else str(v) for v in vals)
                + f",{int(r.sandwich_flag)}"
            )
        Path(path).write_text("\n".join(lines) + "\n")

    def fits_json(self) -> str:
        out = [f.to_dict(j) for j, f in sorted(self.fits.items()) if f is not None]
        return json.dumps(out, indent=2)


def _study_row(eps: float, config: StudyConfig, j_list, cell_mesh, correctors, osc, spectrum):
    spec = DomainSpec(eps, config.half_width, config.cell)
    k = max(config.k, max(max(spectrum.cluster_indices(j)) for j in j_list) + 1)
    res = solve_full(
        spec, config.a, config.q, k=k, tol=config.tol, shift_factor=config.shift_factor,
        block_size=config.block_size, seed=config.seed, cell_mesh=cell_mesh,
    )
    mu = res.mu
    rows = []
    for j in j_list:
        cl = spectrum.cluster_indices(j)
        ans = ansatz_error(res, cl, correctors, osc, [spectrum.labels[i - 1] for i in cl])
        rows.append(
            StudyRow(
                eps, j, float(res.values[j - 1]), float(mu[j - 1]), float(spectrum.values[j - 1]),
                localization_mass(res, j, config.gamma), ans.error, ans.resolved,
            )
        )
    return rows, (res.values, res.orthonormality_error())


def convergence_study(eps_list: Sequence[float], config: StudyConfig | None = None,
                      j_list: Sequence[int] = (1,), jobs: int = 1) -> StudyReport:
    """Solve the eps-problem along a decreasing sweep and fit ``|mu_j^eps - mu_j| ~ C eps^rate``."""
    config = StudyConfig() if config is None else config
    eps_list = [float(e) for e in eps_list]
    if any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise ValueError("eps list must be strictly decreasing")
    for e in eps_list:
        DomainSpec(e, config.half_width, config.cell)

    cell_mesh = build_cell_mesh(config.cell)
    correctors, aeff = homogenize(cell_mesh, config.a)
    osc = build_oscillator(aeff, correctors.area, correctors.perimeter, config.q)
    spectrum = analytic_spectrum(osc, max(config.k, max(j_list) + 4))

    def failed(eps, exc):
        log.warning("eps=%g failed: %s", eps, exc)
        return [StudyRow(eps, j, math.nan, math.nan, float(spectrum.values[j - 1]), math.nan, math.nan,
                         False, True, str(exc)) for j in j_list]

    args = (config, list(j_list), cell_mesh, correctors, osc, spectrum)
    rows: list[StudyRow] = []
    batches = {}

    def collect(e, get):
        nonlocal rows
        try:
            new, batches[e] = get()
            rows += new
        except SpeclocError as exc:
            rows += failed(e, exc)

    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(_study_row, e, *args) for e in eps_list]
            for e, fut in zip(eps_list, futures):
                collect(e, fut.result)
    else:
        for e in eps_list:
            collect(e, lambda: _study_row(e, *args))

    clean = [r for r in rows if r.j == 1 and not r.error] if 1 in j_list else []
    sandwich = None
    if clean:
        sandwich = sandwich_check([r.eps for r in clean], [r.lam for r in clean], osc.kappa0)
        bad = set(sandwich.eps[sandwich.mu1 <= 0].tolist())
        drift = sandwich.ratio > SANDWICH_MAX_RATIO
        for r in rows:
            if r.eps in bad or (r.j == 1 and drift):
                r.sandwich_flag = True

    fits = {}
    for j in j_list:
        sel = [r for r in rows if r.j == j and not r.error]
        fits[j] = fit_rate([r.eps for r in sel], [r.abs_err for r in sel])
    return StudyReport(rows, fits, osc, spectrum, aeff, sandwich, batches)
