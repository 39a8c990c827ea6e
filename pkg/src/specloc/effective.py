"""The limiting harmonic oscillator ``-div(A grad v) + (z^T Q z) v = mu v``.

With ``z = A^{1/2} S w``, where ``S`` diagonalizes ``A^{1/2} Q A^{1/2}``
orthogonally, the operator separates into independent 1D oscillators
``-d^2/dw_i^2 + kappa_i w_i^2`` with levels ``(2 n_i + 1) sqrt(kappa_i)``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .eigensolve import smallest_eigenpairs
from .errors import HypothesisError

__all__ = [
    "OscillatorSpec",
    "SpectrumList",
    "build_oscillator",
    "analytic_spectrum",
    "detect_clusters",
    "eigenfunction_eval",
    "hermite_functions",
    "numeric_oscillator",
    "export_spectrum_csv",
]


def _is_spd(M: np.ndarray) -> bool:
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1] or not np.allclose(M, M.T, rtol=0, atol=1e-12):
        return False
    return all(np.linalg.det(M[:i, :i]) > 0 for i in range(1, M.shape[0] + 1))


def _sqrtm_spd(M: np.ndarray) -> np.ndarray:
    w, U = np.linalg.eigh(M)
    return (U * np.sqrt(w)) @ U.T


@dataclass(frozen=True, eq=False)
class OscillatorSpec:
    A: np.ndarray
    Q: np.ndarray
    kappa0: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "A", np.atleast_2d(np.asarray(self.A, dtype=float)))
        object.__setattr__(self, "Q", np.atleast_2d(np.asarray(self.Q, dtype=float)))
        if not (_is_spd(self.A) and _is_spd(self.Q)):
            raise HypothesisError("oscillator matrices A and Q must be symmetric positive definite")
        if self.A.shape != self.Q.shape:
            raise ValueError("A and Q must have the same dimension")

    @property
    def dim(self) -> int:
        return self.A.shape[0]

    def frequencies(self):
        """``sqrt(kappa_i)`` ascending and the orthogonal ``S`` of ``A^{1/2} Q A^{1/2}``."""
        Ah = _sqrtm_spd(self.A)
        C = Ah @ self.Q @ Ah
        kappa, S = np.linalg.eigh(0.5 * (C + C.T))
        return np.sqrt(kappa), S


@dataclass
class SpectrumList:
    """Ascending eigenvalues with labels and cluster bookkeeping.

    ``cluster[i]`` is the 1-based cluster id of value ``i``; ``first[i]`` is the
    1-based index ``J`` of the first value in that cluster and
    ``multiplicity[i]`` the cluster size.
    """

    values: np.ndarray
    labels: list | None
    cluster: np.ndarray
    first: np.ndarray
    multiplicity: np.ndarray

    def __len__(self):
        return len(self.values)

    def cluster_indices(self, j: int) -> list[int]:
        """1-based indices of the cluster containing eigenvalue ``j``."""
        J = int(self.first[j - 1])
        return list(range(J, J + int(self.multiplicity[j - 1])))


def detect_clusters(values: Sequence[float], tol: float = 1e-3):
    """Group consecutive sorted values closer than ``tol`` (absolute)."""
    values = np.asarray(values, dtype=float)
    n = len(values)
    cluster = np.zeros(n, dtype=int)
    cid = 0
    for i in range(n):
        if i == 0 or values[i] - values[i - 1] > tol:
            cid += 1
        cluster[i] = cid
    first = np.zeros(n, dtype=int)
    mult = np.zeros(n, dtype=int)
    for c in np.unique(cluster):
        idx = np.flatnonzero(cluster == c)
        first[idx] = idx[0] + 1
        mult[idx] = idx.size
    return cluster, first, mult


def build_oscillator(aeff: np.ndarray, area: float, perimeter: float, q) -> OscillatorSpec:
    """``Q = (|Sigma|/|Y|) H(q) / 2`` and ``kappa0 = (|Sigma|/|Y|) q(0)`` from discrete measures."""
    H = np.asarray(q.hessian, dtype=float)
    if not _is_spd(H):
        raise HypothesisError("Hessian of q at the minimum is not positive definite")
    ratio = perimeter / area
    return OscillatorSpec(np.asarray(aeff, dtype=float), 0.5 * ratio * H, ratio * q.value_at_origin)


def analytic_spectrum(spec: OscillatorSpec, count: int, tol: float = 1e-3) -> SpectrumList:
    """First ``count`` values ``sum_i (2 n_i + 1) sqrt(kappa_i)`` with labels ``n``."""
    omega, _ = spec.frequencies()
    d = spec.dim
    labels = np.array(list(itertools.product(range(count), repeat=d)))
    mu = (2 * labels + 1) @ omega
    order = np.lexsort((*labels.T[::-1], np.round(mu, 12)))[:count]
    values = mu[order]
    labs = [tuple(int(v) for v in labels[i]) for i in order]
    cluster, first, mult = detect_clusters(values, tol)
    return SpectrumList(values, labs, cluster, first, mult)


def hermite_functions(nmax: int, x: np.ndarray):
    """Normalized Hermite functions ``psi_0..psi_nmax`` and their derivatives."""
    x = np.asarray(x, dtype=float)
    psi = np.zeros((nmax + 2,) + x.shape)
    psi[0] = np.pi ** -0.25 * np.exp(-0.5 * x * x)
    if nmax + 1 >= 1:
        psi[1] = np.sqrt(2.0) * x * psi[0]
    for n in range(1, nmax + 1):
        psi[n + 1] = np.sqrt(2.0 / (n + 1)) * x * psi[n] - np.sqrt(n / (n + 1)) * psi[n - 1]
    dpsi = np.zeros((nmax + 1,) + x.shape)
    dpsi[0] = -x * psi[0]
    for n in range(1, nmax + 1):
        dpsi[n] = np.sqrt(n / 2.0) * psi[n - 1] - np.sqrt((n + 1) / 2.0) * psi[n + 1]
    return psi[: nmax + 1], dpsi


def eigenfunction_eval(spec: OscillatorSpec, labels: Sequence[int], z: np.ndarray, grad: bool = False):
    """Unit-L2 eigenfunction with quantum numbers ``labels`` at points ``z``.

    With ``grad=True`` also returns the gradient with respect to ``z``.
    """
    z = np.atleast_2d(np.asarray(z, dtype=float))
    omega, S = spec.frequencies()
    A_mhalf = np.linalg.inv(_sqrtm_spd(spec.A))
    w = z @ (S.T @ A_mhalf).T  # w = S^T A^{-1/2} z
    norm = np.linalg.det(spec.A) ** -0.25
    factors, dfactors = [], []
    for i, n in enumerate(labels):
        s = np.sqrt(omega[i])
        psi, dpsi = hermite_functions(int(n), s * w[:, i])
        factors.append(np.sqrt(s) * psi[int(n)])
        dfactors.append(s * np.sqrt(s) * dpsi[int(n)])
    value = norm * np.prod(factors, axis=0)
    if not grad:
        return value
    gw = np.empty_like(w)
    for i in range(len(labels)):
        others = [factors[m] for m in range(len(labels)) if m != i]
        gw[:, i] = norm * dfactors[i] * (np.prod(others, axis=0) if others else 1.0)
    # grad_z = (dw/dz)^T grad_w = A^{-1/2} S grad_w
    gz = gw @ (A_mhalf @ S).T
    return value, gz


def _fd_1d(n: int, h: float):
    """Fourth-order second- and first-derivative matrices with zero exterior values."""
    D2 = sp.diags(
        [-1 / 12, 4 / 3, -5 / 2, 4 / 3, -1 / 12], [-2, -1, 0, 1, 2], shape=(n, n)
    ) / h**2
    D1 = sp.diags([1 / 12, -2 / 3, 2 / 3, -1 / 12], [-2, -1, 1, 2], shape=(n, n)) / h
    return D2.tocsr(), D1.tocsr()


def numeric_oscillator(
    spec: OscillatorSpec,
    box: float | None = None,
    h: float = 1.0 / 16,
    k: int = 6,
    tol: float = 1e-3,
    solver_tol: float = 1e-8,
) -> SpectrumList:
    """Finite-difference spectrum on ``[-box, box]^2`` with zero boundary values.

    Independent of :func:`analytic_spectrum`: the operator is discretized
    directly with fourth-order central differences, ``a12`` handled by the
    product of first-derivative stencils.
    """
    if spec.dim != 2:
        raise ValueError("numeric oscillator is implemented for d = 2")
    omega, _ = spec.frequencies()
    if box is None:
        box = 8.0 / np.sqrt(omega[0])
    n = int(round(2 * box / h)) - 1
    hh = 2 * box / (n + 1)
    z = -box + hh * np.arange(1, n + 1)
    D2, D1 = _fd_1d(n, hh)
    I = sp.identity(n, format="csr")
    A = spec.A
    L = -(A[0, 0] * sp.kron(D2, I) + A[1, 1] * sp.kron(I, D2) + 2 * A[0, 1] * sp.kron(D1, D1))
    Z1, Z2 = np.meshgrid(z, z, indexing="ij")
    Q = spec.Q
    pot = Q[0, 0] * Z1**2 + 2 * Q[0, 1] * Z1 * Z2 + Q[1, 1] * Z2**2
    H = (L + sp.diags(pot.ravel())).tocsr()
    H = (H + H.T) * 0.5
    pairs = smallest_eigenpairs(H, sp.identity(n * n, format="csr"), k, sigma=0.0, tol=solver_tol,
                                block_size=max(4, k // 2))
    values = np.array([p.value for p in pairs])
    cluster, first, mult = detect_clusters(values, tol)
    return SpectrumList(values, None, cluster, first, mult)


def export_spectrum_csv(path, spectrum: SpectrumList, numeric: np.ndarray | None = None) -> None:
    """``index,mu,n1,n2,multiplicity_cluster`` (plus ``mu_numeric`` when given)."""
    header = "index,mu,n1,n2,multiplicity_cluster"
    if numeric is not None:
        header += ",mu_numeric"
    lines = [header]
    for i, mu in enumerate(spectrum.values):
        lab = spectrum.labels[i] if spectrum.labels else ("", "")
        row = [str(i + 1), repr(float(mu)), str(lab[0]), str(lab[1]), str(int(spectrum.multiplicity[i]))]
        if numeric is not None:
            row.append(repr(float(numeric[i])) if i < len(numeric) else "")
        lines.append(",".join(row))
    Path(path).write_text("\n".join(lines) + "\n")
