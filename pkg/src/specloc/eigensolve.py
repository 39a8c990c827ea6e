"""Smallest eigenpairs of a symmetric pencil ``A v = lam B v`` with ``B`` SPD.

The main solver is a block shift-invert Lanczos iteration: Krylov blocks of
``(A - sigma B)^{-1} B`` are B-orthonormalized with full (repeated classical
Gram-Schmidt) reorthogonalization, and Ritz pairs are extracted from the
projected pencil.  When the basis reaches its size cap the iteration restarts
from the wanted Ritz vectors (thick restart).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import EigensolverError, FactorizationError

__all__ = ["EigenPair", "smallest_eigenpairs", "dense_oracle", "relative_residuals"]

DENSE_LIMIT = 2000


@dataclass
class EigenPair:
    value: float
    vector: np.ndarray
    residual: float


def relative_residuals(A, B, values, vectors) -> np.ndarray:
    """``||A v - lam B v||_2 / (|lam| ||B v||_2)`` column by column."""
    BV = B @ vectors
    R = A @ vectors - BV * values
    denom = np.abs(values) * np.linalg.norm(BV, axis=0)
    denom = np.where(denom == 0, 1.0, denom)
    return np.linalg.norm(R, axis=0) / denom


def _fix_signs(V: np.ndarray) -> np.ndarray:
    idx = np.argmax(np.abs(V), axis=0)
    s = np.sign(V[idx, np.arange(V.shape[1])])
    s[s == 0] = 1
    return V * s


def _b_orthonormalize(W, BW, V, BV, B, rng, drop=1e-10):
    """Orthogonalize the columns of W against V and each other in the B inner product.

    Columns that vanish (numerically in span) are dropped.
    """
    keep_W, keep_BW = [], []
    for j in range(W.shape[1]):
        w, bw = W[:, j].copy(), BW[:, j].copy()
        norm0 = np.sqrt(max(w @ bw, 0.0))
        if norm0 == 0:
            continue
        for _ in range(2):
            if V is not None and V.shape[1]:
                c = BV.T @ w
                w -= V @ c
                bw -= BV @ c
            if keep_W:
                Q = np.column_stack(keep_W)
                BQ = np.column_stack(keep_BW)
                c = BQ.T @ w
                w -= Q @ c
                bw -= BQ @ c
        nrm = np.sqrt(max(w @ bw, 0.0))
        if nrm <= drop * norm0:
            continue
        keep_W.append(w / nrm)
        keep_BW.append(B @ (w / nrm))
    if not keep_W:
        return np.empty((W.shape[0], 0)), np.empty((W.shape[0], 0))
    return np.column_stack(keep_W), np.column_stack(keep_BW)


def smallest_eigenpairs(
    A,
    B,
    k: int,
    sigma: float = 0.0,
    tol: float = 1e-8,
    block_size: int = 4,
    max_iter: int = 500,
    max_basis: int | None = None,
    seed: int = 0,
) -> list[EigenPair]:
    """The ``k`` eigenpairs of ``A v = lam B v`` closest above ``sigma``, ascending.

    Parameters
    ----------
    A, B : sparse or dense symmetric matrices, ``B`` positive definite.
    k : number of eigenpairs.
    sigma : shift; should lie below the wanted eigenvalues.
    tol : bound on the relative residual of every returned pair.
    block_size : Krylov block width; keep it above the largest cluster multiplicity.
    max_iter : cap on block expansions.
    seed : seed of the pseudorandom start block.

    Returns
    -------
    list of EigenPair, B-orthonormal vectors.
    """
    A = sp.csr_matrix(A)
    B = sp.csr_matrix(B)
    n = A.shape[0]
    if B.shape != A.shape:
        raise ValueError("A and B must have the same shape")
    if not 1 <= k <= n:
        raise ValueError(f"requested k={k} eigenpairs of a dimension-{n} pencil")
    b = max(1, min(block_size, n))
    if max_basis is None:
        max_basis = max(4 * (k + b), 40)
    max_basis = min(max_basis, n)

    try:
        lu = spla.splu((A - sigma * B).tocsc())
    except RuntimeError as exc:
        raise FactorizationError(
            f"factorization of A - sigma*B failed at sigma={sigma!r} ({exc}); "
            "sigma probably coincides with an eigenvalue, retry with a perturbed shift"
        ) from exc

    def op(X):
        return lu.solve(np.asarray(B @ X))

    rng = np.random.default_rng(seed)
    X0 = rng.standard_normal((n, b))
    V, BV = _b_orthonormalize(X0, B @ X0, None, None, B, rng)
    OpV = op(V)
    last = np.arange(V.shape[1])

    best = None
    for _ in range(max_iter):
        T = BV.T @ OpV
        T = 0.5 * (T + T.T)
        theta, Y = np.linalg.eigh(T)
        order = np.argsort(-theta)
        pos = order[theta[order] > 0]
        if pos.size >= k:
            sel = pos[:k]
            lam = sigma + 1.0 / theta[sel]
            X = V @ Y[:, sel]
            res = relative_residuals(A, B, lam, X)
            if best is None or np.max(res) < np.max(best):
                best = res
            if np.all(res <= tol):
                srt = np.argsort(lam, kind="stable")
                lam, X, res = lam[srt], _fix_signs(X[:, srt]), res[srt]
                return [EigenPair(float(l), X[:, i].copy(), float(r)) for i, (l, r) in enumerate(zip(lam, res))]

        if V.shape[1] >= n:
            raise EigensolverError("Krylov space exhausted without convergence", best)

        W = OpV[:, last]
        W_new, BW_new = _b_orthonormalize(W, B @ W, V, BV, B, rng)
        if W_new.shape[1] == 0:
            # invariant subspace reached; inject fresh random directions
            R = rng.standard_normal((n, b))
            W_new, BW_new = _b_orthonormalize(R, B @ R, V, BV, B, rng)
            if W_new.shape[1] == 0:
                raise EigensolverError("could not extend the Krylov basis", best)
        if V.shape[1] + W_new.shape[1] > max_basis:
            # thick restart: keep the leading Ritz vectors; the new block is
            # already B-orthogonal to the old basis and hence to them
            Yk = Y[:, order[: min(len(order), k + b)]]
            V, BV, OpV = V @ Yk, BV @ Yk, OpV @ Yk
        last = np.arange(V.shape[1], V.shape[1] + W_new.shape[1])
        V = np.column_stack([V, W_new])
        BV = np.column_stack([BV, BW_new])
        OpV = np.column_stack([OpV, op(W_new)])

    raise EigensolverError(f"no convergence within {max_iter} block iterations", best)


def dense_oracle(A, B, k: int) -> list[EigenPair]:
    """Dense LAPACK solve of the pencil; the reference for ``smallest_eigenpairs``."""
    A = A.toarray() if sp.issparse(A) else np.asarray(A, dtype=float)
    B = B.toarray() if sp.issparse(B) else np.asarray(B, dtype=float)
    n = A.shape[0]
    if n > DENSE_LIMIT:
        raise ValueError(f"dense oracle limited to dimension {DENSE_LIMIT}, got {n}")
    if not 1 <= k <= n:
        raise ValueError(f"requested k={k} eigenpairs of a dimension-{n} pencil")
    w, V = sla.eigh(A, B, subset_by_index=[0, k - 1])
    V = _fix_signs(V)
    res = relative_residuals(A, B, w, V)
    return [EigenPair(float(w[i]), V[:, i].copy(), float(res[i])) for i in range(k)]
