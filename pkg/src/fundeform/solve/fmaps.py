"""Functional maps: from point maps, by inference, back to point maps, and blending.

Convention: ``C`` of shape (k_N, k_M) maps reduced coefficients of functions
on ``M`` to coefficients on ``N``, i.e. it represents the pullback
``f -> f o phi`` of a point map ``phi : N -> M``.
"""

import warnings

import numpy as np
import scipy.linalg

from ..errors import RankDeficientWarning


def fmap_from_pointmap(pmap, basis_M, basis_N):
    """``C = Phi_N^T A_N P Phi_M`` where ``(P f)[v] = f[pmap[v]]``.

    Parameters
    ----------
    pmap : array_like of int, shape (n_N,)
        For every vertex of ``N`` its image vertex on ``M``.
    """
    pmap = np.asarray(pmap)
    n_N, n_M = basis_N.evecs.shape[0], basis_M.evecs.shape[0]
    if pmap.shape != (n_N,):
        raise IndexError(f"point map needs one entry per target vertex ({n_N})")
    if not np.issubdtype(pmap.dtype, np.integer) or (pmap.size and (pmap.min() < 0
                                                                    or pmap.max() >= n_M)):
        raise IndexError("point map entries must be vertex indices of the source mesh")
    return basis_N.evecs.T @ (basis_N.mass[:, None] * basis_M.evecs[pmap])


def landmark_coefficients(basis, vertices):
    """Reduced coefficients ``Phi^T A e_v`` of mass-weighted deltas, shape (k, len(vertices))."""
    v = np.asarray(vertices, dtype=np.int64)
    return (basis.evecs[v] * basis.mass[v, None]).T


def _commutator_rows(X_M, X_N):
    """Matrix ``T`` with ``T vec(C) = vec(C X_M - X_N C)`` (column-major ``vec``)."""
    kN, kM = X_N.shape[0], X_M.shape[0]
    return np.kron(X_M.T, np.eye(kN)) - np.kron(np.eye(kM), X_N)


def fmap_infer(basis_M, basis_N, En_M=None, En_N=None, landmarks=(), w_lb=1.0, w_ext=1.0,
               landmark_weight=None):
    """Functional map minimizing Laplacian and normal-operator commutators.

    Minimizes ``w_lb ||C Lambda_M - Lambda_N C||^2 + w_ext ||C En_M - En_N C||^2``
    subject to ``C delta_M(v) = delta_N(w)`` for every landmark pair ``(v, w)``.
    With ``landmark_weight`` set, landmarks become a penalty with that weight.

    Parameters
    ----------
    En_M, En_N : ndarray, shape (k, k), optional
        Reduced normal-field operators; omit (or set ``w_ext=0``) for the
        Laplacian-only map.
    landmarks : sequence of (int, int)
        Vertex on ``M``, vertex on ``N``.

    Returns
    -------
    ndarray, shape (k_N, k_M)

    Warns
    -----
    RankDeficientWarning
        When the system is rank deficient; the minimum-norm solution is returned.
    """
    kM, kN = basis_M.k, basis_N.k
    blocks = [np.sqrt(w_lb) * _commutator_rows(np.diag(basis_M.evals), np.diag(basis_N.evals))]
    if En_M is not None and En_N is not None and w_ext > 0:
        blocks.append(np.sqrt(w_ext) * _commutator_rows(np.asarray(En_M), np.asarray(En_N)))
    T = np.vstack(blocks)
    rhs = np.zeros(len(T))
    lm = np.asarray(landmarks, dtype=np.int64).reshape(-1, 2)
    dM = landmark_coefficients(basis_M, lm[:, 0])
    dN = landmark_coefficients(basis_N, lm[:, 1])
    # C dM = dN  <=>  (dM^T kron I) vec(C) = vec(dN)
    L = np.kron(dM.T, np.eye(kN))
    d = dN.T.ravel()
    if landmark_weight is not None:
        w = np.sqrt(landmark_weight)
        A = np.vstack([T, w * L])
        x, _, rank, _ = scipy.linalg.lstsq(A, np.concatenate([rhs, w * d]), cond=1e-12)
        size = A.shape[1]
    else:
        m = L.shape[0]
        A = np.block([[T.T @ T, L.T], [L, np.zeros((m, m))]])
        sol, _, rank, _ = scipy.linalg.lstsq(A, np.concatenate([np.zeros(kM * kN), d]),
                                             cond=1e-12)
        x = sol[:kM * kN]
        size = A.shape[1]
    if rank < size:
        warnings.warn(f"functional map system has rank {rank} < {size}; "
                      "returning the minimum-norm solution", RankDeficientWarning, stacklevel=2)
    return x.reshape(kM, kN).T


def commutator_norms(C, basis_M, basis_N, En_M=None, En_N=None):
    """``(||C Lambda_M - Lambda_N C||_F, ||C En_M - En_N C||_F)``; the second is None without operators."""
    lb = np.linalg.norm(C * basis_M.evals[None, :C.shape[1]]
                        - basis_N.evals[:C.shape[0], None] * C)
    ext = None
    if En_M is not None and En_N is not None:
        ext = float(np.linalg.norm(C @ En_M - En_N @ C))
    return float(lb), ext


def fmap_to_pointmap(C, basis_M, basis_N, chunk=2048):
    """Point map ``N -> M`` by nearest neighbours of rows of ``Phi_N`` among rows of ``Phi_M C^T``.

    Exhaustive search, ties resolved to the lowest ``M`` index.
    """
    C = np.asarray(C, dtype=float)
    kN, kM = C.shape
    src = basis_M.evecs[:, :kM] @ C.T          # (n_M, k_N)
    qry = basis_N.evecs[:, :kN]
    sq = np.einsum("ij,ij->i", src, src)
    out = np.empty(len(qry), dtype=np.int64)
    for s in range(0, len(qry), chunk):
        q = qry[s:s + chunk]
        d = sq[None, :] - 2.0 * q @ src.T
        out[s:s + chunk] = np.argmin(d, axis=1)
    return out


def blend_fmaps(C_direct, C_symmetric, t):
    """``t C_symmetric + (1 - t) C_direct``."""
    C_direct = np.asarray(C_direct, dtype=float)
    C_symmetric = np.asarray(C_symmetric, dtype=float)
    if C_direct.shape != C_symmetric.shape:
        raise ValueError("functional maps must have the same shape")
    return t * C_symmetric + (1.0 - t) * C_direct
