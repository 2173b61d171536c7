"""First-order finite element operators and the reduced Laplace-Beltrami basis."""

from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy import sparse
from scipy.sparse import linalg as splinalg

from .errors import ConvergenceFailure
from .mesh import TriMesh

DENSE_EIGEN_LIMIT = 5000


def build_mass(mesh):
    """Lumped (diagonal) mass matrix.

    Each simplex gives ``1/3`` (triangles) or ``1/4`` (tets) of its measure
    to each of its vertices.
    """
    nv = mesh.simplex_size
    share = np.repeat(mesh.measure / nv, nv)
    diag = np.bincount(mesh.simplices.ravel(), weights=share, minlength=mesh.n_vertices)
    return sparse.diags(diag).tocsr()


def _assemble_offdiag(n, rows, cols, weights):
    """Symmetric Laplacian-type matrix from off-diagonal weights, with zero row sums."""
    W = sparse.coo_matrix((weights, (rows, cols)), shape=(n, n)).tocsr()
    W = W + W.T
    W = W - sparse.diags(np.asarray(W.sum(axis=1)).ravel())
    W.sort_indices()
    return W.tocsr()


def cotangent_weights(mesh):
    """Per-face cotangents, shape (m, 3); column ``c`` is the angle at corner ``c``."""
    p = mesh.vertices[mesh.faces]
    cot = np.empty((len(mesh.faces), 3))
    for c in range(3):
        u = p[:, (c + 1) % 3] - p[:, c]
        v = p[:, (c + 2) % 3] - p[:, c]
        cot[:, c] = np.einsum("ij,ij->i", u, v) / (2.0 * mesh.area)
    return cot


def build_stiffness(mesh):
    """Symmetric positive semidefinite stiffness matrix ``W``.

    Cotangent weights ``w_ij = (cot a + cot b) / 2`` on triangle meshes (no
    clamping of obtuse angles) and the P1 gradient stiffness on tet meshes.
    Off-diagonal entries are ``-w_ij`` and rows sum to zero.
    """
    n = mesh.n_vertices
    if isinstance(mesh, TriMesh):
        cot = cotangent_weights(mesh)
        f = mesh.faces
        rows = np.concatenate([f[:, 1], f[:, 2], f[:, 0]])
        cols = np.concatenate([f[:, 2], f[:, 0], f[:, 1]])
        w = -0.5 * np.concatenate([cot[:, 0], cot[:, 1], cot[:, 2]])
        return _assemble_offdiag(n, rows, cols, w)
    local = local_stiffness(mesh)
    return _assemble_local_offdiag(mesh, local)


def local_stiffness(mesh):
    """Per-simplex blocks ``mu * D^T G^{-1} D`` of shape (m, nv, nv)."""
    Ginv = np.linalg.inv(mesh.G)
    D = mesh.D
    return mesh.measure[:, None, None] * np.einsum("ra,mrs,sb->mab", D, Ginv, D)


def _assemble_local_offdiag(mesh, local):
    s = mesh.simplices
    nv = mesh.simplex_size
    a, b = np.triu_indices(nv, 1)
    rows = s[:, a].ravel()
    cols = s[:, b].ravel()
    w = local[:, a, b].ravel()
    return _assemble_offdiag(mesh.n_vertices, rows, cols, w)


def grad(mesh, f):
    """Piecewise-constant gradient of a P1 function, shape (m, 3)."""
    f = np.asarray(f, dtype=float)
    d = np.einsum("ra,ma->mr", mesh.D, f[mesh.simplices])
    coef = np.linalg.solve(mesh.G, d[..., None])[..., 0]
    return np.einsum("mcr,mr->mc", mesh.E, coef)


def divergence(mesh, V):
    """Per-simplex divergence ``Tr(G^{-1} E^T J)`` of a vertex field."""
    V = np.asarray(V, dtype=float)
    J = np.einsum("ra,mac->mcr", mesh.D, V[mesh.simplices])
    X = np.einsum("mcr,mcs->mrs", mesh.E, J)
    return np.trace(np.linalg.solve(mesh.G, X), axis1=1, axis2=2)


@dataclass(frozen=True)
class ReducedBasis:
    """First ``k`` generalized eigenpairs of ``(W, A)``.

    Attributes
    ----------
    evals : ndarray, shape (k,)
        Ascending, ``evals[0] == 0``.
    evecs : ndarray, shape (n, k)
        Mass-orthonormal: ``evecs.T @ A @ evecs == I``.
    mass : ndarray, shape (n,)
        Diagonal of the lumped mass matrix used.
    """

    evals: np.ndarray
    evecs: np.ndarray
    mass: np.ndarray

    @property
    def k(self):
        return len(self.evals)

    @property
    def evals_pinv(self):
        """Pseudo-inverse of the eigenvalues; zero on the constant mode."""
        tol = 1e-10 * max(float(np.abs(self.evals).max()), 1.0)
        out = np.zeros_like(self.evals)
        nz = np.abs(self.evals) > tol
        out[nz] = 1.0 / self.evals[nz]
        return out

    def project(self, f):
        """Coefficients ``Phi^T A f`` of vertex functions (columns of ``f``)."""
        f = np.asarray(f, dtype=float)
        return self.evecs.T @ (self.mass[:, None] * f if f.ndim == 2 else self.mass * f)

    def truncate(self, k):
        return ReducedBasis(self.evals[:k], self.evecs[:, :k], self.mass)


def _fix_signs(evecs):
    scale = np.abs(evecs).max(axis=0)
    for j in range(evecs.shape[1]):
        nz = np.flatnonzero(np.abs(evecs[:, j]) > 1e-8 * scale[j])
        if nz.size and evecs[nz[0], j] < 0:
            evecs[:, j] *= -1
    return evecs


def eigenbasis(W, A, k, method="auto", residual_tol=1e-8):
    """Smallest ``k`` generalized eigenpairs of ``W phi = lambda A phi``.

    The first eigenvector is set to the exact constant ``1/sqrt(total mass)``
    with eigenvalue 0 (the mesh is assumed connected). Each remaining
    eigenvector is sign-normalized so its first non-negligible entry is positive.

    Parameters
    ----------
    W, A : sparse matrices
        Stiffness and lumped mass.
    k : int
    method : {"auto", "dense", "sparse"}
        Dense LAPACK up to ``DENSE_EIGEN_LIMIT`` vertices, shift-invert
        Lanczos beyond.

    Raises
    ------
    ConvergenceFailure
        If the eigensolver fails or a residual exceeds ``residual_tol * ||W||``.
    """
    n = W.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k={k} must be in [1, {n}]")
    mass = np.asarray(A.diagonal(), dtype=float)
    if method == "auto":
        method = "dense" if n <= DENSE_EIGEN_LIMIT else "sparse"
    try:
        if method == "dense":
            evals, evecs = scipy.linalg.eigh(W.toarray(), np.diag(mass),
                                             subset_by_index=[0, k - 1])
        else:
            sigma = -1e-8 * abs(W.diagonal()).max()
            v0 = np.random.default_rng(0).uniform(0.5, 1.5, n)   # fixed start vector
            evals, evecs = splinalg.eigsh(W.tocsc(), k=k, M=A.tocsc(), sigma=sigma,
                                          which="LM", tol=1e-12, maxiter=20 * n, v0=v0)
            order = np.argsort(evals)
            evals, evecs = evals[order], evecs[:, order]
    except (np.linalg.LinAlgError, splinalg.ArpackError) as exc:
        raise ConvergenceFailure(f"eigensolver failed: {exc}") from exc

    evecs = np.array(evecs)
    evals = np.array(evals)
    evecs[:, 0] = 1.0 / np.sqrt(mass.sum())
    evals[0] = 0.0
    evals = np.maximum(evals, 0.0)
    evecs = _fix_signs(evecs)

    wnorm = splinalg.norm(W, 1)
    res = np.linalg.norm(W @ evecs - (mass[:, None] * evecs) * evals, axis=0)
    if np.any(res > residual_tol * wnorm):
        raise ConvergenceFailure(f"eigen residual {res.max():.3e} exceeds "
                                 f"{residual_tol:g} * ||W||")
    return ReducedBasis(evals, evecs, mass)


def mesh_basis(mesh, k, **kwargs):
    """Convenience wrapper: assemble ``W`` and ``A`` and compute the basis."""
    return eigenbasis(build_stiffness(mesh), build_mass(mesh), k, **kwargs)
