"""Shape difference operators and their infinitesimal counterparts.

Reduced matrices are expressed in the Laplace-Beltrami basis of the source
mesh ``M``. The unified and conformal differences are defined through
``W_M^{-1}``, so they act on the mass-orthogonal complement of constants; we
set their constant entry to 1 so that they are exactly the identity for
isometric (resp. conformal) pairs.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConnectivityMismatch, SingularC
from .fem import (_assemble_local_offdiag, _assemble_offdiag, build_mass, build_stiffness,
                  cotangent_weights, divergence, local_stiffness, mesh_basis)
from .mesh import TriMesh
from .operators import assemble_E, check_field, reduce

KINDS = ("area", "conformal", "unified")


@dataclass
class ShapeDifference:
    kind: str
    matrix: np.ndarray
    mode: str  # "same-connectivity" or "functional-map"

    def distance_to_identity(self):
        return float(np.linalg.norm(self.matrix - np.eye(len(self.matrix))))


def _check_kind(kind):
    if kind not in KINDS:
        raise ValueError(f"kind must be one of {KINDS}, got {kind!r}")


def _check_same_connectivity(M, N):
    if type(M) is not type(N) or M.n_vertices != N.n_vertices \
            or not np.array_equal(M.simplices, N.simplices):
        raise ConnectivityMismatch("meshes do not share vertex count and simplex list")


def modified_stiffness(M, N):
    """Stiffness of ``N`` with per-simplex weights rescaled by ``mu_M / mu_N``.

    Gradients and inner products are taken on ``N`` while the measure comes
    from ``M``; equals ``W_N`` when every simplex keeps its measure.
    """
    _check_same_connectivity(M, N)
    ratio = M.measure / N.measure
    if isinstance(N, TriMesh):
        cot = cotangent_weights(N) * ratio[:, None]
        f = N.faces
        rows = np.concatenate([f[:, 1], f[:, 2], f[:, 0]])
        cols = np.concatenate([f[:, 2], f[:, 0], f[:, 1]])
        w = -0.5 * np.concatenate([cot[:, 0], cot[:, 1], cot[:, 2]])
        return _assemble_offdiag(N.n_vertices, rows, cols, w)
    return _assemble_local_offdiag(N, local_stiffness(N) * ratio[:, None, None])


def _fix_constant(D):
    D = D.copy()
    D[0, :] = 0.0
    D[:, 0] = 0.0
    D[0, 0] = 1.0
    return D


def shape_difference_same_conn(M, N, kind, basis=None, k=None):
    """Reduced shape difference between meshes sharing connectivity.

    Parameters
    ----------
    M, N : TriMesh or TetMesh
        Source and target; the correspondence is the vertex identity.
    kind : {"area", "conformal", "unified"}
    basis : ReducedBasis of ``M``, optional
        Computed with ``k`` functions if omitted.
    """
    _check_kind(kind)
    _check_same_connectivity(M, N)
    if basis is None:
        basis = mesh_basis(M, k)
    Phi = basis.evecs
    if kind == "area":
        mat = Phi.T @ (build_mass(N) @ Phi)
    else:
        Wt = modified_stiffness(M, N) if kind == "unified" else build_stiffness(N)
        mat = _fix_constant(reduce(Wt, basis))
    return ShapeDifference(kind, mat, "same-connectivity")


def shape_difference_fmap(basis_M, basis_N, C, kind="unified"):
    """Shape difference approximated from a functional map ``C`` (k_N x k_M).

    unified: ``Lambda_M^+ C^{-1} Lambda_N C``; conformal: ``Lambda_M^+ C^T Lambda_N C``;
    area: ``C^T C``.

    Raises
    ------
    SingularC
        If ``C`` is not square or numerically singular (unified kind).
    """
    _check_kind(kind)
    C = np.asarray(C, dtype=float)
    if kind == "area":
        return ShapeDifference(kind, C.T @ C, "functional-map")
    lam_pinv = basis_M.evals_pinv
    lam_N = basis_N.evals[:C.shape[0]]
    if kind == "conformal":
        mat = lam_pinv[:, None] * (C.T @ (lam_N[:, None] * C))
    else:
        if C.shape[0] != C.shape[1]:
            raise SingularC("the unified difference needs a square functional map")
        if np.linalg.cond(C) > 1e12:
            raise SingularC("functional map is numerically singular")
        mat = lam_pinv[:, None] * np.linalg.solve(C, lam_N[:, None] * C)
    return ShapeDifference(kind, _fix_constant(mat), "functional-map")


def divergence_stiffness(mesh, V):
    """Full form of ``sum_T div(V)_T <grad f, grad g>_T mu(T)``."""
    div = divergence(mesh, V)
    return _assemble_local_offdiag(mesh, local_stiffness(mesh) * div[:, None, None])


def area_rate(mesh, V):
    """Lumped diagonal ``sum_T div(V)_T mu(T) / nv`` per vertex, as a vector."""
    nv = mesh.simplex_size
    share = np.repeat(divergence(mesh, V) * mesh.measure / nv, nv)
    return np.bincount(mesh.simplices.ravel(), weights=share, minlength=mesh.n_vertices)


def infinitesimal_full(mesh, V):
    """Full forms ``(A_dot, H_C, H)`` of the area, conformal and unified derivatives.

    ``f^T A_dot g``, ``f^T H_C g`` and ``f^T H g`` are the t-derivatives at 0 of
    the mass, stiffness and modified stiffness of ``mesh + t V``.
    """
    V = check_field(mesh, V)
    H = assemble_E(mesh, V)
    return area_rate(mesh, V), H + divergence_stiffness(mesh, V), H


def infinitesimal_shape_diffs(mesh, V, basis):
    """Reduced infinitesimal shape differences ``(E_A, E_C, E_I)``."""
    a_dot, H_C, H = infinitesimal_full(mesh, V)
    Phi = basis.evecs
    E_A = Phi.T @ (a_dot[:, None] * Phi)
    return E_A, reduce(H_C, basis), reduce(H, basis)


def collection_embedding(base, collection, kind, basis=None, k=None):
    """2D PCA coordinates of the reduced shape differences ``base -> shape``.

    Matrices are compared with the Frobenius inner product. Each principal
    axis is sign-normalized so its first non-negligible component is positive.

    Returns
    -------
    ndarray, shape (len(collection), 2)
    """
    if len(collection) < 3:
        raise ValueError("collection_embedding needs at least 3 shapes")
    if basis is None:
        basis = mesh_basis(base, k)
    X = np.array([shape_difference_same_conn(base, N, kind, basis).matrix.ravel()
                  for N in collection])
    X = X - X.mean(axis=0)
    _, s, Vt = np.linalg.svd(X, full_matrices=False)
    axes = Vt[:2]
    for ax in axes:
        nz = np.flatnonzero(np.abs(ax) > 1e-8 * max(np.abs(ax).max(), 1e-300))
        if nz.size and ax[nz[0]] < 0:
            ax *= -1
    coords = X @ axes.T
    if coords.shape[1] < 2:
        coords = np.column_stack([coords, np.zeros(len(coords))])
    return coords
