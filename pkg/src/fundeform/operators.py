"""Functional representation of extrinsic deformation fields.

For a vertex field ``V`` on a triangle or tet mesh, the operator ``E^V`` is
stored in two forms:

* the full form ``H``, a sparse symmetric Laplacian-type matrix with
  ``f^T W E^V g = f^T H g``, assembled from per-simplex blocks
  ``-mu(T) B^T S_T B`` where ``S_T`` is the strain form in the edge frame and
  ``B = G^{-1} D`` maps vertex values to edge-frame gradient coordinates;
* the reduced form ``Lambda^+ Phi^T H Phi`` (k x k) in a Laplace-Beltrami basis.

``H`` is linear in ``V`` and vanishes on infinitesimal rigid motions.
"""

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.linalg
from scipy import sparse

from .fem import _assemble_local_offdiag, _assemble_offdiag
from .mesh import TriMesh, check_field, vertex_normals


def ambient_jacobian(mesh, V):
    """Per-simplex matrix of vertex-value differences along the edge frame.

    Returns an array of shape (m, 3, d) with columns ``V_i - V_j, V_j - V_k``
    (and ``V_k - V_l`` on tets), ``d = 2`` or ``3``.
    """
    V = check_field(mesh, V)
    return np.einsum("ra,mac->mcr", mesh.D, V[mesh.simplices])


def strain_form(mesh, V):
    """Strain form ``S = E^T J + J^T E`` per simplex, shape (m, d, d).

    For tangent vectors ``x = E a`` and ``y = E b`` the Lie derivative of the
    metric is ``a^T S b``.
    """
    J = ambient_jacobian(mesh, V)
    X = np.einsum("mcr,mcs->mrs", mesh.E, J)
    return X + X.transpose(0, 2, 1)


def local_blocks(mesh, S):
    """Local ``-mu B^T S B`` blocks, shape (m, nv, nv), exactly symmetric."""
    B = np.linalg.solve(mesh.G, np.broadcast_to(mesh.D, (mesh.n_simplices,) + mesh.D.shape))
    L = -mesh.measure[:, None, None] * np.einsum("mra,mrs,msb->mab", B, S, B)
    return 0.5 * (L + L.transpose(0, 2, 1))


def assemble_E(mesh, V):
    """Full form ``H`` of the functional deformation field of ``V`` (sparse CSR)."""
    return _assemble_local_offdiag(mesh, local_blocks(mesh, strain_form(mesh, V)))


def assemble_E_normal(mesh):
    """Full form of the operator of the (outward, area-weighted) vertex normal field."""
    if not isinstance(mesh, TriMesh):
        raise TypeError("the normal-field operator is defined on triangle meshes")
    n = vertex_normals(mesh)
    if mesh.is_closed and mesh.enclosed_volume() < 0:
        n = -n
    return assemble_E(mesh, n)


def reduce(H, basis):
    """Reduced operator ``Lambda^+ Phi^T H Phi``; the constant row is zero."""
    Phi = basis.evecs
    return basis.evals_pinv[:, None] * (Phi.T @ (H @ Phi))


def reduced_E(mesh, V, basis):
    return reduce(assemble_E(mesh, V), basis)


def curvature_eigenfunctions(Hn, basis, m):
    """Eigenpairs of the reduced normal-field operator with the largest magnitude.

    Solves the symmetric pencil ``(Phi^T H Phi) c = lambda Lambda c`` on the
    non-constant modes, whose eigenvalues are those of the reduced operator.

    Returns
    -------
    values : ndarray, shape (m,)
        Sorted by decreasing magnitude.
    coeffs : ndarray, shape (k, m)
        Reduced coefficients (constant coefficient zero).
    functions : ndarray, shape (n, m)
        ``Phi @ coeffs``.
    """
    Phi = basis.evecs
    R = Phi.T @ (Hn @ Phi)
    R = 0.5 * (R + R.T)
    nz = basis.evals_pinv > 0
    vals, vecs = scipy.linalg.eigh(R[np.ix_(nz, nz)], np.diag(basis.evals[nz]))
    order = np.argsort(-np.abs(vals), kind="stable")[:m]
    coeffs = np.zeros((basis.k, len(order)))
    coeffs[nz] = vecs[:, order]
    coeffs /= np.linalg.norm(coeffs, axis=0)
    return vals[order], coeffs, Phi @ coeffs


# -- linear structure -------------------------------------------------------

def _edge_lookup(mesh):
    edges = mesh.edges()
    n = mesh.n_vertices
    keys = edges[:, 0] * n + edges[:, 1]
    return edges, keys


def strain_linear_map(mesh):
    """Sparse map from ``V.ravel()`` (index ``3*v + axis``) to the edge weights of ``H``.

    Row ``e`` gives the off-diagonal entry ``H[i, j]`` for ``edges[e] = (i, j)``;
    the diagonal is minus the row sums. Returns ``(K, edges)``.
    """
    s = mesh.simplices
    nv = mesh.simplex_size
    D = mesh.D
    B = np.linalg.solve(mesh.G, np.broadcast_to(D, (mesh.n_simplices,) + D.shape))
    U = np.einsum("mrp,mar->map", B, mesh.E)    # axis a -> B^T E[a, :]
    Wv = np.einsum("mrp,rv->mvp", B, D)          # vertex v -> B^T D[:, v]
    p, q = np.triu_indices(nv, 1)
    mu = mesh.measure
    # contribution of unit field (v, a) to local entry (p, q)
    C = -mu[:, None, None, None] * (U[:, None, :, p] * Wv[:, :, None, q]
                                    + Wv[:, :, None, p] * U[:, None, :, q])  # (m, v, a, pair)
    edges, keys = _edge_lookup(mesh)
    n = mesh.n_vertices
    vi, vj = s[:, p], s[:, q]
    ekey = np.minimum(vi, vj) * n + np.maximum(vi, vj)
    eidx = np.searchsorted(keys, ekey)                       # (m, pair)
    rows = np.broadcast_to(eidx[:, None, None, :], C.shape)
    cols = np.broadcast_to((3 * s[:, :, None] + np.arange(3))[:, :, :, None], C.shape)
    K = sparse.coo_matrix((C.ravel(), (rows.ravel(), cols.ravel())),
                          shape=(len(edges), 3 * n)).tocsr()
    return K, edges


def H_from_edge_weights(mesh, w, edges=None):
    if edges is None:
        edges = mesh.edges()
    return _assemble_offdiag(mesh.n_vertices, edges[:, 0], edges[:, 1], w)


def rigid_fields(mesh):
    """Orthonormal basis (columns) of the 6 infinitesimal rigid motions, shape (3n, 6)."""
    p = mesh.vertices - mesh.vertices.mean(0)
    cols = []
    for a in range(3):
        t = np.zeros_like(p)
        t[:, a] = 1.0
        cols.append(t.ravel())
    for a in range(3):
        w = np.zeros(3)
        w[a] = 1.0
        cols.append(np.cross(w, p).ravel())
    Q, _ = np.linalg.qr(np.column_stack(cols))
    return Q


def project_out_rigid(mesh, V):
    """Remove the infinitesimal rigid component (Euclidean projection over vertices)."""
    V = np.asarray(V, dtype=float)
    Q = rigid_fields(mesh)
    v = V.ravel()
    return (v - Q @ (Q.T @ v)).reshape(V.shape)


@dataclass
class RecoveryMap:
    """Linear map from field coefficients to vectorized operators.

    ``matrix[:, i]`` is the vectorized operator of the i-th field: the
    row-major reduced k x k matrix when built with a basis, or the edge
    weights of ``H`` in full form.
    """

    matrix: np.ndarray

    @cached_property
    def singular_values(self):
        """Descending, one per column: wide matrices are padded with zeros."""
        s = scipy.linalg.svdvals(self.matrix)
        return np.concatenate([s, np.zeros(max(self.matrix.shape[1] - len(s), 0))])

    def kernel_dim(self, rel_tol=1e-9):
        s = self.singular_values
        return int(np.sum(s <= rel_tol * s[0]))

    def condition(self, skip=6):
        """``sigma_max / sigma_{skip+1}`` (skip the rigid kernel)."""
        s = np.sort(self.singular_values)
        return float(s[-1] / s[skip])


def reduced_edge_map(mesh, basis, edges=None):
    """Dense map from edge weights of ``H`` to the row-major reduced operator.

    Uses ``f^T H g = -sum_e w_e (f_i - f_j)(g_i - g_j)``, so entry ``(a, b)``
    of ``Phi^T H Phi`` is ``-sum_e w_e d_e[a] d_e[b]`` with ``d_e = Phi_i - Phi_j``.
    """
    if edges is None:
        edges = mesh.edges()
    d = basis.evecs[edges[:, 0]] - basis.evecs[edges[:, 1]]
    P = -np.einsum("ea,eb->abe", d, d) * basis.evals_pinv[:, None, None]
    return P.reshape(basis.k * basis.k, len(edges))


def recovery_matrix(mesh, fields=None, basis=None):
    """Matrix whose column ``i`` is the vectorized operator of field ``i``.

    Parameters
    ----------
    fields : array_like, shape (f, n, 3), optional
        Defaults to the full per-vertex basis (``3n`` unit fields, index ``3*v + axis``).
    basis : ReducedBasis, optional
        Reduced operators when given, full-form edge weights otherwise.
    """
    K, edges = strain_linear_map(mesh)
    if fields is None:
        KF = K.toarray()
    else:
        F = np.asarray(fields, dtype=float).reshape(len(fields), -1)
        KF = np.asarray(K @ F.T)
    if basis is None:
        return RecoveryMap(KF)
    return RecoveryMap(reduced_edge_map(mesh, basis, edges) @ KF)
