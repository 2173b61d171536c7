"""Applications built on functional deformation operators.

* :func:`recover_field` and :func:`recover_full` rebuild a field from its operator.
* :func:`transfer` moves a deformation across a functional map.
* :func:`design` and :func:`design_joint` build fields from pointwise constraints;
  :func:`extrinsic_projection` is the coordinate-wise baseline.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from ..defbasis import vector_dirichlet
from ..errors import Infeasible
from ..operators import project_out_rigid, recovery_matrix, strain_linear_map
from .l1 import L1LSProblem, solve_l1ls


def _vec(X):
    return np.asarray(X).ravel()


# -- recovery ---------------------------------------------------------------

@dataclass
class Recovery:
    """Recovered field with its rigid part split off (Euclidean projection)."""

    field: np.ndarray
    alpha: np.ndarray
    rigid: np.ndarray
    solver: object = None


def recover_field(target, dictionary, tau=0.0, mesh=None, **solver_kw):
    """Field ``sum_i alpha_i X_i`` whose reduced operator best matches ``target``.

    Minimizes ``1/2 ||sum_i alpha_i E_i - target||_F^2 + tau ||alpha||_1``.
    Rigid motions have zero operators and are left undetermined; with
    ``mesh`` given, the rigid component of the result is reported separately.
    """
    res = solve_l1ls(L1LSProblem(dictionary.matrix(), _vec(target), tau), **solver_kw)
    V = dictionary.combine(res.alpha)
    rigid = V - project_out_rigid(mesh, V) if mesh is not None else np.zeros_like(V)
    return Recovery(V, res.alpha, rigid, res)


def recover_full(mesh, H):
    """Minimum-norm per-vertex field whose full-form operator is ``H``.

    The minimum-norm solution is orthogonal to the 6 rigid motions, so it
    equals the true field minus its rigid part when the kernel is exactly rigid.
    """
    K, edges = strain_linear_map(mesh)
    w = np.asarray(H[edges[:, 0], edges[:, 1]]).ravel()
    v = scipy.linalg.lstsq(K.toarray(), w, cond=1e-12, lapack_driver="gelsd")[0]
    return v.reshape(-1, 3)


def recover_reduced_full_basis(mesh, target, basis):
    """Minimum-norm per-vertex field matching a reduced operator in the full vertex basis."""
    Mk = recovery_matrix(mesh, basis=basis).matrix
    v = scipy.linalg.lstsq(Mk, _vec(target), cond=1e-12, lapack_driver="gelsd")[0]
    return v.reshape(-1, 3)


# -- transfer ---------------------------------------------------------------

def transfer_matrix(C, dictionary):
    """Columns ``vec(C E_i)`` for the dictionary operators ``E_i`` on the target."""
    return np.stack([_vec(C @ E) for E in dictionary.operators], axis=1)


def default_transfer_tau(Mt):
    return 1e-4 * float(scipy.linalg.svdvals(Mt)[0])


def transfer(E_U, C, dictionary, tau=None, **solver_kw):
    """Deformation on ``N`` whose operator matches ``E_U`` through ``C``.

    Minimizes ``1/2 ||E_U C - C sum_i alpha_i E_i||_F^2 + tau ||alpha||_1``.

    Parameters
    ----------
    E_U : ndarray, shape (k_M, k_M)
        Reduced operator of the source deformation on ``M``.
    C : ndarray, shape (k_M, k_N)
        Functional map taking coefficients on ``N`` to coefficients on ``M``
        (the pullback of a point map ``M -> N``).
    dictionary : Dictionary on ``N``
    tau : float, optional
        Defaults to ``1e-4`` times the largest singular value of ``alpha -> C sum alpha_i E_i``.

    Returns
    -------
    Recovery
    """
    C = np.asarray(C, dtype=float)
    Mt = transfer_matrix(C, dictionary)
    if tau is None:
        tau = default_transfer_tau(Mt)
    res = solve_l1ls(L1LSProblem(Mt, _vec(np.asarray(E_U) @ C), tau), **solver_kw)
    V = dictionary.combine(res.alpha)
    return Recovery(V, res.alpha, np.zeros_like(V), res)


# -- design -----------------------------------------------------------------

def constraint_rows(dictionary, constraints):
    """Equality rows ``A alpha = b`` for pointwise constraints ``V(v) = u``.

    Raises
    ------
    Infeasible
        If one vertex is given two different target vectors.
    """
    idx, vec = constraints
    idx = np.asarray(idx, dtype=np.int64).ravel()
    vec = np.asarray(vec, dtype=float).reshape(-1, 3)
    seen = {}
    for v, u in zip(idx, vec):
        if v < 0 or v >= dictionary.fields.shape[1]:
            raise IndexError(f"constraint vertex {v} out of range")
        if v in seen and not np.allclose(seen[v], u, rtol=0.0, atol=1e-12):
            raise Infeasible(f"conflicting constraints at vertex {v}")
        seen[v] = u
    verts = np.array(list(seen.keys()), dtype=np.int64)
    targets = np.array(list(seen.values())).reshape(-1, 3)
    A = dictionary.fields[:, verts, :].transpose(1, 2, 0).reshape(-1, len(dictionary))
    return A, targets.ravel()


def _psd_root(S):
    """``R`` with ``R^T R = S`` for a symmetric PSD ``S`` (negative roundoff clipped)."""
    w, Q = np.linalg.eigh(0.5 * (S + S.T))
    w = np.clip(w, 0.0, None)
    return np.sqrt(w)[:, None] * Q.T


def smoothness_gram(mesh, dictionary):
    """``S_ij = <U_i, Q U_j>`` with the vector Dirichlet matrix ``Q``."""
    F = dictionary.fields.reshape(len(dictionary), -1)
    return F @ (vector_dirichlet(mesh) @ F.T)


def objective_blocks(dictionary, isometric=False, symmetric=None, antisymmetric=None,
                     laplacian=None, weights=None):
    """Least-squares rows for the design penalties, as a list of (name, matrix).

    Parameters
    ----------
    symmetric, antisymmetric : ndarray (k, k), optional
        Self-map ``C_S``; penalize ``E C_S - C_S E`` or ``E C_S + C_S E``.
    laplacian : ndarray (k,), optional
        Eigenvalues; penalize ``E Lambda - Lambda E``.
    """
    weights = weights or {}
    ops = dictionary.operators
    out = []
    if isometric:
        out.append(("isometric", dictionary.matrix()))
    if symmetric is not None:
        out.append(("symmetric", np.stack([_vec(E @ symmetric - symmetric @ E) for E in ops], 1)))
    if antisymmetric is not None:
        S = antisymmetric
        out.append(("antisymmetric", np.stack([_vec(E @ S + S @ E) for E in ops], 1)))
    if laplacian is not None:
        lam = np.asarray(laplacian)
        out.append(("laplacian", np.stack([_vec(E * lam[None, :] - lam[:, None] * E)
                                           for E in ops], 1)))
    return [(name, np.sqrt(weights.get(name, 1.0)) * B) for name, B in out]


@dataclass
class Design:
    field: np.ndarray
    alpha: np.ndarray
    solver: object


def design(mesh, dictionary, constraints, isometric=True, symmetric=None, antisymmetric=None,
           laplacian=None, smoothness=0.0, tau=0.0, weights=None, **solver_kw):
    """Field in the dictionary span meeting pointwise constraints with least distortion.

    Minimizes the selected quadratic penalties (plus ``smoothness`` times the
    vector Dirichlet energy and ``tau ||alpha||_1``) subject to ``V(v_j) = u_j``.

    Raises
    ------
    Infeasible
        Conflicting constraints at one vertex.
    """
    blocks = objective_blocks(dictionary, isometric, symmetric, antisymmetric, laplacian, weights)
    if smoothness > 0:
        blocks.append(("smoothness", np.sqrt(smoothness) * _psd_root(smoothness_gram(mesh,
                                                                                   dictionary))))
    if not blocks:
        raise ValueError("design needs at least one objective term")
    M = np.vstack([B for _, B in blocks])
    A, b_eq = constraint_rows(dictionary, constraints)
    res = solve_l1ls(L1LSProblem(M, np.zeros(len(M)), tau, A, b_eq), **solver_kw)
    return Design(dictionary.combine(res.alpha), res.alpha, res)


def extrinsic_projection(V, pi, antisymmetric=False):
    """Baseline design: project each coordinate function onto (anti)symmetric functions.

    Returns ``(V + s V[pi]) / 2`` with ``s = -1`` for the antisymmetric case.
    Ignores the metric, which is what the operator-based design improves on.
    """
    V = np.asarray(V, dtype=float)
    return 0.5 * (V - V[pi]) if antisymmetric else 0.5 * (V + V[pi])


def design_joint(mesh_M, dict_M, mesh_N, dict_N, C, constraints_M=None, constraints_N=None,
                 smoothness=1e-3, tau=0.0, coupling=1.0, **solver_kw):
    """Coupled design of fields on two shapes linked by ``C`` (k_M x k_N).

    Minimizes ``coupling ||sum_i a_i E^U_i C - C sum_j b_j E^V_j||^2`` plus
    ``smoothness`` times the vector Dirichlet energies of both fields and
    ``tau (||a||_1 + ||b||_1)``, subject to the pointwise constraints on either shape.

    Returns
    -------
    (Design, Design)
        Fields on ``M`` and on ``N``; both share the same solver result.
    """
    nU, nV = len(dict_M), len(dict_N)
    C = np.asarray(C, dtype=float)
    couple = np.hstack([np.stack([_vec(E @ C) for E in dict_M.operators], 1),
                        -np.stack([_vec(C @ E) for E in dict_N.operators], 1)])
    rows = [np.sqrt(coupling) * couple]
    if smoothness > 0:
        rows.append(np.sqrt(smoothness) * scipy.linalg.block_diag(
            _psd_root(smoothness_gram(mesh_M, dict_M)), _psd_root(smoothness_gram(mesh_N, dict_N))))
    M = np.vstack(rows)
    A_parts, b_parts = [], []
    if constraints_M is not None:
        A, b = constraint_rows(dict_M, constraints_M)
        A_parts.append(np.hstack([A, np.zeros((len(A), nV))]))
        b_parts.append(b)
    if constraints_N is not None:
        A, b = constraint_rows(dict_N, constraints_N)
        A_parts.append(np.hstack([np.zeros((len(A), nU)), A]))
        b_parts.append(b)
    A_eq = np.vstack(A_parts) if A_parts else None
    b_eq = np.concatenate(b_parts) if b_parts else None
    res = solve_l1ls(L1LSProblem(M, np.zeros(len(M)), tau, A_eq, b_eq), **solver_kw)
    a, b = res.alpha[:nU], res.alpha[nU:]
    return Design(dict_M.combine(a), a, res), Design(dict_N.combine(b), b, res)
