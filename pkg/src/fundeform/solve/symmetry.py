"""Intrinsic symmetrization.

Given a self-map ``pi``, deform the shape until ``pi`` becomes an isometry,
measured by the unified shape difference ``D_pi = Lambda^+ C^-1 Lambda C``
of its functional map ``C``. Each iteration solves a linear least-squares
problem over a deformation dictionary built on the current shape and moves
the vertices along the resulting field.

Three first-order models of the change of ``D_pi`` are available:

* ``"unified"``: ``D C^-1 E C - E`` with the unified operators ``E``;
* ``"consistent"``: ``D C^-1 F C - F D`` with the conformal operators ``F``,
  the exact derivative of ``W^+ P^-1 W P`` in the full vertex basis;
* ``"exact"``: the derivative of the reduced ``D_pi`` itself, including the
  motion of the truncated eigenbasis (first-order eigen-perturbation).
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from ..defbasis import build_dictionary
from ..errors import DegenerateSimplex, DegenerateStep
from ..fem import ReducedBasis, build_mass, build_stiffness, mesh_basis
from ..mesh import TetMesh
from ..operators import assemble_E, reduce
from ..shapediff import area_rate, divergence_stiffness, shape_difference_fmap
from .fmaps import fmap_from_pointmap

LINEARIZATIONS = ("exact", "consistent", "unified")


@dataclass
class SymmetrizationState:
    """Progress of :func:`symmetrize`.

    ``energy[t]`` is ``||D_pi - I||_F`` at the positions after ``t`` steps;
    ``field_norms[t]`` the largest vertex displacement of the field solved
    at step ``t + 1`` and ``steps[t]`` the step size applied to it.
    ``stalled`` is set when no step size reduced the energy.
    """

    vertices: np.ndarray
    C_pi: np.ndarray = None
    D_pi: np.ndarray = None
    iterations: int = 0
    energy: list = field(default_factory=list)
    field_norms: list = field(default_factory=list)
    steps: list = field(default_factory=list)
    converged: bool = False
    stalled: bool = False


def symmetry_difference(mesh, pi, basis):
    """``(C_pi, D_pi)``: self functional map of ``pi`` and its unified shape difference."""
    C = fmap_from_pointmap(pi, basis, basis)
    D = shape_difference_fmap(basis, basis, C, "unified").matrix
    return C, D


def reduced_conformal_operators(mesh, dictionary, basis):
    """Reduced conformal derivative operators of the dictionary fields."""
    return np.array([E + reduce(divergence_stiffness(mesh, X), basis)
                     for X, E in zip(dictionary.fields, dictionary.operators)])


def _full_basis(mesh, k):
    """All generalized eigenpairs (dense); the first one is the exact constant."""
    W = build_stiffness(mesh).toarray()
    mass = build_mass(mesh).diagonal()
    evals, evecs = scipy.linalg.eigh(W, np.diag(mass))
    evecs[:, 0] = 1.0 / np.sqrt(mass.sum())
    evals[0] = 0.0
    return ReducedBasis(np.maximum(evals, 0.0), evecs, mass)


def difference_jacobian(mesh, pi, dictionary, k):
    """Derivatives of the reduced ``D_pi`` along each dictionary field.

    Uses the first ``k`` vectors of a full dense eigendecomposition of the
    current shape; ``||D_pi - I||_F`` does not depend on the choice of
    vectors inside an eigenspace, so pairs with equal eigenvalues are skipped.

    Returns
    -------
    D : ndarray, shape (k, k)
        ``D_pi`` in that basis.
    J : ndarray, shape (count, k, k)
    """
    full = _full_basis(mesh, k)
    Phi_all, lam_all, a = full.evecs, full.evals, full.mass
    basis = ReducedBasis(lam_all[:k], Phi_all[:, :k], a)
    Phi, lam = basis.evecs, basis.evals
    lam_pinv = basis.evals_pinv
    C, D = symmetry_difference(mesh, pi, basis)
    Cinv = np.linalg.inv(C)
    gap = lam[None, :] - lam_all[:, None]                       # lambda_j - lambda_i
    tol = 1e-8 * max(float(lam_all.max()), 1.0)
    inv_gap = np.where(np.abs(gap) > tol, 1.0 / np.where(gap == 0, 1.0, gap), 0.0)
    Phi_pi = Phi[pi]
    J = np.empty((len(dictionary), k, k))
    for f, X in enumerate(dictionary.fields):
        HC = assemble_E(mesh, X) + divergence_stiffness(mesh, X)
        da = area_rate(mesh, X)
        Mx = HC @ Phi - (da[:, None] * Phi) * lam[None, :]
        Q = Phi_all.T @ Mx                                       # phi_i^T (dW - lam_j dA) phi_j
        dlam = np.diag(Q[:k]).copy()
        coef = Q * inv_gap
        coef[np.arange(k), np.arange(k)] = -0.5 * np.einsum("v,vj,vj->j", da, Phi, Phi)
        dPhi = Phi_all @ coef
        dC = dPhi.T @ (a[:, None] * Phi_pi) + Phi.T @ (da[:, None] * Phi_pi) \
            + Phi.T @ (a[:, None] * dPhi[pi])
        dlam_pinv = -lam_pinv ** 2 * dlam
        LC = lam[:, None] * C
        dD = dlam_pinv[:, None] * (Cinv @ LC) \
            - lam_pinv[:, None] * (Cinv @ dC @ Cinv @ LC) \
            + lam_pinv[:, None] * (Cinv @ (dlam[:, None] * C)) \
            + lam_pinv[:, None] * (Cinv @ (lam[:, None] * dC))
        dD[0, :] = 0.0
        dD[:, 0] = 0.0
        J[f] = dD
    return D, J


def symmetrization_step(D, C, dictionary, tau_reg, model="unified", derivs=None):
    """Coefficients of the linearized symmetrization problem (minimum-norm least squares).

    Minimizes ``||D - I + L(alpha)||_F^2 + tau_reg ||sum_i alpha_i E_i||_F^2``
    where ``L`` is the first-order change of ``D`` under the chosen model and
    ``E_i`` are the unified dictionary operators. For ``"unified"`` this is
    ``||D C^-1 E C - E - I + D||^2 + tau ||E||^2`` with ``E = sum alpha_i E_i``.

    Parameters
    ----------
    derivs : ndarray, shape (count, k, k)
        Conformal operators (``"consistent"``) or Jacobian of ``D`` (``"exact"``).
    """
    k = D.shape[0]
    if model == "unified":
        left = D @ np.linalg.inv(C)
        cols = np.stack([(left @ E @ C - E).ravel() for E in dictionary.operators], 1)
    elif model == "consistent":
        left = D @ np.linalg.inv(C)
        cols = np.stack([(left @ F @ C - F @ D).ravel() for F in derivs], 1)
    elif model == "exact":
        cols = derivs.reshape(len(derivs), -1).T
    else:
        raise ValueError(f"unknown linearization {model!r}")
    target = (np.eye(k) - D).ravel()
    if tau_reg > 0:
        cols = np.vstack([cols, np.sqrt(tau_reg) * dictionary.matrix()])
        target = np.concatenate([target, np.zeros(k * k)])
    return scipy.linalg.lstsq(cols, target, cond=1e-12, lapack_driver="gelsd")[0]


def _inverts(mesh, vertices):
    """True if moving to ``vertices`` flips a face normal or a tet orientation."""
    if isinstance(mesh, TetMesh):
        P = np.asarray(vertices)[mesh.tets]
        return bool(np.any(np.linalg.det(P[:, 1:] - P[:, :1]) <= 0.0))
    try:
        new = mesh.with_vertices(vertices)
    except DegenerateSimplex:
        return True
    return bool(np.any(np.einsum("ij,ij->i", new.face_normals, mesh.face_normals) <= 0.0))


def _energy(mesh, pi, k):
    basis = mesh_basis(mesh, k)
    C, D = symmetry_difference(mesh, pi, basis)
    return C, D, float(np.linalg.norm(D - np.eye(k)))


def symmetrize(mesh, pi, k=30, counts=(60, 0, 60), tau_reg=1e-3, iters=10, eps=1e-4,
               max_step=0.05, linearization="exact", line_search=True, max_halvings=10):
    """Intrinsic symmetrization of ``mesh`` with respect to the self-map ``pi``.

    Each outer iteration rebuilds the basis, ``C_pi``, ``D_pi`` and the
    dictionary on the current shape, solves the linearized problem and moves
    the vertices. Stops when the field is below ``eps`` times the
    bounding-box diagonal.

    Parameters
    ----------
    pi : array_like of int
        ``pi[v]`` is the image of vertex ``v``.
    max_step : float or None
        Largest vertex displacement per step, as a fraction of the bounding-box
        diagonal; longer fields are scaled down.
    linearization : {"exact", "consistent", "unified"}
        First-order model of ``D_pi``, see the module docstring. ``"exact"``
        needs a dense eigendecomposition of the whole mesh.
    line_search : bool
        Halve the step until ``||D_pi - I||_F`` decreases; when no step size
        helps the iteration stops with ``stalled`` set.

    Raises
    ------
    DegenerateStep
        A step still inverts faces after ``max_halvings`` halvings; the state
        reached so far is attached as ``.state``.
    """
    if linearization not in LINEARIZATIONS:
        raise ValueError(f"unknown linearization {linearization!r}")
    pi = np.asarray(pi, dtype=np.int64)
    state = SymmetrizationState(np.array(mesh.vertices))
    cur = mesh
    diag = mesh.bbox_diagonal()
    C, D, e = _energy(cur, pi, k)
    state.C_pi, state.D_pi = C, D
    state.energy.append(e)
    for it in range(iters):
        basis = mesh_basis(cur, k)
        dictionary = build_dictionary(cur, basis, counts)
        derivs = None
        Dm, Cm = D, C
        if linearization == "consistent":
            derivs = reduced_conformal_operators(cur, dictionary, basis)
        elif linearization == "exact":
            Dm, derivs = difference_jacobian(cur, pi, dictionary, k)
        V = dictionary.combine(symmetrization_step(Dm, Cm, dictionary, tau_reg, linearization,
                                                   derivs))
        size = float(np.linalg.norm(V, axis=1).max()) if len(V) else 0.0
        state.field_norms.append(size)
        if size < eps * diag:
            state.converged = True
            break
        step = 1.0
        if max_step is not None and size > max_step * diag:
            step = max_step * diag / size
        for _ in range(max_halvings + 1):
            if not _inverts(cur, cur.vertices + step * V):
                break
            step *= 0.5
        else:
            raise DegenerateStep(f"step {it + 1} inverts faces after {max_halvings} halvings",
                                 state=state)
        for _ in range(max_halvings + 1):
            trial = cur.with_vertices(cur.vertices + step * V)
            t_C, t_D, t_e = _energy(trial, pi, k)
            if not line_search or t_e < state.energy[-1]:
                break
            step *= 0.5
        else:
            state.stalled = True
            break
        cur, C, D = trial, t_C, t_D
        state.C_pi, state.D_pi = C, D
        state.energy.append(t_e)
        state.steps.append(step)
        state.vertices = np.array(cur.vertices)
        state.iterations = it + 1
    return state
