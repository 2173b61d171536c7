"""Over-complete dictionaries of deformation fields.

Three families are available:

* spectral: ``phi_j * e_axis`` for the first Laplace-Beltrami eigenfunctions;
* modal: lowest eigenvectors of the Dirichlet energy of the ambient Jacobian,
  ``V -> sum_T Tr(G^-1 J^T J) mu(T)``;
* handle: compactly supported Wendland bumps around farthest-point seeds,
  times the coordinate axes (and optionally local rotations).

Field arrays have shape (count, n, 3); reduced operators (count, k, k).
"""

import json
import os
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from scipy import sparse

from .fem import build_mass, build_stiffness
from .io import load_field, load_matrix, save_field, save_matrix
from .operators import H_from_edge_weights, reduce, strain_linear_map

FAMILIES = ("spectral", "modal", "handle")


def spectral_family(basis, m):
    """``3m`` fields ``phi_j e_axis``, ordered by ``(j, axis)``."""
    if not 0 <= m <= basis.k:
        raise ValueError(f"m={m} exceeds the basis size {basis.k}")
    n = basis.evecs.shape[0]
    F = np.zeros((m, 3, n, 3))
    for a in range(3):
        F[:, a, :, a] = basis.evecs[:, :m].T
    return F.reshape(3 * m, n, 3)


def vector_dirichlet(mesh):
    """The 3n x 3n matrix ``Q`` with ``V^T Q V = sum_T Tr(G^-1 J^T J) mu(T)``.

    Index ``3*v + axis``. The energy splits over coordinates, so ``Q = W (x) I_3``.
    """
    return sparse.kron(build_stiffness(mesh), sparse.identity(3), format="csr")


def modal_family(mesh, m):
    """Lowest ``m`` eigenvectors of ``Q`` mass-orthonormalized with ``A (x) I_3``.

    Because ``Q = W (x) I_3``, eigenvalues come in triples; within a triple the
    axis-aligned vectors are returned, ordered by axis.
    """
    n = mesh.n_vertices
    if not 0 <= m <= 3 * n:
        raise ValueError(f"m={m} must be in [0, {3 * n}]")
    if m == 0:
        return np.zeros((0, n, 3))
    W = build_stiffness(mesh).toarray()
    mass = build_mass(mesh).diagonal()
    j = -(-m // 3)
    evals, evecs = scipy.linalg.eigh(W, np.diag(mass), subset_by_index=[0, j - 1])
    evecs[:, 0] = 1.0 / np.sqrt(mass.sum())
    for c in range(evecs.shape[1]):
        nz = np.flatnonzero(np.abs(evecs[:, c]) > 1e-8 * np.abs(evecs[:, c]).max())
        if evecs[nz[0], c] < 0:
            evecs[:, c] *= -1
    F = np.zeros((j, 3, n, 3))
    for a in range(3):
        F[:, a, :, a] = evecs.T
    return F.reshape(3 * j, n, 3)[:m]


def farthest_point_seeds(points, h, start=0):
    """Greedy farthest-point sampling; the first seed is ``start``, ties go to the lowest index."""
    points = np.asarray(points, dtype=float)
    seeds = [start]
    d = np.linalg.norm(points - points[start], axis=1)
    for _ in range(h - 1):
        nxt = int(np.argmax(d))
        seeds.append(nxt)
        d = np.minimum(d, np.linalg.norm(points - points[nxt], axis=1))
    return np.array(seeds, dtype=np.int64)


def wendland(d, rho):
    """``(1 - r)^4 (4r + 1)`` for ``r = d / rho < 1``, zero beyond; C^2 at the support edge."""
    r = np.asarray(d, dtype=float) / rho
    return np.where(r < 1.0, (1.0 - r) ** 4 * (4.0 * r + 1.0), 0.0)


def handle_radius(points, seeds):
    """1.5 times the mean distance from each seed to its nearest other seed.

    With a single seed there is no spacing; the bounding-box diagonal is used.
    """
    P = points[seeds]
    if len(seeds) == 1:
        return float(np.linalg.norm(points.max(0) - points.min(0)))
    d = np.linalg.norm(P[:, None] - P[None], axis=2)
    np.fill_diagonal(d, np.inf)
    return 1.5 * float(d.min(axis=1).mean())


def handle_family(mesh, h, rotations=False):
    """Handle fields: ``3h`` translations ``w e_axis``, then ``3h`` rotations if requested.

    Returns
    -------
    fields : ndarray, shape (3h or 6h, n, 3)
        Translational fields ordered by ``(seed, axis)``, followed by
        ``w * (e_axis x (p - seed))`` in the same order.
    """
    if h < 1:
        raise ValueError("handle count must be at least 1")
    p = np.asarray(mesh.vertices)
    seeds = farthest_point_seeds(p, h)
    rho = handle_radius(p, seeds)
    out = []
    weights = [wendland(np.linalg.norm(p - p[s], axis=1), rho) for s in seeds]
    for w in weights:
        for a in range(3):
            F = np.zeros_like(p)
            F[:, a] = w
            out.append(F)
    if rotations:
        for s, w in zip(seeds, weights):
            for a in range(3):
                axis = np.zeros(3)
                axis[a] = 1.0
                out.append(w[:, None] * np.cross(axis, p - p[s]))
    return np.array(out)


def reduced_operators(mesh, fields, basis):
    """Reduced operators of many fields, shape (count, k, k)."""
    K, edges = strain_linear_map(mesh)
    F = np.asarray(fields, dtype=float).reshape(len(fields), -1)
    weights = np.asarray(K @ F.T).T if len(F) else np.zeros((0, len(edges)))
    k = basis.k
    ops = np.empty((len(F), k, k))
    for i, w in enumerate(weights):
        ops[i] = reduce(H_from_edge_weights(mesh, w, edges), basis)
    return ops


@dataclass
class Dictionary:
    """Indexed deformation fields with their reduced operators.

    Attributes
    ----------
    fields : ndarray, shape (count, n, 3)
    operators : ndarray, shape (count, k, k)
    families : list of str
        Family tag of each field.
    counts : dict
        Number of fields per family.
    params : dict
        Construction parameters (handle count, rotation flag, basis size).
    """

    fields: np.ndarray
    operators: np.ndarray
    families: list
    counts: dict
    params: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.fields)

    @property
    def k(self):
        return self.operators.shape[1]

    def matrix(self):
        """Recovery matrix: column ``i`` is the row-major ``vec`` of operator ``i``."""
        return self.operators.reshape(len(self), -1).T

    def combine(self, alpha):
        """Field ``sum_i alpha_i X_i``."""
        return np.tensordot(np.asarray(alpha, dtype=float), self.fields, axes=1)

    def operator(self, alpha):
        return np.tensordot(np.asarray(alpha, dtype=float), self.operators, axes=1)

    def save(self, directory):
        """Write ``manifest.json``, ``field_XXXX.txt`` and binary ``operator_XXXX.bin``."""
        os.makedirs(directory, exist_ok=True)
        names = []
        for i, (F, E) in enumerate(zip(self.fields, self.operators)):
            fname, oname = f"field_{i:04d}.txt", f"operator_{i:04d}.bin"
            save_field(os.path.join(directory, fname), F)
            save_matrix(os.path.join(directory, oname), E, binary=True)
            names.append({"family": self.families[i], "field": fname, "operator": oname})
        manifest = {"counts": self.counts, "params": self.params, "k": self.k,
                    "n_vertices": int(self.fields.shape[1]), "fields": names}
        with open(os.path.join(directory, "manifest.json"), "w") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, directory):
        with open(os.path.join(directory, "manifest.json")) as fh:
            manifest = json.load(fh)
        entries = manifest["fields"]
        n, k = manifest["n_vertices"], manifest["k"]
        fields = np.array([load_field(os.path.join(directory, e["field"]))
                           for e in entries]).reshape(len(entries), n, 3)
        ops = np.array([load_matrix(os.path.join(directory, e["operator"]))
                        for e in entries]).reshape(len(entries), k, k)
        return cls(fields, ops, [e["family"] for e in entries], manifest["counts"],
                   manifest["params"])


def build_dictionary(mesh, basis, counts=(180, 180, 180), handle_rotations=False):
    """Concatenate the spectral, modal and handle families and reduce their operators.

    Parameters
    ----------
    counts : (int, int, int)
        Number of fields per family. Spectral and handle counts must be
        multiples of 3 (6 for handles with rotations).
    """
    n_spec, n_modal, n_handle = (int(c) for c in counts)
    per_handle = 6 if handle_rotations else 3
    if n_spec % 3 or n_handle % per_handle or min(counts) < 0:
        raise ValueError(f"spectral count must be a multiple of 3 and handle count a "
                         f"multiple of {per_handle}, got {tuple(counts)}")
    parts, tags = [], []
    if n_spec:
        parts.append(spectral_family(basis, n_spec // 3))
        tags += ["spectral"] * n_spec
    if n_modal:
        parts.append(modal_family(mesh, n_modal))
        tags += ["modal"] * n_modal
    if n_handle:
        parts.append(handle_family(mesh, n_handle // per_handle, handle_rotations))
        tags += ["handle"] * n_handle
    n = mesh.n_vertices
    fields = np.concatenate(parts) if parts else np.zeros((0, n, 3))
    ops = reduced_operators(mesh, fields, basis)
    counts = {"spectral": n_spec, "modal": n_modal, "handle": n_handle}
    params = {"k": basis.k, "handle_rotations": bool(handle_rotations),
              "handles": n_handle // per_handle}
    return Dictionary(fields, ops, tags, counts, params)
