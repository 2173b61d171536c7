"""Simplicial mesh data model.

Both mesh classes store, per simplex, the edge matrix ``E`` whose columns are
the chained edge vectors ``p_i - p_j, p_j - p_k (, p_k - p_l)``, its Gram
matrix ``G = E^T E`` and the simplex measure. Every operator in the package
works in this edge frame.
"""

import numpy as np

from .errors import DegenerateSimplex, NonManifold, ZeroNormal

_REL_AREA_TOL = 1e-14


def difference_matrix(nv):
    """Chained difference matrix ``D`` of shape (nv - 1, nv).

    Row ``r`` maps the simplex vertex values to ``f_r - f_{r+1}``.
    """
    D = np.zeros((nv - 1, nv))
    idx = np.arange(nv - 1)
    D[idx, idx] = 1.0
    D[idx, idx + 1] = -1.0
    return D


def _frozen(a, dtype):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


class _SimplicialMesh:
    simplex_size = None

    @property
    def n_vertices(self):
        return self.vertices.shape[0]

    @property
    def n_simplices(self):
        return self.simplices.shape[0]

    @property
    def D(self):
        return difference_matrix(self.simplex_size)

    @property
    def measure(self):
        """Per-simplex area (triangles) or volume (tets)."""
        raise NotImplementedError

    def bbox_diagonal(self):
        return float(np.linalg.norm(self.vertices.max(0) - self.vertices.min(0)))

    def edges(self):
        """Unique undirected edges as a sorted (m, 2) array with ``i < j``."""
        s = self.simplices
        nv = self.simplex_size
        pairs = [s[:, [a, b]] for a in range(nv) for b in range(a + 1, nv)]
        e = np.sort(np.concatenate(pairs), axis=1)
        return np.unique(e, axis=0)

    def _frame(self):
        P = self.vertices[self.simplices]              # (m, nv, 3)
        E = np.einsum("rv,mvc->mcr", self.D, P)         # (m, 3, nv-1)
        G = np.einsum("mcr,mcs->mrs", E, E)
        return E, G

    def with_vertices(self, vertices):
        """Same connectivity, new positions."""
        return type(self)(vertices, self.simplices)

    def __repr__(self):
        return (f"{type(self).__name__}(n_vertices={self.n_vertices}, "
                f"n_simplices={self.n_simplices})")


class TriMesh(_SimplicialMesh):
    """Immutable manifold triangle mesh.

    Parameters
    ----------
    vertices : array_like, shape (n, 3)
    faces : array_like of int, shape (m, 3)
        Counterclockwise with respect to the outward normal.

    Attributes
    ----------
    E : ndarray, shape (m, 3, 2)
        Edge matrices with columns ``p_i - p_j`` and ``p_j - p_k``.
    G : ndarray, shape (m, 2, 2)
        Gram matrices ``E^T E``.
    area : ndarray, shape (m,)
    face_normals : ndarray, shape (m, 3)
    is_closed : bool
        True when every edge is shared by exactly two faces.
    """

    simplex_size = 3

    def __init__(self, vertices, faces):
        self.vertices = _frozen(vertices, float)
        self.faces = _frozen(faces, np.int64)
        if self.vertices.ndim != 2 or self.vertices.shape[1] != 3:
            raise ValueError("vertices must have shape (n, 3)")
        if self.faces.ndim != 2 or self.faces.shape[1] != 3:
            raise ValueError("faces must have shape (m, 3)")
        if self.faces.size and (self.faces.min() < 0
                                or self.faces.max() >= len(self.vertices)):
            raise IndexError("face index out of range")

        self.E, self.G = (_frozen(x, float) for x in self._frame())
        cross = np.cross(self.vertices[self.faces[:, 1]] - self.vertices[self.faces[:, 0]],
                         self.vertices[self.faces[:, 2]] - self.vertices[self.faces[:, 0]])
        dbl = np.linalg.norm(cross, axis=1)
        scale = max(self.bbox_diagonal(), 1e-300) ** 2
        bad = np.flatnonzero(dbl <= _REL_AREA_TOL * scale)
        if bad.size:
            raise DegenerateSimplex(f"{bad.size} degenerate face(s), first is face {bad[0]}")
        self.area = _frozen(0.5 * np.sqrt(np.linalg.det(self.G)), float)
        self.face_normals = _frozen(cross / dbl[:, None], float)
        self.is_closed = self._check_manifold()

    @property
    def simplices(self):
        return self.faces

    @property
    def measure(self):
        return self.area

    def _check_manifold(self):
        f = self.faces
        directed = np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]])
        _, dcount = np.unique(directed, axis=0, return_counts=True)
        if np.any(dcount > 1):
            raise NonManifold("an oriented edge is used twice "
                              "(non-manifold or inconsistent orientation)")
        _, ucount = np.unique(np.sort(directed, axis=1), axis=0, return_counts=True)
        if np.any(ucount > 2):
            raise NonManifold("an edge is shared by more than two faces")
        return bool(np.all(ucount == 2))

    def enclosed_volume(self):
        """Signed volume enclosed by the surface, positive for outward orientation."""
        p = self.vertices[self.faces]
        return float(np.einsum("mi,mi->", p[:, 0], np.cross(p[:, 1], p[:, 2])) / 6.0)


class TetMesh(_SimplicialMesh):
    """Immutable tetrahedral mesh.

    Tets with negative orientation are fixed at construction by swapping
    their last two vertices, so that ``det[p_j-p_i, p_k-p_i, p_l-p_i] > 0``.

    Attributes
    ----------
    E : ndarray, shape (m, 3, 3)
    G : ndarray, shape (m, 3, 3)
    volume : ndarray, shape (m,)
    """

    simplex_size = 4

    def __init__(self, vertices, tets):
        vertices = np.asarray(vertices, dtype=float)
        tets = np.array(tets, dtype=np.int64, copy=True)
        if vertices.ndim != 2 or vertices.shape[1] != 3:
            raise ValueError("vertices must have shape (n, 3)")
        if tets.ndim != 2 or tets.shape[1] != 4:
            raise ValueError("tets must have shape (m, 4)")
        if tets.size and (tets.min() < 0 or tets.max() >= len(vertices)):
            raise IndexError("tet index out of range")
        P = vertices[tets]
        signed = np.linalg.det(P[:, 1:] - P[:, :1]) / 6.0
        flip = signed < 0
        tets[flip] = tets[flip][:, [0, 1, 3, 2]]
        self.vertices = _frozen(vertices, float)
        self.tets = _frozen(tets, np.int64)

        vol = np.abs(signed)
        scale = max(self.bbox_diagonal(), 1e-300) ** 3
        bad = np.flatnonzero(vol <= _REL_AREA_TOL * scale)
        if bad.size:
            raise DegenerateSimplex(f"{bad.size} degenerate tet(s), first is tet {bad[0]}")
        self.E, self.G = (_frozen(x, float) for x in self._frame())
        self.volume = _frozen(vol, float)

    @property
    def simplices(self):
        return self.tets

    @property
    def measure(self):
        return self.volume


def face_frame(mesh, face):
    """Edge matrix, Gram matrix and area of one face.

    Returns
    -------
    E : ndarray, shape (3, 2)
    G : ndarray, shape (2, 2)
    area : float
    """
    return mesh.E[face].copy(), mesh.G[face].copy(), float(mesh.area[face])


def vertex_normals(mesh):
    """Area-weighted unit vertex normals, shape (n, 3).

    Raises
    ------
    ZeroNormal
        If the weighted sum of incident face normals vanishes at a vertex.
    """
    weighted = mesh.face_normals * mesh.area[:, None]
    acc = np.zeros_like(mesh.vertices)
    for c in range(3):
        np.add.at(acc, mesh.faces[:, c], weighted)
    norm = np.linalg.norm(acc, axis=1)
    scale = mesh.area.max()
    bad = np.flatnonzero(norm <= 1e-12 * scale)
    if bad.size:
        raise ZeroNormal(f"vertex normal vanishes at vertex {bad[0]}")
    return acc / norm[:, None]


def check_field(mesh, V):
    """Validate a per-vertex 3-vector field against ``mesh`` and return it as an array."""
    V = np.asarray(V, dtype=float)
    if V.shape != (mesh.n_vertices, 3):
        raise ValueError(f"field shape {V.shape} does not match mesh with "
                         f"{mesh.n_vertices} vertices")
    if not np.all(np.isfinite(V)):
        raise ValueError("field has non-finite entries")
    return V
