"""Procedural test and demo meshes.

Every generator is deterministic; random ones take an explicit ``seed``.
"""

import numpy as np
from scipy.spatial import ConvexHull

from .mesh import TetMesh, TriMesh


def _orient_outward(vertices, faces, center=None):
    """Flip faces of a star-shaped surface so normals point away from ``center``."""
    if center is None:
        center = vertices.mean(0)
    p = vertices[faces]
    n = np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])
    out = np.einsum("ij,ij->i", n, p.mean(1) - center) < 0
    faces = faces.copy()
    faces[out] = faces[out][:, [0, 2, 1]]
    return faces


def _dedupe(points, tris, decimals=9):
    key = np.round(points, decimals) + 0.0
    uniq, first, inv = np.unique(key, axis=0, return_index=True, return_inverse=True)
    return points[first], inv.ravel()[tris]


def icosahedron(radius=1.0):
    t = (1.0 + np.sqrt(5.0)) / 2.0
    v = np.array([[-1, t, 0], [1, t, 0], [-1, -t, 0], [1, -t, 0],
                  [0, -1, t], [0, 1, t], [0, -1, -t], [0, 1, -t],
                  [t, 0, -1], [t, 0, 1], [-t, 0, -1], [-t, 0, 1]], dtype=float)
    f = np.array([[0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
                  [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
                  [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
                  [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1]])
    v *= radius / np.linalg.norm(v[0])
    return TriMesh(v, f)


def icosphere(subdivisions=3, radius=1.0):
    """Loop-style midpoint subdivision of the icosahedron, projected to the sphere.

    ``10 * 4**s + 2`` vertices: 162 for s=2, 642 for s=3.
    """
    base = icosahedron(1.0)
    verts = [tuple(v) for v in base.vertices]
    faces = base.faces.tolist()
    for _ in range(subdivisions):
        cache = {}
        new_faces = []

        def mid(a, b):
            key = (min(a, b), max(a, b))
            if key not in cache:
                m = (np.array(verts[a]) + np.array(verts[b])) / 2.0
                verts.append(tuple(m / np.linalg.norm(m)))
                cache[key] = len(verts) - 1
            return cache[key]

        for a, b, c in faces:
            ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
            new_faces += [[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]
        faces = new_faces
    return TriMesh(np.array(verts) * radius, np.array(faces))


def random_sphere(n, seed=0, noise=0.0, jitter=0.2):
    """Closed triangle mesh with ``n`` random vertices on a bumpy sphere.

    Directions are a Fibonacci lattice randomly jittered by ``jitter`` times
    the lattice spacing, which keeps triangles well shaped. The connectivity
    is their convex hull, then each radius is perturbed by ``noise * U(-1, 1)``.
    """
    rng = np.random.default_rng(seed)
    i = np.arange(n) + 0.5
    polar = np.arccos(1.0 - 2.0 * i / n)
    azim = np.pi * (1.0 + np.sqrt(5.0)) * i
    d = np.column_stack([np.cos(azim) * np.sin(polar), np.sin(azim) * np.sin(polar),
                         np.cos(polar)])
    d += jitter * rng.normal(size=d.shape) * np.sqrt(4.0 * np.pi / n)
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    hull = ConvexHull(d)
    faces = _orient_outward(d, hull.simplices.astype(np.int64), np.zeros(3))
    r = 1.0 + noise * rng.uniform(-1.0, 1.0, size=n)
    return TriMesh(d * r[:, None], faces)


def sphere_to_cube(mesh, s):
    """Blend each vertex between its position and its radial projection on the cube."""
    p = np.asarray(mesh.vertices)
    inf = np.max(np.abs(p), axis=1, keepdims=True)
    inf[inf == 0] = 1.0
    norm = np.linalg.norm(p, axis=1, keepdims=True)
    return mesh.with_vertices((1.0 - s) * p + s * p * norm / inf)


def tet_ball(surface):
    """Cone every surface triangle to the origin, giving a tet mesh with n+1 vertices."""
    v = np.vstack([surface.vertices, np.zeros((1, 3))])
    c = len(surface.vertices)
    tets = np.column_stack([np.full(len(surface.faces), c), surface.faces])
    return TetMesh(v, tets)


def grid_plane(nx=10, ny=10, size=(1.0, 1.0), symmetric=False):
    """Flat triangulated rectangle in the z=0 plane with lower-left corner at the origin.

    With ``symmetric=True`` every cell gets a center vertex and four
    triangles, so the connectivity is invariant under both axis mirrors.
    """
    xs = np.linspace(0.0, size[0], nx + 1)
    ys = np.linspace(0.0, size[1], ny + 1)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    verts = [np.column_stack([X.ravel(), Y.ravel(), np.zeros(X.size)])]
    idx = np.arange(X.size).reshape(nx + 1, ny + 1)
    a, b = idx[:-1, :-1].ravel(), idx[1:, :-1].ravel()
    c, d = idx[1:, 1:].ravel(), idx[:-1, 1:].ravel()
    if symmetric:
        cx = (xs[:-1] + xs[1:]) / 2.0
        cy = (ys[:-1] + ys[1:]) / 2.0
        CX, CY = np.meshgrid(cx, cy, indexing="ij")
        m = X.size + np.arange(CX.size)
        verts.append(np.column_stack([CX.ravel(), CY.ravel(), np.zeros(CX.size)]))
        faces = np.concatenate([np.column_stack([m, a, b]), np.column_stack([m, b, c]),
                                np.column_stack([m, c, d]), np.column_stack([m, d, a])])
    else:
        faces = np.concatenate([np.column_stack([a, b, c]), np.column_stack([a, c, d])])
    return TriMesh(np.vstack(verts), faces)


def unit_square_star():
    """Unit square split into four right triangles around its center vertex."""
    v = np.array([[0.5, 0.5, 0], [0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0]], dtype=float)
    f = np.array([[0, 1, 2], [0, 2, 3], [0, 3, 4], [0, 4, 1]])
    return TriMesh(v, f)


def box(dims=(2.0, 1.0, 1.0), divisions=(8, 4, 4)):
    """Closed box surface centered at the origin.

    Each face is a grid of quads split into four triangles around a center
    vertex, so the connectivity is invariant under the three axis mirrors.
    """
    dims = np.asarray(dims, dtype=float)
    pts, tris = [], []
    offset = 0
    for axis in range(3):
        b, c = [k for k in range(3) if k != axis]
        gb = np.linspace(-dims[b] / 2, dims[b] / 2, divisions[b] + 1)
        gc = np.linspace(-dims[c] / 2, dims[c] / 2, divisions[c] + 1)
        for sign in (-1.0, 1.0):
            B, C = np.meshgrid(gb, gc, indexing="ij")
            corner = np.zeros((B.size, 3))
            corner[:, axis] = sign * dims[axis] / 2
            corner[:, b], corner[:, c] = B.ravel(), C.ravel()
            MB, MC = np.meshgrid((gb[:-1] + gb[1:]) / 2, (gc[:-1] + gc[1:]) / 2, indexing="ij")
            center = np.zeros((MB.size, 3))
            center[:, axis] = sign * dims[axis] / 2
            center[:, b], center[:, c] = MB.ravel(), MC.ravel()
            idx = offset + np.arange(B.size).reshape(B.shape)
            m = offset + B.size + np.arange(MB.size)
            q0, q1 = idx[:-1, :-1].ravel(), idx[1:, :-1].ravel()
            q2, q3 = idx[1:, 1:].ravel(), idx[:-1, 1:].ravel()
            tris += [np.column_stack([m, q0, q1]), np.column_stack([m, q1, q2]),
                     np.column_stack([m, q2, q3]), np.column_stack([m, q3, q0])]
            pts += [corner, center]
            offset += B.size + MB.size
    verts, faces = _dedupe(np.vstack(pts), np.vstack(tris))
    faces = _orient_outward(verts, faces, np.zeros(3))
    return TriMesh(verts, faces)


def cylinder(radius=1.0, height=2.0, n_theta=32, n_z=16, n_cap=4):
    """Closed cylinder along z, centered at the origin, with ring-triangulated caps."""
    th = 2 * np.pi * np.arange(n_theta) / n_theta
    ring = np.column_stack([np.cos(th), np.sin(th)])
    verts, faces = [], []

    def add_ring(r, z):
        start = sum(len(v) for v in verts)
        verts.append(np.column_stack([r * ring, np.full(n_theta, z)]))
        return start + np.arange(n_theta)

    def stitch(r0, r1):
        nxt = np.roll(np.arange(n_theta), -1)
        faces.append(np.column_stack([r0, r0[nxt], r1[nxt]]))
        faces.append(np.column_stack([r0, r1[nxt], r1]))

    zs = np.linspace(-height / 2, height / 2, n_z + 1)
    barrel = [add_ring(radius, z) for z in zs]
    for r0, r1 in zip(barrel[:-1], barrel[1:]):
        stitch(r0, r1)
    for z, outer in ((zs[0], barrel[0]), (zs[-1], barrel[-1])):
        prev = outer
        for j in range(n_cap - 1, 0, -1):
            cur = add_ring(radius * j / n_cap, z)
            stitch(prev, cur)
            prev = cur
        c = sum(len(v) for v in verts)
        verts.append(np.array([[0.0, 0.0, z]]))
        nxt = np.roll(np.arange(n_theta), -1)
        faces.append(np.column_stack([prev, prev[nxt], np.full(n_theta, c)]))
    verts = np.vstack(verts)
    faces = _orient_outward(verts, np.vstack(faces), np.zeros(3))
    return TriMesh(verts, faces)


def mirror_map(mesh, axis=0, decimals=8):
    """Vertex permutation induced by the mirror ``x_axis -> -x_axis``.

    Raises ``ValueError`` if some mirrored vertex has no exact counterpart.
    """
    p = np.asarray(mesh.vertices)
    q = p.copy()
    q[:, axis] *= -1
    key = lambda a: [tuple(r) for r in np.round(a, decimals) + 0.0]
    lookup = {k: i for i, k in enumerate(key(p))}
    try:
        return np.array([lookup[k] for k in key(q)], dtype=np.int64)
    except KeyError:
        raise ValueError("mesh is not mirror symmetric") from None


def random_rotation(seed=0):
    rng = np.random.default_rng(seed)
    Q, R = np.linalg.qr(rng.normal(size=(3, 3)))
    Q = Q * np.sign(np.diag(R))
    if np.linalg.det(Q) < 0:
        Q[:, 0] *= -1
    return Q


def rotation_matrix(axis, angle):
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    K = np.array([[0, -axis[2], axis[1]], [axis[2], 0, -axis[0]], [-axis[1], axis[0], 0]])
    return np.eye(3) + np.sin(angle) * K + (1 - np.cos(angle)) * K @ K
