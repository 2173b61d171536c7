"""Readers and writers for meshes, fields and dense matrices.

Formats
-------
* OBJ (``v`` and ``f`` records only, 1-based indices) and OFF for triangle meshes.
* TetGen ASCII ``.node`` / ``.ele`` pairs for tet meshes; the index base
  (0 or 1) is taken from the first node index.
* Matrices: ASCII ``"rows cols"`` header followed by one row per line, or a
  little-endian binary file made of the 8-byte magic ``FDMAT001``, two
  int64 dimensions and row-major float64 values.
* Vertex fields: ASCII ``"n"`` header followed by ``n`` lines of 3 floats.

All floats are written with 17 significant digits, so reading back gives the
same doubles bit for bit.
"""

import os
import struct

import numpy as np

from .errors import ParseError
from .mesh import TetMesh, TriMesh

MATRIX_MAGIC = b"FDMAT001"
_FMT = "%.17g"


def _lines(path):
    with open(path) as fh:
        for raw in fh:
            line = raw.split("#", 1)[0].strip()
            if line:
                yield line


def _floats(tokens, what):
    try:
        return [float(t) for t in tokens]
    except ValueError as exc:
        raise ParseError(f"bad number in {what}: {exc}") from None


def read_obj(path):
    verts, faces = [], []
    for line in _lines(path):
        tok = line.split()
        if tok[0] == "v":
            if len(tok) < 4:
                raise ParseError(f"short vertex record: {line!r}")
            verts.append(_floats(tok[1:4], "vertex"))
        elif tok[0] == "f":
            try:
                idx = [int(t.split("/")[0]) for t in tok[1:]]
            except ValueError:
                raise ParseError(f"bad face record: {line!r}") from None
            if len(idx) < 3:
                raise ParseError(f"face with fewer than 3 vertices: {line!r}")
            faces.extend([idx[0], idx[i], idx[i + 1]] for i in range(1, len(idx) - 1))
    faces = np.array(faces, dtype=np.int64).reshape(-1, 3)
    if faces.size and (faces.min() < 1 or faces.max() > len(verts)):
        raise ParseError("face index out of range (OBJ indices are 1-based)")
    return TriMesh(np.array(verts, dtype=float).reshape(-1, 3), faces - 1)


def read_off(path):
    it = _lines(path)
    try:
        head = next(it)
        if not head.startswith("OFF"):
            raise ParseError("missing OFF header")
        rest = head[3:].split()
        counts = rest if rest else next(it).split()
        nv, nf = int(counts[0]), int(counts[1])
        verts = [_floats(next(it).split()[:3], "vertex") for _ in range(nv)]
        faces = []
        for _ in range(nf):
            tok = [int(t) for t in next(it).split()]
            k = tok[0]
            idx = tok[1:1 + k]
            faces.extend([idx[0], idx[i], idx[i + 1]] for i in range(1, k - 1))
    except (StopIteration, ValueError, IndexError):
        raise ParseError(f"truncated or malformed OFF file {path}") from None
    faces = np.array(faces, dtype=np.int64).reshape(-1, 3)
    if faces.size and (faces.min() < 0 or faces.max() >= nv):
        raise ParseError("face index out of range")
    return TriMesh(np.array(verts, dtype=float).reshape(-1, 3), faces)


def _tetgen_paths(path):
    base, ext = os.path.splitext(str(path))
    if ext not in (".node", ".ele"):
        base = str(path)
    return base + ".node", base + ".ele"


def read_tetgen(path):
    node_path, ele_path = _tetgen_paths(path)
    try:
        it = _lines(node_path)
        head = next(it).split()
        n, dim = int(head[0]), int(head[1])
        if dim != 3:
            raise ParseError("only 3D .node files are supported")
        ids, verts = [], []
        for _ in range(n):
            tok = next(it).split()
            ids.append(int(tok[0]))
            verts.append(_floats(tok[1:4], "node"))
        it = _lines(ele_path)
        head = next(it).split()
        m, per = int(head[0]), int(head[1])
        if per != 4:
            raise ParseError("only linear (4-node) tets are supported")
        tets = [[int(t) for t in next(it).split()[1:5]] for _ in range(m)]
    except (StopIteration, ValueError, IndexError):
        raise ParseError(f"truncated or malformed TetGen files {node_path}") from None
    base = ids[0] if ids else 0
    if base not in (0, 1) or ids != list(range(base, base + n)):
        raise ParseError("node indices must be consecutive from 0 or 1")
    tets = np.array(tets, dtype=np.int64).reshape(-1, 4) - base
    if tets.size and (tets.min() < 0 or tets.max() >= n):
        raise ParseError("tet index out of range")
    return TetMesh(np.array(verts, dtype=float).reshape(-1, 3), tets)


def load_mesh(path, format=None):
    """Load a triangle or tet mesh.

    Parameters
    ----------
    path : str or path-like
        For TetGen, either file of the ``.node``/``.ele`` pair or their common stem.
    format : {"obj", "off", "tetgen"}, optional
        Inferred from the extension when omitted.

    Returns
    -------
    TriMesh or TetMesh
    """
    path = str(path)
    if format is None:
        ext = os.path.splitext(path)[1].lower()
        format = {".obj": "obj", ".off": "off", ".node": "tetgen",
                  ".ele": "tetgen"}.get(ext)
        if format is None:
            raise ParseError(f"cannot infer mesh format from {path!r}")
    readers = {"obj": read_obj, "off": read_off, "tetgen": read_tetgen}
    if format not in readers:
        raise ParseError(f"unknown mesh format {format!r}")
    if format != "tetgen" and not os.path.exists(path):
        raise FileNotFoundError(path)
    return readers[format](path)


def save_obj(path, mesh_or_vertices, faces=None):
    if faces is None:
        vertices, faces = mesh_or_vertices.vertices, mesh_or_vertices.faces
    else:
        vertices = mesh_or_vertices
    with open(path, "w") as fh:
        for v in np.asarray(vertices):
            fh.write("v %s %s %s\n" % tuple(_FMT % x for x in v))
        for f in np.asarray(faces) + 1:
            fh.write("f %d %d %d\n" % tuple(f))


def save_off(path, mesh):
    with open(path, "w") as fh:
        fh.write(f"OFF\n{mesh.n_vertices} {len(mesh.faces)} 0\n")
        for v in mesh.vertices:
            fh.write(" ".join(_FMT % x for x in v) + "\n")
        for f in mesh.faces:
            fh.write("3 %d %d %d\n" % tuple(f))


def save_tetgen(stem, mesh, base=0):
    """Write ``stem.node`` and ``stem.ele``."""
    node_path, ele_path = _tetgen_paths(stem)
    with open(node_path, "w") as fh:
        fh.write(f"{mesh.n_vertices} 3 0 0\n")
        for i, v in enumerate(mesh.vertices):
            fh.write(f"{i + base} " + " ".join(_FMT % x for x in v) + "\n")
    with open(ele_path, "w") as fh:
        fh.write(f"{len(mesh.tets)} 4 0\n")
        for i, t in enumerate(mesh.tets):
            fh.write(f"{i + base} " + " ".join(str(int(x) + base) for x in t) + "\n")


def save_mesh(path, mesh):
    ext = os.path.splitext(str(path))[1].lower()
    if isinstance(mesh, TetMesh):
        save_tetgen(path, mesh)
    elif ext == ".off":
        save_off(path, mesh)
    else:
        save_obj(path, mesh)


# -- matrices ---------------------------------------------------------------

def save_matrix(path, M, binary=False):
    """Write a dense matrix (sparse input is densified)."""
    if hasattr(M, "toarray"):
        M = M.toarray()
    M = np.atleast_2d(np.asarray(M, dtype=float)) + 0.0   # no negative zeros
    rows, cols = M.shape
    if binary:
        with open(path, "wb") as fh:
            fh.write(MATRIX_MAGIC)
            fh.write(struct.pack("<qq", rows, cols))
            fh.write(np.ascontiguousarray(M, dtype="<f8").tobytes())
        return
    with open(path, "w") as fh:
        fh.write(f"{rows} {cols}\n")
        for r in M:
            fh.write(" ".join(_FMT % x for x in r) + "\n")


def load_matrix(path):
    """Read a matrix written by :func:`save_matrix`, ASCII or binary."""
    with open(path, "rb") as fh:
        head = fh.read(8)
        if head == MATRIX_MAGIC:
            rows, cols = struct.unpack("<qq", fh.read(16))
            data = np.frombuffer(fh.read(), dtype="<f8")
            if data.size != rows * cols:
                raise ParseError("binary matrix payload has the wrong size")
            return data.reshape(rows, cols).astype(float)
    try:
        it = _lines(path)
        rows, cols = (int(t) for t in next(it).split()[:2])
        vals = [float(t) for line in it for t in line.split()]
    except (StopIteration, ValueError):
        raise ParseError(f"malformed matrix file {path}") from None
    if len(vals) != rows * cols:
        raise ParseError(f"expected {rows * cols} values, found {len(vals)}")
    return np.array(vals, dtype=float).reshape(rows, cols)


# -- vertex fields ----------------------------------------------------------

def save_field(path, V):
    V = np.asarray(V, dtype=float) + 0.0
    with open(path, "w") as fh:
        fh.write(f"{len(V)}\n")
        for v in V:
            fh.write(" ".join(_FMT % x for x in v) + "\n")


def load_field(path):
    try:
        it = _lines(path)
        n = int(next(it).split()[0])
        rows = [_floats(next(it).split(), "field") for _ in range(n)]
    except (StopIteration, ValueError):
        raise ParseError(f"malformed field file {path}") from None
    if any(len(r) != 3 for r in rows):
        raise ParseError("field rows must have exactly 3 values")
    return np.array(rows, dtype=float).reshape(n, 3)


def load_pairs(path):
    """Read ``"i j"`` index pairs (0-based) into an (m, 2) int array."""
    try:
        rows = [[int(t) for t in line.split()[:2]] for line in _lines(path)]
    except ValueError:
        raise ParseError(f"malformed pair file {path}") from None
    return np.array(rows, dtype=np.int64).reshape(-1, 2)


def load_constraints(path):
    """Read ``"vertex ux uy uz"`` lines; returns (indices, vectors)."""
    idx, vec = [], []
    for line in _lines(path):
        tok = line.split()
        if len(tok) != 4:
            raise ParseError(f"constraint lines need 4 values: {line!r}")
        try:
            idx.append(int(tok[0]))
        except ValueError:
            raise ParseError(f"bad vertex index in {line!r}") from None
        vec.append(_floats(tok[1:], "constraint"))
    return np.array(idx, dtype=np.int64), np.array(vec, dtype=float).reshape(-1, 3)
