"""Command-line interface.

Every subcommand accepts ``--config run.json``; keys are the long option
names with dashes replaced by underscores. Values given on the command line
override the config file, which overrides the defaults. The effective
settings are printed to stderr as JSON before the run.

Exit codes: 0 success, 2 input error, 3 numerical failure.
"""

import argparse
import csv
import json
import os
import sys

import numpy as np

from . import io
from .defbasis import build_dictionary
from .errors import Infeasible, InputError, NumericalError
from .fem import mesh_basis
from .mesh import TriMesh
from .operators import assemble_E, assemble_E_normal, reduce

_F = "%.17g"

# name -> (default, type, help); a type of None marks a boolean flag
COMMON = {
    "k": (200, int, "number of Laplace-Beltrami eigenfunctions"),
    "binary": (False, None, "write matrices in the binary format"),
}
DICT_OPTS = {
    "counts": ("180,180,180", str, "dictionary fields per family: spectral,modal,handle"),
    "handle_rotations": (False, None, "add local rotation fields to the handle family"),
}
SOLVER_OPTS = {
    "tol": (1e-8, float, "KKT tolerance of the L1 solver"),
    "max_iter": (20000, int, "iteration limit of the L1 solver"),
}

COMMANDS = {
    "operator": ("reduced operator of a deformation field", {
        "mesh": (None, str, "input mesh (obj, off, or TetGen .node/.ele)"),
        "field": (None, str, "field file (n header + n rows of 3 values)"),
        "normal": (False, None, "use the outward vertex normal field"),
        "out": ("operator.mat", str, "reduced k x k operator"),
        "full_out": (None, str, "also write the full n x n operator"),
        **COMMON}),
    "shapediff": ("shape difference between two meshes", {
        "src": (None, str, "source mesh M"),
        "dst": (None, str, "target mesh N"),
        "kind": ("unified", str, "area, conformal or unified"),
        "fmap": (None, str, "point map N -> M as 'i j' pairs; enables different connectivity"),
        "k_dst": (None, int, "basis size on N with --fmap (default: k)"),
        "out": ("shapediff.mat", str, "reduced difference matrix"),
        **COMMON}),
    "collection": ("PCA embedding of shape differences", {
        "base": (None, str, "base mesh"),
        "shapes": (None, "list", "meshes with the base connectivity"),
        "kind": ("unified", str, "area, conformal or unified"),
        "out_csv": ("embedding.csv", str, "CSV with columns shape_id,x,y"),
        **COMMON}),
    "recover": ("recover a field from a reduced operator", {
        "mesh": (None, str, "mesh"),
        "target": (None, str, "reduced operator matrix file"),
        "tau": (0.0, float, "L1 weight"),
        "out_dir": ("recover_out", str, "output directory"),
        **COMMON, **DICT_OPTS, **SOLVER_OPTS}),
    "transfer": ("transfer a deformation from M to N", {
        "src": (None, str, "source mesh M"),
        "src_field": (None, str, "deformation field on M"),
        "dst": (None, str, "target mesh N"),
        "map": (None, str, "point map M -> N as 'i j' pairs (default: identity)"),
        "tau": (None, float, "L1 weight (default: 1e-4 times the largest singular value)"),
        "out_dir": ("transfer_out", str, "output directory"),
        **COMMON, **DICT_OPTS, **SOLVER_OPTS}),
    "design": ("design a field from pointwise constraints", {
        "mesh": (None, str, "mesh"),
        "constraints": (None, str, "lines 'vertex ux uy uz'"),
        "no_isometric": (False, None, "drop the ||E||_F^2 term"),
        "symmetric": (None, str, "self-map pairs; penalize E C_S - C_S E"),
        "antisymmetric": (None, str, "self-map pairs; penalize E C_S + C_S E"),
        "laplacian": (False, None, "penalize the commutator with the Laplacian"),
        "smoothness": (0.0, float, "weight of the vector Dirichlet energy"),
        "tau": (0.0, float, "L1 weight"),
        "out_dir": ("design_out", str, "output directory"),
        **COMMON, **DICT_OPTS, **SOLVER_OPTS}),
    "symmetrize": ("intrinsic symmetrization", {
        "mesh": (None, str, "mesh"),
        "map": (None, str, "self-map as 'i j' pairs"),
        "iters": (3, int, "outer iterations"),
        "tau_reg": (1e-3, float, "weight of ||E||_F^2"),
        "eps": (1e-4, float, "stop when the field is below eps * bbox diagonal"),
        "max_step": (0.05, float, "largest step as a fraction of the bbox diagonal"),
        "linearization": ("exact", str, "exact, consistent or unified"),
        "out_dir": ("symmetrize_out", str, "output directory"),
        **COMMON, **DICT_OPTS}),
    "fmap": ("infer a functional map with the extrinsic constraint", {
        "src": (None, str, "mesh M"),
        "dst": (None, str, "mesh N"),
        "landmarks": (None, str, "pairs 'vertex_on_M vertex_on_N'"),
        "no_extrinsic": (False, None, "Laplacian commutator only"),
        "w_ext": (1.0, float, "weight of the normal-operator commutator"),
        "landmark_weight": (None, float, "soft landmark weight (default: hard constraints)"),
        "out": ("fmap.mat", str, "functional map (k x k)"),
        "pointmap_out": (None, str, "also write the point map N -> M"),
        **COMMON}),
}
for _name, (_, _opts) in COMMANDS.items():
    _opts.setdefault("config", (None, str, "JSON file with default values for the options above"))
    _opts.setdefault("seed", (0, int, "random seed (recorded; every algorithm is deterministic)"))


class UsageError(InputError):
    pass


def build_parser():
    parser = argparse.ArgumentParser(prog="fundeform", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (help_text, opts) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text, description=help_text)
        for key, (default, typ, text) in opts.items():
            flag = "--" + key.replace("_", "-")
            text = f"{text} (default: {default})"
            if typ is None:
                p.add_argument(flag, dest=key, action="store_const", const=True, default=None,
                               help=text)
            elif typ == "list":
                p.add_argument(flag, dest=key, nargs="+", default=None, help=text)
            else:
                p.add_argument(flag, dest=key, type=typ, default=None, help=text)
    return parser


def resolve(command, args):
    """Merge defaults, the JSON config and command-line flags."""
    opts = COMMANDS[command][1]
    settings = {k: v[0] for k, v in opts.items()}
    if args.config:
        try:
            with open(args.config) as fh:
                config = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(config, dict):
            raise UsageError("config must be a JSON object")
        unknown = sorted(set(config) - set(opts) - {"command"})
        if unknown:
            raise UsageError(f"unknown config keys: {', '.join(unknown)}")
        settings.update({k: v for k, v in config.items() if k != "command"})
    for key in opts:
        value = getattr(args, key)
        if value is not None:
            settings[key] = value
    return settings


def _require(s, *keys):
    missing = [k for k in keys if not s.get(k)]
    if missing:
        raise UsageError("missing required option(s): "
                         + ", ".join("--" + k.replace("_", "-") for k in missing))


def _counts(s):
    try:
        c = tuple(int(x) for x in str(s["counts"]).split(","))
    except ValueError:
        raise UsageError(f"bad --counts {s['counts']!r}") from None
    if len(c) != 3:
        raise UsageError("--counts needs three comma-separated integers")
    return c


def _pairs_to_map(path, n_from, n_to):
    pairs = io.load_pairs(path)
    if len(pairs) != n_from or not np.array_equal(np.sort(pairs[:, 0]), np.arange(n_from)):
        raise UsageError(f"{path} must give exactly one image for each of {n_from} vertices")
    pmap = np.empty(n_from, dtype=np.int64)
    pmap[pairs[:, 0]] = pairs[:, 1]
    if pmap.min() < 0 or pmap.max() >= n_to:
        raise UsageError(f"{path} has a target index out of range")
    return pmap


def _outdir(s):
    os.makedirs(s["out_dir"], exist_ok=True)
    return s["out_dir"]


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_F % x if isinstance(x, (float, np.floating)) else x for x in row])


def _write_field_outputs(out, mesh, V, solver=None):
    io.save_field(os.path.join(out, "field.txt"), V)
    deformed = mesh.vertices + V
    if isinstance(mesh, TriMesh):
        io.save_obj(os.path.join(out, "deformed.obj"), deformed, mesh.faces)
    else:
        io.save_tetgen(os.path.join(out, "deformed"), mesh.with_vertices(deformed))
    if solver is not None:
        _write_csv(os.path.join(out, "diagnostics.csv"), ["iteration", "objective"],
                   list(enumerate(solver.history)))
        _write_csv(os.path.join(out, "summary.csv"), ["key", "value"], [
            ("objective", float(solver.objective)), ("kkt_residual", float(solver.kkt_residual)),
            ("iterations", solver.iterations), ("constraint_mode", solver.constraint_mode),
            ("constraint_residual", float(solver.constraint_residual)),
            ("nonzeros", int(np.count_nonzero(solver.alpha)))])


def _dictionary(mesh, basis, s):
    return build_dictionary(mesh, basis, _counts(s), bool(s["handle_rotations"]))


def cmd_operator(s):
    _require(s, "mesh")
    mesh = io.load_mesh(s["mesh"])
    if s["normal"]:
        H = assemble_E_normal(mesh)
    else:
        _require(s, "field")
        H = assemble_E(mesh, io.load_field(s["field"]))
    basis = mesh_basis(mesh, s["k"])
    io.save_matrix(s["out"], reduce(H, basis), binary=s["binary"])
    if s["full_out"]:
        io.save_matrix(s["full_out"], H, binary=s["binary"])


def cmd_shapediff(s):
    from .shapediff import shape_difference_fmap, shape_difference_same_conn
    from .solve.fmaps import fmap_from_pointmap
    _require(s, "src", "dst")
    M, N = io.load_mesh(s["src"]), io.load_mesh(s["dst"])
    bM = mesh_basis(M, s["k"])
    if s["fmap"]:
        bN = mesh_basis(N, s["k_dst"] or s["k"])
        C = fmap_from_pointmap(_pairs_to_map(s["fmap"], N.n_vertices, M.n_vertices), bM, bN)
        D = shape_difference_fmap(bM, bN, C, s["kind"])
    else:
        D = shape_difference_same_conn(M, N, s["kind"], bM)
    io.save_matrix(s["out"], D.matrix, binary=s["binary"])
    print(f"||D - I||_F = {D.distance_to_identity():.6e}")


def cmd_collection(s):
    from .shapediff import collection_embedding
    _require(s, "base", "shapes")
    base = io.load_mesh(s["base"])
    shapes = [io.load_mesh(p) for p in s["shapes"]]
    X = collection_embedding(base, shapes, s["kind"], mesh_basis(base, s["k"]))
    _write_csv(s["out_csv"], ["shape_id", "x", "y"],
               [(os.path.basename(p), float(x), float(y)) for p, (x, y) in zip(s["shapes"], X)])


def cmd_recover(s):
    from .solve.pipelines import recover_field
    _require(s, "mesh", "target")
    mesh = io.load_mesh(s["mesh"])
    target = io.load_matrix(s["target"])
    basis = mesh_basis(mesh, s["k"])
    if target.shape != (basis.k, basis.k):
        raise UsageError(f"target is {target.shape}, expected {(basis.k, basis.k)}")
    d = _dictionary(mesh, basis, s)
    rec = recover_field(target, d, s["tau"], mesh=mesh, tol=s["tol"], max_iter=s["max_iter"])
    out = _outdir(s)
    _write_field_outputs(out, mesh, rec.field, rec.solver)
    io.save_field(os.path.join(out, "rigid_part.txt"), rec.rigid)


def cmd_transfer(s):
    from .solve.fmaps import fmap_from_pointmap
    from .solve.pipelines import transfer
    _require(s, "src", "src_field", "dst")
    M, N = io.load_mesh(s["src"]), io.load_mesh(s["dst"])
    U = io.load_field(s["src_field"])
    if s["map"]:
        pmap = _pairs_to_map(s["map"], M.n_vertices, N.n_vertices)
    elif M.n_vertices == N.n_vertices:
        pmap = np.arange(M.n_vertices)
    else:
        raise UsageError("--map is required when the meshes have different vertex counts")
    bM, bN = mesh_basis(M, s["k"]), mesh_basis(N, s["k"])
    C = fmap_from_pointmap(pmap, bN, bM)
    res = transfer(reduce(assemble_E(M, U), bM), C, _dictionary(N, bN, s), s["tau"],
                   tol=s["tol"], max_iter=s["max_iter"])
    _write_field_outputs(_outdir(s), N, res.field, res.solver)


def cmd_design(s):
    from .solve.fmaps import fmap_from_pointmap
    from .solve.pipelines import design
    _require(s, "mesh", "constraints")
    mesh = io.load_mesh(s["mesh"])
    basis = mesh_basis(mesh, s["k"])
    n = mesh.n_vertices
    sym = anti = None
    if s["symmetric"]:
        sym = fmap_from_pointmap(_pairs_to_map(s["symmetric"], n, n), basis, basis)
    if s["antisymmetric"]:
        anti = fmap_from_pointmap(_pairs_to_map(s["antisymmetric"], n, n), basis, basis)
    res = design(mesh, _dictionary(mesh, basis, s), io.load_constraints(s["constraints"]),
                 isometric=not s["no_isometric"], symmetric=sym, antisymmetric=anti,
                 laplacian=basis.evals if s["laplacian"] else None,
                 smoothness=s["smoothness"], tau=s["tau"], tol=s["tol"], max_iter=s["max_iter"])
    _write_field_outputs(_outdir(s), mesh, res.field, res.solver)


def cmd_symmetrize(s):
    from .solve.symmetry import symmetrize
    _require(s, "mesh", "map")
    mesh = io.load_mesh(s["mesh"])
    pi = _pairs_to_map(s["map"], mesh.n_vertices, mesh.n_vertices)
    st = symmetrize(mesh, pi, k=s["k"], counts=_counts(s), tau_reg=s["tau_reg"],
                    iters=s["iters"], eps=s["eps"], max_step=s["max_step"],
                    linearization=s["linearization"])
    out = _outdir(s)
    V = st.vertices - mesh.vertices
    _write_field_outputs(out, mesh, V)
    rows = []
    for t, e in enumerate(st.energy):
        fn = st.field_norms[t] if t < len(st.field_norms) else ""
        step = st.steps[t] if t < len(st.steps) else ""
        rows.append((t, e, fn, step))
    _write_csv(os.path.join(out, "diagnostics.csv"),
               ["iteration", "energy", "field_norm", "step"], rows)


def cmd_fmap(s):
    from .solve.fmaps import fmap_infer, fmap_to_pointmap
    _require(s, "src", "dst")
    M, N = io.load_mesh(s["src"]), io.load_mesh(s["dst"])
    bM, bN = mesh_basis(M, s["k"]), mesh_basis(N, s["k"])
    EM = EN = None
    if not s["no_extrinsic"]:
        EM, EN = reduce(assemble_E_normal(M), bM), reduce(assemble_E_normal(N), bN)
    lm = io.load_pairs(s["landmarks"]) if s["landmarks"] else np.zeros((0, 2), dtype=np.int64)
    C = fmap_infer(bM, bN, EM, EN, lm, w_ext=s["w_ext"], landmark_weight=s["landmark_weight"])
    io.save_matrix(s["out"], C, binary=s["binary"])
    if s["pointmap_out"]:
        pm = fmap_to_pointmap(C, bM, bN)
        with open(s["pointmap_out"], "w") as fh:
            for i, j in enumerate(pm):
                fh.write(f"{i} {j}\n")


HANDLERS = {name: globals()["cmd_" + name] for name in COMMANDS}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        settings = resolve(args.command, args)
        print(json.dumps({"command": args.command, **settings}, sort_keys=True), file=sys.stderr)
        HANDLERS[args.command](settings)
    except Infeasible as exc:
        print(f"error: infeasible: {exc}", file=sys.stderr)
        return 3
    except NumericalError as exc:
        print(f"error: numerical failure: {exc}", file=sys.stderr)
        return 3
    except (InputError, OSError, ValueError, IndexError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
