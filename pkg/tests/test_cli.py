import json

import numpy as np
import pytest

from fundeform import io
from fundeform.cli import COMMANDS, build_parser, main
from fundeform.shapes import box, grid_plane, icosphere, mirror_map, tet_ball

SMALL = ["--k", "20", "--counts", "30,0,30"]


@pytest.fixture
def files(tmp_path):
    s = icosphere(2)
    io.save_mesh(tmp_path / "s.obj", s)
    io.save_field(tmp_path / "t.txt", np.tile([1.0, 2.0, 3.0], (s.n_vertices, 1)))
    B = box((2.0, 1.0, 1.0), (8, 4, 4))
    io.save_mesh(tmp_path / "b.obj", B)
    V = B.vertices.copy()
    bump = 1 + 0.3 * np.maximum(V[:, 0], 0) ** 2
    V[:, 1:] *= bump[:, None]
    io.save_mesh(tmp_path / "bb.obj", B.with_vertices(V))
    with open(tmp_path / "pi.txt", "w") as fh:
        for i, j in enumerate(mirror_map(B, 0)):
            fh.write(f"{i} {j}\n")
    io.save_field(tmp_path / "u.txt", np.column_stack([0.1 * B.vertices[:, 0],
                                                      np.zeros((B.n_vertices, 2))]))
    return tmp_path


def run(argv):
    return main([str(a) for a in argv])


def test_help_lists_defaults(capsys):
    for name in COMMANDS:
        with pytest.raises(SystemExit):
            build_parser().parse_args([name, "--help"])
        out = capsys.readouterr().out
        assert "(default: " in out
    build_parser().parse_args(["operator"])


def test_spec_defaults():
    opts = COMMANDS["recover"][1]
    assert opts["k"][0] == 200
    assert opts["counts"][0] == "180,180,180"


def test_operator_translation_is_zero(files):
    assert run(["operator", "--mesh", files / "s.obj", "--field", files / "t.txt", "--k", 10,
                "--out", files / "E.mat"]) == 0
    E = io.load_matrix(files / "E.mat")
    assert E.shape == (10, 10) and np.abs(E).max() <= 1e-10


def test_operator_normal(files):
    assert run(["operator", "--mesh", files / "s.obj", "--normal", "--k", 10, "--binary",
                "--out", files / "E.bin", "--full-out", files / "H.bin"]) == 0
    E = io.load_matrix(files / "E.bin")
    assert np.all(np.abs(np.diag(E)[1:] + 2) < 0.1)
    assert io.load_matrix(files / "H.bin").shape == (162, 162)


def test_missing_field_file(files, capsys):
    assert run(["operator", "--mesh", files / "s.obj", "--field", files / "nope.txt"]) == 2
    assert "error" in capsys.readouterr().err


def test_missing_required_option(files):
    assert run(["recover", "--mesh", files / "s.obj"]) == 2


def test_shapediff_identity_and_mismatch(files, capsys):
    assert run(["shapediff", "--src", files / "s.obj", "--dst", files / "s.obj", "--k", 10,
                "--out", files / "D.mat"]) == 0
    line = capsys.readouterr().out.strip()
    assert float(line.split("=")[1]) <= 1e-10
    assert run(["shapediff", "--src", files / "s.obj", "--dst", files / "b.obj", "--k", 10,
                "--out", files / "D.mat"]) == 2


def test_shapediff_with_fmap(files):
    with open(files / "id.txt", "w") as fh:
        fh.write("".join(f"{i} {i}\n" for i in range(162)))
    assert run(["shapediff", "--src", files / "s.obj", "--dst", files / "s.obj", "--k", 10,
                "--fmap", files / "id.txt", "--out", files / "D.mat"]) == 0
    assert np.allclose(io.load_matrix(files / "D.mat"), np.eye(10), atol=1e-10)


def test_collection(files):
    base = grid_plane(6, 6)
    paths = []
    for t in (0.0, 0.1, 0.2, 0.3):
        p = files / f"shear_{t}.obj"
        io.save_mesh(p, base.with_vertices(base.vertices + np.column_stack(
            [t * base.vertices[:, 1], np.zeros((base.n_vertices, 2))])))
        paths.append(p)
    assert run(["collection", "--base", paths[0], "--shapes", *paths, "--kind", "area",
                "--k", 10, "--out-csv", files / "emb.csv"]) == 0
    rows = (files / "emb.csv").read_text().splitlines()
    assert rows[0] == "shape_id,x,y" and len(rows) == 5


def test_recover_and_transfer(files):
    assert run(["operator", "--mesh", files / "b.obj", "--field", files / "u.txt", "--k", 20,
                "--out", files / "E.mat"]) == 0
    assert run(["recover", "--mesh", files / "b.obj", "--target", files / "E.mat",
                *SMALL, "--out-dir", files / "rec"]) == 0
    for name in ("field.txt", "deformed.obj", "diagnostics.csv", "summary.csv", "rigid_part.txt"):
        assert (files / "rec" / name).exists()
    from fundeform.fem import mesh_basis
    from fundeform.operators import project_out_rigid
    mesh = io.load_mesh(files / "b.obj")
    # a field in the span of the spectral family
    U = np.zeros((mesh.n_vertices, 3))
    U[:, 0] = 0.1 * mesh_basis(mesh, 20).evecs[:, 1]
    io.save_field(files / "span.txt", U)
    assert run(["transfer", "--src", files / "b.obj", "--src-field", files / "span.txt",
                "--dst", files / "b.obj", *SMALL, "--tau", 0, "--out-dir", files / "tr"]) == 0
    V = io.load_field(files / "tr" / "field.txt")
    err = np.linalg.norm(project_out_rigid(mesh, V) - project_out_rigid(mesh, U))
    assert err <= 1e-3 * np.linalg.norm(U)


def test_recover_wrong_target_shape(files):
    io.save_matrix(files / "bad.mat", np.eye(3))
    assert run(["recover", "--mesh", files / "b.obj", "--target", files / "bad.mat",
                *SMALL]) == 2


def test_design_and_conflict(files, capsys):
    (files / "c.txt").write_text("0 0.1 0 0\n")
    assert run(["design", "--mesh", files / "b.obj", "--constraints", files / "c.txt",
                *SMALL, "--out-dir", files / "des"]) == 0
    V = io.load_field(files / "des" / "field.txt")
    assert np.allclose(V[0], [0.1, 0, 0], atol=1e-8)
    (files / "c2.txt").write_text("0 0.1 0 0\n0 0 0.1 0\n")
    capsys.readouterr()
    assert run(["design", "--mesh", files / "b.obj", "--constraints", files / "c2.txt",
                *SMALL]) == 3
    assert "infeasible" in capsys.readouterr().err


def test_symmetrize(files):
    assert run(["symmetrize", "--mesh", files / "bb.obj", "--map", files / "pi.txt", *SMALL,
                "--iters", 3, "--out-dir", files / "sym"]) == 0
    rows = (files / "sym" / "diagnostics.csv").read_text().splitlines()
    assert rows[0] == "iteration,energy,field_norm,step"
    energy = [float(r.split(",")[1]) for r in rows[1:]]
    assert len(energy) == 4 and np.all(np.diff(energy) < 0)


def test_fmap(files):
    with pytest.warns(Warning):
        assert run(["fmap", "--src", files / "s.obj", "--dst", files / "s.obj", "--k", 10,
                    "--out", files / "C.mat"]) == 0
    (files / "lm.txt").write_text("0 0\n40 40\n80 80\n120 120\n160 160\n")
    assert run(["fmap", "--src", files / "s.obj", "--dst", files / "s.obj", "--k", 10,
                "--landmarks", files / "lm.txt", "--out", files / "C.mat",
                "--pointmap-out", files / "pm.txt"]) == 0
    C = io.load_matrix(files / "C.mat")
    off = C - np.diag(np.diag(C))
    assert np.linalg.norm(off) <= 0.1 * np.linalg.norm(C)


def test_tet_mesh_output(files):
    t = tet_ball(icosphere(1))
    io.save_tetgen(files / "ball", t)
    io.save_field(files / "z.txt", np.zeros((t.n_vertices, 3)))
    (files / "c.txt").write_text("0 0.1 0 0\n")
    assert run(["design", "--mesh", files / "ball.node", "--constraints", files / "c.txt",
                "--k", 10, "--counts", "15,0,15", "--out-dir", files / "tdes"]) == 0
    assert (files / "tdes" / "deformed.node").exists()


def test_config_precedence_and_unknown_keys(files, capsys):
    (files / "cfg.json").write_text(json.dumps({"k": 12, "out": str(files / "cfg.mat")}))
    assert run(["operator", "--mesh", files / "s.obj", "--normal", "--config",
                files / "cfg.json", "--k", 8]) == 0
    err = capsys.readouterr().err
    settings = json.loads(err.strip().splitlines()[0])
    assert settings["k"] == 8 and settings["out"] == str(files / "cfg.mat")
    assert io.load_matrix(files / "cfg.mat").shape == (8, 8)
    (files / "bad.json").write_text(json.dumps({"kk": 3}))
    assert run(["operator", "--mesh", files / "s.obj", "--normal", "--config",
                files / "bad.json"]) == 2


@pytest.mark.parametrize("argv", [
    ["design", "--mesh", "{d}/b.obj", "--constraints", "{d}/c.txt", *SMALL, "--tau", "1e-4",
     "--out-dir", "{o}"],
    ["symmetrize", "--mesh", "{d}/bb.obj", "--map", "{d}/pi.txt", *SMALL, "--iters", "2",
     "--out-dir", "{o}"],
])
def test_determinism(files, argv):
    (files / "c.txt").write_text("0 0.1 0 0\n5 0 0.1 0\n")
    outs = []
    for r in ("r1", "r2"):
        assert run([a.format(d=files, o=files / r) for a in argv]) == 0
        outs.append({p.name: p.read_bytes() for p in sorted((files / r).iterdir())})
    assert outs[0] == outs[1]
