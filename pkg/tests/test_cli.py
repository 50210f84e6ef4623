"""End-to-end command-line runs on a 120-vertex template."""
import numpy as np
import pytest

from partmesh import checkpoint
from partmesh.cli import main
from partmesh.mesh import read_obj, read_ply_header

SMALL_CONFIG = """\
[train]
epochs = 2
batch_size = 8
[model]
z_dim = 6
cheb_order = 2
parts = 2
filters = 4, 8
[nmf]
nmf_restarts = 2
nmf_iters = 50
[hierarchy]
levels = 2
"""


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    assert main(["make-template", "--out", str(root / "t.obj"), "--rows", "12", "--cols", "10"]) == 0
    assert main(["synth-data", "--n", "24", "--template", str(root / "t.obj"), "--seed", "1",
                 "--out", str(root / "data")]) == 0
    (root / "small.ini").write_text(SMALL_CONFIG)
    assert main(["train", "--data", str(root / "data"), "--config", str(root / "small.ini"),
                 "--seed", "0", "--out", str(root / "m.ckpt")]) == 0
    return root


def test_synth_data_is_reproducible(workspace, tmp_path):
    main(["synth-data", "--n", "24", "--template", str(workspace / "t.obj"), "--seed", "1",
          "--out", str(tmp_path)])
    for name in ["split.csv", "sample_0000.obj", "sample_0023.obj"]:
        assert (tmp_path / name).read_bytes() == (workspace / "data" / name).read_bytes()


def test_train_writes_a_loadable_checkpoint(workspace, tmp_path):
    ck = checkpoint.load(workspace / "m.ckpt")
    assert ck.params.n_parts == 2 and ck.hierarchy.sizes[0] == 120
    assert len(ck.metrics["l1"]) == 2
    main(["train", "--data", str(workspace / "data"), "--config", str(workspace / "small.ini"),
          "--seed", "0", "--out", str(tmp_path / "again.ckpt")])
    assert (tmp_path / "again.ckpt").read_bytes() == (workspace / "m.ckpt").read_bytes()


@pytest.mark.parametrize("flag, check", [
    ("--no-local-weights", lambda ck: np.array_equal(ck.local_weights.W, np.ones((ck.hierarchy.sizes[-1], 2)))),
    ("--no-projection", lambda ck: not any(n.startswith("proj") for n in ck.params.arrays)),
])
def test_ablation_flags(workspace, tmp_path, flag, check):
    out = tmp_path / "abl.ckpt"
    assert main(["train", "--data", str(workspace / "data"), "--config",
                 str(workspace / "small.ini"), "--seed", "0", "--out", str(out), flag]) == 0
    assert check(checkpoint.load(out))


def test_nmf_weights(workspace, tmp_path):
    out = tmp_path / "w.csv"
    assert main(["nmf-weights", "--template", str(workspace / "t.obj"), "--parts", "3",
                 "--sparsity", "7.5", "--restarts", "2", "--iters", "100", "--seed", "0",
                 "--levels", "2", "--out", str(out), "--ply-dir", str(tmp_path / "ply")]) == 0
    rows = out.read_text().splitlines()
    assert rows[0] == "part_0,part_1,part_2"
    W = np.array([r.split(",") for r in rows[1:]], float)
    np.testing.assert_array_equal(W.max(axis=0), 1.0)
    counts, _ = read_ply_header((tmp_path / "ply" / "part_0.ply").read_bytes())
    assert counts["vertex"] == 120


def test_reconstruct_swap_interpolate(workspace, tmp_path, capsys):
    ck, data = str(workspace / "m.ckpt"), workspace / "data"
    a, b = str(data / "sample_0000.obj"), str(data / "sample_0001.obj")
    assert main(["reconstruct", "--ckpt", ck, "--in", b, "--out", str(tmp_path / "r.obj")]) == 0
    assert main(["swap", "--ckpt", ck, "--source", a, "--target", b, "--parts", "0,1",
                 "--out", str(tmp_path / "s.obj")]) == 0
    assert np.array_equal(read_obj(tmp_path / "r.obj").vertices,
                          read_obj(tmp_path / "s.obj").vertices)
    capsys.readouterr()
    assert main(["interpolate", "--ckpt", ck, "--source", a, "--target", b, "--part", "1",
                 "--steps", "8", "--out", str(tmp_path / "interp")]) == 0
    names = sorted(p.name for p in (tmp_path / "interp").iterdir())
    assert names == ["part1_distance.ply"] + [f"part1_step{i}.obj" for i in range(1, 9)]
    assert "hausdorff" in capsys.readouterr().out


def test_hausdorff_of_mesh_with_itself_prints_zero(workspace, tmp_path, capsys):
    m = str(workspace / "data" / "sample_0003.obj")
    assert main(["hausdorff", "--a", m, "--b", m, "--out", str(tmp_path / "d.ply")]) == 0
    assert capsys.readouterr().out.strip() == "0.0"
    assert (tmp_path / "d.ply").read_bytes().startswith(b"ply\n")


def test_embed_viz(workspace, tmp_path, capsys):
    data = str(workspace / "data")
    out = tmp_path / "emb.csv"
    assert main(["embed-viz", "--ckpt", str(workspace / "m.ckpt"), "--train", data, "--test", data,
                 "--sources", "2", "--targets", "2", "--out", str(out)]) == 0
    labels = [r.split(",")[0] for r in out.read_text().splitlines()[1:]]
    n_train = labels.count("train")
    assert labels == ["train"] * n_train + ["test"] * labels.count("test") + ["synth"] * 8
    assert (tmp_path / "emb_ellipses.csv").read_text().startswith("label,count,")
    assert "synth: ellipse area" in capsys.readouterr().out


def test_exit_codes(workspace, tmp_path, capsys):
    bad = tmp_path / "bad.obj"
    bad.write_text("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 7\n")
    assert main(["hausdorff", "--a", str(bad), "--b", str(bad)]) == 3
    assert main(["reconstruct", "--ckpt", str(bad), "--in", str(bad), "--out", str(tmp_path / "x")]) == 3
    other = tmp_path / "other.obj"
    main(["make-template", "--out", str(other), "--rows", "5", "--cols", "5"])
    assert main(["reconstruct", "--ckpt", str(workspace / "m.ckpt"), "--in", str(other),
                 "--out", str(tmp_path / "y.obj")]) == 3
    assert main(["hausdorff", "--a", str(tmp_path / "missing.obj"), "--b", str(bad)]) == 3
    with pytest.raises(SystemExit) as info:
        main(["swap", "--ckpt", "x"])
    assert info.value.code == 2
    hot = tmp_path / "hot.ini"
    hot.write_text(SMALL_CONFIG.replace("epochs = 2", "epochs = 30\nlr = 1e6"))
    with np.errstate(all="ignore"):
        code = main(["train", "--data", str(workspace / "data"), "--config", str(hot),
                     "--seed", "0", "--out", str(tmp_path / "hot.ckpt")])
    assert code == 4
    capsys.readouterr()
