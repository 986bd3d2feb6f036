import numpy as np
import pytest

from pcanet_cd import sampling
from pcanet_cd.bench import read_csv
from pcanet_cd.cli import main
from pcanet_cd.evalstat import confusion, error_rates, kappa
from pcanet_cd.raster import ReferenceMap, load_raster, load_reference, save_reference

SCENE = ["--width", "40", "--height", "40", "--blobs", "2", "--radius-min", "4", "--radius-max", "7"]
TINY = ["--width", "24", "--height", "24", "--blobs", "1", "--radius-min", "4", "--radius-max", "6"]
FAST_NET = ["--patch", "3", "--filter-size", "3", "--epochs", "5"]


@pytest.fixture(scope="module")
def scene_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("scene")
    assert main(["synth", "--out", str(d), "--seed", "5", *SCENE]) == 0
    return d


def files(d):
    return ["--t1", str(d / "t1.pgm"), "--t2", str(d / "t2.pgm")]


def train(d, out, *extra):
    return main(["train", *files(d), "--ref", str(d / "ref.pgm"), "--model", str(out), "--rate", "0.1", *extra])


def test_synth_outputs(scene_dir, tmp_path):
    assert {p.name for p in scene_dir.iterdir()} == {"t1.pgm", "t2.pgm", "ref.pgm", "scene.txt"}
    manifest = dict(line.split("=") for line in (scene_dir / "scene.txt").read_text().splitlines())
    assert manifest == {
        "width": "40", "height": "40", "n_blobs": "2", "radius_min": "4", "radius_max": "7",
        "looks": "2", "bg_level": "60.0", "fg_level": "140.0", "seed": "5",
    }
    assert main(["synth", "--out", str(tmp_path), "--seed", "5", *SCENE]) == 0
    for name in ("t1.pgm", "t2.pgm", "ref.pgm", "scene.txt"):
        assert (tmp_path / name).read_bytes() == (scene_dir / name).read_bytes()


def test_synth_without_blobs(tmp_path):
    assert main(["synth", "--out", str(tmp_path), "--blobs", "0", "--width", "16", "--height", "16"]) == 0
    assert not load_reference(tmp_path / "ref.pgm").labels.any()


def test_train_is_byte_deterministic(scene_dir, tmp_path, capsys):
    assert train(scene_dir, tmp_path / "a.pcnm", "--seed", "7") == 0
    out = capsys.readouterr().out
    assert "feature_length D=4096" in out
    assert "boundary=" in out and "changed=" in out
    assert train(scene_dir, tmp_path / "b.pcnm", "--seed", "7") == 0
    assert (tmp_path / "a.pcnm").read_bytes() == (tmp_path / "b.pcnm").read_bytes()


def test_train_obuc_on_unchanged_reference(scene_dir, tmp_path, capsys):
    ref = tmp_path / "empty.pgm"
    save_reference(ReferenceMap(np.zeros((40, 40), dtype=np.uint8)), ref)
    code = main(["train", *files(scene_dir), "--ref", str(ref), "--model", str(tmp_path / "m"), "--rate", "0.1"])
    assert code == 4
    assert "train" in capsys.readouterr().err


def test_exit_codes(scene_dir, tmp_path):
    assert train(scene_dir, tmp_path / "m", "--patch", "6") == 2
    assert main(["detect", "--model", str(tmp_path / "missing"), *files(scene_dir), "--out", str(tmp_path / "o")]) == 3
    bad = tmp_path / "bad.pcnm"
    bad.write_bytes(b"PCNM" + bytes(100))
    assert main(["detect", "--model", str(bad), *files(scene_dir), "--out", str(tmp_path / "o")]) == 3
    with pytest.raises(SystemExit) as exc:
        main(["train"])
    assert exc.value.code == 2


def test_detect_and_eval(scene_dir, tmp_path, capsys):
    model = tmp_path / "m.pcnm"
    assert train(scene_dir, model) == 0
    outs = []
    for workers in ("1", "2", "1"):
        out = tmp_path / f"cm{len(outs)}.pgm"
        assert main(["detect", "--model", str(model), *files(scene_dir), "--out", str(out), "--workers", workers]) == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1] == outs[2]
    pred = load_raster(tmp_path / "cm0.pgm").values
    assert set(np.unique(pred)) <= {0.0, 255.0}

    capsys.readouterr()
    assert main(["eval", "--pred", str(tmp_path / "cm0.pgm"), "--ref", str(scene_dir / "ref.pgm")]) == 0
    header, row = capsys.readouterr().out.strip().splitlines()
    assert header == "kappa,fa,missed,oe,pcc,tp,tn,fp,fn"
    cm = confusion(load_reference(tmp_path / "cm0.pgm"), load_reference(scene_dir / "ref.pgm"))
    er = error_rates(cm)
    want = [kappa(cm), er["false_alarm"], er["missed"], er["overall_error"], er["pcc"]]
    assert [float(v) for v in row.split(",")[:5]] == want
    assert [int(v) for v in row.split(",")[5:]] == [cm.tp, cm.tn, cm.fp, cm.fn]


def test_eval_extremes(scene_dir, tmp_path, capsys):
    ref = str(scene_dir / "ref.pgm")
    assert main(["eval", "--pred", ref, "--ref", ref]) == 0
    assert capsys.readouterr().out.splitlines()[1].startswith("1.0,")
    zeros = tmp_path / "z.pgm"
    save_reference(ReferenceMap(np.zeros((40, 40), dtype=np.uint8)), zeros)
    assert main(["eval", "--pred", str(zeros), "--ref", ref]) == 0
    assert capsys.readouterr().out.splitlines()[1].startswith("0.0,")
    small = tmp_path / "s.pgm"
    save_reference(ReferenceMap(np.zeros((4, 4), dtype=np.uint8)), small)
    assert main(["eval", "--pred", str(small), "--ref", ref]) == 3


def test_detect_other_size(scene_dir, tmp_path):
    model = tmp_path / "m.pcnm"
    assert train(scene_dir, model, *FAST_NET) == 0
    other = tmp_path / "other"
    assert main(["synth", "--out", str(other), "--seed", "1", *TINY]) == 0
    out = tmp_path / "cm.pgm"
    assert main(["detect", "--model", str(model), *files(other), "--out", str(out)]) == 0
    assert load_reference(out).shape == (24, 24)


def test_partition_command(scene_dir, tmp_path):
    outs = {}
    for r in (0, 2):
        outs[r] = tmp_path / f"p{r}.pgm"
        assert main(["partition", "--ref", str(scene_dir / "ref.pgm"), "--radius", str(r), "--out", str(outs[r])]) == 0
    v0, v2 = load_raster(outs[0]).values, load_raster(outs[2]).values
    assert np.all(v2[v0 == 128] == 128)
    part = sampling.partition(load_reference(scene_dir / "ref.pgm"), 2)
    assert np.array_equal(v2 == 128, part.boundary)
    assert np.array_equal(v2 == 255, part.changed)
    assert np.array_equal(v2 == 0, part.unchanged)

    empty = tmp_path / "e.pgm"
    save_reference(ReferenceMap(np.zeros((9, 9), dtype=np.uint8)), empty)
    assert main(["partition", "--ref", str(empty), "--out", str(tmp_path / "pe.pgm")]) == 0
    assert not load_raster(tmp_path / "pe.pgm").values.any()


@pytest.mark.slow
def test_bench_row_counts(tmp_path):
    out = tmp_path / "bench.csv"
    args = ["bench", "--out", str(out), "--strategies", "uc,obuc", "--rates", "0.05,0.1,0.2", "--runs", "10"]
    assert main([*args, *TINY, *FAST_NET]) == 0
    rows = read_csv(out)
    kinds = [r["row_type"] for r in rows]
    assert kinds.count("failed") + kinds.count("run") == 60
    assert kinds.count("aggregate") == 6
    assert kinds.count("ttest") == 3
    for r in rows:
        if r["row_type"] == "run" and r["strategy"] == "obuc":
            assert r["n_changed"] == r["n_unchanged"]


def test_bench_is_deterministic(tmp_path):
    args = ["--strategies", "uc,buc", "--rates", "0.1", "--runs", "2", *TINY, *FAST_NET]
    assert main(["bench", "--out", str(tmp_path / "a.csv"), *args]) == 0
    assert main(["bench", "--out", str(tmp_path / "b.csv"), *args]) == 0
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    rows = read_csv(tmp_path / "a.csv")
    assert [r["row_type"] for r in rows] == ["run"] * 4 + ["aggregate"] * 2 + ["ttest"]
