import csv
import json
import shutil

import pytest

from msmr.cli import main
from msmr.scenegen.io import read_pgm


@pytest.fixture(scope="module")
def smoke(tmp_path_factory):
    """hierarchy -> 20 scenes -> 3-epoch training -> predict -> eval."""
    root = tmp_path_factory.mktemp("smoke")
    assert main(["build-hierarchy", "--toy", "--out", str(root / "h")]) == 0
    assert main(["gen-scenes", "--count", "20", "--seed", "3", "--size", "64", "--out", str(root / "data")]) == 0
    assert main(["train-toy", "--data", str(root / "data"), "--hierarchy", str(root / "h"),
                 "--epochs", "3", "--out", str(root / "model")]) == 0
    assert main(["predict", "--model", str(root / "model"), "--data", str(root / "data"), "--out", str(root / "pred")]) == 0
    assert main(["eval", "--pred", str(root / "pred"), "--gt", str(root / "data"), "--out", str(root / "report.json")]) == 0
    return root


def test_smoke_pipeline_report(smoke):
    report = json.loads((smoke / "report.json").read_text())
    assert report["count"] == 20
    assert set(report["mean"]) == {"pa_mpjpe_mm", "pa_mpvpe_mm", "auc", "f@5mm", "f@15mm"}
    assert all(v >= 0 for v in report["mean"].values())
    history = (smoke / "model" / "history.csv").read_text().splitlines()
    assert history[0] == "epoch,lr,loss,eval_loss" and len(history) == 4
    assert sorted(p.name for p in (smoke / "data").iterdir())[:2] == ["manifest.jsonl", "scene_00000"]
    assert len(list((smoke / "pred").glob("scene_*.json"))) == 20


def test_vr_report(smoke, capsys):
    out = smoke / "vr.csv"
    assert main(["vr-report", "--manifest", str(smoke / "data" / "manifest.jsonl"), "--pred", str(smoke / "pred"),
                 "--out", str(out)]) == 0
    rows = list(csv.reader(out.read_text().splitlines()))
    assert rows[0] == ["vr_range", "count", "auc", "pa_mpjpe_mm"]
    assert sum(int(r[1]) for r in rows[1:]) == 20
    assert all(r[0].startswith("[") for r in rows[1:])


def test_scene_masks_on_disk(smoke):
    m = read_pgm(smoke / "data" / "scene_00000" / "mask_scene.pgm")
    assert m.shape == (64, 64)
    assert set(m.ravel()) <= {0, 1, 2}


def test_eval_count_mismatch_exits_1(smoke, tmp_path, capsys):
    pred = tmp_path / "pred"
    shutil.copytree(smoke / "pred", pred)
    (pred / "scene_00004.json").unlink()
    assert main(["eval", "--pred", str(pred), "--gt", str(smoke / "data"), "--out", str(tmp_path / "r.json")]) == 1
    err = capsys.readouterr().err
    assert "19 predictions but 20" in err
    assert not (tmp_path / "r.json").exists()


def test_gen_scenes_deterministic(tmp_path):
    for run in ("a", "b"):
        assert main(["gen-scenes", "--count", "2", "--seed", "7", "--size", "32", "--out", str(tmp_path / run)]) == 0
    for i in range(2):
        name = f"scene_{i:05d}"
        a = (tmp_path / "a" / name / "scene.json").read_bytes()
        assert a == (tmp_path / "b" / name / "scene.json").read_bytes()
        assert json.loads(a)["seed"] == 7 * 100_000 + i
    assert (tmp_path / "a" / "manifest.jsonl").read_bytes() != b""


def test_gen_scenes_threads_match_serial(tmp_path):
    assert main(["gen-scenes", "--count", "2", "--seed", "7", "--size", "32", "--threads", "2", "--out", str(tmp_path / "t")]) == 0
    assert main(["gen-scenes", "--count", "2", "--seed", "7", "--size", "32", "--out", str(tmp_path / "s")]) == 0
    for name in ("scene_00000/scene.json", "scene_00001/scene.json", "manifest.jsonl"):
        assert (tmp_path / "t" / name).read_bytes() == (tmp_path / "s" / name).read_bytes()


def test_usage_errors_exit_2(capsys):
    assert main(["nonsense"]) == 2
    assert main(["gen-scenes", "--count", "2", "--bogus"]) == 2
    assert main([]) == 2
    assert "usage" in capsys.readouterr().err


def test_domain_error_exits_1_without_output(tmp_path, capsys):
    assert main(["predict", "--model", str(tmp_path / "none"), "--data", str(tmp_path), "--out", str(tmp_path / "p")]) == 1
    assert not (tmp_path / "p").exists()
    assert main(["gen-scenes", "--count", "-1", "--out", str(tmp_path / "g")]) == 1
    assert not (tmp_path / "g").exists()
