"""End-to-end steps: dataset generation, toy training, prediction, evaluation."""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from msmr.hierarchy.pyramid import MeshHierarchy, build_hierarchy, load_hierarchy, save_hierarchy
from msmr.mesh.assets import load_hand
from msmr.mesh.regressor import JointRegressor, regress_joints
from msmr.metrics.pose import evaluate_sample
from msmr.metrics.visibility import BucketRow, bucket_report
from msmr.model.net import MeshNet, ModelConfig
from msmr.model.train import TrainConfig, TrainResult, train
from msmr.numeric import checkpoint
from msmr.scenegen.generate import GenerationConfig, generate_interaction
from msmr.scenegen.io import dumps, write_scene
from msmr.scenegen.raster import Camera

from .atomic import atomic_directory, atomic_write_text
from .dataset import ground_truth, load_image, load_samples, scene_name
from .manifest import Manifest, ManifestRecord, format_manifest, load_manifest
from .seeds import substream

SEED_STRIDE = 100_000  # scene i of run seed s uses seed s * SEED_STRIDE + i
TOY_LEVELS = 4
TOY_FINEST = 20
TOY_SPIRALS = (9, 9, 9, 9)


class CountMismatchError(ValueError):
    pass


def scene_seed(run_seed: int, index: int) -> int:
    return run_seed * SEED_STRIDE + index


def toy_hierarchy(asset_root: str | None = None) -> MeshHierarchy:
    asset = load_hand(asset_root)
    return build_hierarchy(asset.mesh, TOY_LEVELS, TOY_SPIRALS, asset.regressor, finest_count=TOY_FINEST)


# --- scenes ---------------------------------------------------------------------


def _make_scene(job) -> dict:
    index, seed, mode, cfg_json, camera_json, staging, asset_root = job
    cfg = GenerationConfig.from_json(cfg_json)
    camera = Camera.from_json(camera_json)
    scene = generate_interaction(seed, cfg, mode, asset_root)
    name = f"scene_{index:05d}"
    data = write_scene(scene, Path(staging) / name, camera)
    ids = [m["id"] for m in data["models"]]
    return ManifestRecord(
        scene=name,
        seed=seed,
        mode=mode,
        object_ids=ids,
        camera=camera_json,
        meshes={str(i): f"{name}/model_{i}.obj" for i in ids},
        visibility=data["visibility"],
    ).to_json()


def generate_dataset(
    out_dir: str | Path,
    count: int,
    seed: int,
    mode: str = "hand-hand",
    threads: int = 1,
    camera: Camera | None = None,
    config: GenerationConfig | None = None,
    asset_root: str | None = None,
) -> Manifest:
    """Generate, render and write ``count`` scenes plus manifest.jsonl.

    The output directory appears only once every scene succeeded.
    """
    if count < 0:
        raise ValueError("count must be non-negative")
    camera = camera or Camera()
    cfg = config or GenerationConfig()
    out_dir = Path(out_dir)
    with atomic_directory(out_dir) as staging:
        jobs = [
            (i, scene_seed(seed, i), mode, cfg.to_json(), camera.to_json(), str(staging), asset_root)
            for i in range(count)
        ]
        if threads > 1 and count > 1:
            with ProcessPoolExecutor(max_workers=threads) as pool:
                records = list(pool.map(_make_scene, jobs))
        else:
            records = [_make_scene(j) for j in jobs]
        manifest = Manifest([ManifestRecord.from_json(r) for r in records], out_dir)
        (staging / "manifest.jsonl").write_text(format_manifest(manifest))
    return manifest


# --- training -------------------------------------------------------------------


@dataclass
class TrainOutcome:
    model: MeshNet
    result: TrainResult

    @property
    def first_loss(self) -> float:
        return self.result.history[0].loss

    @property
    def last_loss(self) -> float:
        return self.result.history[-1].loss


def train_model(
    manifest: Manifest,
    hierarchy: MeshHierarchy,
    model_cfg: ModelConfig,
    train_cfg: TrainConfig,
    on_epoch=None,
) -> TrainOutcome:
    samples = load_samples(manifest, hierarchy, model_cfg.image_size)
    model = MeshNet.create(model_cfg, hierarchy, substream(train_cfg.seed, "init"))
    result = train(model, samples, train_cfg, on_epoch=on_epoch)
    return TrainOutcome(model, result)


def save_model(out_dir: str | Path, outcome: TrainOutcome, train_cfg: TrainConfig) -> None:
    out_dir = Path(out_dir)
    with atomic_directory(out_dir) as d:
        save_hierarchy(outcome.model.hierarchy, d / "hierarchy")
        meta = outcome.model.meta()
        meta["train"] = train_cfg.to_json()
        (d / "model.ckpt").write_bytes(checkpoint.dumps(outcome.model.state(), meta))
        (d / "history.csv").write_text(outcome.result.to_csv())
        (d / "config.json").write_text(dumps({"model": outcome.model.config.to_json(), "train": train_cfg.to_json()}))


def load_model(model_dir: str | Path) -> MeshNet:
    model_dir = Path(model_dir)
    arrays, meta = checkpoint.load(model_dir / "model.ckpt")
    h = load_hierarchy(model_dir / "hierarchy")
    net = MeshNet.create(ModelConfig.from_json(meta["model"]), h, np.random.default_rng(0))
    net.load_state(arrays)
    return net


# --- prediction and evaluation ----------------------------------------------------


def predict_dataset(model: MeshNet, manifest: Manifest, out_dir: str | Path) -> int:
    """One JSON per scene with predicted finest-level vertices and regressed joints."""
    h = model.hierarchy
    reg = h.regressor(0)
    if reg is None:
        raise ValueError("the model's hierarchy has no joint regressor")
    with atomic_directory(Path(out_dir)) as d:
        (d / "meta.json").write_text(
            dumps(
                {
                    "regressor": reg.to_json(),
                    "source_indices": None if h.source_indices is None else h.source_indices.tolist(),
                }
            )
        )
        for r in manifest.records:
            v = model.predict(load_image(manifest, r, model.config.image_size))
            out = {"scene": scene_name(r), "seed": r.seed, "vertices": v.tolist(), "joints": regress_joints(v, reg).tolist()}
            (d / f"{scene_name(r)}.json").write_text(dumps(out))
    return len(manifest.records)


@dataclass
class _PredSet:
    regressor: JointRegressor
    source_indices: np.ndarray | None
    by_scene: dict[str, dict]


def _load_predictions(pred_dir: str | Path) -> _PredSet:
    pred_dir = Path(pred_dir)
    meta_path = pred_dir / "meta.json"
    if not meta_path.exists():
        raise FileNotFoundError(f"{pred_dir} is not a prediction directory (missing meta.json)")
    meta = json.loads(meta_path.read_text())
    preds = {}
    for p in sorted(pred_dir.glob("*.json")):
        if p.name != "meta.json":
            d = json.loads(p.read_text())
            preds[d["scene"]] = d
    src = meta.get("source_indices")
    return _PredSet(JointRegressor.from_json(meta["regressor"]), None if src is None else np.array(src), preds)


def _paired(pred_dir, manifest: Manifest):
    ps = _load_predictions(pred_dir)
    if len(ps.by_scene) != len(manifest.records):
        raise CountMismatchError(
            f"{len(ps.by_scene)} predictions but {len(manifest.records)} ground-truth scenes"
        )
    missing = [scene_name(r) for r in manifest.records if scene_name(r) not in ps.by_scene]
    if missing:
        raise CountMismatchError(f"no prediction for scene {missing[0]} ({len(missing)} missing)")
    for r in manifest.records:
        gt = ground_truth(manifest, r, ps.source_indices)
        p = ps.by_scene[gt.name]
        # joints on both sides come from the same regressor so that a perfect
        # vertex prediction scores zero
        gt_joints = regress_joints(gt.vertices, ps.regressor)
        yield gt, np.array(p["vertices"]), np.array(p["joints"]), gt_joints


def evaluate_predictions(pred_dir: str | Path, gt_dir: str | Path) -> dict:
    manifest = load_manifest(gt_dir)
    per = []
    for gt, pv, pj, gj in _paired(pred_dir, manifest):
        rep = evaluate_sample(pv, gt.vertices, pj, gj, vr=gt.visibility)
        per.append({"scene": gt.name, **rep.to_json()})
    keys = ["pa_mpjpe_mm", "pa_mpvpe_mm", "auc"]
    mean = {k: math.fsum(s[k] for s in per) / len(per) for k in keys} if per else {}
    if per:
        for t in per[0]["f_scores"]:
            mean[f"f@{t}"] = math.fsum(s["f_scores"][t] for s in per) / len(per)
    return {"count": len(per), "mean": mean, "samples": per}


def vr_rows(pred_dir: str | Path, manifest_path: str | Path) -> list[BucketRow]:
    """Per-bucket mean AUC and PA-MPJPE over the evaluated (left) hand."""
    manifest = load_manifest(manifest_path)
    samples = []
    for gt, pv, pj, gj in _paired(pred_dir, manifest):
        if gt.visibility is None:
            continue
        rep = evaluate_sample(pv, gt.vertices, pj, gj)
        samples.append((gt.visibility, rep.auc, rep.pa_mpjpe))
    return bucket_report(samples)


def write_json(path: str | Path, data: dict) -> None:
    atomic_write_text(Path(path), dumps(data))
