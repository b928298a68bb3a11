"""Rendering a scene and reading/writing its on-disk form.

A scene directory holds scene.json (poses, transforms, seed, camera,
visibility ratios), model_<id>.obj (posed meshes), mask_scene.pgm,
mask_only_<id>.pgm (8-bit id masks) and image.ppm (shaded RGB).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from msmr.mesh.mesh import format_obj
from msmr.mesh.shapes import cylinder
from msmr.metrics.visibility import UndefinedVisibilityError, visibility_ratio
from msmr.pipeline.atomic import atomic_directory

from .capsules import cylinder_capsule
from .generate import hand_models
from .raster import Camera, rasterize_masks, shade
from .scene import Scene, SceneModel

FORMAT_VERSION = 1
COLORS = {1: (0.95, 0.75, 0.6), 2: (0.55, 0.7, 1.0), 3: (0.5, 0.9, 0.5)}


class SceneFormatError(ValueError):
    pass


@dataclass
class Render:
    mask_scene: np.ndarray
    masks_only: dict[int, np.ndarray]
    image: np.ndarray
    visibility: dict[int, float | None]


def render_scene(scene: Scene, camera: Camera) -> Render:
    meshes = [(m.id, m.posed_vertices(), m.faces()) for m in scene.models]
    mask, only = rasterize_masks(meshes, camera)
    colors = {m.id: COLORS[3] if m.kind == "object" else COLORS[m.id] for m in scene.models}
    image = shade(meshes, camera, colors)
    vr = {}
    for oid in only:
        try:
            vr[oid] = visibility_ratio(mask, only[oid], oid)
        except UndefinedVisibilityError:
            vr[oid] = None
    return Render(mask, only, image, vr)


def _model_json(m: SceneModel) -> dict:
    d = {
        "id": m.id,
        "name": m.name,
        "kind": m.kind,
        "rotation": m.rotation.tolist(),
        "translation": m.translation.tolist(),
        "mesh": f"model_{m.id}.obj",
    }
    if m.kind == "hand":
        d["angles_rad"] = m.angles.tolist()
        d["joints"] = m.posed_joints().tolist()
    else:
        d["params"] = dict(m.params)
    return d


def scene_to_json(scene: Scene, camera: Camera, visibility: dict[int, float | None] | None = None) -> dict:
    d = {
        "format": FORMAT_VERSION,
        "seed": int(scene.seed),
        "mode": scene.mode,
        "camera": camera.to_json(),
        "models": [_model_json(m) for m in scene.models],
    }
    if visibility is not None:
        d["visibility"] = {str(k): v for k, v in sorted(visibility.items())}
    return d


def dumps(data: dict) -> str:
    """Canonical JSON: sorted keys, repr floats, trailing newline."""
    return json.dumps(data, sort_keys=True, indent=1) + "\n"


def scene_from_json(data: dict, asset_root: str | None = None) -> Scene:
    if data.get("format") != FORMAT_VERSION:
        raise SceneFormatError(f"unsupported scene format {data.get('format')!r}")
    left, right = hand_models(asset_root)
    models = []
    for d in data["models"]:
        m = SceneModel(d["id"], d["name"], d["kind"], np.array(d["rotation"]), np.array(d["translation"]))
        if m.kind == "hand":
            m.angles = np.array(d["angles_rad"])
            m.hand = right if m.name.startswith("right") else left
        else:
            p = d["params"]
            m.mesh = cylinder(p["radius"], p["height"])
            m.object_capsules = cylinder_capsule(p["radius"], p["height"])
            m.params = dict(p)
        models.append(m)
    return Scene(models, data["seed"], data["mode"])


def format_pgm(mask: np.ndarray) -> bytes:
    m = np.asarray(mask)
    if m.min() < 0 or m.max() > 255:
        raise ValueError("PGM masks hold ids 0..255")
    h, w = m.shape
    return f"P5\n{w} {h}\n255\n".encode() + m.astype(np.uint8).tobytes()


def format_ppm(image: np.ndarray) -> bytes:
    h, w, _ = image.shape
    return f"P6\n{w} {h}\n255\n".encode() + np.asarray(image, np.uint8).tobytes()


def _parse_netpbm(data: bytes, magic: bytes, channels: int) -> np.ndarray:
    tokens, pos = [], 0
    while len(tokens) < 4:
        while data[pos : pos + 1].isspace():
            pos += 1
        if data[pos : pos + 1] == b"#":
            pos = data.index(b"\n", pos) + 1
            continue
        end = pos
        while not data[end : end + 1].isspace():
            end += 1
        tokens.append(data[pos:end])
        pos = end
    if tokens[0] != magic:
        raise SceneFormatError(f"expected {magic.decode()} image, got {tokens[0]!r}")
    w, h, maxval = (int(t) for t in tokens[1:])
    if maxval != 255:
        raise SceneFormatError("only 8-bit images are supported")
    pixels = np.frombuffer(data[pos + 1 : pos + 1 + w * h * channels], np.uint8)
    if pixels.size != w * h * channels:
        raise SceneFormatError("truncated image data")
    return pixels.reshape((h, w, channels) if channels > 1 else (h, w))


def read_pgm(path: str | Path) -> np.ndarray:
    return _parse_netpbm(Path(path).read_bytes(), b"P5", 1)


def read_ppm(path: str | Path) -> np.ndarray:
    return _parse_netpbm(Path(path).read_bytes(), b"P6", 3)


def write_scene(scene: Scene, out_dir: str | Path, camera: Camera) -> dict:
    """Render and write one scene directory atomically; returns the scene JSON."""
    render = render_scene(scene, camera)
    data = scene_to_json(scene, camera, render.visibility)
    with atomic_directory(Path(out_dir)) as tmp:
        (tmp / "scene.json").write_text(dumps(data))
        for m in scene.models:
            (tmp / f"model_{m.id}.obj").write_text(format_obj(m.posed_mesh()))
            (tmp / f"mask_only_{m.id}.pgm").write_bytes(format_pgm(render.masks_only[m.id]))
        (tmp / "mask_scene.pgm").write_bytes(format_pgm(render.mask_scene))
        (tmp / "image.ppm").write_bytes(format_ppm(render.image))
    return data
