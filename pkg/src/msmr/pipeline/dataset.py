"""Training and evaluation samples read from a scene manifest."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from msmr.hierarchy.pyramid import MeshHierarchy
from msmr.mesh.kinematics import MIDDLE_MCP
from msmr.mesh.mesh import read_obj
from msmr.mesh.regressor import root_center
from msmr.model.data import Sample, normalize_image, resize_image
from msmr.scenegen.io import read_ppm

from .manifest import Manifest, ManifestRecord

HAND_ID = 1  # the left hand: the centre hand in hand-hand scenes, the mover in hand-object scenes


@dataclass
class GroundTruth:
    name: str
    vertices: np.ndarray  # finest-level subset of the posed hand, root-centred
    joints: np.ndarray  # posed joints, root-centred
    visibility: float | None


def scene_name(record: ManifestRecord) -> str:
    return record.scene.rstrip("/").split("/")[-1]


def ground_truth(manifest: Manifest, record: ManifestRecord, source_indices: np.ndarray | None = None) -> GroundTruth:
    data = json.loads(manifest.path(f"{record.scene}/scene.json").read_text())
    model = next((m for m in data["models"] if m["id"] == HAND_ID), None)
    if model is None or model["kind"] != "hand":
        raise ValueError(f"record {record.scene}: no hand with id {HAND_ID}")
    verts = read_obj(manifest.path(record.meshes[str(HAND_ID)])).vertices
    if source_indices is not None:
        verts = verts[source_indices]
    verts, joints = root_center(verts, np.array(model["joints"]), MIDDLE_MCP)
    return GroundTruth(scene_name(record), verts, joints, record.visibility.get(str(HAND_ID)))


def load_image(manifest: Manifest, record: ManifestRecord, size: int) -> np.ndarray:
    return resize_image(normalize_image(read_ppm(manifest.path(f"{record.scene}/image.ppm"))), size)


def load_samples(manifest: Manifest, hierarchy: MeshHierarchy, image_size: int) -> list[Sample]:
    out = []
    for r in manifest.records:
        gt = ground_truth(manifest, r, hierarchy.source_indices)
        out.append(Sample(load_image(manifest, r, image_size), gt.vertices, gt.name))
    return out
