"""Regenerate the shipped low-poly hand template.

Run ``python -m msmr.mesh.template_builder [out_dir]``. Needs scikit-image
(the ``assets`` extra). The hand is a smooth union of capsules, one per
finger segment plus a webbed fan of wrist-to-knuckle capsules for the palm.
It is meshed with marching cubes and reduced with the package's own QEM
contraction to ``TEMPLATE_VERTICES`` vertices.

Conventions: meters, wrist at the origin, fingers along +y, palm facing -z,
thumb on +x (a left hand seen from the palm side).
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import numpy as np

from .kinematics import HAND_PARENTS, KinematicChain, Skinning
from .mesh import Mesh, format_obj
from .regressor import fit_regressor

TEMPLATE_VERTICES = 160
DATA_DIR = Path(__file__).with_name("data")

# finger: (mcp position, direction angle from +y in degrees, segment lengths, radius)
_FINGERS = {
    "index": ((0.026, 0.090, 0.0), 9.0, (0.040, 0.025, 0.020), 0.0084),
    "middle": ((0.004, 0.095, 0.0), 0.0, (0.045, 0.028, 0.022), 0.0087),
    "ring": ((-0.018, 0.090, 0.0), -9.0, (0.042, 0.026, 0.021), 0.0081),
    "pinky": ((-0.038, 0.079, 0.0), -19.0, (0.032, 0.020, 0.018), 0.0071),
}
_THUMB = ((0.022, 0.022, -0.004), (0.046, 0.045, -0.008), (0.062, 0.068, -0.010), (0.072, 0.088, -0.010))
_THUMB_RADIUS = 0.0095
_PALM_RADIUS = 0.0115


def rest_joints() -> np.ndarray:
    j = np.zeros((21, 3))
    j[1:5] = _THUMB
    for base, name in zip((5, 9, 13, 17), ("index", "middle", "ring", "pinky")):
        mcp, angle, lengths, _ = _FINGERS[name]
        d = np.array([np.sin(np.radians(angle)), np.cos(np.radians(angle)), 0.0])
        p = np.array(mcp)
        j[base] = p
        for k, seg in enumerate(lengths):
            p = p + seg * d
            j[base + k + 1] = p
    return j


def _segment_distance(p: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    ab = b - a
    t = np.clip(((p - a) @ ab) / (ab @ ab), 0.0, 1.0)
    return np.linalg.norm(p - (a + t[:, None] * ab), axis=1)


def _smooth_min(a: np.ndarray, b: np.ndarray, k: float) -> np.ndarray:
    h = np.clip(0.5 + 0.5 * (b - a) / k, 0.0, 1.0)
    return b * (1 - h) + a * h - k * h * (1 - h)


def hand_sdf(points: np.ndarray, joints: np.ndarray) -> np.ndarray:
    # palm: webbed fan of wrist-to-knuckle capsules
    d = _segment_distance(points, joints[0], joints[9]) - _PALM_RADIUS
    for knuckle in (1, 5, 13, 17):
        d = _smooth_min(d, _segment_distance(points, joints[0], joints[knuckle]) - _PALM_RADIUS, 0.008)
    radii = {1: _THUMB_RADIUS, 5: _FINGERS["index"][3], 9: _FINGERS["middle"][3],
             13: _FINGERS["ring"][3], 17: _FINGERS["pinky"][3]}
    for base, r in radii.items():
        for k in range(3):
            a, b = joints[base + k], joints[base + k + 1]
            taper = r * (1.0 - 0.07 * k)
            d = _smooth_min(d, _segment_distance(points, a, b) - taper, 0.004)
    return d


def marching_cubes_hand(spacing: float = 0.002) -> Mesh:
    from skimage import measure

    joints = rest_joints()
    lo = np.array([-0.085, -0.03, -0.03])
    hi = np.array([0.1, 0.215, 0.03])
    axes = [np.arange(l, h + spacing, spacing) for l, h in zip(lo, hi)]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    sdf = hand_sdf(grid.reshape(-1, 3), joints).reshape(grid.shape[:3])
    verts, faces, _, _ = measure.marching_cubes(sdf, level=0.0, spacing=(spacing,) * 3)
    verts = verts + lo
    return _clean(verts, faces)


def _clean(verts: np.ndarray, faces: np.ndarray) -> Mesh:
    """Merge coincident vertices and drop degenerate faces."""
    keyed = np.round(verts / 1e-9).astype(np.int64)
    _, first, inverse = np.unique(keyed, axis=0, return_index=True, return_inverse=True)
    inverse = inverse.reshape(-1)
    v = verts[first]
    f = inverse[faces]
    ok = (f[:, 0] != f[:, 1]) & (f[:, 1] != f[:, 2]) & (f[:, 0] != f[:, 2])
    f = f[ok]
    area = np.linalg.norm(np.cross(v[f[:, 1]] - v[f[:, 0]], v[f[:, 2]] - v[f[:, 0]]), axis=1)
    f = f[area > 1e-14]
    used = np.unique(f)
    remap = -np.ones(len(v), dtype=np.int64)
    remap[used] = np.arange(len(used))
    return Mesh(v[used], remap[f])


def assign_bones(vertices: np.ndarray, joints: np.ndarray, parents=HAND_PARENTS) -> np.ndarray:
    """Nearest-bone rigid skinning; returns the child joint of each vertex's bone."""
    children = [c for c in range(1, len(parents))]
    dist = np.stack([_segment_distance(vertices, joints[parents[c]], joints[c]) for c in children], axis=1)
    return np.asarray(children)[np.argmin(dist, axis=1)]


def build_template(spacing: float = 0.002, target: int = TEMPLATE_VERTICES):
    from msmr.hierarchy.qem import decimate_qem

    dense = marching_cubes_hand(spacing)
    if not dense.is_closed():
        raise RuntimeError("marching cubes surface is not closed")
    mesh, _ = decimate_qem(dense, target)
    joints = rest_joints()
    v = mesh.vertices

    bone_child = assign_bones(v, joints)
    tips = {}
    for tip in (4, 8, 12, 16, 20):
        d = joints[tip] - joints[tip - 1]
        d /= np.linalg.norm(d)
        own = np.flatnonzero(bone_child == tip)
        tips[tip] = int(own[np.argmax((v[own] - joints[tip - 1]) @ d)])
        joints[tip] = v[tips[tip]]
    bone_child = assign_bones(v, joints)
    vertex_joint = np.asarray(HAND_PARENTS)[bone_child]

    next_joint = [9] + [(i + 1) if i % 4 else -1 for i in range(1, 21)]
    flexion: list[int | None] = [None] * 21
    palm_side = np.array([0.0, 0.0, -1.0])
    for i in range(21):
        if next_joint[i] < 0:
            continue
        own = np.flatnonzero(vertex_joint == i)
        z = joints[next_joint[i]] - joints[i]
        z /= np.linalg.norm(z)
        rel = v[own] - joints[i]
        perp = rel - np.outer(rel @ z, z)
        if i == 0:
            score = perp @ np.array([1.0, 0.0, 0.0])
        else:
            score = perp @ palm_side
        flexion[i] = int(own[np.argmax(score)])

    chain = KinematicChain(joints, HAND_PARENTS, tuple(next_joint), tuple(flexion))
    regressor = fit_regressor(v, joints, k=8, forced=tips)
    return mesh, chain, Skinning(bone_child), regressor


def write_template(out_dir: Path = DATA_DIR, spacing: float = 0.002) -> None:
    mesh, chain, skin, reg = build_template(spacing)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "hand_template.obj").write_text(format_obj(mesh))
    (out_dir / "hand_chain.json").write_text(json.dumps(chain.to_json(), indent=1))
    (out_dir / "hand_skinning.json").write_text(json.dumps(skin.to_json()))
    (out_dir / "hand_regressor.json").write_text(json.dumps(reg.to_json()))


if __name__ == "__main__":
    write_template(Path(sys.argv[1]) if len(sys.argv) > 1 else DATA_DIR)
