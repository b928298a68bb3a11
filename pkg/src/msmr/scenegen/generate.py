"""Seeded interaction-scene generation.

1. A centre model (left hand, or a procedural cylinder) gets a uniformly
   random rotation and sits at the origin.
2. A hand is placed at neutral pose on a random direction, palm normal
   aimed at the centre, beyond the two bounding spheres.
3. It moves toward the centre in fixed steps until it first touches the
   centre model, then backs off one step.
4. Each articulated joint of every hand in turn tries one angle step about
   a random local axis (with a per-scene direction per joint and axis);
   the move is kept only if the scene stays valid and within the limit.
5. Step 4 repeats until a full pass accepts nothing.

Contact between models is tested on bone capsules plus bounding spheres of
the faces spanning several bones (which capsules alone do not cover), so
accepted scenes are also free of mesh-level interpenetration between models.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from functools import lru_cache

import numpy as np
from scipy.spatial.transform import Rotation

from msmr.mesh.assets import load_hand
from msmr.mesh.shapes import cylinder
from msmr.pipeline.seeds import substream

from .capsules import CapsuleSet, capsule_gaps, cylinder_capsule
from .scene import Articulated, ContactProxy, Scene, SceneModel, contact_free, proxies_clear

MODES = ("hand-hand", "hand-object")
LEFT, SECOND = 1, 2


class GenerationError(RuntimeError):
    def __init__(self, seed: int, reason: str):
        super().__init__(f"scene generation failed for seed {seed}: {reason}")
        self.seed = seed


@dataclass
class GenerationConfig:
    shift_step: float = 0.002  # meters
    angle_step_deg: float = 5.0
    angle_limit_deg: float = 60.0
    max_passes: int = 200
    max_retries: int = 20
    capsule_margin: float = 0.001
    placement_gap: float = 0.01
    object_radius: tuple[float, float] = (0.02, 0.035)
    object_height: tuple[float, float] = (0.08, 0.15)

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, data: dict) -> "GenerationConfig":
        d = dict(data)
        for k in ("object_radius", "object_height"):
            if k in d:
                d[k] = tuple(d[k])
        return cls(**d)


@lru_cache(maxsize=8)
def hand_models(root: str | None = None, margin: float = 0.001) -> tuple[Articulated, Articulated]:
    """(left, right) articulated hands; the right hand mirrors the template."""
    asset = load_hand(root)
    return Articulated.build(asset, margin), Articulated.build(asset.mirrored(), margin)


def _rotation_between(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Proper rotation taking unit vector u onto unit vector v."""
    axis = np.cross(u, v)
    s, c = np.linalg.norm(axis), float(u @ v)
    if s < 1e-12:
        if c > 0:
            return np.eye(3)
        perp = np.eye(3)[int(np.argmin(np.abs(u)))]
        perp = perp - (perp @ u) * u
        return Rotation.from_rotvec(np.pi * perp / np.linalg.norm(perp)).as_matrix()
    return Rotation.from_rotvec(axis / s * np.arctan2(s, c)).as_matrix()


def _bounding_radius(model: SceneModel) -> float:
    caps = model.capsules()
    ends = np.vstack([caps.a, caps.b])
    r = np.concatenate([caps.radius, caps.radius])
    return float(np.max(np.linalg.norm(ends, axis=1) + r))


def _centred(model: SceneModel, R: np.ndarray) -> None:
    """Rotate by R about the rest-mesh centroid and put that centroid at the origin."""
    rest = model.hand.asset.mesh.vertices if model.kind == "hand" else model.mesh.vertices
    model.rotation = R
    model.translation = -R @ rest.mean(axis=0)


def _centre_model(mode: str, rng: np.random.Generator, cfg: GenerationConfig, left: Articulated) -> SceneModel:
    R = Rotation.random(random_state=rng).as_matrix()
    if mode == "hand-hand":
        m = SceneModel(LEFT, "left_hand", "hand", angles=np.zeros((21, 3)), hand=left)
    else:
        radius = float(rng.uniform(*cfg.object_radius))
        height = float(rng.uniform(*cfg.object_height))
        m = SceneModel(
            SECOND, "cylinder", "object",
            mesh=cylinder(radius, height),
            object_capsules=cylinder_capsule(radius, height, cfg.capsule_margin),
            params={"radius": radius, "height": height},
        )
    _centred(m, R)
    return m


def _approach(centre: SceneModel, mover: SceneModel, direction: np.ndarray, cfg: GenerationConfig) -> bool:
    """Step ``mover`` along -direction until contact, then back off one step.

    Returns False if the mover passes the centre without touching it.
    """
    target = ContactProxy.of(centre)
    start = mover.translation.copy()
    distance = float(direction @ (mover.translation - centre.translation)) + _bounding_radius(centre)
    steps = int(np.ceil(distance / cfg.shift_step)) + 1
    for k in range(1, steps + 1):
        mover.translation = start - k * cfg.shift_step * direction
        if not proxies_clear(target, ContactProxy.of(mover)):
            mover.translation = start - (k - 1) * cfg.shift_step * direction
            return True
    return False


def _place_hand(
    centre: SceneModel, hand: SceneModel, rng: np.random.Generator, cfg: GenerationConfig
) -> np.ndarray:
    """Random facing orientation and start position; returns the approach direction."""
    d = rng.normal(size=3)
    d /= np.linalg.norm(d)
    roll = float(rng.uniform(0.0, 2 * np.pi))
    R = _rotation_between(hand.hand.palm_normal, -d)
    R = Rotation.from_rotvec(-d * roll).as_matrix() @ R
    _centred(hand, R)
    reach = _bounding_radius(centre) + _bounding_radius(hand) + cfg.placement_gap
    hand.translation = hand.translation + reach * d
    return d


class _HandState:
    """World contact proxy of one hand, updated one joint move at a time."""

    def __init__(self, model: SceneModel):
        self.model = model
        self.art = art = model.hand
        chain = art.asset.chain
        proxy = ContactProxy.of(model)
        self.a, self.b, self.r = proxy.capsules.a.copy(), proxy.capsules.b.copy(), proxy.capsules.radius
        self.c, self.cr = proxy.centres.copy(), proxy.radii.copy()
        self.parent = np.asarray(chain.parent)[art.rest_capsules.segment]
        # which spanning faces move with each joint
        n = chain.n_joints
        below = np.eye(n, dtype=bool)  # below[j, k]: k is j or a descendant of j
        for k in chain.traversal:
            p = chain.parent[k]
            if p != k:
                below[:, k] |= below[:, p]
        mover = np.asarray(chain.parent)[art.asset.skinning.bone_child]
        face_mover = mover[model.faces()[art.spanning_faces]]
        self.vertex_joint = mover
        self.sphere_moved_by = [np.flatnonzero(below[j][face_mover].any(axis=1)) for j in range(n)]

    def moved(self, joint: int, angles: np.ndarray):
        """New world capsule endpoints and spheres for the parts a move at ``joint`` affects."""
        m = self.model
        idx = self.art.moved_by[joint]
        A, t = m.local_transforms(angles)
        rest = self.art.rest_capsules
        p = self.parent[idx]
        a = np.einsum("nij,nj->ni", A[p], rest.a[idx]) + t[p]
        b = np.einsum("nij,nj->ni", A[p], rest.b[idx]) + t[p]
        R, T = m.rotation, m.translation
        sidx = self.sphere_moved_by[joint]
        asset = self.art.asset
        vj = self.vertex_joint
        faces = asset.mesh.faces[self.art.spanning_faces[sidx]]
        tri = np.einsum("fkij,fkj->fki", A[vj[faces]], asset.mesh.vertices[faces]) + t[vj[faces]]
        centre = tri.mean(axis=1)
        radius = np.linalg.norm(tri - centre[:, None], axis=2).max(axis=1) + self.art.margin
        return idx, a @ R.T + T, b @ R.T + T, sidx, centre @ R.T + T, radius

    def capsules(self, idx=slice(None)) -> CapsuleSet:
        seg = self.art.rest_capsules.segment[idx]
        return CapsuleSet(self.a[idx], self.b[idx], self.r[idx], np.zeros(len(seg), int), seg)


def _move_ok(states: list[_HandState], others: list[ContactProxy], h: int, move) -> bool:
    idx, a, b, sidx, c, cr = move
    st = states[h]
    new_a, new_b = st.a.copy(), st.b.copy()
    new_a[idx], new_b[idx] = a, b
    r = st.r[idx]
    if np.any(capsule_gaps(a, b, r, new_a, new_b, st.r) < st.art.allowed[idx] - 1e-9):
        return False
    moved = ContactProxy(CapsuleSet(a, b, r, np.zeros(len(idx), int), idx), c, cr)
    for k, other in enumerate(states):
        if k == h:
            continue
        o = ContactProxy(other.capsules(), other.c, other.cr)
        # moved capsules and spheres against everything of the other hand
        if not proxies_clear(moved, o):
            return False
    return all(proxies_clear(moved, o) for o in others)


def _articulate(scene: Scene, rng: np.random.Generator, cfg: GenerationConfig) -> int:
    """Random joint moves until a full pass accepts none; returns the accepted count.

    Each pass visits every articulated joint of every hand and tries its
    three local axes in random order, stepping in the joint's fixed
    direction for that axis, and keeps the first move that leaves the scene
    valid and within the angle limit.
    """
    step = np.radians(cfg.angle_step_deg)
    limit = np.radians(cfg.angle_limit_deg)
    hands = [m for m in scene.models if m.kind == "hand"]
    if not hands or limit <= 0 or step <= 0:
        return 0
    states = [_HandState(m) for m in hands]
    others = [ContactProxy.of(m) for m in scene.models if m.kind != "hand"]
    joints = hands[0].hand.asset.chain.articulated()
    signs = rng.choice([-1.0, 1.0], size=(len(hands), hands[0].angles.shape[0], 3))
    accepted = 0
    for _ in range(cfg.max_passes):
        moved = False
        for h, m in enumerate(hands):
            for j in joints:
                for axis in rng.permutation(3):
                    new = m.angles[j, axis] + signs[h, j, axis] * step
                    if abs(new) > limit + 1e-12:
                        continue
                    angles = m.angles.copy()
                    angles[j, axis] = new
                    move = states[h].moved(j, angles)
                    if _move_ok(states, others, h, move):
                        idx, a, b, sidx, c, cr = move
                        st = states[h]
                        m.angles = angles
                        st.a[idx], st.b[idx] = a, b
                        st.c[sidx], st.cr[sidx] = c, cr
                        accepted += 1
                        moved = True
                        break
        if not moved:
            break
    return accepted


def generate_interaction(
    seed: int, config: GenerationConfig | None = None, mode: str = "hand-hand", asset_root: str | None = None
) -> Scene:
    cfg = config or GenerationConfig()
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}; expected one of {MODES}")
    left_limit = hand_models(asset_root, cfg.capsule_margin)[0].asset.chain.angle_limit
    if np.radians(cfg.angle_limit_deg) > left_limit + 1e-12:
        raise ValueError(f"angle limit {cfg.angle_limit_deg} deg exceeds the chain limit {np.degrees(left_limit):g} deg")
    rng = substream(seed, "scene")
    left, right = hand_models(asset_root, cfg.capsule_margin)
    centre = _centre_model(mode, rng, cfg, left)
    if mode == "hand-hand":
        mover = SceneModel(SECOND, "right_hand", "hand", angles=np.zeros((21, 3)), hand=right)
    else:
        mover = SceneModel(LEFT, "left_hand", "hand", angles=np.zeros((21, 3)), hand=left)
    for _ in range(cfg.max_retries):
        d = _place_hand(centre, mover, rng, cfg)
        if _approach(centre, mover, d, cfg):
            break
    else:
        raise GenerationError(seed, f"no contact position found in {cfg.max_retries} attempts")
    models = sorted([centre, mover], key=lambda m: m.id)
    scene = Scene(models, seed, mode)
    if not contact_free(scene):
        raise GenerationError(seed, "post-approach scene is not valid")
    _articulate(scene, rng, cfg)
    if not contact_free(scene):
        raise GenerationError(seed, "articulated scene failed the final validity check")
    return scene
