"""Scenes of posed hands and rigid objects, and their capsule validity."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.spatial.distance import cdist

from msmr.mesh.assets import HandAsset
from msmr.mesh.kinematics import KinematicChain, LocalFrame, compute_local_frames, frame_matrices, joint_transforms
from msmr.mesh.mesh import Mesh

from .capsules import CapsuleSet, capsules_from_chain, pair_distances, point_segment_distances, posed_capsules


@dataclass(frozen=True, eq=False)
class Articulated:
    """A hand asset with cached rest frames, rest capsules and same-hand overlap allowance."""

    asset: HandAsset
    frames: list[LocalFrame]
    rest_capsules: CapsuleSet
    allowed: np.ndarray  # (n_caps, n_caps) tolerated same-hand overlap (-inf = any)
    palm_normal: np.ndarray  # rest-pose palm normal, hand coordinates
    frame_stack: np.ndarray  # (J, 3, 3) frame matrices
    moved_by: list[np.ndarray]  # per joint, the capsules a rotation there moves
    spanning_faces: np.ndarray  # faces whose vertices belong to more than one bone
    margin: float

    @classmethod
    def build(cls, asset: HandAsset, margin: float = 0.001) -> "Articulated":
        frames = compute_local_frames(asset.chain, asset.mesh)
        caps = capsules_from_chain(asset.mesh, asset.chain, asset.skinning, margin=margin)
        # root y is the palm normal up to handedness; finger flexion axes pick the sign
        flex = np.mean([frames[c].x for c in asset.chain.children()[0]], axis=0)
        normal = frames[0].y * np.sign(frames[0].y @ flex)
        chain = asset.chain
        # capsule k moves with joint parent[segment k], hence with all its ancestors
        moved = [[] for _ in range(chain.n_joints)]
        for k, c in enumerate(caps.segment):
            j = chain.parent[c]
            while True:
                moved[j].append(k)
                if chain.parent[j] == j:
                    break
                j = chain.parent[j]
        owner = asset.skinning.bone_child[asset.mesh.faces]
        spanning = np.flatnonzero(~np.all(owner == owner[:, :1], axis=1))
        return cls(
            asset, frames, caps, same_hand_allowance(chain, caps), normal,
            frame_matrices(frames), [np.array(sorted(m), dtype=int) for m in moved],
            spanning, margin,
        )


def same_hand_allowance(chain: KinematicChain, caps: CapsuleSet) -> np.ndarray:
    """Lowest acceptable signed gap for each same-hand capsule pair.

    Bones sharing a joint always overlap there and are exempt (-inf).
    Other pairs may overlap at most as deeply as in the rest pose (a pair
    clear at rest must stay clear).
    """
    n = len(caps)
    ends = [{chain.parent[c], c} for c in caps.segment]
    rest = pair_distances(caps, caps)
    allowed = np.minimum(rest, 0.0)
    for i in range(n):
        for j in range(n):
            if i == j or ends[i] & ends[j]:
                allowed[i, j] = -np.inf
    return allowed


@dataclass(eq=False)
class SceneModel:
    id: int
    name: str
    kind: str  # "hand" or "object"
    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))
    angles: np.ndarray | None = None  # (J, 3) for hands
    hand: Articulated | None = None
    mesh: Mesh | None = None  # rest mesh for rigid objects
    object_capsules: CapsuleSet | None = None
    params: dict = field(default_factory=dict)  # shape parameters of procedural objects

    def copy(self) -> "SceneModel":
        return replace(
            self,
            rotation=self.rotation.copy(),
            translation=self.translation.copy(),
            angles=None if self.angles is None else self.angles.copy(),
        )

    @property
    def chain(self) -> KinematicChain:
        assert self.hand is not None
        return self.hand.asset.chain.with_angles(self.angles)

    def local_transforms(self, angles: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
        angles = self.angles if angles is None else angles
        return joint_transforms(self.hand.asset.chain, self.hand.frame_stack, angles)

    def capsules(self) -> CapsuleSet:
        if self.kind == "hand":
            A, t = self.local_transforms()
            local = posed_capsules(self.hand.rest_capsules, self.hand.asset.chain, A, t)
        else:
            local = self.object_capsules
        return local.transformed(self.rotation, self.translation).with_owner(self.id)

    def contact_spheres(self, angles: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
        """World bounding spheres (centres, radii) of the faces spanning several bones.

        Bone capsules contain every face skinned to a single bone; these
        spheres cover the rest.
        """
        if self.kind != "hand":
            return np.zeros((0, 3)), np.zeros(0)
        tri = self.posed_vertices(angles)[self.faces()[self.hand.spanning_faces]]
        centre = tri.mean(axis=1)
        radius = np.linalg.norm(tri - centre[:, None], axis=2).max(axis=1) + self.hand.margin
        return centre, radius

    def posed_vertices(self, angles: np.ndarray | None = None) -> np.ndarray:
        if self.kind == "hand":
            asset = self.hand.asset
            A, t = self.local_transforms(angles)
            vj = asset.skinning.vertex_joint(asset.chain)
            v = np.einsum("nij,nj->ni", A[vj], asset.mesh.vertices) + t[vj]
        else:
            v = self.mesh.vertices
        return v @ self.rotation.T + self.translation

    def posed_joints(self) -> np.ndarray:
        A, t = self.local_transforms()
        par = np.asarray(self.hand.asset.chain.parent)
        j = np.einsum("nij,nj->ni", A[par], self.hand.asset.chain.joints) + t[par]
        return j @ self.rotation.T + self.translation

    def faces(self) -> np.ndarray:
        return (self.hand.asset.mesh if self.kind == "hand" else self.mesh).faces

    def posed_mesh(self) -> Mesh:
        return Mesh(self.posed_vertices(), self.faces())


@dataclass(eq=False)
class Scene:
    models: list[SceneModel]
    seed: int
    mode: str = "hand-hand"

    def model(self, id: int) -> SceneModel:
        for m in self.models:
            if m.id == id:
                return m
        raise KeyError(f"no model with id {id}")

    def copy(self) -> "Scene":
        return Scene([m.copy() for m in self.models], self.seed, self.mode)


def model_pair_clear(x: SceneModel, y: SceneModel, cx: CapsuleSet | None = None, cy: CapsuleSet | None = None) -> bool:
    cx = x.capsules() if cx is None else cx
    cy = y.capsules() if cy is None else cy
    return not np.any(pair_distances(cx, cy) < 0)


def self_clear(m: SceneModel, caps: CapsuleSet | None = None) -> bool:
    if m.kind != "hand":
        return True
    caps = m.capsules() if caps is None else caps
    # small slack so rest-pose overlaps do not fail on rounding
    return not np.any(pair_distances(caps, caps) < m.hand.allowed - 1e-9)


@dataclass(frozen=True, eq=False)
class ContactProxy:
    """Capsules plus face spheres of one model, in world coordinates."""

    capsules: CapsuleSet
    centres: np.ndarray
    radii: np.ndarray

    @classmethod
    def of(cls, m: SceneModel) -> "ContactProxy":
        return cls(m.capsules(), *m.contact_spheres())

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        c = self.capsules
        r = np.concatenate([c.radius, c.radius, self.radii])[:, None]
        pts = np.vstack([c.a, c.b, self.centres])
        return (pts - r).min(axis=0), (pts + r).max(axis=0)


def sphere_gaps(c1, r1, c2, r2) -> np.ndarray:
    return cdist(c1, c2) - (r1[:, None] + r2[None])


def sphere_capsule_gaps(c, r, caps: CapsuleSet) -> np.ndarray:
    d = point_segment_distances(c, caps.a, caps.b)
    return d - (r[:, None] + caps.radius[None])


def proxies_clear(p: ContactProxy, q: ContactProxy) -> bool:
    lo_p, hi_p = p.bounds()
    lo_q, hi_q = q.bounds()
    if np.any(hi_p < lo_q) or np.any(hi_q < lo_p):
        return True
    return not (
        np.any(pair_distances(p.capsules, q.capsules) < 0)
        or np.any(sphere_capsule_gaps(p.centres, p.radii, q.capsules) < 0)
        or np.any(sphere_capsule_gaps(q.centres, q.radii, p.capsules) < 0)
        or np.any(sphere_gaps(p.centres, p.radii, q.centres, q.radii) < 0)
    )


def contact_free(scene: Scene) -> bool:
    """``scene_valid`` plus clearance of the face spheres between models."""
    if not scene_valid(scene):
        return False
    proxies = [ContactProxy.of(m) for m in scene.models]
    return all(
        proxies_clear(proxies[i], proxies[j])
        for i in range(len(proxies))
        for j in range(i + 1, len(proxies))
    )


def scene_valid(scene: Scene) -> bool:
    """No capsule overlap between different models, nor between non-exempt
    capsule pairs of one hand."""
    caps = [m.capsules() for m in scene.models]
    for i, m in enumerate(scene.models):
        if not self_clear(m, caps[i]):
            return False
        for j in range(i + 1, len(scene.models)):
            if not model_pair_clear(m, scene.models[j], caps[i], caps[j]):
                return False
    return True
