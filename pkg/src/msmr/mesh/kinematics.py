"""Kinematic chains, per-joint local frames and rigid segment skinning."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from functools import cached_property
from pathlib import Path

import numpy as np

from .mesh import Mesh

N_JOINTS = 21
# wrist, then (CMC/MCP, MCP/PIP, IP/DIP, tip) for thumb, index, middle, ring, pinky
JOINT_NAMES = (
    "wrist",
    "thumb1", "thumb2", "thumb3", "thumb4",
    "index1", "index2", "index3", "index4",
    "middle1", "middle2", "middle3", "middle4",
    "ring1", "ring2", "ring3", "ring4",
    "pinky1", "pinky2", "pinky3", "pinky4",
)
HAND_PARENTS = (0, 0, 1, 2, 3, 0, 5, 6, 7, 0, 9, 10, 11, 0, 13, 14, 15, 0, 17, 18, 19)
MIDDLE_MCP = 9


class ChainError(ValueError):
    pass


class DegenerateFrameError(ChainError):
    pass


class SkinningError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class KinematicChain:
    joints: np.ndarray  # (J, 3) rest positions
    parent: tuple[int, ...]  # root is its own parent
    next_joint: tuple[int, ...]  # joint defining the frame z axis, -1 = continue parent's bone
    flexion_vertex: tuple[int | None, ...]
    angles: np.ndarray = field(default=None)  # type: ignore[assignment]  # (J, 3) radians
    angle_limit: float = float(np.radians(60.0))
    names: tuple[str, ...] = ()

    def __post_init__(self):
        j = np.asarray(self.joints, dtype=np.float64).reshape(-1, 3)
        object.__setattr__(self, "joints", j)
        n = len(j)
        object.__setattr__(self, "parent", tuple(int(p) for p in self.parent))
        object.__setattr__(self, "next_joint", tuple(int(p) for p in self.next_joint))
        object.__setattr__(
            self, "flexion_vertex", tuple(None if v is None else int(v) for v in self.flexion_vertex)
        )
        a = np.zeros((n, 3)) if self.angles is None else np.asarray(self.angles, dtype=np.float64)
        if a.shape != (n, 3):
            raise ChainError(f"angles must have shape ({n}, 3), got {a.shape}")
        object.__setattr__(self, "angles", np.clip(a, -self.angle_limit, self.angle_limit))
        if not self.names:
            names = JOINT_NAMES if n == N_JOINTS else tuple(f"j{i}" for i in range(n))
            object.__setattr__(self, "names", names)
        if len(self.parent) != n or len(self.next_joint) != n or len(self.flexion_vertex) != n:
            raise ChainError("parent, next_joint and flexion_vertex must have one entry per joint")
        roots = [i for i, p in enumerate(self.parent) if p == i]
        if roots != [0]:
            raise ChainError(f"chain must have exactly one root at index 0, found {roots}")
        for i in self.order()[1:]:
            if not 0 <= self.parent[i] < n:
                raise ChainError(f"joint {i} has invalid parent {self.parent[i]}")

    @property
    def n_joints(self) -> int:
        return len(self.joints)

    @cached_property
    def traversal(self) -> tuple[int, ...]:
        """Cached ``order()``."""
        return tuple(self.order())

    @cached_property
    def depth_levels(self) -> list[np.ndarray]:
        """Non-root joints grouped by depth (1, 2, ...), for batched traversal."""
        depth = [0] * self.n_joints
        for i in self.traversal[1:]:
            depth[i] = depth[self.parent[i]] + 1
        d = np.array(depth)
        return [np.flatnonzero(d == k) for k in range(1, int(d.max()) + 1)]

    def order(self) -> list[int]:
        """Joints in parent-before-child order; raises on cycles."""
        children = self.children()
        out, stack = [], [0]
        while stack:
            i = stack.pop()
            out.append(i)
            stack.extend(sorted(children[i], reverse=True))
        if len(out) != self.n_joints:
            raise ChainError("parent graph is not a tree rooted at joint 0")
        return out

    def children(self) -> list[list[int]]:
        ch: list[list[int]] = [[] for _ in range(len(self.parent))]
        for i, p in enumerate(self.parent):
            if p != i:
                ch[p].append(i)
        return ch

    def bones(self) -> list[tuple[int, int]]:
        """(parent, child) pairs, one per non-root joint, ordered by child."""
        return [(self.parent[i], i) for i in range(self.n_joints) if self.parent[i] != i]

    def articulated(self) -> list[int]:
        """Non-root joints that have at least one child (the ones that can rotate)."""
        ch = self.children()
        return [i for i in range(1, self.n_joints) if ch[i]]

    def with_angles(self, angles: np.ndarray) -> "KinematicChain":
        return replace(self, angles=np.asarray(angles, dtype=np.float64))

    def with_joints(self, joints: np.ndarray) -> "KinematicChain":
        return replace(self, joints=np.asarray(joints, dtype=np.float64))

    def mirrored(self) -> "KinematicChain":
        j = self.joints.copy()
        j[:, 0] *= -1
        return self.with_joints(j)

    def to_json(self) -> dict:
        return {
            "names": list(self.names),
            "joints": self.joints.tolist(),
            "parent": list(self.parent),
            "next_joint": list(self.next_joint),
            "flexion_vertex": list(self.flexion_vertex),
            "angle_limit_deg": float(np.degrees(self.angle_limit)),
        }

    @classmethod
    def from_json(cls, data: dict) -> "KinematicChain":
        return cls(
            joints=np.array(data["joints"], dtype=np.float64),
            parent=tuple(data["parent"]),
            next_joint=tuple(data["next_joint"]),
            flexion_vertex=tuple(data["flexion_vertex"]),
            angle_limit=float(np.radians(data.get("angle_limit_deg", 60.0))),
            names=tuple(data.get("names", ())),
        )


@dataclass(frozen=True)
class LocalFrame:
    origin: np.ndarray
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray

    def matrix(self) -> np.ndarray:
        """Columns are the x, y, z axes in world coordinates."""
        return np.column_stack([self.x, self.y, self.z])


@dataclass(frozen=True, eq=False)
class Skinning:
    """Rigid segment skinning: each vertex belongs to one bone, named by its child joint."""

    bone_child: np.ndarray  # (N,) child-joint index of the owning bone

    def __post_init__(self):
        object.__setattr__(self, "bone_child", np.asarray(self.bone_child, dtype=np.int64))

    def vertex_joint(self, chain: KinematicChain) -> np.ndarray:
        """Joint whose rotation moves each vertex (the bone's parent joint)."""
        bc = self.bone_child
        if (bc <= 0).any() or (bc >= chain.n_joints).any():
            bad = int(np.flatnonzero((bc <= 0) | (bc >= chain.n_joints))[0])
            raise SkinningError(f"vertex {bad} is not assigned to a bone")
        return np.asarray(chain.parent, dtype=np.int64)[bc]

    def to_json(self) -> dict:
        return {"bone_child": self.bone_child.tolist()}

    @classmethod
    def from_json(cls, data: dict) -> "Skinning":
        return cls(np.array(data["bone_child"], dtype=np.int64))



def frame_axis_z(chain: KinematicChain, i: int, joints: np.ndarray | None = None) -> np.ndarray:
    j = chain.joints if joints is None else joints
    nxt = chain.next_joint[i]
    if nxt >= 0:
        d = j[nxt] - j[i]
    else:
        d = j[i] - j[chain.parent[i]]
    n = np.linalg.norm(d)
    if n < 1e-12:
        raise DegenerateFrameError(f"joint {i} ({chain.names[i]}) has a zero-length z axis")
    return d / n


def compute_local_frames(chain: KinematicChain, mesh: Mesh, joints: np.ndarray | None = None) -> list[LocalFrame]:
    """Per-joint frames: z toward the next joint, x toward the flexion vertex, y = z x x.

    A fingertip without a flexion-vertex annotation inherits its parent's x;
    an unannotated root falls back to the world axis least aligned with z.
    """
    j = chain.joints if joints is None else np.asarray(joints, dtype=np.float64)
    frames: list[LocalFrame | None] = [None] * chain.n_joints
    for i in chain.order():
        z = frame_axis_z(chain, i, j)
        fv = chain.flexion_vertex[i]
        if fv is None:
            if chain.parent[i] == i:
                xh = np.eye(3)[int(np.argmin(np.abs(z)))]
            elif chain.next_joint[i] < 0:
                xh = frames[chain.parent[i]].x
            else:
                raise DegenerateFrameError(f"joint {i} ({chain.names[i]}) needs a flexion vertex")
        else:
            xh = mesh.vertices[fv] - j[i]
        xp = xh - np.dot(xh, z) * z
        norm = np.linalg.norm(xp)
        if norm < 1e-9 * max(1.0, np.linalg.norm(xh)):
            raise DegenerateFrameError(
                f"flexion vertex of joint {i} ({chain.names[i]}) is collinear with its z axis"
            )
        x = xp / norm
        y = np.cross(z, x)
        # one Gram-Schmidt pass keeps the basis orthonormal to machine precision
        y = y / np.linalg.norm(y)
        x = np.cross(y, z)
        frames[i] = LocalFrame(j[i].copy(), x, y, z)
    return frames  # type: ignore[return-value]


def euler_xyz(angles: np.ndarray) -> np.ndarray:
    """Rotate about fixed x, then y, then z: Rz @ Ry @ Rx.

    ``angles`` is (3,) or (n, 3); the result is (3, 3) or (n, 3, 3).
    """
    a = np.asarray(angles, dtype=np.float64)
    c, s = np.cos(a), np.sin(a)
    cx, cy, cz = c[..., 0], c[..., 1], c[..., 2]
    sx, sy, sz = s[..., 0], s[..., 1], s[..., 2]
    R = np.empty(a.shape[:-1] + (3, 3))
    R[..., 0, 0] = cz * cy
    R[..., 0, 1] = cz * sy * sx - sz * cx
    R[..., 0, 2] = cz * sy * cx + sz * sx
    R[..., 1, 0] = sz * cy
    R[..., 1, 1] = sz * sy * sx + cz * cx
    R[..., 1, 2] = sz * sy * cx - cz * sx
    R[..., 2, 0] = -sy
    R[..., 2, 1] = cy * sx
    R[..., 2, 2] = cy * cx
    return R


def frame_matrices(frames: list[LocalFrame]) -> np.ndarray:
    """(J, 3, 3) stack of frame matrices."""
    return np.stack([f.matrix() for f in frames])


def local_rotation(frame: LocalFrame, angles: np.ndarray) -> np.ndarray:
    """Rotation (in world axes) by ``angles`` about the frame's x, y, z axes."""
    if not np.any(angles):
        return np.eye(3)
    F = frame.matrix()
    return F @ euler_xyz(angles) @ F.T


@dataclass(frozen=True)
class PoseResult:
    mesh: Mesh
    joints: np.ndarray  # posed joint positions
    rotations: np.ndarray  # (J, 3, 3) world rotation per joint segment
    translations: np.ndarray  # (J, 3)


def joint_transforms(
    chain: KinematicChain,
    frames: list[LocalFrame] | np.ndarray,
    angles: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Accumulated rigid transform (A_i, t_i) of every joint's segment.

    ``frames`` may be a list of frames or their ``frame_matrices``;
    ``angles`` overrides the chain's own (clipped to its limit).
    """
    n = chain.n_joints
    F = frames if isinstance(frames, np.ndarray) else frame_matrices(frames)
    ang = chain.angles if angles is None else np.clip(angles, -chain.angle_limit, chain.angle_limit)
    R = F @ euler_xyz(ang) @ F.transpose(0, 2, 1)
    # exact identity for unrotated joints, so they copy their parent's transform bit for bit
    R[~np.any(ang, axis=1)] = np.eye(3)
    J = chain.joints
    c = J - np.einsum("nij,nj->ni", R, J)
    A = np.empty((n, 3, 3))
    t = np.empty((n, 3))
    A[0] = np.eye(3)
    t[0] = 0.0
    parent = np.asarray(chain.parent)
    for level in chain.depth_levels:
        p = parent[level]
        A[level] = A[p] @ R[level]
        t[level] = np.einsum("nij,nj->ni", A[p], c[level]) + t[p]
    return A, t


def pose(chain: KinematicChain, mesh: Mesh, skinning: Skinning, frames: list[LocalFrame] | None = None) -> PoseResult:
    if len(skinning.bone_child) != mesh.n_vertices:
        raise SkinningError(
            f"skinning covers {len(skinning.bone_child)} vertices, mesh has {mesh.n_vertices}"
        )
    vj = skinning.vertex_joint(chain)
    if not np.any(chain.angles):
        n = chain.n_joints
        return PoseResult(mesh, chain.joints.copy(), np.tile(np.eye(3), (n, 1, 1)), np.zeros((n, 3)))
    if frames is None:
        frames = compute_local_frames(chain, mesh)
    A, t = joint_transforms(chain, frames)
    V = mesh.vertices
    posed = np.einsum("nij,nj->ni", A[vj], V) + t[vj]
    # a joint sits at the pivot of its own segment, so it follows its parent
    par = np.asarray(chain.parent)
    J = np.einsum("nij,nj->ni", A[par], chain.joints) + t[par]
    return PoseResult(mesh.with_vertices(posed), J, A, t)


def pose_mesh(mesh: Mesh, chain: KinematicChain, skinning: Skinning) -> Mesh:
    return pose(chain, mesh, skinning).mesh


def load_chain(path: str | Path) -> KinematicChain:
    return KinematicChain.from_json(json.loads(Path(path).read_text()))


def load_skinning(path: str | Path) -> Skinning:
    return Skinning.from_json(json.loads(Path(path).read_text()))
