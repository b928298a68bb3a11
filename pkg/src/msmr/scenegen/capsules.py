"""Capsule proxies for hand segments and rigid objects."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from msmr.mesh.kinematics import KinematicChain, Skinning
from msmr.mesh.mesh import Mesh


@dataclass(frozen=True, eq=False)
class CapsuleSet:
    """``n`` capsules stored as arrays; ``owner`` is the object id and ``segment``
    the bone (child joint) or part index within the owner."""

    a: np.ndarray  # (n, 3)
    b: np.ndarray  # (n, 3)
    radius: np.ndarray  # (n,)
    owner: np.ndarray  # (n,)
    segment: np.ndarray  # (n,)

    def __post_init__(self):
        if np.any(self.radius <= 0):
            raise ValueError("capsule radii must be positive")
        if np.any(np.all(self.a == self.b, axis=1)):
            raise ValueError("capsule endpoints must differ")

    def __len__(self) -> int:
        return len(self.radius)

    def transformed(self, R: np.ndarray, t: np.ndarray) -> "CapsuleSet":
        return CapsuleSet(self.a @ R.T + t, self.b @ R.T + t, self.radius, self.owner, self.segment)

    def with_owner(self, owner: int) -> "CapsuleSet":
        return CapsuleSet(self.a, self.b, self.radius, np.full(len(self), owner), self.segment)

    @staticmethod
    def concat(sets: list["CapsuleSet"]) -> "CapsuleSet":
        return CapsuleSet(
            np.vstack([s.a for s in sets]),
            np.vstack([s.b for s in sets]),
            np.concatenate([s.radius for s in sets]),
            np.concatenate([s.owner for s in sets]),
            np.concatenate([s.segment for s in sets]),
        )


def point_segment_distance(p: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    ab = b - a
    t = np.clip(((p - a) @ ab) / (ab @ ab), 0.0, 1.0)
    return np.linalg.norm(p - (a + t[..., None] * ab), axis=-1)


def point_segment_distances(p: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """(n, m) distances from points p (n, 3) to segments [a_k, b_k] (m, 3)."""
    ab = b - a
    t = np.clip(np.einsum("nmd,md->nm", p[:, None] - a[None], ab) / (ab * ab).sum(-1), 0.0, 1.0)
    return np.linalg.norm(p[:, None] - (a[None] + t[..., None] * ab[None]), axis=-1)


def segment_distance(p1: np.ndarray, q1: np.ndarray, p2: np.ndarray, q2: np.ndarray) -> np.ndarray:
    """Distance between segments [p1, q1] and [p2, q2], broadcast over leading axes.

    Closest-point parameters are solved in closed form with clamping, then
    the second parameter is re-clamped against the first.
    """
    d1, d2, r = q1 - p1, q2 - p2, p1 - p2
    a = (d1 * d1).sum(-1)
    e = (d2 * d2).sum(-1)
    f = (d2 * r).sum(-1)
    c = (d1 * r).sum(-1)
    b = (d1 * d2).sum(-1)
    denom = a * e - b * b
    with np.errstate(divide="ignore", invalid="ignore"):
        s = np.where(denom > 1e-14 * a * e, np.clip((b * f - c * e) / denom, 0.0, 1.0), 0.0)
        t = (b * s + f) / e
        # t outside [0, 1]: clamp and recompute s for that endpoint
        s = np.where(t < 0.0, np.clip(-c / a, 0.0, 1.0), np.where(t > 1.0, np.clip((b - c) / a, 0.0, 1.0), s))
        t = np.clip(t, 0.0, 1.0)
    c1 = p1 + s[..., None] * d1
    c2 = p2 + t[..., None] * d2
    return np.linalg.norm(c1 - c2, axis=-1)


def capsules_intersect(a1, b1, r1, a2, b2, r2) -> bool:
    """True iff the segment distance is below the radius sum."""
    d = segment_distance(np.asarray(a1, float), np.asarray(b1, float), np.asarray(a2, float), np.asarray(b2, float))
    return bool(d < r1 + r2)


def capsules_from_chain(
    mesh: Mesh,
    chain: KinematicChain,
    skinning: Skinning,
    margin: float = 0.001,
    fallback_radius: float = 0.005,
    owner: int = 0,
) -> CapsuleSet:
    """One capsule per bone from its parent joint to its child joint.

    Radius is the largest distance of the bone's skinned vertices to the
    bone segment, plus ``margin``; bones without vertices use
    ``fallback_radius``.
    """
    bones = chain.bones()
    a = np.array([chain.joints[p] for p, _ in bones])
    b = np.array([chain.joints[c] for _, c in bones])
    radius = np.empty(len(bones))
    for k, (p, c) in enumerate(bones):
        own = mesh.vertices[skinning.bone_child == c]
        if len(own) == 0:
            radius[k] = fallback_radius
        else:
            radius[k] = point_segment_distance(own, a[k], b[k]).max() + margin
    seg = np.array([c for _, c in bones])
    return CapsuleSet(a, b, radius, np.full(len(bones), owner), seg)


def posed_capsules(rest: CapsuleSet, chain: KinematicChain, A: np.ndarray, t: np.ndarray) -> CapsuleSet:
    """Move each bone capsule with its parent joint's accumulated transform."""
    par = np.asarray(chain.parent)[rest.segment]
    a = np.einsum("nij,nj->ni", A[par], rest.a) + t[par]
    b = np.einsum("nij,nj->ni", A[par], rest.b) + t[par]
    return CapsuleSet(a, b, rest.radius, rest.owner, rest.segment)


def cylinder_capsule(radius: float, height: float, margin: float = 0.001, owner: int = 0) -> CapsuleSet:
    """Capsule around a z-aligned cylinder from z=0 to z=height."""
    a = np.array([[0.0, 0.0, 0.0]])
    b = np.array([[0.0, 0.0, height]])
    return CapsuleSet(a, b, np.array([radius + margin]), np.array([owner]), np.array([0]))


def capsule_gaps(a1, b1, r1, a2, b2, r2) -> np.ndarray:
    """(n1, n2) segment distances minus radius sums (negative = overlap)."""
    d = segment_distance(a1[:, None], b1[:, None], a2[None], b2[None])
    return d - (r1[:, None] + r2[None])


def pair_distances(x: CapsuleSet, y: CapsuleSet) -> np.ndarray:
    """(len(x), len(y)) segment distances minus radius sums (negative = overlap)."""
    return capsule_gaps(x.a, x.b, x.radius, y.a, y.b, y.radius)
