"""Pinhole camera and z-buffered triangle rasterization of id masks and shaded images."""

from __future__ import annotations

import warnings
from dataclasses import asdict, dataclass

import numpy as np

NEAR = 1e-3  # meters; triangles with a vertex closer than this are skipped


@dataclass(frozen=True)
class Camera:
    """Camera looking down +z; a world point p sits at p + offset in camera space.

    Pixel (row r, col c) has its centre at image coordinates (c + 0.5, r + 0.5).
    """

    focal: float = 500.0
    width: int = 224
    height: int = 224
    cx: float = 112.0
    cy: float = 112.0
    offset: tuple[float, float, float] = (0.0, 0.0, 0.7)

    @classmethod
    def centred(cls, size: int = 224, focal: float = 500.0, distance: float = 0.7) -> "Camera":
        return cls(focal, size, size, size / 2, size / 2, (0.0, 0.0, distance))

    def to_camera(self, points: np.ndarray) -> np.ndarray:
        return np.asarray(points, float) + np.asarray(self.offset)

    def project(self, points: np.ndarray) -> np.ndarray:
        """(n, 3) world points -> (n, 3) of (u, v, z_cam)."""
        p = self.to_camera(points)
        z = p[:, 2]
        with np.errstate(divide="ignore", invalid="ignore"):
            u = self.focal * p[:, 0] / z + self.cx
            v = self.focal * p[:, 1] / z + self.cy
        return np.stack([u, v, z], axis=1)

    def to_json(self) -> dict:
        d = asdict(self)
        d["offset"] = list(self.offset)
        return d

    @classmethod
    def from_json(cls, data: dict) -> "Camera":
        d = dict(data)
        d["offset"] = tuple(d["offset"])
        return cls(**d)


class ZBuffer:
    """Accumulates triangles; keeps the nearest (largest 1/z) per pixel.

    Ties keep the earlier triangle, so draw order fixes the result.
    """

    def __init__(self, camera: Camera):
        self.camera = camera
        self.inv_depth = np.zeros((camera.height, camera.width))
        self.labels = np.zeros((camera.height, camera.width), dtype=np.int32)
        self.face = np.full((camera.height, camera.width), -1, dtype=np.int64)

    def draw(self, vertices: np.ndarray, faces: np.ndarray, label: int, face_offset: int = 0) -> int:
        """Rasterize a mesh with one label; returns the number of triangles drawn."""
        cam = self.camera
        proj = cam.project(vertices)
        tri = proj[faces]  # (F, 3, 3)
        front = np.all(tri[:, :, 2] > NEAR, axis=1)
        drawn = 0
        for f in np.flatnonzero(front):
            (u0, v0, z0), (u1, v1, z1), (u2, v2, z2) = tri[f]
            area = (u1 - u0) * (v2 - v0) - (u2 - u0) * (v1 - v0)
            if area == 0.0:
                continue
            c0 = max(int(np.floor(min(u0, u1, u2) - 0.5)), 0)
            c1 = min(int(np.ceil(max(u0, u1, u2) - 0.5)), cam.width - 1)
            r0 = max(int(np.floor(min(v0, v1, v2) - 0.5)), 0)
            r1 = min(int(np.ceil(max(v0, v1, v2) - 0.5)), cam.height - 1)
            if c0 > c1 or r0 > r1:
                continue
            drawn += 1
            px = np.arange(c0, c1 + 1) + 0.5
            py = np.arange(r0, r1 + 1)[:, None] + 0.5
            # screen-space barycentrics of the pixel centres
            w0 = ((u1 - px) * (v2 - py) - (u2 - px) * (v1 - py)) / area
            w1 = ((u2 - px) * (v0 - py) - (u0 - px) * (v2 - py)) / area
            w2 = 1.0 - w0 - w1
            inside = (w0 >= 0) & (w1 >= 0) & (w2 >= 0)
            if not inside.any():
                continue
            # 1/z is affine in screen space, so this is perspective-correct
            inv = w0 / z0 + w1 / z1 + w2 / z2
            block = self.inv_depth[r0 : r1 + 1, c0 : c1 + 1]
            win = inside & (inv > block)
            block[win] = inv[win]
            self.labels[r0 : r1 + 1, c0 : c1 + 1][win] = label
            self.face[r0 : r1 + 1, c0 : c1 + 1][win] = face_offset + f
        return drawn


def _draw_checked(buf: ZBuffer, vertices, faces, label, face_offset=0) -> None:
    if len(faces) and buf.draw(vertices, faces, label, face_offset) == 0:
        if not np.any(buf.camera.to_camera(vertices)[:, 2] > NEAR):
            warnings.warn(f"object {label} is behind the camera; its mask is empty", RuntimeWarning, stacklevel=3)


def rasterize_masks(
    meshes: list[tuple[int, np.ndarray, np.ndarray]], camera: Camera
) -> tuple[np.ndarray, dict[int, np.ndarray]]:
    """Id masks for ``(object_id, vertices, faces)`` triples.

    Returns the full-scene mask (depth competition between all objects) and,
    per object, the mask of that object rendered alone. 0 is background.
    """
    ids = [m[0] for m in meshes]
    if 0 in ids or len(set(ids)) != len(ids):
        raise ValueError("object ids must be unique and non-zero")
    scene = ZBuffer(camera)
    only = {}
    for oid, v, f in meshes:
        _draw_checked(scene, v, f, oid)
        alone = ZBuffer(camera)
        _draw_checked(alone, v, f, oid)
        only[oid] = alone.labels
    return scene.labels, only


def shade(
    meshes: list[tuple[int, np.ndarray, np.ndarray]],
    camera: Camera,
    colors: dict[int, tuple[float, float, float]],
    light: tuple[float, float, float] = (0.3, -0.4, -1.0),
) -> np.ndarray:
    """Flat Lambert-shaded (H, W, 3) uint8 image on a black background."""
    buf = ZBuffer(camera)
    normals, base = [], []
    offset = 0
    for oid, v, f in meshes:
        buf.draw(v, f, oid, offset)
        tri = v[f]
        n = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
        normals.append(n / np.maximum(np.linalg.norm(n, axis=1, keepdims=True), 1e-30))
        base.append(np.tile(np.asarray(colors[oid], float), (len(f), 1)))
        offset += len(f)
    img = np.zeros((camera.height, camera.width, 3))
    hit = buf.face >= 0
    if hit.any():
        n = np.vstack(normals)[buf.face[hit]]
        l_dir = -np.asarray(light, float) / np.linalg.norm(light)
        # two-sided lighting so winding does not matter
        lam = 0.25 + 0.75 * np.abs(n @ l_dir)
        img[hit] = np.vstack(base)[buf.face[hit]] * lam[:, None]
    return np.clip(np.round(img * 255), 0, 255).astype(np.uint8)
