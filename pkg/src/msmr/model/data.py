"""Training samples, image normalisation and augmentation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

BACKGROUND = -0.5  # normalised value of a black pixel


@dataclass
class Sample:
    image: np.ndarray  # (S, S, 3) normalised
    vertices: np.ndarray  # (M, 3) root-centred target
    name: str = ""


def normalize_image(rgb: np.ndarray) -> np.ndarray:
    """uint8 or [0, 1] RGB -> (x - 0.5) / 1.0."""
    x = np.asarray(rgb, dtype=np.float64)
    if x.max(initial=0.0) > 1.0:
        x = x / 255.0
    return (x - 0.5) / 1.0


def resize_image(image: np.ndarray, size: int) -> np.ndarray:
    """Square resize; box-averages when shrinking by an integer factor."""
    h, w, c = image.shape
    if h == size and w == size:
        return image.copy()
    if h == w and h % size == 0:
        f = h // size
        return image.reshape(size, f, size, f, c).mean(axis=(1, 3))
    zoom = (size / h, size / w, 1.0)
    return ndimage.zoom(image, zoom, order=1, mode="nearest")


@dataclass
class Augmentation:
    crop: tuple[float, float] = (0.8, 1.0)
    rotation_deg: float = 30.0

    def sample(self, rng: np.random.Generator) -> tuple[float, float, float, float]:
        """(crop fraction, row offset, col offset, angle in radians); offsets in [-1, 1]."""
        s = rng.uniform(*self.crop)
        dy, dx = rng.uniform(-1.0, 1.0, size=2)
        theta = np.radians(rng.uniform(-self.rotation_deg, self.rotation_deg))
        return float(s), float(dy), float(dx), float(theta)


def rotate_vertices(vertices: np.ndarray, theta: float) -> np.ndarray:
    """Rotate about the camera's optical (z) axis, matching :func:`warp_image`."""
    c, s = np.cos(theta), np.sin(theta)
    R = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    return vertices @ R.T


def warp_image(image: np.ndarray, crop: float, dy: float, dx: float, theta: float) -> np.ndarray:
    """Crop a ``crop``-sized window (shifted by dy, dx within the slack), resize
    back to full size, and rotate the content by ``theta`` about the centre.

    Image x runs along columns and y along rows, so a point rotated by
    :func:`rotate_vertices` lands where this warp moves its pixel.
    """
    h, w, _ = image.shape
    centre = np.array([(h - 1) / 2.0, (w - 1) / 2.0])
    slack = (1.0 - crop) / 2.0 * np.array([h, w])
    src_centre = centre + np.array([dy, dx]) * slack
    c, s = np.cos(theta), np.sin(theta)
    # output (row, col) offset o -> input offset crop * R^T o, in (row, col) order
    inv = crop * np.array([[c, -s], [s, c]])
    M = np.eye(3)
    M[:2, :2] = inv
    offset = np.zeros(3)
    offset[:2] = src_centre - inv @ centre
    return ndimage.affine_transform(image, M, offset=offset, order=1, mode="constant", cval=BACKGROUND)


def augment(sample: Sample, aug: Augmentation, rng: np.random.Generator) -> Sample:
    crop, dy, dx, theta = aug.sample(rng)
    return Sample(warp_image(sample.image, crop, dy, dx, theta), rotate_vertices(sample.vertices, theta), sample.name)
