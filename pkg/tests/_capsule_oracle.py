"""Capsule overlap by dense surface sampling, independent of segment-segment distance."""

import numpy as np


def _basis(axis):
    z = axis / np.linalg.norm(axis)
    helper = np.eye(3)[int(np.argmin(np.abs(z)))]
    x = np.cross(z, helper)
    x /= np.linalg.norm(x)
    return x, np.cross(z, x), z


def surface_samples(a, b, r, n=10_000):
    """About n stratified points on the capsule surface."""
    a, b = np.asarray(a, float), np.asarray(b, float)
    L = np.linalg.norm(b - a)
    x, y, z = _basis(b - a)
    cyl_area, sph_area = 2 * np.pi * r * L, 4 * np.pi * r * r
    n_cyl = int(round(n * cyl_area / (cyl_area + sph_area)))
    n_sph = n - n_cyl
    rows = max(int(np.sqrt(n_cyl * L / (2 * np.pi * r))), 1)
    cols = max(n_cyl // rows, 1)
    s, th = np.meshgrid((np.arange(rows) + 0.5) / rows, 2 * np.pi * np.arange(cols) / cols, indexing="ij")
    s, th = s.ravel(), th.ravel()
    cyl = a + np.outer(s * L, z) + r * (np.outer(np.cos(th), x) + np.outer(np.sin(th), y))
    # Fibonacci sphere split into the two caps
    k = np.arange(n_sph) + 0.5
    phi = np.arccos(1 - 2 * k / n_sph)
    th = np.pi * (1 + 5**0.5) * k
    d = np.stack([np.cos(th) * np.sin(phi), np.sin(th) * np.sin(phi), np.cos(phi)], 1) @ np.stack([x, y, z])
    cap = np.where((d @ z)[:, None] >= 0, b + r * d, a + r * d)
    return np.vstack([cyl, cap])


def inside(points, a, b, r):
    ab = b - a
    t = np.clip((points - a) @ ab / (ab @ ab), 0.0, 1.0)
    return np.linalg.norm(points - (a + t[:, None] * ab), axis=1) < r


def overlap_by_sampling(a1, b1, r1, a2, b2, r2, n=10_000):
    return bool(
        inside(surface_samples(a1, b1, r1, n), a2, b2, r2).any()
        or inside(surface_samples(a2, b2, r2, n), a1, b1, r1).any()
    )
