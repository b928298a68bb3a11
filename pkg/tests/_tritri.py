"""Brute-force mesh-mesh intersection via edge/triangle crossings."""

import numpy as np


def _segments_hit_triangles(p, q, a, b, c, eps=1e-12):
    """Row-wise: does segment [p, q] cross triangle (a, b, c)? (Moller-Trumbore)"""
    d = q - p
    e1, e2 = b - a, c - a
    h = np.cross(d, e2)
    det = (e1 * h).sum(-1)
    ok = np.abs(det) > eps
    inv = np.where(ok, 1.0 / np.where(ok, det, 1.0), 0.0)
    s = p - a
    u = (s * h).sum(-1) * inv
    qv = np.cross(s, e1)
    v = (d * qv).sum(-1) * inv
    t = (e2 * qv).sum(-1) * inv
    return ok & (u >= 0) & (v >= 0) & (u + v <= 1) & (t >= 0) & (t <= 1)


def meshes_intersect(v1, f1, v2, f2) -> bool:
    t1, t2 = v1[f1], v2[f2]
    lo1, hi1 = t1.min(1), t1.max(1)
    lo2, hi2 = t2.min(1), t2.max(1)
    i, j = np.nonzero(np.all(lo1[:, None] <= hi2[None], -1) & np.all(lo2[None] <= hi1[:, None], -1))
    if len(i) == 0:
        return False
    A, B = t1[i], t2[j]
    for k in range(3):
        p, q = A[:, k], A[:, (k + 1) % 3]
        if _segments_hit_triangles(p, q, B[:, 0], B[:, 1], B[:, 2]).any():
            return True
        p, q = B[:, k], B[:, (k + 1) % 3]
        if _segments_hit_triangles(p, q, A[:, 0], A[:, 1], A[:, 2]).any():
            return True
    return False
