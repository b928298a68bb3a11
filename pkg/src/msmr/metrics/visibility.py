"""Visibility ratio from id masks, and VR-bucketed reporting."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

# (lo, hi, closed at hi)
BUCKETS = ((0.40, 0.60, False), (0.60, 0.80, False), (0.80, 0.95, False), (0.95, 1.00, True))


class UndefinedVisibilityError(ValueError):
    pass


def visibility_ratio(m_scene: np.ndarray, m_only: np.ndarray, object_id: int) -> float:
    """Pixels of ``object_id`` surviving in the scene mask over its pixels rendered alone."""
    m_scene = np.asarray(m_scene)
    m_only = np.asarray(m_only)
    if m_scene.shape != m_only.shape:
        raise ValueError(f"mask shapes differ: {m_scene.shape} vs {m_only.shape}")
    total = int(np.count_nonzero(m_only == object_id))
    if total == 0:
        raise UndefinedVisibilityError(f"object {object_id} has no pixels in its solo mask")
    return int(np.count_nonzero(m_scene == object_id)) / total


def bucket_label(lo: float, hi: float, closed: bool) -> str:
    return f"[{lo:.2f}, {hi:.2f}{']' if closed else ')'}"


def bucket_of(vr: float) -> int | None:
    """Index into BUCKETS, or None when VR is below the first bucket."""
    for k, (lo, hi, closed) in enumerate(BUCKETS):
        if lo <= vr < hi or (closed and vr == hi):
            return k
    return None


@dataclass(frozen=True)
class BucketRow:
    label: str
    count: int
    mean_auc: float
    mean_error_mm: float


def bucket_report(samples: list[tuple[float, float, float]]) -> list[BucketRow]:
    """Per-bucket means of ``(vr, auc, pose_error_mm)`` samples.

    Only populated buckets appear; samples below VR 0.40 are left out.
    """
    groups: dict[int, list[tuple[float, float]]] = {}
    for vr, auc, err in samples:
        k = bucket_of(vr)
        if k is not None:
            groups.setdefault(k, []).append((auc, err))
    rows = []
    for k in sorted(groups):
        g = groups[k]
        rows.append(
            BucketRow(
                bucket_label(*BUCKETS[k]),
                len(g),
                math.fsum(a for a, _ in g) / len(g),
                math.fsum(e for _, e in g) / len(g),
            )
        )
    return rows


def format_report(rows: list[BucketRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["vr_range", "count", "auc", "pa_mpjpe_mm"])
    for r in rows:
        w.writerow([r.label, r.count, f"{r.mean_auc:.4f}", f"{r.mean_error_mm:.3f}"])
    return buf.getvalue()
