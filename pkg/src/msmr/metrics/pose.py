"""Procrustes alignment and pose-error metrics (inputs in meters, outputs in mm)."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

MM = 1000.0


class AlignmentError(ValueError):
    pass


@dataclass(frozen=True)
class Alignment:
    scale: float
    rotation: np.ndarray
    translation: np.ndarray

    def apply(self, points: np.ndarray) -> np.ndarray:
        return self.scale * np.asarray(points, float) @ self.rotation.T + self.translation


def procrustes_align(pred: np.ndarray, gt: np.ndarray) -> Alignment:
    """Similarity transform minimising sum ||s R pred_i + t - gt_i||^2.

    The SVD sign correction keeps det(R) = +1. Degenerate (collinear or
    planar) inputs still return an alignment; numpy's deterministic SVD
    resolves the ambiguity.
    """
    pred = np.asarray(pred, float)
    gt = np.asarray(gt, float)
    if pred.shape != gt.shape or pred.ndim != 2 or pred.shape[1] != 3:
        raise AlignmentError(f"expected two (K, 3) arrays of equal shape, got {pred.shape} and {gt.shape}")
    if len(pred) < 3:
        raise AlignmentError(f"need at least 3 corresponding points, got {len(pred)}")
    mu_p, mu_g = pred.mean(axis=0), gt.mean(axis=0)
    x, y = pred - mu_p, gt - mu_g
    if not np.any(y):
        raise AlignmentError("ground-truth points all coincide")
    var_x = float((x * x).sum())
    if var_x == 0.0:
        raise AlignmentError("predicted points all coincide")
    u, s, vt = np.linalg.svd(x.T @ y)
    d = np.ones(3)
    d[2] = np.sign(np.linalg.det(vt.T @ u.T)) or 1.0
    R = vt.T @ np.diag(d) @ u.T
    scale = float((s * d).sum() / var_x)
    return Alignment(scale, R, mu_g - scale * R @ mu_p)


def aligned(pred: np.ndarray, gt: np.ndarray) -> np.ndarray:
    return procrustes_align(pred, gt).apply(pred)


def mean_error_mm(pred: np.ndarray, gt: np.ndarray) -> float:
    return float(np.linalg.norm(np.asarray(pred) - np.asarray(gt), axis=1).mean() * MM)


def pa_mpjpe(pred: np.ndarray, gt: np.ndarray) -> float:
    """Mean per-point error after Procrustes alignment, in mm."""
    return mean_error_mm(aligned(pred, gt), gt)


pa_mpvpe = pa_mpjpe


def f_score(pred: np.ndarray, gt: np.ndarray, d_mm: float) -> float:
    """Harmonic mean of precision and recall of two point sets at distance ``d_mm``.

    No alignment is applied here; see ``aligned_f_score``.
    """
    if d_mm <= 0:
        raise ValueError("threshold must be positive")
    pred = np.asarray(pred, float)
    gt = np.asarray(gt, float)
    if len(pred) == 0 or len(gt) == 0:
        raise ValueError("f_score needs non-empty point sets")
    d = d_mm / MM
    precision = float(np.mean(cKDTree(gt).query(pred)[0] <= d))
    recall = float(np.mean(cKDTree(pred).query(gt)[0] <= d))
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def aligned_f_score(pred: np.ndarray, gt: np.ndarray, d_mm: float) -> float:
    """F-score after Procrustes alignment of corresponding point sets."""
    return f_score(aligned(pred, gt), gt, d_mm)


def pck_thresholds(t_max_mm: float = 20.0, n: int = 20) -> np.ndarray:
    """``n`` equally spaced thresholds in (0, t_max]."""
    return t_max_mm * np.arange(1, n + 1) / n


def pck_auc(pred: np.ndarray, gt: np.ndarray, t_max_mm: float = 20.0, n: int = 20) -> tuple[np.ndarray, float]:
    """PCK curve over ``pck_thresholds`` and its mean (the AUC).

    Inputs are compared as given; align them first for PA metrics. An error
    counts at threshold t when it is <= t (with 1e-9 mm slack for rounding).
    """
    err = np.linalg.norm(np.asarray(pred, float) - np.asarray(gt, float), axis=1) * MM
    t = pck_thresholds(t_max_mm, n)
    pck = (err[None, :] <= t[:, None] + 1e-9).mean(axis=1)
    return pck, float(pck.mean())


@dataclass
class EvalReport:
    pa_mpjpe: float
    pa_mpvpe: float
    f_scores: dict[float, float]
    pck: list[float]
    auc: float
    vr: float | None = None
    extra: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        d = {
            "pa_mpjpe_mm": self.pa_mpjpe,
            "pa_mpvpe_mm": self.pa_mpvpe,
            "f_scores": {f"{k:g}mm": v for k, v in sorted(self.f_scores.items())},
            "pck": list(self.pck),
            "auc": self.auc,
        }
        if self.vr is not None:
            d["vr"] = self.vr
        d.update(self.extra)
        return d


def evaluate_sample(
    pred_vertices: np.ndarray,
    gt_vertices: np.ndarray,
    pred_joints: np.ndarray,
    gt_joints: np.ndarray,
    f_thresholds_mm: tuple[float, ...] = (5.0, 15.0),
    vr: float | None = None,
) -> EvalReport:
    """All per-sample metrics; vertices and joints are aligned separately."""
    pj = aligned(pred_joints, gt_joints)
    pv = aligned(pred_vertices, gt_vertices)
    pck, auc = pck_auc(pj, gt_joints)
    return EvalReport(
        pa_mpjpe=mean_error_mm(pj, gt_joints),
        pa_mpvpe=mean_error_mm(pv, gt_vertices),
        f_scores={d: f_score(pv, gt_vertices, d) for d in f_thresholds_mm},
        pck=pck.tolist(),
        auc=auc,
        vr=vr,
    )
