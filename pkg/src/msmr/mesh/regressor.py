"""Sparse joint regressor (joints = R @ vertices) and root centering."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.optimize import nnls

from .mesh import MeshError


@dataclass(frozen=True, eq=False)
class JointRegressor:
    matrix: sp.csr_matrix  # (J, N), rows non-negative and summing to one

    def __post_init__(self):
        m = sp.csr_matrix(self.matrix, dtype=np.float64)
        object.__setattr__(self, "matrix", m)
        if m.nnz and m.data.min() < 0:
            raise ValueError("regressor weights must be non-negative")
        sums = np.asarray(m.sum(axis=1)).ravel()
        if not np.allclose(sums, 1.0, atol=1e-9):
            raise ValueError(f"regressor rows must sum to 1, worst row sums to {sums[np.argmax(np.abs(sums - 1))]}")

    @property
    def shape(self) -> tuple[int, int]:
        return self.matrix.shape

    def triplets(self) -> list[list]:
        coo = self.matrix.tocoo()
        order = np.lexsort((coo.col, coo.row))
        return [[int(coo.row[k]), int(coo.col[k]), float(coo.data[k])] for k in order]

    def to_json(self) -> dict:
        return {"shape": list(self.shape), "triplets": self.triplets()}

    @classmethod
    def from_json(cls, data: dict) -> "JointRegressor":
        t = np.array(data["triplets"], dtype=np.float64).reshape(-1, 3)
        m = sp.coo_matrix((t[:, 2], (t[:, 0].astype(int), t[:, 1].astype(int))), shape=tuple(data["shape"]))
        return cls(m.tocsr())

    def compose(self, m: sp.spmatrix) -> "JointRegressor":
        """Regressor for a mesh whose vertices are ``m @ coarse`` (e.g. an upsampling chain)."""
        out = (self.matrix @ sp.csr_matrix(m)).tocsr()
        out.eliminate_zeros()
        return JointRegressor(out)


def regress_joints(vertices: np.ndarray, reg: JointRegressor) -> np.ndarray:
    v = np.asarray(vertices, dtype=np.float64)
    if reg.shape[1] != len(v):
        raise MeshError(f"regressor expects {reg.shape[1]} vertices, got {len(v)}")
    return np.asarray(reg.matrix @ v)


def root_center(vertices: np.ndarray, joints: np.ndarray, root_index: int) -> tuple[np.ndarray, np.ndarray]:
    """Translate vertices and joints so joint ``root_index`` sits at the origin."""
    joints = np.asarray(joints, dtype=np.float64)
    offset = joints[root_index].copy()
    return np.asarray(vertices, dtype=np.float64) - offset, joints - offset


def fit_regressor(vertices: np.ndarray, joints: np.ndarray, k: int = 8, forced: dict[int, int] | None = None, tol: float = 1e-4) -> JointRegressor:
    """Convex weights over each joint's k nearest vertices reproducing the joint.

    ``forced`` maps joint index -> vertex index for one-hot rows (fingertips).
    """
    forced = forced or {}
    rows, cols, vals = [], [], []
    for j, target in enumerate(np.asarray(joints)):
        if j in forced:
            rows.append(j)
            cols.append(forced[j])
            vals.append(1.0)
            continue
        order = np.argsort(np.linalg.norm(vertices - target, axis=1), kind="stable")
        size = k
        while True:
            near = order[:size]
            # the heavily weighted last row pushes the solution onto sum(w) == 1
            A = np.vstack([vertices[near].T, 1e3 * np.ones(len(near))])
            b = np.concatenate([target, [1e3]])
            w, _ = nnls(A, b)
            w = w / w.sum()
            # widen the neighbourhood until its hull contains the joint
            if np.linalg.norm(w @ vertices[near] - target) < tol or size >= len(vertices):
                break
            size *= 2
        for c, x in zip(near, w):
            if x > 1e-12:
                rows.append(j)
                cols.append(int(c))
                vals.append(float(x))
    m = sp.coo_matrix((vals, (rows, cols)), shape=(len(joints), len(vertices))).tocsr()
    m = sp.csr_matrix(m.multiply(1.0 / np.asarray(m.sum(axis=1))))
    return JointRegressor(m)


def load_regressor(path: str | Path) -> JointRegressor:
    return JointRegressor.from_json(json.loads(Path(path).read_text()))
