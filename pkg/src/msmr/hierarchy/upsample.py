"""Barycentric upsampling matrices from a coarse mesh back to its parent."""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from msmr.mesh.mesh import Mesh, MeshError


def closest_point_barycentric(p: np.ndarray, a: np.ndarray, b: np.ndarray, c: np.ndarray) -> np.ndarray:
    """Barycentric weights (wa, wb, wc) of the point of each triangle nearest to ``p``.

    ``a``, ``b``, ``c`` are (T, 3) corner arrays; the result is (T, 3).
    Region classification follows the usual Voronoi-region walk
    (vertex, edge, then face interior).
    """
    ab, ac, ap = b - a, c - a, p - a
    d1 = (ab * ap).sum(1)
    d2 = (ac * ap).sum(1)
    bp = p - b
    d3 = (ab * bp).sum(1)
    d4 = (ac * bp).sum(1)
    cp = p - c
    d5 = (ab * cp).sum(1)
    d6 = (ac * cp).sum(1)
    va = d3 * d6 - d5 * d4
    vb = d5 * d2 - d1 * d6
    vc = d1 * d4 - d3 * d2

    t = len(a)
    w = np.zeros((t, 3))
    done = np.zeros(t, dtype=bool)

    def assign(mask, wa, wb, wc):
        m = mask & ~done
        w[m, 0] = wa[m] if np.ndim(wa) else wa
        w[m, 1] = wb[m] if np.ndim(wb) else wb
        w[m, 2] = wc[m] if np.ndim(wc) else wc
        done[m] = True

    ones, zeros = np.ones(t), np.zeros(t)
    with np.errstate(divide="ignore", invalid="ignore"):
        assign((d1 <= 0) & (d2 <= 0), ones, zeros, zeros)
        assign((d3 >= 0) & (d4 <= d3), zeros, ones, zeros)
        assign((d6 >= 0) & (d5 <= d6), zeros, zeros, ones)
        s = d1 / (d1 - d3)
        assign((vc <= 0) & (d1 >= 0) & (d3 <= 0), 1 - s, s, zeros)
        s = d2 / (d2 - d6)
        assign((vb <= 0) & (d2 >= 0) & (d6 <= 0), 1 - s, zeros, s)
        s = (d4 - d3) / ((d4 - d3) + (d5 - d6))
        assign((va <= 0) & ((d4 - d3) >= 0) & ((d5 - d6) >= 0), zeros, 1 - s, s)
        denom = va + vb + vc
        v_ = vb / denom
        w_ = vc / denom
        assign(np.ones(t, dtype=bool), 1 - v_ - w_, v_, w_)
    return w


def nearest_triangle(p: np.ndarray, coarse: Mesh) -> tuple[int, np.ndarray]:
    """Index of the nearest coarse face (lowest index on ties) and the barycentrics."""
    tri = coarse.vertices[coarse.faces]
    w = closest_point_barycentric(p, tri[:, 0], tri[:, 1], tri[:, 2])
    q = np.einsum("tk,tkd->td", w, tri)
    d2 = ((q - p) ** 2).sum(1)
    best = int(np.argmin(d2))
    return best, w[best]


def build_upsample(fine: Mesh, coarse: Mesh, down: sp.spmatrix) -> sp.csr_matrix:
    """(N_fine, N_coarse) interpolation matrix.

    Retained vertices map one-hot onto themselves; discarded vertices get
    the barycentric weights of their closest point on the coarse surface.
    """
    if len(coarse.faces) == 0:
        raise MeshError("coarse mesh has no faces to project onto")
    down = sp.csr_matrix(down)
    n_fine, n_coarse = fine.n_vertices, coarse.n_vertices
    if down.shape != (n_coarse, n_fine):
        raise MeshError(f"downsample matrix shape {down.shape} != ({n_coarse}, {n_fine})")
    coo = down.tocoo()
    coarse_of = -np.ones(n_fine, dtype=np.int64)
    coarse_of[coo.col] = coo.row
    rows, cols, vals = [], [], []
    for v in range(n_fine):
        if coarse_of[v] >= 0:
            rows.append(v)
            cols.append(int(coarse_of[v]))
            vals.append(1.0)
            continue
        f, w = nearest_triangle(fine.vertices[v], coarse)
        w = np.clip(w, 0.0, None)
        w = w / w.sum()
        for corner, weight in zip(coarse.faces[f].tolist(), w.tolist()):
            if weight > 0.0:
                rows.append(v)
                cols.append(corner)
                vals.append(weight)
    return sp.csr_matrix((vals, (rows, cols)), shape=(n_fine, n_coarse))
