"""Spiral patch enumeration: a fixed-length ordered neighbourhood per vertex."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from msmr.mesh.mesh import Mesh

PAD = -1


@dataclass(frozen=True, eq=False)
class SpiralTable:
    indices: np.ndarray  # (N, S), PAD where the spiral ran out of vertices

    @property
    def length(self) -> int:
        return self.indices.shape[1]

    @property
    def n_vertices(self) -> int:
        return self.indices.shape[0]

    def to_json(self) -> dict:
        return {"length": self.length, "pad": PAD, "spirals": self.indices.tolist()}

    @classmethod
    def from_json(cls, data: dict) -> "SpiralTable":
        idx = np.array(data["spirals"], dtype=np.int64).reshape(-1, int(data["length"]))
        pad = int(data.get("pad", PAD))
        if pad != PAD:
            idx = np.where(idx == pad, PAD, idx)
        return cls(idx)


def oriented_rings(mesh: Mesh) -> list[list[int]]:
    """Neighbours of every vertex in face-winding order, starting at the smallest index.

    For a boundary vertex the fan is an open path; it is walked from the
    anchor to its end and then continues from the path's start.
    """
    succ: list[dict[int, int]] = [dict() for _ in range(mesh.n_vertices)]
    for a, b, c in mesh.faces.tolist():
        succ[a][b] = c
        succ[b][c] = a
        succ[c][a] = b
    rings = []
    for v in range(mesh.n_vertices):
        nxt = succ[v]
        if not nxt:
            rings.append([])
            continue
        nodes = set(nxt) | set(nxt.values())
        has_pred = set(nxt.values())
        starts = sorted(nodes - has_pred) or [min(nodes)]
        seq: list[int] = []
        seen: set[int] = set()
        for s in starts + sorted(nodes):
            u = s
            while u not in seen and u in nodes:
                seen.add(u)
                seq.append(u)
                if u not in nxt:
                    break
                u = nxt[u]
        k = seq.index(min(seq))
        rings.append(seq[k:] + seq[:k])
    return rings


def enumerate_spirals(mesh: Mesh, length: int) -> SpiralTable:
    """Vertex itself, its ordered 1-ring, then each further ring, cut or padded to ``length``."""
    if length < 1:
        raise ValueError("spiral length must be at least 1")
    rings = oriented_rings(mesh)
    out = np.full((mesh.n_vertices, length), PAD, dtype=np.int64)
    for v in range(mesh.n_vertices):
        spiral = [v]
        seen = {v}
        frontier = [v]
        while len(spiral) < length and frontier:
            nxt_ring = []
            for u in frontier:
                for w in rings[u]:
                    if w not in seen:
                        seen.add(w)
                        nxt_ring.append(w)
            spiral.extend(nxt_ring)
            frontier = nxt_ring
        spiral = spiral[:length]
        out[v, : len(spiral)] = spiral
    return SpiralTable(out)
