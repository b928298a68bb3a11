"""Triangle meshes and Wavefront OBJ (v/f records only)."""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class MeshError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Mesh:
    vertices: np.ndarray  # (N, 3) meters
    faces: np.ndarray  # (F, 3) vertex indices

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=np.float64).reshape(-1, 3)
        f = np.asarray(self.faces, dtype=np.int64).reshape(-1, 3)
        v.setflags(write=False)
        f.setflags(write=False)
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "faces", f)
        if f.size:
            if f.min() < 0 or f.max() >= len(v):
                raise MeshError(f"face index out of range for {len(v)} vertices")
            degenerate = (f[:, 0] == f[:, 1]) | (f[:, 1] == f[:, 2]) | (f[:, 0] == f[:, 2])
            if degenerate.any():
                raise MeshError(f"degenerate face {int(np.flatnonzero(degenerate)[0])}")

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    def with_vertices(self, vertices: np.ndarray) -> "Mesh":
        return Mesh(vertices, self.faces)

    def edge_faces(self) -> dict[tuple[int, int], list[int]]:
        out: dict[tuple[int, int], list[int]] = defaultdict(list)
        for fi, (a, b, c) in enumerate(self.faces.tolist()):
            for u, v in ((a, b), (b, c), (c, a)):
                out[(min(u, v), max(u, v))].append(fi)
        return out

    def edges(self) -> np.ndarray:
        """Unique undirected edges as sorted (i, j) rows, lexicographic order."""
        if not len(self.faces):
            return np.zeros((0, 2), dtype=np.int64)
        f = self.faces
        e = np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]])
        e.sort(axis=1)
        return np.unique(e, axis=0)

    def neighbors(self) -> list[set[int]]:
        adj: list[set[int]] = [set() for _ in range(self.n_vertices)]
        for a, b in self.edges().tolist():
            adj[a].add(b)
            adj[b].add(a)
        return adj

    def is_manifold(self) -> bool:
        return all(len(fs) <= 2 for fs in self.edge_faces().values())

    def is_closed(self) -> bool:
        return all(len(fs) == 2 for fs in self.edge_faces().values())

    def face_normals(self) -> np.ndarray:
        v = self.vertices[self.faces]
        n = np.cross(v[:, 1] - v[:, 0], v[:, 2] - v[:, 0])
        norm = np.linalg.norm(n, axis=1, keepdims=True)
        return n / np.where(norm > 0, norm, 1.0)

    def mean_edge_length(self) -> float:
        e = self.edges()
        return float(np.linalg.norm(self.vertices[e[:, 0]] - self.vertices[e[:, 1]], axis=1).mean())

    def flipped(self) -> "Mesh":
        """Same surface with reversed winding."""
        return Mesh(self.vertices, self.faces[:, ::-1])


def format_obj(mesh: Mesh) -> str:
    lines = [f"v {x!r} {y!r} {z!r}" for x, y, z in mesh.vertices.tolist()]
    lines += [f"f {a + 1} {b + 1} {c + 1}" for a, b, c in mesh.faces.tolist()]
    return "\n".join(lines) + "\n"


def write_obj(path: str | Path, mesh: Mesh) -> None:
    from msmr.pipeline.atomic import atomic_write_text

    atomic_write_text(Path(path), format_obj(mesh))


def parse_obj(text: str) -> Mesh:
    verts, faces = [], []
    for lineno, raw in enumerate(text.splitlines(), 1):
        parts = raw.split()
        if not parts or parts[0].startswith("#"):
            continue
        try:
            if parts[0] == "v":
                verts.append([float(p) for p in parts[1:4]])
            elif parts[0] == "f":
                idx = [int(p.split("/")[0]) for p in parts[1:]]
                idx = [i - 1 if i > 0 else len(verts) + i for i in idx]
                # fan-triangulate polygons
                for k in range(1, len(idx) - 1):
                    faces.append([idx[0], idx[k], idx[k + 1]])
        except (ValueError, IndexError) as exc:
            raise MeshError(f"malformed OBJ record on line {lineno}: {raw!r}") from exc
    return Mesh(np.array(verts, dtype=np.float64).reshape(-1, 3), np.array(faces, dtype=np.int64).reshape(-1, 3))


def read_obj(path: str | Path) -> Mesh:
    return parse_obj(Path(path).read_text())
