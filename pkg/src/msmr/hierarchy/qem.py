"""Greedy quadric-error edge contraction with the subset property.

Every contraction merges an edge (i, j), i < j, into vertex i at vertex i's
original position, so the surviving vertices are a subset of the input.
Among legal contractions the one with the smallest quadric error is taken;
exact ties go to the lexicographically smallest edge.

Legality has a hard part (link condition, no duplicate or zero-area faces,
no pinching of two boundary vertices) and a soft part (no face normal
flips). Only when no edge passes both is the cheapest edge passing the hard
part taken, after which the soft check applies again.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from msmr.mesh.mesh import Mesh, MeshError


class DecimationStuckError(RuntimeError):
    def __init__(self, achieved: int, target: int):
        super().__init__(f"no legal contraction left at {achieved} vertices (target {target})")
        self.achieved = achieved
        self.target = target


@dataclass
class Decimation:
    mesh: Mesh
    down: sp.csr_matrix  # (target, N) one-hot selection
    kept: np.ndarray  # original indices of the surviving vertices, ascending
    contractions: list[tuple[int, int, float]] = field(default_factory=list)  # (kept, removed, cost)


def face_quadrics(vertices: np.ndarray, faces: np.ndarray) -> np.ndarray:
    """Per-face plane quadric p p^T with p = (n, -n.v0), n unit normal."""
    v = vertices[faces]
    n = np.cross(v[:, 1] - v[:, 0], v[:, 2] - v[:, 0])
    norm = np.linalg.norm(n, axis=1, keepdims=True)
    n = n / np.where(norm > 0, norm, 1.0)
    p = np.concatenate([n, -(n * v[:, 0]).sum(axis=1, keepdims=True)], axis=1)
    return p[:, :, None] * p[:, None, :]


def vertex_quadrics(mesh: Mesh) -> np.ndarray:
    Q = np.zeros((mesh.n_vertices, 4, 4))
    K = face_quadrics(mesh.vertices, mesh.faces)
    for c in range(3):
        np.add.at(Q, mesh.faces[:, c], K)
    return Q


def quadric_cost(Q: np.ndarray, point: np.ndarray) -> float:
    h = np.append(point, 1.0)
    return float(max(h @ Q @ h, 0.0))


class _Work:
    """Mutable adjacency state for one decimation run."""

    def __init__(self, mesh: Mesh):
        self.pos = mesh.vertices
        self.Q = vertex_quadrics(mesh)
        self.alive = np.ones(mesh.n_vertices, dtype=bool)
        self.stamp = np.zeros(mesh.n_vertices, dtype=np.int64)
        self.faces: dict[int, tuple[int, int, int]] = {i: tuple(f) for i, f in enumerate(mesh.faces.tolist())}
        self.vfaces: list[set[int]] = [set() for _ in range(mesh.n_vertices)]
        for fi, f in self.faces.items():
            for v in f:
                self.vfaces[v].add(fi)
        self.nbrs: list[set[int]] = [set() for _ in range(mesh.n_vertices)]
        for a, b, c in self.faces.values():
            for u, v in ((a, b), (b, c), (c, a)):
                self.nbrs[u].add(v)
                self.nbrs[v].add(u)
        self.face_keys = {tuple(sorted(f)) for f in self.faces.values()}
        self.count = mesh.n_vertices
        scale = np.ptp(self.pos, axis=0).max() if len(self.pos) else 1.0
        self.area_eps = 1e-14 * max(scale, 1e-12) ** 2

    def edge_faces(self, i: int, j: int) -> set[int]:
        return self.vfaces[i] & self.vfaces[j]

    def is_boundary_edge(self, i: int, j: int) -> bool:
        return len(self.edge_faces(i, j)) == 1

    def is_boundary_vertex(self, v: int) -> bool:
        return any(self.is_boundary_edge(v, u) for u in self.nbrs[v])

    def cost(self, i: int, j: int) -> float:
        return quadric_cost(self.Q[i] + self.Q[j], self.pos[i])

    def legal(self, i: int, j: int, allow_flips: bool = False) -> bool:
        shared = self.edge_faces(i, j)
        opposite = set()
        for fi in shared:
            opposite.update(self.faces[fi])
        opposite -= {i, j}
        # link condition: common neighbours are exactly the opposite vertices
        if (self.nbrs[i] & self.nbrs[j]) != opposite:
            return False
        if len(shared) == 2 and self.is_boundary_vertex(i) and self.is_boundary_vertex(j):
            return False
        pi = self.pos[i]
        for fi in self.vfaces[j] - shared:
            f = self.faces[fi]
            new = tuple(i if v == j else v for v in f)
            if tuple(sorted(new)) in self.face_keys:
                return False
            a, b, c = (self.pos[v] for v in f)
            n_old = np.cross(b - a, c - a)
            a2, b2, c2 = (pi if v == j else self.pos[v] for v in f)
            n_new = np.cross(b2 - a2, c2 - a2)
            if np.dot(n_new, n_new) <= self.area_eps:
                return False
            if not allow_flips and np.dot(n_old, n_new) <= 0.0:
                return False
        return True

    def contract(self, i: int, j: int) -> None:
        for fi in list(self.edge_faces(i, j)):
            f = self.faces.pop(fi)
            self.face_keys.discard(tuple(sorted(f)))
            for v in f:
                self.vfaces[v].discard(fi)
        for fi in list(self.vfaces[j]):
            f = self.faces[fi]
            self.face_keys.discard(tuple(sorted(f)))
            nf = tuple(i if v == j else v for v in f)
            self.faces[fi] = nf
            self.face_keys.add(tuple(sorted(nf)))
            self.vfaces[i].add(fi)
        self.vfaces[j] = set()
        for u in self.nbrs[j]:
            self.nbrs[u].discard(j)
            if u != i:
                self.nbrs[u].add(i)
                self.nbrs[i].add(u)
        self.nbrs[i].discard(j)
        self.nbrs[j] = set()
        self.Q[i] = self.Q[i] + self.Q[j]
        self.alive[j] = False
        self.count -= 1


def decimate_qem(mesh: Mesh, target_count: int, return_log: bool = False):
    """Contract edges until ``target_count`` vertices remain.

    Returns ``(coarse_mesh, D)`` where ``D`` is the (target, N) selection
    matrix, or the full :class:`Decimation` record when ``return_log``.
    """
    n = mesh.n_vertices
    if target_count < 4:
        raise MeshError(f"target_count must be at least 4, got {target_count}")
    if target_count > n:
        raise MeshError(f"target_count {target_count} exceeds vertex count {n}")
    if not mesh.is_manifold():
        raise MeshError("mesh has an edge shared by more than two faces")
    w = _Work(mesh)
    log: list[tuple[int, int, float]] = []
    heap: list[tuple[float, int, int, int, int]] = []

    def push_around(v: int) -> None:
        for u in w.nbrs[v]:
            i, j = (v, u) if v < u else (u, v)
            heapq.heappush(heap, (w.cost(i, j), i, j, int(w.stamp[i]), int(w.stamp[j])))

    def rebuild() -> None:
        heap.clear()
        for v in np.flatnonzero(w.alive).tolist():
            for u in w.nbrs[v]:
                if v < u:
                    heap.append((w.cost(v, u), v, u, int(w.stamp[v]), int(w.stamp[u])))
        heapq.heapify(heap)

    rebuild()
    # 0: strict, 1: strict after a full rebuild, 2: flips allowed for one step
    mode = 0
    while w.count > target_count:
        if not heap:
            if mode == 2:
                raise DecimationStuckError(w.count, target_count)
            mode += 1
            rebuild()
            continue
        cost, i, j, si, sj = heapq.heappop(heap)
        if not (w.alive[i] and w.alive[j]) or w.stamp[i] != si or w.stamp[j] != sj:
            continue
        if j not in w.nbrs[i] or not w.legal(i, j, allow_flips=mode == 2):
            continue
        if mode == 2:
            heap.clear()
        mode = 0
        w.contract(i, j)
        log.append((i, j, cost))
        touched = {i} | w.nbrs[i]
        for v in touched:
            w.stamp[v] += 1
        if heap:
            for v in sorted(touched):
                push_around(v)
        else:
            rebuild()

    kept = np.flatnonzero(w.alive)
    remap = -np.ones(n, dtype=np.int64)
    remap[kept] = np.arange(len(kept))
    faces = np.array([w.faces[k] for k in sorted(w.faces)], dtype=np.int64).reshape(-1, 3)
    coarse = Mesh(mesh.vertices[kept], remap[faces])
    D = sp.csr_matrix((np.ones(len(kept)), (np.arange(len(kept)), kept)), shape=(len(kept), n))
    if return_log:
        return Decimation(coarse, D, kept, log)
    return coarse, D
