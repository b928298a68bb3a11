"""Small procedural meshes: test fixtures and scene props."""

from __future__ import annotations

import numpy as np

from .mesh import Mesh


def octahedron(radius: float = 1.0) -> Mesh:
    v = radius * np.array(
        [[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1], [0, 0, -1]], dtype=np.float64
    )
    f = np.array(
        [[0, 2, 4], [2, 1, 4], [1, 3, 4], [3, 0, 4], [2, 0, 5], [1, 2, 5], [3, 1, 5], [0, 3, 5]]
    )
    return Mesh(v, f)


def icosphere(subdivisions: int = 2, radius: float = 1.0) -> Mesh:
    """Unit icosahedron subdivided ``subdivisions`` times and pushed to the sphere."""
    t = (1.0 + 5 ** 0.5) / 2.0
    v = [
        [-1, t, 0], [1, t, 0], [-1, -t, 0], [1, -t, 0],
        [0, -1, t], [0, 1, t], [0, -1, -t], [0, 1, -t],
        [t, 0, -1], [t, 0, 1], [-t, 0, -1], [-t, 0, 1],
    ]
    f = [
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ]
    verts = [np.array(p, dtype=np.float64) / np.linalg.norm(p) for p in v]
    faces = f
    for _ in range(subdivisions):
        cache: dict[tuple[int, int], int] = {}

        def mid(a: int, b: int) -> int:
            key = (min(a, b), max(a, b))
            if key not in cache:
                m = verts[a] + verts[b]
                verts.append(m / np.linalg.norm(m))
                cache[key] = len(verts) - 1
            return cache[key]

        nf = []
        for a, b, c in faces:
            ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
            nf += [[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]
        faces = nf
    return Mesh(radius * np.array(verts), np.array(faces, dtype=np.int64))


def grid(nx: int, ny: int, spacing: float = 1.0) -> Mesh:
    """Planar (z = 0) triangulated grid with ``nx`` by ``ny`` vertices, normals +z."""
    xs, ys = np.meshgrid(np.arange(nx) * spacing, np.arange(ny) * spacing, indexing="xy")
    v = np.column_stack([xs.ravel(), ys.ravel(), np.zeros(nx * ny)])
    f = []
    for j in range(ny - 1):
        for i in range(nx - 1):
            a = j * nx + i
            f += [[a, a + 1, a + nx + 1], [a, a + nx + 1, a + nx]]
    return Mesh(v, np.array(f, dtype=np.int64))


def cylinder(radius: float, height: float, segments: int = 16, rings: int = 4) -> Mesh:
    """Closed cylinder along +z from z=0 to z=height, capped with centre vertices."""
    ang = 2 * np.pi * np.arange(segments) / segments
    v = []
    for r in range(rings + 1):
        z = height * r / rings
        v += [[radius * np.cos(a), radius * np.sin(a), z] for a in ang]
    bottom, top = len(v), len(v) + 1
    v += [[0.0, 0.0, 0.0], [0.0, 0.0, height]]
    f = []
    for r in range(rings):
        for s in range(segments):
            a = r * segments + s
            b = r * segments + (s + 1) % segments
            f += [[a, b, b + segments], [a, b + segments, a + segments]]
    last = rings * segments
    for s in range(segments):
        n = (s + 1) % segments
        f.append([bottom, n, s])
        f.append([top, last + s, last + n])
    return Mesh(np.array(v, dtype=np.float64), np.array(f, dtype=np.int64))
