"""Random test meshes."""

import numpy as np
from scipy.spatial import ConvexHull

from msmr.mesh import Mesh


def random_sphere_mesh(n: int, rng: np.random.Generator) -> Mesh:
    """Convex hull of ``n`` random points on the unit sphere, faces wound outward."""
    p = rng.normal(size=(n, 3))
    p /= np.linalg.norm(p, axis=1, keepdims=True)
    hull = ConvexHull(p)
    f = hull.simplices.copy()
    tri = p[f]
    normal = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
    flip = (normal * tri.mean(1)).sum(1) < 0
    f[flip] = f[flip][:, ::-1]
    return Mesh(p, f)
