"""Chamfer / Hausdorff distances, normal consistency, surface sampling, field MSE."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .extract import ScalarField, TriangleMesh, grid_points, scalar_fn
from .sampler import GLOBAL_ETA


def _points(x) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64).reshape(-1, 3)
    if len(arr) == 0:
        raise ValueError("point set is empty")
    return arr


def nearest_distances(X, Y) -> np.ndarray:
    """For every x in X, the Euclidean distance to its nearest y in Y."""
    X, Y = _points(X), _points(Y)
    d, _ = cKDTree(Y).query(X, k=1)
    return d


def chamfer_one_sided(X, Y) -> float:
    return float(nearest_distances(X, Y).mean())


def chamfer(X, Y) -> float:
    return 0.5 * (chamfer_one_sided(X, Y) + chamfer_one_sided(Y, X))


def hausdorff_one_sided(X, Y) -> float:
    return float(nearest_distances(X, Y).max())


def hausdorff(X, Y, summed: bool = False) -> float:
    """Symmetric Hausdorff: max of the one-sided values.

    ``summed=True`` returns their sum instead, the other reading of the
    two-term formula some benchmark tables use.
    """
    a, b = hausdorff_one_sided(X, Y), hausdorff_one_sided(Y, X)
    return a + b if summed else max(a, b)


@dataclass
class DistanceReport:
    d_C_one_sided_xy: float
    d_C_one_sided_yx: float
    d_C: float
    d_H_one_sided_xy: float
    d_H_one_sided_yx: float
    d_H: float
    d_H_sum: float


def distance_report(X, Y) -> DistanceReport:
    dxy, dyx = nearest_distances(X, Y), nearest_distances(Y, X)
    cxy, cyx = float(dxy.mean()), float(dyx.mean())
    hxy, hyx = float(dxy.max()), float(dyx.max())
    return DistanceReport(cxy, cyx, 0.5 * (cxy + cyx), hxy, hyx, max(hxy, hyx), hxy + hyx)


def normal_consistency(G, normals) -> float:
    """Mean |G(x_i) . n_i|."""
    G = np.asarray(G, dtype=np.float64).reshape(-1, 3)
    n = np.asarray(normals, dtype=np.float64).reshape(-1, 3)
    if len(G) != len(n):
        raise ValueError(f"{len(G)} field values but {len(n)} normals")
    if len(G) == 0:
        raise ValueError("no points")
    return float(np.abs(np.einsum("ij,ij->i", G, n)).mean())


def sample_mesh_surface(mesh: TriangleMesh, count: int, rng: np.random.Generator, with_faces: bool = False):
    """Area-weighted triangle choice, then uniform barycentric coordinates.

    With ``with_faces`` the index of the source triangle of every sample is
    returned as well.
    """
    if len(mesh) == 0:
        raise ValueError("cannot sample an empty mesh")
    areas = mesh.triangle_areas()
    tri = rng.choice(len(areas), size=int(count), p=areas / areas.sum())
    r1 = np.sqrt(rng.random(int(count)))
    r2 = rng.random(int(count))
    a, b, c = (mesh.vertices[mesh.triangles[tri, k]] for k in range(3))
    pts = (1 - r1)[:, None] * a + (r1 * (1 - r2))[:, None] * b + (r1 * r2)[:, None] * c
    return (pts, tri) if with_faces else pts


def face_normals(mesh: TriangleMesh) -> np.ndarray:
    a, b, c = (mesh.vertices[mesh.triangles[:, k]] for k in range(3))
    n = np.cross(b - a, c - a)
    return n / np.maximum(np.linalg.norm(n, axis=1, keepdims=True), 1e-300)


def mesh_normal_consistency(mesh: TriangleMesh, points, normals, samples: np.ndarray, faces: np.ndarray) -> float:
    """NC of a mesh: each reference point takes the normal of the triangle under its nearest sample."""
    _, idx = cKDTree(samples).query(_points(points), k=1)
    return normal_consistency(face_normals(mesh)[faces[idx]], normals)


def field_mse(field_a: ScalarField, field_b: ScalarField, resolution: int = 100, eta: float = GLOBAL_ETA) -> float:
    """Mean squared difference of two scalar fields on a uniform lattice over [-eta, eta]^3."""
    pts = grid_points(resolution, (-eta, eta))
    diff = scalar_fn(field_a)(pts) - scalar_fn(field_b)(pts)
    return float(np.mean(diff**2))
