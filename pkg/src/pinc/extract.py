"""Dense grid evaluation of u and zero level-set extraction."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Union

import numpy as np
import torch
from skimage import measure

from .network import Params, forward_value
from .sampler import GLOBAL_ETA, Affine

ScalarField = Union[Params, Callable[[np.ndarray], np.ndarray]]


@dataclass
class ScalarGrid:
    resolution: int
    bounds: tuple[float, float]
    values: np.ndarray  # (res, res, res), index order (x, y, z)

    @property
    def spacing(self) -> float:
        return (self.bounds[1] - self.bounds[0]) / (self.resolution - 1)

    def axis(self) -> np.ndarray:
        return np.linspace(self.bounds[0], self.bounds[1], self.resolution)


@dataclass
class TriangleMesh:
    vertices: np.ndarray
    triangles: np.ndarray

    @classmethod
    def empty(cls) -> "TriangleMesh":
        return cls(np.zeros((0, 3)), np.zeros((0, 3), dtype=np.int64))

    def __len__(self) -> int:
        return len(self.triangles)

    def triangle_areas(self) -> np.ndarray:
        a, b, c = (self.vertices[self.triangles[:, k]] for k in range(3))
        return 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)


def scalar_fn(field: ScalarField, batch: int = 65536) -> Callable[[np.ndarray], np.ndarray]:
    """Wrap Params (scalar head) or a plain callable as ``points -> values``."""
    if isinstance(field, Params):
        def fn(pts: np.ndarray) -> np.ndarray:
            out = np.empty(len(pts))
            with torch.no_grad():
                for s in range(0, len(pts), batch):
                    chunk = torch.from_numpy(np.ascontiguousarray(pts[s : s + batch]))
                    out[s : s + batch] = forward_value(field, chunk)[:, 0].numpy()
            return out
        return fn
    return lambda pts: np.asarray(field(pts), dtype=np.float64).reshape(-1)


def grid_points(resolution: int, bounds=(-GLOBAL_ETA, GLOBAL_ETA)) -> np.ndarray:
    ax = np.linspace(bounds[0], bounds[1], resolution)
    gx, gy, gz = np.meshgrid(ax, ax, ax, indexing="ij")
    return np.stack([gx.ravel(), gy.ravel(), gz.ravel()], axis=1)


def evaluate_grid(field: ScalarField, resolution: int = 128, bounds=(-GLOBAL_ETA, GLOBAL_ETA)) -> ScalarGrid:
    if resolution < 2:
        raise ValueError("grid resolution must be >= 2")
    bounds = (float(bounds[0]), float(bounds[1]))
    values = scalar_fn(field)(grid_points(resolution, bounds)).reshape((resolution,) * 3)
    if not np.isfinite(values).all():
        raise FloatingPointError("non-finite values on the extraction grid")
    return ScalarGrid(resolution, bounds, values)


def marching_cubes(grid: ScalarGrid, iso: float = 0.0, flip_sign: bool = False) -> TriangleMesh:
    """Classic (Lorensen) marching cubes with linear edge interpolation.

    Interior-positive fields (u > 0 inside) get outward-facing triangles;
    ``flip_sign`` handles interior-negative fields.
    """
    vals = -grid.values if flip_sign else grid.values
    level = -iso if flip_sign else iso
    if not (vals.min() < level < vals.max()):
        return TriangleMesh.empty()
    verts, faces, _, _ = measure.marching_cubes(
        vals, level=level, spacing=(grid.spacing,) * 3, method="lorensen",
        gradient_direction="ascent", allow_degenerate=False,
    )
    verts = verts.astype(np.float64) + grid.bounds[0]
    mesh = TriangleMesh(verts, faces.astype(np.int64))
    keep = mesh.triangle_areas() > 1e-12
    if not keep.all():
        mesh = _compact(TriangleMesh(verts, mesh.triangles[keep]))
    return mesh


def _compact(mesh: TriangleMesh) -> TriangleMesh:
    used, inverse = np.unique(mesh.triangles.ravel(), return_inverse=True)
    return TriangleMesh(mesh.vertices[used], inverse.reshape(-1, 3))


def de_normalize(mesh: TriangleMesh, affine: Affine) -> TriangleMesh:
    return TriangleMesh(affine.invert(mesh.vertices) if len(mesh.vertices) else mesh.vertices.copy(),
                        mesh.triangles.copy())


def signed_volume(mesh: TriangleMesh) -> float:
    """Positive for a closed mesh whose triangles face outward."""
    a, b, c = (mesh.vertices[mesh.triangles[:, k]] for k in range(3))
    return float(np.einsum("ij,ij->i", a, np.cross(b, c)).sum() / 6.0)
