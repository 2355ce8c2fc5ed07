"""Point cloud normalisation and the per-iteration training samples.

All randomness comes from :func:`make_rng`: a Philox generator keyed by the run
seed plus a purpose tag (and usually the iteration), so every draw is
reproducible on its own and a resumed run sees exactly the same samples.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass, replace

import numpy as np
from scipy.spatial import cKDTree

NN_K = 50
GLOBAL_ETA = 1.1
N_GLOBAL = 2000
SCALE_GUARD = 1e-9


def make_rng(seed: int, purpose: str, *keys: int) -> np.random.Generator:
    tag = zlib.crc32(purpose.encode("utf-8"))
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, tag, *map(int, keys)])
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class Affine:
    """x_normalized = (x - center) / scale."""

    center: np.ndarray
    scale: float

    @classmethod
    def identity(cls) -> "Affine":
        return cls(np.zeros(3), 1.0)

    def apply(self, x: np.ndarray) -> np.ndarray:
        return (np.asarray(x, dtype=np.float64) - self.center) / self.scale

    def invert(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(x, dtype=np.float64) * self.scale + self.center

    def to_dict(self) -> dict:
        return {"center": [float(c) for c in self.center], "scale": float(self.scale)}

    @classmethod
    def from_dict(cls, d: dict) -> "Affine":
        return cls(np.asarray(d["center"], dtype=np.float64), float(d["scale"]))


@dataclass
class PointCloud:
    points: np.ndarray
    normals: np.ndarray | None = None
    nn50_dist: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.points)


def normalize(raw_points, normals=None) -> tuple[PointCloud, Affine]:
    """Centre at the centroid and scale so the largest norm is one."""
    pts = np.asarray(raw_points, dtype=np.float64).reshape(-1, 3)
    if len(pts) == 0:
        raise ValueError("cannot normalize an empty point cloud")
    center = pts.mean(axis=0)
    centered = pts - center
    scale = max(float(np.linalg.norm(centered, axis=1).max()), SCALE_GUARD)
    if normals is not None:
        normals = np.asarray(normals, dtype=np.float64).reshape(-1, 3)
        normals = normals / np.linalg.norm(normals, axis=1, keepdims=True)
    cloud = PointCloud(centered / scale, normals)
    cloud.nn50_dist = precompute_nn50(cloud)
    return cloud, Affine(center, scale)


def precompute_nn50(cloud: PointCloud | np.ndarray, k: int = NN_K) -> np.ndarray:
    """Distance from every point to its k-th nearest other point (exact).

    Clouds with at most k points fall back to the (size-1)-th neighbour; a
    single point gets distance 0.
    """
    pts = cloud.points if isinstance(cloud, PointCloud) else np.asarray(cloud, dtype=np.float64)
    n = len(pts)
    k = min(k, n - 1)
    if k <= 0:
        return np.zeros(n)
    dist, _ = cKDTree(pts).query(pts, k=k + 1)
    # column 0 is the point itself (or a coincident duplicate, also distance 0)
    return np.ascontiguousarray(dist[:, k])


@dataclass
class SurfaceBatch:
    points: np.ndarray
    index: np.ndarray


@dataclass
class CollocationBatch:
    local: np.ndarray
    global_pts: np.ndarray

    def union(self) -> np.ndarray:
        return np.concatenate([self.local, self.global_pts], axis=0)


def sample_surface_batch(cloud: PointCloud, batch: int, rng: np.random.Generator) -> SurfaceBatch:
    """Uniform draws with replacement; never more than the cloud holds."""
    n = min(int(batch), len(cloud))
    idx = rng.integers(0, len(cloud), size=n)
    return SurfaceBatch(cloud.points[idx], idx)


def sample_collocation(
    cloud: PointCloud,
    surface: SurfaceBatch,
    rng: np.random.Generator,
    n_global: int = N_GLOBAL,
    eta: float = GLOBAL_ETA,
) -> CollocationBatch:
    """Local: surface points jittered by N(0, nn50^2 I). Global: U(-eta, eta)^3."""
    if cloud.nn50_dist is None:
        cloud.nn50_dist = precompute_nn50(cloud)
    sigma = cloud.nn50_dist[surface.index][:, None]
    local = surface.points + rng.standard_normal(surface.points.shape) * sigma
    global_pts = rng.uniform(-eta, eta, size=(int(n_global), 3))
    return CollocationBatch(local, global_pts)


def add_noise(cloud: PointCloud, sigma: float, rng: np.random.Generator) -> PointCloud:
    """Displace every point by i.i.d. N(0, sigma^2 I); normals are kept."""
    if sigma < 0:
        raise ValueError("sigma must be non-negative")
    if sigma == 0:
        return replace(cloud, points=cloud.points.copy())
    pts = cloud.points + rng.normal(0.0, sigma, size=cloud.points.shape)
    noisy = PointCloud(pts, None if cloud.normals is None else cloud.normals.copy())
    noisy.nn50_dist = precompute_nn50(noisy)
    return noisy
