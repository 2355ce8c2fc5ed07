"""Independent oracles: analytic shapes, the curl-energy counterexample, audits.

Nothing here reuses the fast paths it checks: distances are brute force,
derivatives are finite differences, integrals are midpoint sums.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
import torch

from . import diffcore
from .diffcore import Jet
from .network import MLPConfig, Params, forward, forward_value, init_geometric, init_kaiming
from .sampler import PointCloud, make_rng, precompute_nn50


@dataclass(frozen=True)
class AnalyticShape:
    kind: str  # "sphere" | "cube"
    size: float = 0.5  # sphere radius or cube half edge

    def __post_init__(self):
        if self.kind not in ("sphere", "cube"):
            raise ValueError(f"unknown shape {self.kind!r}")
        if self.size <= 0:
            raise ValueError("shape size must be positive")

    @classmethod
    def sphere(cls, radius: float = 0.5) -> "AnalyticShape":
        return cls("sphere", radius)

    @classmethod
    def cube(cls, edge: float = 1.0) -> "AnalyticShape":
        return cls("cube", edge / 2.0)


def analytic_sdf(shape: AnalyticShape, x) -> tuple[np.ndarray, np.ndarray]:
    """Exact signed distance (positive inside) and its gradient."""
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    x = x.reshape(-1, 3)
    if shape.kind == "sphere":
        r = np.linalg.norm(x, axis=1)
        u = shape.size - r
        with np.errstate(invalid="ignore", divide="ignore"):
            grad = -x / r[:, None]
        grad[r == 0] = 0.0
    else:
        q = np.abs(x) - shape.size
        outside = np.maximum(q, 0.0)
        out_norm = np.linalg.norm(outside, axis=1)
        inside = np.minimum(q.max(axis=1), 0.0)
        u = -(out_norm + inside)
        sign = np.where(x >= 0, 1.0, -1.0)
        grad = np.zeros_like(x)
        is_out = out_norm > 0
        grad[is_out] = -(outside[is_out] / out_norm[is_out, None]) * sign[is_out]
        axis = q.argmax(axis=1)
        rows = np.flatnonzero(~is_out)
        grad[rows, axis[rows]] = -sign[rows, axis[rows]]
    if single:
        return u[0], grad[0]
    return u, grad


def synth_cloud(shape: AnalyticShape, n: int, rng: np.random.Generator) -> PointCloud:
    """Points uniformly distributed on the shape's surface, exact outward normals."""
    if shape.kind == "sphere":
        d = rng.standard_normal((n, 3))
        d /= np.linalg.norm(d, axis=1, keepdims=True)
        pts, normals = shape.size * d, d.copy()
    else:
        h = shape.size
        face = rng.integers(0, 6, size=n)  # equal areas
        axis, side = face // 2, np.where(face % 2 == 0, 1.0, -1.0)
        pts = rng.uniform(-h, h, size=(n, 3))
        pts[np.arange(n), axis] = side * h
        normals = np.zeros((n, 3))
        normals[np.arange(n), axis] = side
    cloud = PointCloud(pts, normals)
    cloud.nn50_dist = precompute_nn50(cloud)
    return cloud


def sphere_sdf_fn(radius: float) -> Callable[[np.ndarray], np.ndarray]:
    return lambda pts: radius - np.linalg.norm(pts, axis=1)


# --- curl-free counterexample --------------------------------------------------

def _smooth_u_gradient(X: Jet) -> Jet:
    """Gradient of u(x, y, z) = sin(pi x) sin(pi y) sin(pi z), written as jets."""
    sx, sy, sz = (X[k : k + 1] * math.pi for k in range(3))
    s = [t.sin() for t in (sx, sy, sz)]
    c = [t.cos() for t in (sx, sy, sz)]
    return Jet.cat([
        c[0] * s[1] * s[2] * math.pi,
        s[0] * c[1] * s[2] * math.pi,
        s[0] * s[1] * c[2] * math.pi,
    ])


def curl_counterexample_energies(n: int, quad_resolution: int = 512, smooth_u: bool = False,
                       full_3d: bool = False) -> tuple[float, float]:
    """Midpoint quadrature of |grad u_n - G_n|^2 and |curl G_n|^2 over [0, 1]^3.

    G_n = grad u_n + (0, sin(2 pi n x) / n, 0). Both integrands depend on x
    only, so by default the integral runs along one line (y = z = 1/2);
    ``full_3d`` uses the full tensor-product rule instead.
    """
    if n < 1:
        raise ValueError("n must be a positive integer")
    m = int(quad_resolution)
    mid = (np.arange(m) + 0.5) / m
    if full_3d:
        gx, gy, gz = np.meshgrid(mid, mid, mid, indexing="ij")
        pts = np.stack([gx.ravel(), gy.ravel(), gz.ravel()], axis=1)
    else:
        pts = np.stack([mid, np.full(m, 0.5), np.full(m, 0.5)], axis=1)
    X = Jet.variable(torch.from_numpy(pts))
    zero = Jet.constant(torch.zeros(len(pts), 1, dtype=torch.float64))
    grad_u = _smooth_u_gradient(X) if smooth_u else Jet.cat([zero, zero, zero])
    wave = (X[0:1] * (2.0 * math.pi * n)).sin() * (1.0 / n)
    G = grad_u + Jet.cat([zero, wave, zero])
    split = ((grad_u.value - G.value) ** 2).sum(-1).mean()
    curl_g = diffcore.curl(G.jacobian)
    curl_energy = (curl_g**2).sum(-1).mean()
    return float(split), float(curl_energy)


# --- finite-difference audits ----------------------------------------------------

@dataclass
class FDReport:
    max_rel_err: float
    mean_rel_err: float
    h: float
    n_points: int


def _rel(a: np.ndarray, b: np.ndarray) -> float:
    num, den = np.linalg.norm(a - b), np.linalg.norm(a)
    if den == 0.0:
        return 0.0 if num == 0.0 else math.inf
    return float(num / den)


def finite_difference_audit(params: Params, points, h: float = 1e-4) -> FDReport:
    """Jet Jacobian vs central differences of the plain forward pass, per point."""
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    with torch.no_grad():
        jac = forward(params, torch.from_numpy(pts)).jacobian.numpy()
        fd = np.empty_like(jac)
        for j in range(3):
            e = np.zeros(3)
            e[j] = h
            plus = forward_value(params, torch.from_numpy(pts + e)).numpy()
            minus = forward_value(params, torch.from_numpy(pts - e)).numpy()
            fd[:, :, j] = (plus - minus) / (2 * h)
    errs = np.array([_rel(jac[k], fd[k]) for k in range(len(pts))])
    return FDReport(float(errs.max()), float(errs.mean()), h, len(pts))


def param_gradient_audit(loss_fn: Callable[[Params], torch.Tensor], params: Params, h: float = 1e-5) -> float:
    """Relative error between backward() and central differences over every parameter."""
    base = params.flat.detach().clone()
    p = Params(base, params.cfg)
    grad = diffcore.backward(loss_fn(p), p.flat).numpy()
    fd = np.empty_like(grad)
    with torch.no_grad():
        for i in range(base.numel()):
            step = torch.zeros_like(base)
            step[i] = h
            lp = float(loss_fn(Params(base + step, params.cfg, requires_grad=False)))
            lm = float(loss_fn(Params(base - step, params.cfg, requires_grad=False)))
            fd[i] = (lp - lm) / (2 * h)
    return _rel(grad, fd)


# --- brute-force distance oracles ------------------------------------------------

def brute_nearest(X, Y, chunk: int = 512) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64).reshape(-1, 3)
    Y = np.asarray(Y, dtype=np.float64).reshape(-1, 3)
    out = np.empty(len(X))
    for s in range(0, len(X), chunk):
        diff = X[s : s + chunk, None, :] - Y[None, :, :]
        d2 = diff[..., 0] * diff[..., 0] + diff[..., 1] * diff[..., 1] + diff[..., 2] * diff[..., 2]
        out[s : s + chunk] = np.sqrt(d2.min(axis=1))
    return out


def brute_kth_neighbor(points, k: int) -> np.ndarray:
    pts = np.asarray(points, dtype=np.float64)
    k = min(k, len(pts) - 1)
    if k <= 0:
        return np.zeros(len(pts))
    diff = pts[:, None, :] - pts[None, :, :]
    d = np.sqrt(diff[..., 0] ** 2 + diff[..., 1] ** 2 + diff[..., 2] ** 2)
    np.fill_diagonal(d, np.inf)
    return np.sort(d, axis=1)[:, k - 1]


def brute_chamfer(X, Y) -> float:
    return 0.5 * (float(brute_nearest(X, Y).mean()) + float(brute_nearest(Y, X).mean()))


def brute_hausdorff(X, Y) -> float:
    return max(float(brute_nearest(X, Y).max()), float(brute_nearest(Y, X).max()))


# --- verification report --------------------------------------------------------

@dataclass
class Check:
    name: str
    value: float
    target: float
    tolerance: float
    passed: bool

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status}  {self.name}: value={self.value:.10g} target={self.target:.10g} tol={self.tolerance:g}"


def _check(name, value, target, tol) -> Check:
    ok = math.isfinite(value) and abs(value - target) <= tol
    return Check(name, float(value), float(target), float(tol), ok)


# exact value of the curl energy of (0, sin(2 pi n x) / n, 0) over the unit cube
CURL_ENERGY = 2.0 * math.pi**2


def harness_rows(ns=(1, 2, 4, 8), quad_resolution: int = 512) -> list[tuple[int, float, float]]:
    return [(n, *curl_counterexample_energies(n, quad_resolution)) for n in ns]


def run_checks(seed: int = 0) -> list[Check]:
    """The checks behind ``pinc verify``."""
    from .extract import evaluate_grid, marching_cubes
    from .fields import sample_fields
    from .loss import total_loss

    checks: list[Check] = []
    rows = harness_rows()
    for n, split, curl_e in rows:
        checks.append(_check(f"curl-free counterexample n={n}: splitting energy", split, 1 / (2 * n * n), 1e-6))
        checks.append(_check(f"curl-free counterexample n={n}: curl energy", curl_e, CURL_ENERGY, 1e-3))
    energy = {n: s for n, s, _ in rows}
    for n in (1, 2, 4):
        checks.append(_check(f"splitting energy ratio n={n}/{2 * n}", energy[n] / energy[2 * n], 4.0, 0.04))

    rot = diffcore.curl(torch.tensor([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 0.0]]))
    checks.append(_check("curl of (-y, x, 0)", float(torch.linalg.vector_norm(rot - torch.tensor([0.0, 0.0, 2.0]))), 0.0, 1e-12))

    rng = make_rng(seed, "verify")
    net = init_geometric(MLPConfig(depth=4, width=128, skip_layer=2), seed=seed, radius=0.5)
    rep = finite_difference_audit(net, rng.uniform(-1, 1, size=(50, 3)), h=1e-4)
    checks.append(_check("input Jacobian vs central differences (rel)", rep.max_rel_err, 0.0, 1e-5))

    small = init_kaiming(MLPConfig(depth=2, width=16, skip_layer=1), seed=seed)
    xs = torch.from_numpy(rng.uniform(-1, 1, size=(8, 3)))
    xc = torch.from_numpy(rng.uniform(-1.1, 1.1, size=(8, 3)))
    rel = param_gradient_audit(lambda prm: total_loss(prm, xs, xc).total, small, h=1e-5)
    checks.append(_check("loss parameter gradient vs central differences (rel)", rel, 0.0, 1e-4))

    with torch.no_grad():
        fs = sample_fields(net, torch.from_numpy(rng.uniform(-1, 1, size=(1000, 3))))
    gnorm = torch.linalg.vector_norm(fs.G, dim=-1)
    checks.append(_check("|G| = 1 for p = inf", float((gnorm - 1).abs().max()), 0.0, 1e-9))

    grid = evaluate_grid(sphere_sdf_fn(0.5), resolution=64)
    mesh = marching_cubes(grid)
    radii = np.linalg.norm(mesh.vertices, axis=1) if len(mesh.vertices) else np.array([np.inf])
    checks.append(_check("marching cubes sphere: max |radius - 0.5| (cells)",
                         float(np.abs(radii - 0.5).max() / grid.spacing), 0.0, 2.0))

    from .metrics import chamfer, hausdorff

    worst = 0.0
    for _ in range(5):
        X = rng.standard_normal((int(rng.integers(1, 400)), 3))
        Y = rng.standard_normal((int(rng.integers(1, 400)), 3))
        worst = max(worst, abs(chamfer(X, Y) - brute_chamfer(X, Y)), abs(hausdorff(X, Y) - brute_hausdorff(X, Y)))
    checks.append(_check("fast distances vs brute force (abs diff)", worst, 0.0, 0.0))
    return checks


# --- sphere reconstruction protocol -----------------------------------------------

SPHERE_POINTS = 2000
SPHERE_EVAL_SAMPLES = 200_000
SPHERE_GRID = 128
_TRAINING_SOURCES = ("diffcore.py", "network.py", "fields.py", "loss.py", "sampler.py", "trainer.py")


def _source_digest() -> str:
    import hashlib
    from pathlib import Path

    h = hashlib.sha256()
    here = Path(__file__).parent
    for name in _TRAINING_SOURCES:
        h.update((here / name).read_bytes())
    return h.hexdigest()


def sphere_cloud(seed: int = 0, n: int = SPHERE_POINTS):
    """Radius-0.5 sphere sample, normalised to the unit sphere."""
    from .sampler import normalize

    raw = synth_cloud(AnalyticShape.sphere(0.5), n, make_rng(seed, "sphere-cloud"))
    return normalize(raw.points, raw.normals)[0]


def sphere_metrics(params: Params, cloud: PointCloud, seed: int = 0,
                   samples: int = SPHERE_EVAL_SAMPLES, resolution: int = SPHERE_GRID) -> dict:
    """Chamfer to the analytic unit sphere, NC of G, and eikonal error inside r = 0.9."""
    from .extract import evaluate_grid, marching_cubes
    from .fields import sample_fields
    from .metrics import chamfer, normal_consistency, sample_mesh_surface

    mesh = marching_cubes(evaluate_grid(params, resolution))
    truth = synth_cloud(AnalyticShape.sphere(1.0), samples, make_rng(seed, "sphere-truth")).points
    d_c = chamfer(sample_mesh_surface(mesh, samples, make_rng(seed, "sphere-mesh")), truth) if len(mesh) else math.inf
    with torch.no_grad():
        fs = sample_fields(params, torch.from_numpy(cloud.points))
        nc = normal_consistency(fs.G.numpy(), cloud.normals)
        rng = make_rng(seed, "sphere-ball")
        d = rng.standard_normal((10_000, 3))
        d *= 0.9 * rng.random((10_000, 1)) ** (1 / 3) / np.linalg.norm(d, axis=1, keepdims=True)
        grad = forward(params, torch.from_numpy(d)).grad_u
        eik = float((torch.linalg.vector_norm(grad, dim=-1) - 1).abs().mean())
    return {"chamfer": d_c, "normal_consistency": nc, "eikonal_error": eik}


def sphere_run(run_dir, cfg=None, net_cfg: MLPConfig | None = None, reuse: bool = True) -> Params:
    """Train on the sphere cloud, or reload an earlier run with identical inputs.

    A run is reused only when its stored key (training config, network config
    and a digest of the training sources) matches; training is deterministic,
    so the reloaded checkpoint is the one a fresh run would write.
    """
    import json
    from pathlib import Path

    from .io import atomic_write_text
    from .network import load_checkpoint
    from .trainer import TrainConfig, config_snapshot, train

    cfg = cfg or TrainConfig()
    net_cfg = net_cfg or MLPConfig()
    run_dir = Path(run_dir)
    key = json.dumps({"config": json.loads(config_snapshot(net_cfg, cfg)), "source": _source_digest()}, sort_keys=True)
    stamp, ckpt = run_dir / "run_key.json", run_dir / "checkpoint.pinc"
    if reuse and stamp.exists() and ckpt.exists() and stamp.read_text() == key:
        return load_checkpoint(ckpt)
    params = train(sphere_cloud(cfg.seed), net_cfg, cfg, run_dir=run_dir).params
    atomic_write_text(stamp, key)
    return params
