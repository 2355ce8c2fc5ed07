"""Adam with step decay, driving the sample -> loss -> backward -> update loop."""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import torch

from .diffcore import backward
from .fields import EPS_DIV, PExponent
from .io import atomic_write_bytes, atomic_write_text
from .loss import CSV_HEADER, LossMode, LossWeights, TrainingFault, total_loss
from .network import MLPConfig, Params, init_geometric, load_checkpoint, save_checkpoint
from .sampler import GLOBAL_ETA, N_GLOBAL, PointCloud, make_rng, sample_collocation, sample_surface_batch

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    iterations: int = 10_000
    lr0: float = 1e-3
    decay: float = 0.99
    decay_every: int = 2000
    seed: int = 0
    weights: LossWeights = field(default_factory=LossWeights)
    mode: LossMode = field(default_factory=LossMode)
    p: PExponent = field(default_factory=PExponent)
    batch: int = 4096
    n_global: int = N_GLOBAL
    eta: float = GLOBAL_ETA
    eps_div: float = EPS_DIV
    log_every: int = 100
    checkpoint_every: int = 0
    init: str = "geometric"
    init_radius: float = 1.0
    beta1: float = 0.9
    beta2: float = 0.999
    eps_adam: float = 1e-8

    def __post_init__(self):
        if self.iterations < 0:
            raise ValueError("iterations must be >= 0")
        if self.lr0 <= 0:
            raise ValueError("lr0 must be positive")
        if not 0 < self.decay <= 1:
            raise ValueError("decay must be in (0, 1]")
        if self.decay_every < 1:
            raise ValueError("decay_every must be >= 1")
        if self.init not in ("geometric", "kaiming"):
            raise ValueError(f"unknown init {self.init!r}")


def lr_at(iteration: int, cfg: TrainConfig) -> float:
    return cfg.lr0 * cfg.decay ** (iteration // cfg.decay_every)


@dataclass
class AdamState:
    m: torch.Tensor
    v: torch.Tensor
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros(cls, n: int, beta1=0.9, beta2=0.999, eps=1e-8) -> "AdamState":
        z = torch.zeros(n, dtype=torch.float64)
        return cls(z.clone(), z.clone(), 0, beta1, beta2, eps)


def adam_step(flat: torch.Tensor, grad: torch.Tensor, state: AdamState, lr: float, iteration: int | None = None) -> torch.Tensor:
    """Bias-corrected Adam update; returns the new parameter vector."""
    if grad.shape != flat.shape:
        raise ValueError(f"gradient shape {tuple(grad.shape)} != params {tuple(flat.shape)}")
    if not torch.isfinite(grad).all():
        where = "" if iteration is None else f" at iteration {iteration}"
        raise TrainingFault(f"non-finite gradient{where}")
    b1, b2 = state.beta1, state.beta2
    state.step += 1
    state.m.mul_(b1).add_(grad, alpha=1 - b1)
    state.v.mul_(b2).addcmul_(grad, grad, value=1 - b2)
    m_hat = state.m / (1 - b1**state.step)
    v_hat = state.v / (1 - b2**state.step)
    return flat.detach() - lr * m_hat / (v_hat.sqrt() + state.eps)


@dataclass
class TrainResult:
    params: Params
    adam: AdamState
    iteration: int
    log_rows: list[str]


def initial_params(net_cfg: MLPConfig, cfg: TrainConfig) -> Params:
    if cfg.init == "kaiming":
        from .network import init_kaiming

        return init_kaiming(net_cfg, cfg.seed)
    return init_geometric(net_cfg, cfg.seed, cfg.init_radius)


def _training_step(params: Params, cloud: PointCloud, cfg: TrainConfig, iteration: int):
    rng = make_rng(cfg.seed, "batch", iteration)
    surface = sample_surface_batch(cloud, cfg.batch, rng)
    colloc = sample_collocation(cloud, surface, rng, cfg.n_global, cfg.eta)
    breakdown = total_loss(
        params,
        torch.from_numpy(surface.points),
        torch.from_numpy(colloc.union()),
        cfg.weights,
        cfg.mode,
        cfg.p,
        cfg.eps_div,
    )
    grad = backward(breakdown.total, params.flat)
    return breakdown, grad


def save_state(run_dir: Path, result: TrainResult) -> None:
    """Optimiser state next to the checkpoint so a run can be resumed exactly."""
    import io as _io

    buf = _io.BytesIO()
    np.savez(buf, m=result.adam.m.numpy(), v=result.adam.v.numpy(),
             step=np.int64(result.adam.step), iteration=np.int64(result.iteration))
    atomic_write_bytes(run_dir / "adam_state.npz", buf.getvalue())
    save_checkpoint(result.params, run_dir / "checkpoint.pinc")


def load_state(run_dir: Path, cfg: TrainConfig) -> TrainResult:
    params = load_checkpoint(run_dir / "checkpoint.pinc")
    with np.load(run_dir / "adam_state.npz") as z:
        adam = AdamState(torch.from_numpy(z["m"].copy()), torch.from_numpy(z["v"].copy()),
                         int(z["step"]), cfg.beta1, cfg.beta2, cfg.eps_adam)
        iteration = int(z["iteration"])
    return TrainResult(params, adam, iteration, [])


def train(
    cloud: PointCloud,
    net_cfg: MLPConfig,
    cfg: TrainConfig,
    run_dir: Path | None = None,
    resume: TrainResult | None = None,
    progress=None,
) -> TrainResult:
    """Run ``cfg.iterations`` optimisation steps (counted from the start).

    When ``run_dir`` is given, ``loss.csv`` is rewritten at every log interval
    and a checkpoint plus optimiser state is stored every
    ``checkpoint_every`` iterations and at the end, always via atomic rename
    so an interrupted run leaves the last complete checkpoint behind.
    """
    if resume is None:
        params = initial_params(net_cfg, cfg)
        adam = AdamState.zeros(params.flat.numel(), cfg.beta1, cfg.beta2, cfg.eps_adam)
        start, rows = 0, []
    else:
        params, adam, start, rows = resume.params, resume.adam, resume.iteration, list(resume.log_rows)
    if run_dir is not None:
        run_dir = Path(run_dir)
        run_dir.mkdir(parents=True, exist_ok=True)

    def flush_log():
        if run_dir is not None:
            atomic_write_text(run_dir / "loss.csv", "\n".join([CSV_HEADER] + rows) + "\n")

    for it in range(start, cfg.iterations):
        breakdown, grad = _training_step(params, cloud, cfg, it)
        new_flat = adam_step(params.flat, grad, adam, lr_at(it, cfg), it)
        params = Params(new_flat, params.cfg)
        if cfg.log_every and (it % cfg.log_every == 0 or it == cfg.iterations - 1):
            rows.append(breakdown.csv_row(it))
            flush_log()
            log.info("iter %d total %.6e", it, float(breakdown.total.detach()))
        if progress is not None:
            progress(it, breakdown)
        if run_dir is not None and cfg.checkpoint_every and (it + 1) % cfg.checkpoint_every == 0:
            save_state(run_dir, TrainResult(params, adam, it + 1, rows))
            save_checkpoint(params, run_dir / "checkpoints" / f"iter_{it + 1:07d}.pinc")
    result = TrainResult(params, adam, max(start, cfg.iterations), rows)
    if run_dir is not None:
        flush_log()
        save_state(run_dir, result)
    return result


def config_snapshot(net_cfg: MLPConfig, cfg: TrainConfig) -> str:
    d = {"network": asdict(net_cfg), "train": {k: v for k, v in asdict(cfg).items() if k not in ("weights", "mode", "p")}}
    d["train"]["p"] = str(cfg.p)
    d["weights"] = asdict(cfg.weights)
    d["mode"] = {k: (v.value if hasattr(v, "value") else v) for k, v in asdict(cfg.mode).items()}
    return json.dumps(d, indent=2, sort_keys=True, default=lambda o: None if isinstance(o, float) and math.isinf(o) else str(o))
