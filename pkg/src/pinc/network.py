"""Skip-connected softplus MLP with a scalar head and two vector-potential heads."""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from .diffcore import DTYPE, ConfigError, Jet, as_points

PINC_OUT_DIM = 7
EIKONAL_OUT_DIM = 4
MAGIC = b"PINC1"
_HEADER = struct.Struct("<5s5id q")


@dataclass(frozen=True)
class MLPConfig:
    depth: int = 4
    width: int = 128
    skip_layer: int = 2
    out_dim: int = PINC_OUT_DIM
    softplus_beta: float = 100.0
    in_dim: int = 3

    def __post_init__(self):
        if self.in_dim != 3:
            raise ConfigError("input dimension must be 3")
        if self.width < 1:
            raise ConfigError(f"width must be positive, got {self.width}")
        if self.depth < 2:
            raise ConfigError(f"depth must be >= 2, got {self.depth}")
        if not 1 <= self.skip_layer < self.depth:
            raise ConfigError(f"skip_layer must be in [1, depth), got {self.skip_layer}")
        if self.out_dim not in (PINC_OUT_DIM, EIKONAL_OUT_DIM):
            raise ConfigError(f"out_dim must be 7 (pinc) or 4 (eikonal split), got {self.out_dim}")
        if self.width <= self.in_dim:
            raise ConfigError("width must exceed the input dimension for the skip concatenation")
        if self.softplus_beta <= 0:
            raise ConfigError("softplus_beta must be positive")

    @classmethod
    def full_scale(cls, out_dim: int = PINC_OUT_DIM) -> "MLPConfig":
        return cls(depth=8, width=512, skip_layer=4, out_dim=out_dim)

    def layer_shapes(self) -> list[tuple[int, int]]:
        """(out_features, in_features) of every linear layer."""
        dims = [self.in_dim] + [self.width] * self.depth + [self.out_dim]
        shapes = []
        for layer in range(self.depth + 1):
            out = dims[layer + 1]
            if layer + 1 == self.skip_layer:
                out -= self.in_dim
            shapes.append((out, dims[layer]))
        return shapes

    def param_count(self) -> int:
        return sum(o * i + o for o, i in self.layer_shapes())


class Params:
    """Flat float64 parameter vector plus the architecture that slices it."""

    def __init__(self, flat: torch.Tensor, cfg: MLPConfig, requires_grad: bool = True):
        flat = torch.as_tensor(flat, dtype=DTYPE)
        if flat.ndim != 1 or flat.numel() != cfg.param_count():
            raise ConfigError(
                f"parameter vector has {flat.numel()} entries, architecture needs {cfg.param_count()}"
            )
        self.cfg = cfg
        self.flat = flat.detach().clone().requires_grad_(requires_grad)

    def layers(self, flat: torch.Tensor | None = None):
        flat = self.flat if flat is None else flat
        pos = 0
        out = []
        for o, i in self.cfg.layer_shapes():
            w = flat[pos : pos + o * i].view(o, i)
            pos += o * i
            b = flat[pos : pos + o]
            pos += o
            out.append((w, b))
        return out

    def clone(self) -> "Params":
        return Params(self.flat.detach(), self.cfg, self.flat.requires_grad)

    def numpy(self) -> np.ndarray:
        return self.flat.detach().numpy().copy()

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Params)
            and self.cfg == other.cfg
            and torch.equal(self.flat.detach(), other.flat.detach())
        )


def _assemble(cfg: MLPConfig, layers) -> Params:
    flat = torch.cat([t.reshape(-1) for w, b in layers for t in (w, b)])
    return Params(flat, cfg)


def init_geometric(cfg: MLPConfig, seed: int = 0, radius: float = 1.0) -> Params:
    """Initialise so the scalar head is close to the SDF of a sphere.

    Interior-positive convention: u(x) ~ radius - |x|. The vector-potential
    heads get tiny weights, so at initialisation curl(Psi) ~ 0.
    """
    if radius <= 0:
        raise ValueError("radius must be positive")
    gen = torch.Generator().manual_seed(int(seed))
    layers = []
    shapes = cfg.layer_shapes()
    for idx, (o, i) in enumerate(shapes):
        if idx == len(shapes) - 1:
            w = torch.randn(o, i, generator=gen, dtype=DTYPE) * 1e-4
            w[0] = -math.sqrt(math.pi) / math.sqrt(i)
            b = torch.zeros(o, dtype=DTYPE)
            b[0] = radius
        else:
            w = torch.randn(o, i, generator=gen, dtype=DTYPE) * (math.sqrt(2.0) / math.sqrt(o))
            b = torch.zeros(o, dtype=DTYPE)
        layers.append((w, b))
    return _assemble(cfg, layers)


def init_kaiming(cfg: MLPConfig, seed: int = 0) -> Params:
    """Fan-in scaled uniform init: weights in [-sqrt(6/f), sqrt(6/f)]."""
    gen = torch.Generator().manual_seed(int(seed))
    layers = []
    for o, i in cfg.layer_shapes():
        bound = math.sqrt(6.0 / i)
        w = (torch.rand(o, i, generator=gen, dtype=DTYPE) * 2 - 1) * bound
        b = (torch.rand(o, generator=gen, dtype=DTYPE) * 2 - 1) / math.sqrt(i)
        layers.append((w, b))
    return _assemble(cfg, layers)


def softplus(z: torch.Tensor, beta: float = 100.0) -> torch.Tensor:
    return torch.logaddexp(beta * z, torch.zeros((), dtype=z.dtype)) / beta


def mlp(params: Params, h: Jet) -> Jet:
    """Run the network on a jet (used by ``eval_with_input_jacobian``)."""
    cfg = params.cfg
    x = h
    layers = params.layers()
    for idx, (w, b) in enumerate(layers):
        if idx == cfg.skip_layer:
            h = Jet.cat([h, x]) * (1.0 / math.sqrt(2.0))
        h = h.linear(w, b)
        if idx < len(layers) - 1:
            h = h.softplus(cfg.softplus_beta)
    return h


def forward_value(params: Params, x) -> torch.Tensor:
    """Outputs only, no input derivatives: ``(N, out_dim)``."""
    cfg = params.cfg
    x = as_points(x)
    h = x
    layers = params.layers()
    for idx, (w, b) in enumerate(layers):
        if idx == cfg.skip_layer:
            h = torch.cat([h, x], dim=-1) / math.sqrt(2.0)
        h = h @ w.T + b
        if idx < len(layers) - 1:
            h = softplus(h, cfg.softplus_beta)
    return h


@dataclass
class JetOutput:
    """Network outputs and their exact input Jacobian, batched over points."""

    outputs: torch.Tensor   # (N, out_dim)
    jacobian: torch.Tensor  # (N, out_dim, 3)

    @property
    def u(self) -> torch.Tensor:
        return self.outputs[:, 0]

    @property
    def grad_u(self) -> torch.Tensor:
        return self.jacobian[:, 0, :]

    @property
    def psi(self) -> torch.Tensor:
        return self.outputs[:, 1:4]

    @property
    def jac_psi(self) -> torch.Tensor:
        return self.jacobian[:, 1:4, :]

    @property
    def psi_tilde(self) -> torch.Tensor:
        return self.outputs[:, 4:7]

    @property
    def jac_psi_tilde(self) -> torch.Tensor:
        return self.jacobian[:, 4:7, :]


def forward(params: Params, x) -> JetOutput:
    x = as_points(x)
    if not torch.isfinite(x).all():
        raise ValueError("non-finite input point")
    out = mlp(params, Jet.variable(x))
    return JetOutput(out.value, out.jacobian)


def save_checkpoint(params: Params, path) -> None:
    """Write the PINC1 checkpoint: header then little-endian float64 array."""
    from .io import atomic_write_bytes

    cfg = params.cfg
    header = _HEADER.pack(
        MAGIC, cfg.in_dim, cfg.depth, cfg.width, cfg.skip_layer, cfg.out_dim,
        float(cfg.softplus_beta), cfg.param_count(),
    )
    body = params.numpy().astype("<f8").tobytes()
    atomic_write_bytes(Path(path), header + body)


def load_checkpoint(path) -> Params:
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size or data[:5] != MAGIC:
        raise ConfigError(f"{path}: not a PINC1 checkpoint")
    _, in_dim, depth, width, skip, out_dim, beta, count = _HEADER.unpack_from(data)
    cfg = MLPConfig(depth=depth, width=width, skip_layer=skip, out_dim=out_dim,
                    softplus_beta=beta, in_dim=in_dim)
    flat = np.frombuffer(data, dtype="<f8", offset=_HEADER.size)
    if flat.size != count or count != cfg.param_count():
        raise ConfigError(f"{path}: parameter count mismatch ({flat.size} stored, header {count})")
    return Params(torch.from_numpy(flat.astype(np.float64)), cfg)
