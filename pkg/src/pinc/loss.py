"""Monte Carlo estimators of the training objective and its ablation variants.

Every term is returned raw (a plain batch mean); weights are applied once, in
:func:`total_loss`.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, fields

import torch

from .diffcore import as_points
from .fields import EPS_DIV, FieldSample, PExponent, sample_fields
from .network import EIKONAL_OUT_DIM, Params, forward, forward_value

TERMS = ("boundary", "grad_match", "aux_match", "curl", "area")
CSV_HEADER = "iter,boundary,grad_match,aux_match,curl,area,total"


class TrainingFault(FloatingPointError):
    """A loss term or gradient became non-finite."""


@dataclass(frozen=True)
class LossWeights:
    lambda1: float = 0.1
    lambda2: float = 1e-4
    lambda3: float = 5e-4
    lambda4: float = 0.1
    epsilon: float = 1.0
    eta_baseline: float = 0.1

    def __post_init__(self):
        for f in fields(self):
            if getattr(self, f.name) < 0:
                raise ValueError(f"{f.name} must be non-negative")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")


class CurlTarget(str, enum.Enum):
    ON_G_TILDE = "on_G_tilde"
    ON_G = "on_G"
    OFF = "off"


class Formulation(str, enum.Enum):
    PINC = "pinc"
    EIKONAL_SPLIT = "eikonal_split"


@dataclass(frozen=True)
class LossMode:
    curl_target: CurlTarget = CurlTarget.ON_G_TILDE
    area_term: bool = True
    formulation: Formulation = Formulation.PINC

    def __post_init__(self):
        object.__setattr__(self, "curl_target", CurlTarget(self.curl_target))
        object.__setattr__(self, "formulation", Formulation(self.formulation))


@dataclass
class LossBreakdown:
    boundary: torch.Tensor
    grad_match: torch.Tensor
    aux_match: torch.Tensor
    curl: torch.Tensor
    area: torch.Tensor
    total: torch.Tensor

    def as_floats(self) -> dict[str, float]:
        return {name: float(getattr(self, name).detach()) for name in TERMS + ("total",)}

    def csv_row(self, iteration: int) -> str:
        vals = self.as_floats()
        return ",".join([str(iteration)] + [repr(vals[k]) for k in TERMS + ("total",)])


def _nonempty(n: int, what: str) -> None:
    if n == 0:
        raise ValueError(f"{what} batch is empty")


def boundary_term(u: torch.Tensor) -> torch.Tensor:
    """Mean |u| over surface samples."""
    u = torch.as_tensor(u, dtype=torch.float64)
    _nonempty(u.numel(), "surface")
    return u.abs().mean()


def grad_match_term(samples: FieldSample) -> torch.Tensor:
    _nonempty(len(samples), "collocation")
    return (samples.grad_u - samples.G).pow(2).sum(-1).mean()


def aux_match_term(samples: FieldSample) -> torch.Tensor:
    _nonempty(len(samples), "collocation")
    return (samples.G - samples.G_tilde).pow(2).sum(-1).mean()


def curl_term(samples: FieldSample, mode: LossMode) -> torch.Tensor:
    if mode.curl_target is CurlTarget.OFF:
        return torch.zeros((), dtype=samples.u.dtype)
    _nonempty(len(samples), "collocation")
    if mode.curl_target is CurlTarget.ON_G:
        if samples.curl_G is None:
            raise ValueError("curl on G requested but samples carry no curl_G")
        target = samples.curl_G
    else:
        target = samples.curl_G_tilde
    return target.pow(2).sum(-1).mean()


def smeared_delta(u: torch.Tensor, epsilon: float) -> torch.Tensor:
    """1 - tanh^2(u / epsilon)."""
    return 1.0 - torch.tanh(u / epsilon).pow(2)


def area_term(samples: FieldSample, epsilon: float) -> torch.Tensor:
    _nonempty(len(samples), "collocation")
    grad_norm = torch.linalg.vector_norm(samples.grad_u, dim=-1)
    return (smeared_delta(samples.u, epsilon) * grad_norm).mean()


def _check_finite(parts: dict[str, torch.Tensor]) -> None:
    for name, value in parts.items():
        if not math.isfinite(float(value.detach())):
            raise TrainingFault(f"loss term '{name}' is not finite ({float(value.detach())})")


def total_loss(
    params: Params,
    surface_points,
    collocation_points,
    weights: LossWeights = LossWeights(),
    mode: LossMode = LossMode(),
    p: PExponent = PExponent(),
    eps_div: float = EPS_DIV,
) -> LossBreakdown:
    """Assemble the weighted objective on one surface and one collocation batch.

    ``collocation_points`` is the union of local and global points; the volume
    integrals are plain means over it.
    """
    xs = as_points(surface_points)
    xc = as_points(collocation_points)
    _nonempty(xs.shape[0], "surface")
    _nonempty(xc.shape[0], "collocation")
    zero = torch.zeros((), dtype=xs.dtype)
    boundary = boundary_term(forward_value(params, xs)[:, 0])

    if mode.formulation is Formulation.EIKONAL_SPLIT:
        if params.cfg.out_dim != EIKONAL_OUT_DIM:
            raise ValueError("eikonal split needs a network with 4 outputs")
        out = forward(params, xc)
        h = out.outputs[:, 1:4]
        h = h / torch.linalg.vector_norm(h, dim=-1, keepdim=True).clamp_min(eps_div)
        grad_match = (out.grad_u - h).pow(2).sum(-1).mean()
        parts = dict(boundary=boundary, grad_match=grad_match, aux_match=zero, curl=zero, area=zero)
        total = boundary + weights.eta_baseline * grad_match
    else:
        samples = sample_fields(
            params, xc, p, eps_div, with_curl_G=mode.curl_target is CurlTarget.ON_G
        )
        grad_match = grad_match_term(samples)
        if mode.curl_target is CurlTarget.OFF:
            aux, curl_val = zero, zero
        else:
            aux, curl_val = aux_match_term(samples), curl_term(samples, mode)
        area = area_term(samples, weights.epsilon) if mode.area_term else zero
        parts = dict(boundary=boundary, grad_match=grad_match, aux_match=aux, curl=curl_val, area=area)
        total = (
            boundary
            + weights.lambda1 * grad_match
            + weights.lambda2 * aux
            + weights.lambda3 * curl_val
            + weights.lambda4 * area
        )
    _check_finite(parts)
    return LossBreakdown(total=total, **parts)
