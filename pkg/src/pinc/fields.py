"""Constrained vector fields built from the network's potential heads.

G is the gradient surrogate that satisfies the p-Poisson equation by
construction: with v = curl(Psi) - F and F(x) = x/3 (divergence 1),

    G = v / |v|^((p-2)/(p-1)),

so |G|^(p-1) = |v| and |G|^(p-2) G + F = curl(Psi). For p = inf this is plain
normalisation. G~ is the second potential head projected onto the unit ball.
"""

from __future__ import annotations

import contextlib
import math
from dataclasses import dataclass

import torch

from .diffcore import as_points, curl
from .network import Params, forward

EPS_DIV = 1e-8


@dataclass(frozen=True)
class PExponent:
    p: float = math.inf

    def __post_init__(self):
        if not (self.p >= 2):
            raise ValueError(f"p must be >= 2 (or inf), got {self.p}")

    @property
    def infinite(self) -> bool:
        return math.isinf(self.p)

    @property
    def exponent(self) -> float:
        """(p-2)/(p-1); exactly 1 for p = inf."""
        if self.infinite:
            return 1.0
        return (self.p - 2.0) / (self.p - 1.0)

    @classmethod
    def parse(cls, text) -> "PExponent":
        if isinstance(text, PExponent):
            return text
        s = str(text).strip().lower()
        if s in ("inf", "infinity", "oo"):
            return cls(math.inf)
        return cls(float(s))

    def __str__(self) -> str:
        return "inf" if self.infinite else f"{self.p:g}"


def source_field(x) -> torch.Tensor:
    """F(x) = x / 3, whose divergence is identically one."""
    return as_points(x) / 3.0


def construct_G(curl_psi: torch.Tensor, f: torch.Tensor, p: PExponent, eps_div: float = EPS_DIV) -> torch.Tensor:
    v = curl_psi - f
    m = torch.linalg.vector_norm(v, dim=-1, keepdim=True).clamp_min(eps_div)
    if p.infinite:
        return v / m
    e = p.exponent
    if e == 0.0:
        return v
    return v / m.pow(e)


def construct_G_tilde(psi_tilde: torch.Tensor) -> torch.Tensor:
    """Projection onto the closed unit ball: y / max(1, |y|)."""
    r = torch.linalg.vector_norm(psi_tilde, dim=-1, keepdim=True)
    return psi_tilde / torch.clamp_min(r, 1.0)


def _projected_jacobian(psi_tilde: torch.Tensor, jac: torch.Tensor) -> torch.Tensor:
    """Jacobian of P(Psi~) w.r.t. x given Psi~ and its Jacobian ``(N, 3, 3)``.

    Inside the ball P is the identity; outside, dP = (I - n n^T) / r applied to
    the Jacobian of Psi~, which is the quotient rule written out.
    """
    r = torch.linalg.vector_norm(psi_tilde, dim=-1)
    outside = r > 1.0
    r_safe = torch.where(outside, r, torch.ones_like(r))
    # grad r = (Psi~^T J) / r
    grad_r = torch.einsum("ni,nij->nj", psi_tilde, jac) / r_safe.unsqueeze(-1)
    proj_jac = jac / r_safe[:, None, None] - torch.einsum(
        "ni,nj->nij", psi_tilde, grad_r
    ) / (r_safe**2)[:, None, None]
    return torch.where(outside[:, None, None], proj_jac, jac)


@dataclass
class FieldSample:
    """Batched physical quantities at collocation points (first axis = point)."""

    x: torch.Tensor
    u: torch.Tensor
    grad_u: torch.Tensor
    G: torch.Tensor
    G_tilde: torch.Tensor
    curl_G_tilde: torch.Tensor
    curl_G: torch.Tensor | None = None

    def __len__(self) -> int:
        return self.u.shape[0]


def sample_fields(
    params: Params,
    x,
    p: PExponent = PExponent(),
    eps_div: float = EPS_DIV,
    with_curl_G: bool = False,
) -> FieldSample:
    """One jet pass of the network, then G, G~ and curls at every point.

    ``with_curl_G`` also differentiates G itself w.r.t. x (second spatial
    derivatives of Psi, obtained by reverse mode over the jet); only the
    curl-on-G ablation needs it.
    """
    x = as_points(x)
    if with_curl_G:
        x = x.detach().requires_grad_(True)
    # the curl of G needs a graph w.r.t. x even when the caller disabled grad
    with torch.enable_grad() if with_curl_G else contextlib.nullcontext():
        out = forward(params, x)
        curl_psi = curl(out.jac_psi)
        G = construct_G(curl_psi, source_field(x), p, eps_div)
        G_tilde = construct_G_tilde(out.psi_tilde)
        curl_gt = curl(_projected_jacobian(out.psi_tilde, out.jac_psi_tilde))
        curl_G = None
        if with_curl_G:
            rows = [
                torch.autograd.grad(G[:, i].sum(), x, create_graph=True)[0]
                for i in range(3)
            ]
            curl_G = curl(torch.stack(rows, dim=1))
    return FieldSample(
        x=x, u=out.u, grad_u=out.grad_u, G=G, G_tilde=G_tilde,
        curl_G_tilde=curl_gt, curl_G=curl_G,
    )
