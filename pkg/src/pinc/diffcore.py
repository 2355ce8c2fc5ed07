"""Nested differentiation: forward-mode spatial jets under reverse-mode parameters.

A :class:`Jet` carries a batch of values together with their derivatives with
respect to the three spatial input coordinates. Jets are built from ordinary
torch operations, so every tangent is itself recorded on the autograd tape and
any scalar assembled from values *and* tangents can be differentiated with
respect to the network parameters by :func:`backward`.

Layout: ``value`` has shape ``(N, k)`` and ``tangent`` has shape ``(N, 3, k)``,
i.e. ``tangent[n, j, i] = d value[n, i] / d x_j``. The channel-major layout
lets a linear layer act on all three tangent channels with one matmul.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence, Union

import torch

DTYPE = torch.float64


class UsageError(RuntimeError):
    """Raised when the differentiation engine is driven incorrectly."""


class ConfigError(ValueError):
    """Raised when parameters and an architecture description disagree."""


def as_points(x) -> torch.Tensor:
    """Coerce ``x`` to a float64 ``(N, 3)`` tensor."""
    t = torch.as_tensor(x, dtype=DTYPE)
    if t.ndim == 1:
        t = t.unsqueeze(0)
    if t.ndim != 2 or t.shape[-1] != 3:
        raise ValueError(f"expected points of shape (N, 3), got {tuple(t.shape)}")
    return t


@dataclass
class Jet:
    value: torch.Tensor
    tangent: torch.Tensor

    @classmethod
    def variable(cls, x: torch.Tensor) -> "Jet":
        """Seed the identity tangent: d x_i / d x_j = delta_ij."""
        n = x.shape[0]
        eye = torch.eye(3, dtype=x.dtype).expand(n, 3, 3)
        return cls(x, eye)

    @classmethod
    def constant(cls, value: torch.Tensor) -> "Jet":
        n, k = value.shape
        return cls(value, torch.zeros(n, 3, k, dtype=value.dtype))

    @property
    def jacobian(self) -> torch.Tensor:
        """``(N, k, 3)`` array with ``jacobian[n, i, j] = d value_i / d x_j``."""
        return self.tangent.transpose(-1, -2)

    def __getitem__(self, cols) -> "Jet":
        return Jet(self.value[:, cols], self.tangent[:, :, cols])

    def __add__(self, other) -> "Jet":
        if isinstance(other, Jet):
            return Jet(self.value + other.value, self.tangent + other.tangent)
        return Jet(self.value + other, self.tangent)

    __radd__ = __add__

    def __neg__(self) -> "Jet":
        return Jet(-self.value, -self.tangent)

    def __sub__(self, other) -> "Jet":
        return self + (-other)

    def __mul__(self, other) -> "Jet":
        if isinstance(other, Jet):
            return Jet(
                self.value * other.value,
                self.tangent * other.value.unsqueeze(1)
                + self.value.unsqueeze(1) * other.tangent,
            )
        other = torch.as_tensor(other, dtype=self.value.dtype)
        return Jet(self.value * other, self.tangent * other)

    __rmul__ = __mul__

    def linear(self, weight: torch.Tensor, bias: torch.Tensor | None = None) -> "Jet":
        value = self.value @ weight.T
        if bias is not None:
            value = value + bias
        return Jet(value, self.tangent @ weight.T)

    def softplus(self, beta: float) -> "Jet":
        bz = beta * self.value
        value = torch.logaddexp(bz, torch.zeros((), dtype=bz.dtype)) / beta
        return Jet(value, self.tangent * torch.sigmoid(bz).unsqueeze(1))

    def sin(self) -> "Jet":
        return Jet(torch.sin(self.value), self.tangent * torch.cos(self.value).unsqueeze(1))

    def cos(self) -> "Jet":
        return Jet(torch.cos(self.value), -self.tangent * torch.sin(self.value).unsqueeze(1))

    @staticmethod
    def cat(jets: Sequence["Jet"]) -> "Jet":
        return Jet(
            torch.cat([j.value for j in jets], dim=-1),
            torch.cat([j.tangent for j in jets], dim=-1),
        )


NetFn = Callable[[object, Jet], Jet]


def eval_with_input_jacobian(params, x, net: NetFn) -> tuple[torch.Tensor, torch.Tensor]:
    """Evaluate ``net(params, jet)`` and return ``(outputs, jacobian)``.

    ``outputs`` has shape ``(N, k)`` and ``jacobian`` ``(N, k, 3)``. Both stay
    attached to the autograd graph of ``params``.
    """
    out = net(params, Jet.variable(as_points(x)))
    return out.value, out.jacobian


def curl(jac: torch.Tensor) -> torch.Tensor:
    """Curl of a vector field from its Jacobian ``jac[..., i, j] = dV_i/dx_j``."""
    jac = torch.as_tensor(jac, dtype=DTYPE)
    return torch.stack(
        (
            jac[..., 2, 1] - jac[..., 1, 2],
            jac[..., 0, 2] - jac[..., 2, 0],
            jac[..., 1, 0] - jac[..., 0, 1],
        ),
        dim=-1,
    )


def divergence(jac: torch.Tensor) -> torch.Tensor:
    jac = torch.as_tensor(jac, dtype=DTYPE)
    return jac.diagonal(dim1=-2, dim2=-1).sum(-1)


TensorOrList = Union[torch.Tensor, Sequence[torch.Tensor]]


def backward(loss: torch.Tensor, params: TensorOrList) -> torch.Tensor:
    """Reverse sweep: flat gradient of scalar ``loss`` w.r.t. ``params``.

    Parameters the loss does not depend on get a zero gradient. The graph is
    released afterwards, so each optimisation step starts from a fresh tape.
    """
    leaves = [params] if isinstance(params, torch.Tensor) else list(params)
    if not isinstance(loss, torch.Tensor) or loss.numel() != 1:
        raise UsageError("backward() needs a scalar tensor")
    if not loss.requires_grad:
        raise UsageError("scalar is not on the tape (no recorded dependence on parameters)")
    grads = torch.autograd.grad(loss.reshape(()), leaves, allow_unused=True)
    return torch.cat(
        [
            (g if g is not None else torch.zeros_like(p)).reshape(-1)
            for g, p in zip(grads, leaves)
        ]
    )
