"""Velocity-field networks, time discretizations, and training-time samplers."""

from __future__ import annotations

from dataclasses import dataclass, field as dataclass_field
from enum import Enum

import numpy as np

from ..errors import ConfigurationError, NumericError
from ..numerics import Activation, MlpGrads, MlpParams, init_mlp, mlp_apply, mlp_backward, sinusoidal_embed


@dataclass
class DiscretizationScheme:
    """Knots 0 = t_0 < t_1 < ... < t_K = 1 for Euler integration."""

    knots: np.ndarray

    def __post_init__(self):
        self.knots = np.asarray(self.knots, dtype=np.float64)
        if self.knots.ndim != 1 or self.knots.size < 2:
            raise ConfigurationError("need at least two knots")
        if self.knots[0] != 0.0 or self.knots[-1] != 1.0:
            raise ConfigurationError("knots must start at 0 and end at 1")
        if np.any(np.diff(self.knots) <= 0):
            raise ConfigurationError("knots must be strictly increasing")

    @classmethod
    def uniform(cls, k: int) -> "DiscretizationScheme":
        if k < 1:
            raise ConfigurationError("K must be >= 1")
        return cls(np.linspace(0.0, 1.0, k + 1))

    @property
    def n_steps(self) -> int:
        return self.knots.size - 1

    @property
    def deltas(self) -> np.ndarray:
        return np.diff(self.knots)


class TimeSamplerKind(Enum):
    UNIFORM = "uniform"
    BETA = "beta"
    LOGIT_NORMAL = "logit_normal"


@dataclass
class TimeSampler:
    kind: TimeSamplerKind = TimeSamplerKind.UNIFORM
    # Beta shape parameters / logit-normal location and scale.
    alpha: float = 1.5
    beta: float = 1.0
    mu: float = 0.0
    sigma: float = 1.0

    def __post_init__(self):
        if self.kind is TimeSamplerKind.BETA and (self.alpha <= 0 or self.beta <= 0):
            raise ConfigurationError("Beta shape parameters must be positive")
        if self.kind is TimeSamplerKind.LOGIT_NORMAL and self.sigma <= 0:
            raise ConfigurationError("logit-normal scale must be positive")


_T_EPS = 1e-12


def sample_time(sampler: TimeSampler, rng, size: int | None = None):
    """Draw t in the open interval (0, 1); scalar when size is None."""
    shape = () if size is None else (size,)
    if sampler.kind is TimeSamplerKind.UNIFORM:
        t = rng.uniform(0.0, 1.0, shape)
    elif sampler.kind is TimeSamplerKind.BETA:
        t = rng.beta(sampler.alpha, sampler.beta, shape)
    else:
        z = rng.standard_normal(shape) * sampler.sigma + sampler.mu
        t = 1.0 / (1.0 + np.exp(-z))
    t = np.clip(t, _T_EPS, 1.0 - _T_EPS)
    return float(t) if size is None else t


@dataclass
class VelocityField:
    """MLP velocity head over [action chunk | condition | time embed (| step embed)].

    With `shortcut=True` the network additionally consumes a sinusoidal
    embedding of the integration step size, enabling few-step consistency
    training.
    """

    net: MlpParams
    chunk_dim: int
    cond_dim: int
    time_embed_dim: int
    shortcut: bool = False

    def __post_init__(self):
        expected = self.chunk_dim + self.cond_dim + self.time_embed_dim
        if self.shortcut:
            expected += self.time_embed_dim
        if self.net.in_dim != expected:
            raise ConfigurationError(
                f"velocity net input width {self.net.in_dim} != expected {expected}"
            )
        if self.net.out_dim != self.chunk_dim:
            raise ConfigurationError("velocity net output width must equal the chunk dim")

    @classmethod
    def create(cls, chunk_dim: int, cond_dim: int, hidden: list[int],
               time_embed_dim: int, rng, shortcut: bool = False,
               activation: Activation = Activation.MISH) -> "VelocityField":
        in_dim = chunk_dim + cond_dim + time_embed_dim + (time_embed_dim if shortcut else 0)
        net = init_mlp([in_dim, *hidden, chunk_dim], activation, rng)
        return cls(net=net, chunk_dim=chunk_dim, cond_dim=cond_dim,
                   time_embed_dim=time_embed_dim, shortcut=shortcut)

    def _embed_broadcast(self, value, b: int) -> np.ndarray:
        arr = np.asarray(value, dtype=np.float64)
        if arr.ndim == 0:
            # Scalar time: embed once, let concatenate expand the view.
            return np.broadcast_to(sinusoidal_embed(arr, self.time_embed_dim), (b, self.time_embed_dim))
        return sinusoidal_embed(np.broadcast_to(arr, (b,)), self.time_embed_dim)

    def _assemble_input(self, t, a: np.ndarray, cond: np.ndarray, step) -> np.ndarray:
        a = np.atleast_2d(np.asarray(a, dtype=np.float64))
        cond = np.atleast_2d(np.asarray(cond, dtype=np.float64))
        b = a.shape[0]
        if cond.shape[0] == 1 and b > 1:
            cond = np.broadcast_to(cond, (b, cond.shape[1]))
        cols = [a, cond, self._embed_broadcast(t, b)]
        if self.shortcut:
            if step is None:
                raise ConfigurationError("shortcut field needs a step size input")
            cols.append(self._embed_broadcast(step, b))
        elif step is not None:
            raise ConfigurationError("step size given to a non-shortcut field")
        return np.concatenate(cols, axis=1)

    def forward(self, t, a: np.ndarray, cond: np.ndarray, step=None):
        """Velocity for a batch; returns (v, tape). 1-D inputs give 1-D output."""
        single = np.asarray(a).ndim == 1
        x = self._assemble_input(t, a, cond, step)
        v, tape = mlp_apply(self.net, x)
        return (v[0], tape) if single else (v, tape)

    def backward(self, tape, dv: np.ndarray) -> tuple[MlpGrads, np.ndarray]:
        """VJP: gradients w.r.t. net params and the action slice of the input."""
        dv = np.atleast_2d(np.asarray(dv, dtype=np.float64))
        grads, dx = mlp_backward(tape, dv)
        da = dx[:, : self.chunk_dim]
        return grads, da


def euler_sample(field: VelocityField, x0: np.ndarray, cond: np.ndarray,
                 scheme: DiscretizationScheme) -> np.ndarray:
    """Deterministic Euler integration of the velocity field from t=0 to 1."""
    x = np.array(x0, dtype=np.float64, copy=True)
    deltas = scheme.deltas
    for k in range(scheme.n_steps):
        step = deltas[k] if field.shortcut else None
        v, _ = field.forward(scheme.knots[k], x, cond, step=step)
        x = x + v * deltas[k]
        if not np.all(np.isfinite(x)):
            raise NumericError("non-finite state during Euler integration", context=f"step {k}")
    return x
