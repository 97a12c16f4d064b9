"""Learnable noise-injection head and the noise-bound schedule.

The head emits a per-coordinate standard deviation squashed into
[sigma_min, sigma_max_current] with a tanh-affine map, so bounds hold for any
raw network output and gradients stay smooth.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from ..errors import ConfigurationError
from ..numerics import Activation, MlpGrads, MlpParams, init_mlp, mlp_apply, mlp_backward, sinusoidal_embed


class NoiseConditioning(Enum):
    OBS_ONLY = "obs_only"
    OBS_AND_TIME = "obs_and_time"
    CONSTANT = "constant"


@dataclass
class NoiseHead:
    net: MlpParams
    sigma_min: float
    sigma_max: float
    conditioning: NoiseConditioning = NoiseConditioning.OBS_AND_TIME
    time_embed_dim: int = 16

    def __post_init__(self):
        if self.sigma_min <= 0:
            raise ConfigurationError("sigma_min must be positive")
        if self.sigma_max < self.sigma_min:
            raise ConfigurationError("sigma_max must be >= sigma_min")

    @classmethod
    def create(cls, chunk_dim: int, cond_dim: int, hidden: list[int], rng, *,
               sigma_min: float, sigma_max: float,
               conditioning: NoiseConditioning = NoiseConditioning.OBS_AND_TIME,
               time_embed_dim: int = 16,
               activation: Activation = Activation.MISH) -> "NoiseHead":
        if conditioning is NoiseConditioning.OBS_ONLY:
            in_dim = cond_dim
        elif conditioning is NoiseConditioning.OBS_AND_TIME:
            in_dim = cond_dim + time_embed_dim
        else:
            # Constant mode: a zero input makes the learned biases the only
            # live parameters, giving plain per-coordinate sigmas.
            in_dim = 1
        net = init_mlp([in_dim, *hidden, chunk_dim], activation, rng)
        return cls(net=net, sigma_min=sigma_min, sigma_max=sigma_max,
                   conditioning=conditioning, time_embed_dim=time_embed_dim)

    def _assemble_input(self, t, obs: np.ndarray, batch: int) -> np.ndarray:
        obs = np.atleast_2d(np.asarray(obs, dtype=np.float64))
        if obs.shape[0] == 1 and batch > 1:
            obs = np.broadcast_to(obs, (batch, obs.shape[1]))
        if self.conditioning is NoiseConditioning.CONSTANT:
            return np.zeros((batch, 1))
        if self.conditioning is NoiseConditioning.OBS_ONLY:
            return obs
        t_arr = np.asarray(t, dtype=np.float64)
        if t_arr.ndim == 0:
            emb = np.broadcast_to(sinusoidal_embed(t_arr, self.time_embed_dim),
                                  (batch, self.time_embed_dim))
        else:
            emb = sinusoidal_embed(np.broadcast_to(t_arr, (batch,)), self.time_embed_dim)
        return np.concatenate([obs, emb], axis=1)


@dataclass
class SigmaTape:
    mlp_tape: object
    tanh_u: np.ndarray
    scale: float  # (sigma_max_current - sigma_min) / 2


def sigma_forward(head: NoiseHead, t, a, obs, sigma_max_current: float,
                  batch: int | None = None) -> tuple[np.ndarray, SigmaTape]:
    """Per-coordinate noise std for a (batch of) denoising state(s).

    The action input `a` is accepted for interface symmetry with the velocity
    field but none of the conditioning modes feed it to the network.
    """
    if sigma_max_current < head.sigma_min:
        raise ConfigurationError(
            f"scheduled sigma_max {sigma_max_current} fell below sigma_min {head.sigma_min}"
        )
    if batch is None:
        a_arr = np.asarray(a)
        batch = 1 if a_arr.ndim <= 1 else a_arr.shape[0]
    x = head._assemble_input(t, obs, batch)
    u, tape = mlp_apply(head.net, x)
    s = np.tanh(u)
    scale = 0.5 * (sigma_max_current - head.sigma_min)
    sigma = head.sigma_min + scale * (s + 1.0)
    return sigma, SigmaTape(mlp_tape=tape, tanh_u=s, scale=scale)


def sigma_backward(head: NoiseHead, tape: SigmaTape, dsigma: np.ndarray) -> MlpGrads:
    """Gradients of sum(dsigma * sigma) w.r.t. the head parameters."""
    du = dsigma * tape.scale * (1.0 - tape.tanh_u * tape.tanh_u)
    grads, _ = mlp_backward(tape.mlp_tape, du)
    return grads


@dataclass
class NoiseSchedule:
    """Hold sigma_max flat, then decay linearly toward a mix of the bounds."""

    hold_fraction: float = 0.35
    decay_mix: float = 0.3
    total_iterations: int = 1

    def __post_init__(self):
        if not 0.0 <= self.hold_fraction <= 1.0:
            raise ConfigurationError("hold fraction must lie in [0, 1]")
        if not 0.0 <= self.decay_mix <= 1.0:
            raise ConfigurationError("decay mix must lie in [0, 1]")
        if self.total_iterations < 1:
            raise ConfigurationError("total iterations must be >= 1")


def noise_bound_at(schedule: NoiseSchedule, iteration: int,
                   sigma_min: float, sigma_max: float) -> float:
    """Scheduled upper noise bound at a given fine-tuning iteration."""
    total = schedule.total_iterations
    if iteration > total:
        raise ConfigurationError(f"iteration {iteration} beyond schedule total {total}")
    hold_end = schedule.hold_fraction * total
    if schedule.hold_fraction >= 1.0 or iteration <= hold_end:
        return sigma_max
    target = schedule.decay_mix * sigma_min + (1.0 - schedule.decay_mix) * sigma_max
    frac = (iteration - hold_end) / (total - hold_end)
    return sigma_max + frac * (target - sigma_max)
