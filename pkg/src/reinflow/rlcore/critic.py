"""Observation-value network and its regression loss."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigurationError
from ..numerics import Activation, MlpGrads, MlpParams, init_mlp, mlp_apply, mlp_backward


@dataclass
class Critic:
    net: MlpParams

    def __post_init__(self):
        if self.net.out_dim != 1:
            raise ConfigurationError("critic must output a scalar value")

    @classmethod
    def create(cls, obs_dim: int, hidden: list[int], rng, *,
               output_bias: float = 0.0,
               activation: Activation = Activation.MISH) -> "Critic":
        net = init_mlp([obs_dim, *hidden, 1], activation, rng)
        # A positive last-layer bias keeps early value estimates from dragging
        # a decent pretrained policy toward pessimism.
        net.biases[-1][:] = output_bias
        return cls(net=net)

    def values(self, obs: np.ndarray):
        out, tape = mlp_apply(self.net, np.atleast_2d(np.asarray(obs, dtype=np.float64)))
        return out[:, 0], tape


def critic_loss(critic: Critic, obs: np.ndarray, returns: np.ndarray,
                coefficient: float = 0.5) -> tuple[float, MlpGrads]:
    """coefficient * 0.5 * mean((V(o) - return)^2) with exact gradients."""
    returns = np.asarray(returns, dtype=np.float64).reshape(-1)
    values, tape = critic.values(obs)
    if values.shape != returns.shape:
        raise ConfigurationError("one return per observation required")
    err = values - returns
    loss = float(coefficient * 0.5 * np.mean(err * err))
    d_values = coefficient * err / err.size
    grads, _ = mlp_backward(tape, d_values[:, None])
    return loss, grads
