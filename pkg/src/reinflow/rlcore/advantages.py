"""Generalized advantage estimation over [n_envs x n_steps] rollouts."""

from __future__ import annotations

import numpy as np

from ..errors import ConfigurationError


def gae_advantages(rewards: np.ndarray, values: np.ndarray, dones: np.ndarray,
                   bootstrap: np.ndarray, gamma: float, lam: float,
                   normalize: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """GAE(gamma, lambda) with episode boundaries masked by `dones`.

    Returns (advantages, returns) where returns = advantages + values before
    any normalization. With `normalize=True` the advantages are shifted and
    scaled to zero mean / unit std over the whole batch (skipped when the
    batch is degenerate).
    """
    rewards = np.asarray(rewards, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    dones = np.asarray(dones, dtype=bool)
    bootstrap = np.asarray(bootstrap, dtype=np.float64)
    if not (rewards.shape == values.shape == dones.shape):
        raise ConfigurationError("rewards/values/dones shapes differ")
    if bootstrap.shape != (rewards.shape[0],):
        raise ConfigurationError("need one bootstrap value per environment")

    e, t = rewards.shape
    advantages = np.zeros((e, t))
    next_values = bootstrap
    next_adv = np.zeros(e)
    for step in range(t - 1, -1, -1):
        alive = 1.0 - dones[:, step].astype(np.float64)
        delta = rewards[:, step] + gamma * next_values * alive - values[:, step]
        next_adv = delta + gamma * lam * alive * next_adv
        advantages[:, step] = next_adv
        next_values = values[:, step]

    returns = advantages + values
    if normalize:
        flat = advantages.reshape(-1)
        std = flat.std()
        if flat.size > 1 and std > 1e-8:
            advantages = (advantages - flat.mean()) / std
    return advantages, returns
