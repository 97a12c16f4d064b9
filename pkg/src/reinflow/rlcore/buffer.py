"""On-policy rollout storage, laid out [n_envs x n_steps]."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigurationError


@dataclass
class RolloutBuffer:
    obs: np.ndarray           # (E, T, obs_dim), observation before each macro-step
    chain_actions: np.ndarray # (E, T, K+1, d) recorded denoising chains
    rewards_raw: np.ndarray   # (E, T) unnormalized chunk rewards
    dones: np.ndarray         # (E, T) bool
    old_logp: np.ndarray      # (E, T) transition-sum log-prob at sampling time
    final_obs: np.ndarray     # (E, obs_dim) observation after the last step
    episode_returns: list[float] = field(default_factory=list)
    episode_successes: list[bool] = field(default_factory=list)
    values: np.ndarray | None = None     # (E, T), filled by the trainer
    rewards: np.ndarray | None = None    # (E, T) normalized, filled by the trainer

    def __post_init__(self):
        e, t = self.rewards_raw.shape
        for name, arr, lead in [("obs", self.obs, 2), ("chain_actions", self.chain_actions, 2),
                                ("dones", self.dones, 2), ("old_logp", self.old_logp, 2)]:
            if arr.shape[:lead] != (e, t):
                raise ConfigurationError(f"buffer field {name} has shape {arr.shape}, want leading {(e, t)}")
        if not np.all(np.isfinite(self.old_logp)):
            raise ConfigurationError("non-finite stored log-probabilities")

    @property
    def n_envs(self) -> int:
        return self.rewards_raw.shape[0]

    @property
    def n_steps(self) -> int:
        return self.rewards_raw.shape[1]

    @property
    def executed_actions(self) -> np.ndarray:
        return self.chain_actions[:, :, -1, :]

    def flat(self, arr: np.ndarray) -> np.ndarray:
        """Collapse the (env, step) leading axes to one sample axis."""
        return arr.reshape(self.n_envs * self.n_steps, *arr.shape[2:])
