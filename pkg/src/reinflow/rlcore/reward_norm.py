"""Online reward normalization by the running variance of the time-reversed
discounted return (the backward-accumulated reward trace per environment)."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigurationError

_SCALE_FLOOR = 1e-8


@dataclass
class RewardScaler:
    gamma: float
    n_envs: int
    accumulators: np.ndarray = field(init=False)
    count: int = 0
    mean: float = 0.0
    m2: float = 0.0

    def __post_init__(self):
        self.accumulators = np.zeros(self.n_envs)

    @property
    def variance(self) -> float:
        return self.m2 / self.count if self.count > 0 else 0.0

    @property
    def scale(self) -> float:
        return max(float(np.sqrt(self.variance)), _SCALE_FLOOR)

    def _update_stats(self, values: np.ndarray) -> None:
        for v in values:
            self.count += 1
            delta = v - self.mean
            self.mean += delta / self.count
            self.m2 += delta * (v - self.mean)

    def state_dict(self) -> dict:
        return {"gamma": self.gamma, "n_envs": self.n_envs,
                "accumulators": self.accumulators.tolist(),
                "count": self.count, "mean": self.mean, "m2": self.m2}

    @classmethod
    def from_state_dict(cls, state: dict) -> "RewardScaler":
        scaler = cls(gamma=state["gamma"], n_envs=state["n_envs"])
        scaler.accumulators = np.array(state["accumulators"], dtype=np.float64)
        scaler.count = state["count"]
        scaler.mean = state["mean"]
        scaler.m2 = state["m2"]
        return scaler


def normalize_rewards(scaler: RewardScaler, rewards: np.ndarray,
                      dones: np.ndarray) -> np.ndarray:
    """Scale a (n_envs, n_steps) reward block in rollout order.

    Per step: accumulate R <- gamma * R + r, fold the accumulator values into
    the running variance, divide the raw reward by the current scale, and
    zero the accumulator of any env whose episode just ended.
    """
    rewards = np.asarray(rewards, dtype=np.float64)
    dones = np.asarray(dones, dtype=bool)
    if rewards.shape != dones.shape or rewards.shape[0] != scaler.n_envs:
        raise ConfigurationError("reward/done block shape does not match the scaler")
    out = np.empty_like(rewards)
    for t in range(rewards.shape[1]):
        scaler.accumulators = scaler.gamma * scaler.accumulators + rewards[:, t]
        scaler._update_stats(scaler.accumulators)
        out[:, t] = rewards[:, t] / scaler.scale
        scaler.accumulators[dones[:, t]] = 0.0
    return out
