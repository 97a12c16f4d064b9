"""Deterministic policy evaluation on fresh episodes."""

from __future__ import annotations

import numpy as np

from ..envsim.pointmass import PointMassConfig, PointMassEnv
from ..numerics.rng import STREAM_EVAL, SeededRng
from ..stochpolicy.policy import NoisyFlowPolicy, act_deterministic


def evaluate_policy(policy: NoisyFlowPolicy, env_cfg: PointMassConfig,
                    episodes: int, seed: int) -> dict:
    """Noise-free rollouts over `episodes` seeded episodes, run in lockstep."""
    envs = [PointMassEnv(env_cfg, SeededRng(seed, STREAM_EVAL + i)) for i in range(episodes)]
    obs = np.stack([env.reset() for env in envs])
    active = np.ones(episodes, dtype=bool)
    returns = np.zeros(episodes)
    successes = np.zeros(episodes, dtype=bool)
    while np.any(active):
        idx = np.flatnonzero(active)
        actions = act_deterministic(policy, obs[idx])
        actions = np.clip(actions, -1.0, 1.0)
        for j, i in enumerate(idx):
            result = envs[i].step_chunk(actions[j].reshape(env_cfg.chunk_size, 2))
            returns[i] += result.reward
            if result.done:
                active[i] = False
                successes[i] = result.success
            else:
                obs[i] = result.observation
    return {
        "episodes": episodes,
        "mean_reward": float(returns.mean()),
        "std_reward": float(returns.std()),
        "success_rate": float(successes.mean()),
    }
