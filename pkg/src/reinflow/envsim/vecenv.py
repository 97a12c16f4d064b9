"""Parallel environment wrapper and the on-policy rollout collector."""

from __future__ import annotations

import numpy as np

from ..errors import ConfigurationError, ContractViolationError
from ..numerics.rng import STREAM_CHAIN_BASE, STREAM_ENV_BASE, SeededRng
from ..rlcore.buffer import RolloutBuffer
from ..stochpolicy.policy import NoisyFlowPolicy, simulate_chains
from .pointmass import PointMassConfig, PointMassEnv


class VecEnv:
    """n independent auto-resetting environments with per-env rng streams.

    Stepping is vectorized across envs but follows the exact per-env tick
    arithmetic of PointMassEnv, so a batch step equals n single steps.
    """

    def __init__(self, cfg: PointMassConfig, n_envs: int, seed: int):
        if n_envs < 1:
            raise ConfigurationError("need at least one environment")
        self.cfg = cfg
        self.n_envs = n_envs
        self.seed = seed
        self.envs = [PointMassEnv(cfg, SeededRng(seed, STREAM_ENV_BASE + i)) for i in range(n_envs)]
        self.chain_rngs = [SeededRng(seed, STREAM_CHAIN_BASE + i) for i in range(n_envs)]
        self._ep_returns = np.zeros(n_envs)

    def reset_all(self) -> np.ndarray:
        obs = np.stack([env.reset() for env in self.envs])
        self._ep_returns[:] = 0.0
        return obs

    def observations(self) -> np.ndarray:
        return np.stack([env.observation() for env in self.envs])

    def step_all(self, chunks: np.ndarray):
        """Advance every env one macro-step; returns (rewards, dones,
        successes, next_obs) with done envs freshly reset in next_obs."""
        cfg = self.cfg
        e = self.n_envs
        chunks = np.asarray(chunks, dtype=np.float64).reshape(e, cfg.chunk_size, 2)
        if np.any(np.abs(chunks) > 1.0 + 1e-12):
            raise ContractViolationError("chunk accelerations must lie in [-1, 1]")

        p = np.stack([env.state.position for env in self.envs])
        v = np.stack([env.state.velocity for env in self.envs])
        g = np.stack([env.state.goal for env in self.envs])
        reached = np.array([env._reached for env in self.envs])
        rewards = np.zeros(e)
        reached_now = np.zeros(e, dtype=bool)
        for c in range(cfg.chunk_size):
            a = chunks[:, c]
            v = np.clip(v + a * cfg.dt, -cfg.v_max, cfg.v_max)
            p = np.clip(p + v * cfg.dt, -cfg.arena, cfg.arena)
            diff = p - g
            dist = np.sqrt((diff * diff).sum(axis=1))
            if cfg.kind == "dense":
                rewards += -dist - cfg.ctrl_cost * (a * a).sum(axis=1)
                reached |= dist < cfg.goal_radius
            else:
                hit = ~reached & (dist < cfg.goal_radius)
                rewards += hit.astype(np.float64)
                reached_now |= hit
                reached |= hit

        dones = np.empty(e, dtype=bool)
        next_obs = np.empty((e, cfg.obs_dim))
        for i, env in enumerate(self.envs):
            s = env.state
            s.position, s.velocity = p[i], v[i]
            s.tick += 1
            env._reached = bool(reached[i])
            if cfg.kind == "dense":
                dones[i] = s.tick >= cfg.horizon
            else:
                dones[i] = reached_now[i] or reached[i] or s.tick >= cfg.horizon
            next_obs[i] = env.reset() if dones[i] else env.observation()
        return rewards, dones, reached, next_obs

    def rng_state_dicts(self) -> dict:
        return {
            "env": [env.rng.state_dict() for env in self.envs],
            "chain": [r.state_dict() for r in self.chain_rngs],
        }

    def load_rng_state_dicts(self, states: dict) -> None:
        for env, st in zip(self.envs, states["env"]):
            env.rng = SeededRng.from_state_dict(st)
        self.chain_rngs = [SeededRng.from_state_dict(st) for st in states["chain"]]


def vec_rollout(policy: NoisyFlowPolicy, venv: VecEnv, n_steps: int) -> RolloutBuffer:
    """Advance every env n_steps macro-steps under the stochastic policy.

    Chain noise comes from per-env streams consumed in a fixed order, so the
    result does not depend on how the batch of envs is scheduled. Episode
    returns/successes are recorded for episodes that finish inside the window.
    """
    cfg = venv.cfg
    e = venv.n_envs
    d = policy.chunk_dim
    k_steps = policy.scheme.n_steps
    if d != cfg.chunk_dim:
        raise ConfigurationError(f"policy chunk dim {d} != env chunk dim {cfg.chunk_dim}")

    obs_buf = np.empty((e, n_steps, cfg.obs_dim))
    chains_buf = np.empty((e, n_steps, k_steps + 1, d))
    rewards = np.empty((e, n_steps))
    dones = np.zeros((e, n_steps), dtype=bool)
    old_logp = np.empty((e, n_steps))
    episode_returns: list[float] = []
    episode_successes: list[bool] = []

    obs = venv.observations()
    for t in range(n_steps):
        a0 = np.stack([venv.chain_rngs[i].standard_normal(d) for i in range(e)])
        eps = np.stack([venv.chain_rngs[i].standard_normal((k_steps, d)) for i in range(e)])
        batch = simulate_chains(policy, obs, a0, eps)

        obs_buf[:, t] = obs
        chains_buf[:, t] = batch.actions
        old_logp[:, t] = batch.transition_sum

        executed = np.clip(batch.final_actions, -1.0, 1.0)
        step_rewards, step_dones, step_success, next_obs = venv.step_all(executed)
        rewards[:, t] = step_rewards
        dones[:, t] = step_dones
        venv._ep_returns += step_rewards
        for i in np.flatnonzero(step_dones):
            episode_returns.append(float(venv._ep_returns[i]))
            episode_successes.append(bool(step_success[i]))
            venv._ep_returns[i] = 0.0
        obs = next_obs

    return RolloutBuffer(
        obs=obs_buf, chain_actions=chains_buf, rewards_raw=rewards, dones=dones,
        old_logp=old_logp, final_obs=obs,
        episode_returns=episode_returns, episode_successes=episode_successes,
    )
