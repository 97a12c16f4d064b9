"""The online fine-tuning engine: rollouts, GAE, clipped-surrogate updates
over chain log-probabilities, regularizers, and the stability gates
(critic warmup, KL early stop, noise-bound schedule)."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING

import numpy as np

from ..errors import ConfigurationError, NumericError
from ..numerics import AdamState, LrSchedule, adam_update, schedule_lr
from ..numerics.rng import SeededRng
from ..stochpolicy.noise import NoiseSchedule, noise_bound_at
from ..stochpolicy.policy import NoisyFlowPolicy, chain_logprob_batch
from .advantages import gae_advantages
from .critic import Critic, critic_loss
from .ppo import approx_kl, ppo_clip_loss
from .regularizers import (
    entropy_rate_sigma_cotangent,
    entropy_rate_value,
    w2_regularizer,
)
from .reward_norm import RewardScaler, normalize_rewards

if TYPE_CHECKING:
    from ..envsim.vecenv import VecEnv

METRICS_COLUMNS = [
    "iter", "env_steps", "mean_episode_reward_raw", "success_rate",
    "policy_loss", "value_loss", "entropy_reg", "w2_reg", "approx_kl",
    "clip_fraction", "sigma_max_current", "actor_lr", "critic_lr", "clamp_count",
]


@dataclass
class PpoConfig:
    clip_eps: float = 0.01
    update_epochs: int = 5
    minibatch_size: int = 256
    gamma: float = 0.99
    gae_lambda: float = 0.95
    target_kl: float = 1.0
    critic_coef: float = 0.5
    critic_warmup: int = 0
    normalize_advantages: bool = True

    def __post_init__(self):
        if not 0.0 < self.clip_eps < 1.0:
            raise ConfigurationError("clip epsilon must lie in (0, 1)")
        if not 0.0 < self.gamma < 1.0:
            raise ConfigurationError("gamma must lie in (0, 1)")
        if not 0.0 <= self.gae_lambda <= 1.0:
            raise ConfigurationError("lambda must lie in [0, 1]")


@dataclass
class RegularizerConfig:
    entropy_coef: float = 0.03
    w2_coef: float = 0.0
    w2_samples: int = 16

    def __post_init__(self):
        if self.entropy_coef < 0 or self.w2_coef < 0:
            raise ConfigurationError("regularizer coefficients must be non-negative")


@dataclass
class FinetuneState:
    policy: NoisyFlowPolicy
    frozen_ref: NoisyFlowPolicy
    critic: Critic
    venv: "VecEnv"
    n_steps: int
    ppo: PpoConfig
    reg: RegularizerConfig
    actor_schedule: LrSchedule
    critic_schedule: LrSchedule
    noise_schedule: NoiseSchedule
    update_rng: SeededRng
    reward_scale: float = 1.0
    normalize_rewards_flag: bool = True
    diagnostics_dir: str | None = None
    iteration: int = 0
    env_ticks: int = 0
    actor_adam: AdamState = None
    critic_adam: AdamState = None
    scaler: RewardScaler = None
    last_ep_reward: float = 0.0
    last_success_rate: float = 0.0
    # Populated each iteration for inspection/tests.
    debug: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.actor_adam is None:
            self.actor_adam = AdamState.for_params(self.policy.actor_param_arrays())
        if self.critic_adam is None:
            self.critic_adam = AdamState.for_params(self.critic.net.param_arrays())
        if self.scaler is None:
            self.scaler = RewardScaler(gamma=self.ppo.gamma, n_envs=self.venv.n_envs)


def _dump_minibatch(state: FinetuneState, payload: dict) -> str:
    out_dir = Path(state.diagnostics_dir or ".")
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / f"diverged_minibatch_iter{state.iteration}.npz"
    np.savez(path, **payload)
    return str(path)


def finetune_iteration(state: FinetuneState) -> dict:
    """One outer iteration: rollout, advantage estimation, minibatch updates.

    Returns the metrics row as a dict keyed by METRICS_COLUMNS.
    """
    from ..envsim.vecenv import vec_rollout

    policy = state.policy
    ppo_cfg = state.ppo
    reg_cfg = state.reg
    it = state.iteration

    sigma_max = noise_bound_at(state.noise_schedule, min(it, state.noise_schedule.total_iterations),
                               policy.noise.sigma_min, policy.noise.sigma_max)
    policy.sigma_max_current = sigma_max
    actor_lr = schedule_lr(state.actor_schedule, it)
    critic_lr = schedule_lr(state.critic_schedule, it)

    # Fresh episodes every iteration; the rollout window covers the horizon.
    state.venv.reset_all()
    buffer = vec_rollout(policy, state.venv, state.n_steps)
    state.env_ticks += state.venv.n_envs * state.n_steps * state.venv.cfg.chunk_size

    rewards = buffer.rewards_raw * state.reward_scale
    if state.normalize_rewards_flag:
        rewards = normalize_rewards(state.scaler, rewards, buffer.dones)
    buffer.rewards = rewards

    obs_flat = buffer.flat(buffer.obs)
    values_flat, _ = state.critic.values(obs_flat)
    buffer.values = values_flat.reshape(buffer.n_envs, buffer.n_steps)
    bootstrap, _ = state.critic.values(buffer.final_obs)

    advantages, returns = gae_advantages(
        rewards, buffer.values, buffer.dones, bootstrap,
        ppo_cfg.gamma, ppo_cfg.gae_lambda, normalize=ppo_cfg.normalize_advantages,
    )

    actions_flat = buffer.flat(buffer.chain_actions)
    logp_old_flat = buffer.flat(buffer.old_logp)
    adv_flat = advantages.reshape(-1)
    returns_flat = returns.reshape(-1)
    n_samples = adv_flat.size
    mb_size = min(ppo_cfg.minibatch_size, n_samples)

    warmup_active = it < ppo_cfg.critic_warmup
    policy_losses, value_losses, kls = [], [], []
    entropy_values, w2_values = [], []
    clip_fracs, clamp_total = [], 0
    minibatches_applied = 0
    kl_stop = False
    state.debug = {}

    for epoch in range(ppo_cfg.update_epochs):
        perm = state.update_rng.permutation(n_samples)
        for start in range(0, n_samples, mb_size):
            idx = perm[start : start + mb_size]
            mb_obs = obs_flat[idx]
            mb_returns = returns_flat[idx]

            if not warmup_active:
                result = chain_logprob_batch(policy, actions_flat[idx], mb_obs)
                logp_new = result.transition_sum
                kl = approx_kl(logp_new, logp_old_flat[idx])
                kls.append(kl)
                if kl > ppo_cfg.target_kl:
                    kl_stop = True
                    break

                ppo_result = ppo_clip_loss(logp_new, logp_old_flat[idx], adv_flat[idx],
                                           ppo_cfg.clip_eps)
                entropy_value = entropy_rate_value(result.sigmas, policy.chunk_dim)
                d_sigma = None
                if reg_cfg.entropy_coef > 0:
                    d_sigma = reg_cfg.entropy_coef * entropy_rate_sigma_cotangent(result.sigmas)
                vel_grads, noise_grads = result.backward(ppo_result.d_logp_new, d_sigma)

                w2_value = 0.0
                if reg_cfg.w2_coef > 0:
                    w2_value, w2_grads = w2_regularizer(
                        policy, state.frozen_ref, mb_obs, state.update_rng,
                        max_samples=reg_cfg.w2_samples,
                    )
                    vel_grads.add_(w2_grads, scale=reg_cfg.w2_coef)

                total_loss = (ppo_result.loss + reg_cfg.entropy_coef * entropy_value
                              + reg_cfg.w2_coef * w2_value)
                if not np.isfinite(total_loss):
                    path = _dump_minibatch(state, {
                        "obs": mb_obs, "actions": actions_flat[idx],
                        "logp_old": logp_old_flat[idx], "adv": adv_flat[idx],
                    })
                    raise NumericError("non-finite fine-tuning loss", context=path)

                grad_arrays = vel_grads.param_arrays() + noise_grads.param_arrays()
                if "first_actor_grads" not in state.debug:
                    state.debug["first_actor_grads"] = [g.copy() for g in grad_arrays]
                adam_update(state.actor_adam, policy.actor_param_arrays(), grad_arrays, actor_lr)

                policy_losses.append(ppo_result.loss)
                entropy_values.append(entropy_value)
                w2_values.append(w2_value)
                clip_fracs.append(ppo_result.clip_fraction)
                clamp_total += ppo_result.clamp_count

            v_loss, v_grads = critic_loss(state.critic, mb_obs, mb_returns, ppo_cfg.critic_coef)
            if not np.isfinite(v_loss):
                path = _dump_minibatch(state, {"obs": mb_obs, "returns": mb_returns})
                raise NumericError("non-finite critic loss", context=path)
            adam_update(state.critic_adam, state.critic.net.param_arrays(),
                        v_grads.param_arrays(), critic_lr)
            value_losses.append(v_loss)
            minibatches_applied += 1
        if kl_stop:
            break

    episodes = buffer.episode_returns
    if episodes:
        state.last_ep_reward = float(np.mean(episodes))
        state.last_success_rate = float(np.mean(buffer.episode_successes))

    state.debug.update({
        "kl_stop": kl_stop,
        "minibatches_applied": minibatches_applied,
        "warmup_active": warmup_active,
        "buffer": buffer,
    })

    metrics = {
        "iter": it,
        "env_steps": state.env_ticks,
        "mean_episode_reward_raw": state.last_ep_reward,
        "success_rate": state.last_success_rate,
        "policy_loss": float(np.mean(policy_losses)) if policy_losses else 0.0,
        "value_loss": float(np.mean(value_losses)) if value_losses else 0.0,
        "entropy_reg": float(np.mean(entropy_values)) if entropy_values else 0.0,
        "w2_reg": float(np.mean(w2_values)) if w2_values else 0.0,
        "approx_kl": float(np.mean(kls)) if kls else 0.0,
        "clip_fraction": float(np.mean(clip_fracs)) if clip_fracs else 0.0,
        "sigma_max_current": sigma_max,
        "actor_lr": actor_lr,
        "critic_lr": critic_lr,
        "clamp_count": clamp_total,
    }
    state.iteration += 1
    return metrics
