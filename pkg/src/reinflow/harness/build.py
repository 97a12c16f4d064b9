"""Construct runtime objects from a RunConfig."""

from __future__ import annotations

from ..envsim.pointmass import PointMassConfig
from ..envsim.vecenv import VecEnv
from ..errors import ConfigurationError
from ..flowmatch.model import DiscretizationScheme, TimeSampler, TimeSamplerKind, VelocityField
from ..numerics import Activation, LrSchedule, ScheduleKind
from ..numerics.rng import STREAM_INIT, STREAM_UPDATE, SeededRng
from ..rlcore.critic import Critic
from ..rlcore.trainer import FinetuneState, PpoConfig, RegularizerConfig
from ..stochpolicy.noise import NoiseConditioning, NoiseHead, NoiseSchedule
from ..stochpolicy.policy import NoisyFlowPolicy
from .config import RunConfig


def env_config(cfg: RunConfig) -> PointMassConfig:
    env = cfg["env"]
    return PointMassConfig(
        kind=env["kind"], arena=env["arena"], dt=env["dt"], v_max=env["v_max"],
        horizon=env["horizon"], chunk_size=env["chunk_size"],
        goal_radius=env["goal_radius"], ctrl_cost=env["ctrl_cost"],
        obs_noise=env["obs_noise"], start_box=env["start_box"], goal_box=env["goal_box"],
    )


def time_sampler(cfg: RunConfig) -> TimeSampler:
    pre = cfg["pretrain"]
    try:
        kind = TimeSamplerKind(pre["time_sampler"])
    except ValueError as exc:
        raise ConfigurationError(f"unknown time sampler {pre['time_sampler']!r}") from exc
    return TimeSampler(kind=kind, alpha=pre["beta_alpha"], beta=pre["beta_beta"],
                       mu=pre["logit_mu"], sigma=pre["logit_sigma"])


def build_policy(cfg: RunConfig, seed: int) -> NoisyFlowPolicy:
    model = cfg["model"]
    noise_cfg = cfg["noise"]
    env = env_config(cfg)
    rng = SeededRng(seed, STREAM_INIT)
    velocity = VelocityField.create(
        chunk_dim=env.chunk_dim, cond_dim=env.obs_dim,
        hidden=model["velocity_hidden"], time_embed_dim=model["time_embed_dim"],
        rng=rng, shortcut=model["shortcut"], activation=Activation.MISH,
    )
    try:
        conditioning = NoiseConditioning(noise_cfg["conditioning"])
    except ValueError as exc:
        raise ConfigurationError(f"unknown noise conditioning {noise_cfg['conditioning']!r}") from exc
    noise = NoiseHead.create(
        chunk_dim=env.chunk_dim, cond_dim=env.obs_dim, hidden=model["noise_hidden"],
        rng=rng, sigma_min=noise_cfg["sigma_min"], sigma_max=noise_cfg["sigma_max"],
        conditioning=conditioning, time_embed_dim=model["time_embed_dim"],
    )
    scheme = DiscretizationScheme.uniform(model["denoising_steps"])
    return NoisyFlowPolicy(velocity=velocity, noise=noise, scheme=scheme,
                           action_clip=model["action_clip"])


def build_critic(cfg: RunConfig, seed: int) -> Critic:
    env = env_config(cfg)
    model = cfg["model"]
    rng = SeededRng(seed, STREAM_INIT + 1)
    return Critic.create(obs_dim=env.obs_dim, hidden=model["critic_hidden"], rng=rng,
                         output_bias=model["critic_output_bias"])


def build_finetune_state(cfg: RunConfig, policy: NoisyFlowPolicy, critic: Critic,
                         frozen_ref: NoisyFlowPolicy, seed: int,
                         diagnostics_dir: str | None = None) -> FinetuneState:
    ft = cfg["finetune"]
    reg = cfg["regularize"]
    sched = cfg["schedule"]
    noise_cfg = cfg["noise"]
    venv = VecEnv(env_config(cfg), ft["n_envs"], seed)
    ppo = PpoConfig(
        clip_eps=ft["clip_eps"], update_epochs=ft["update_epochs"],
        minibatch_size=ft["minibatch_size"], gamma=ft["gamma"],
        gae_lambda=ft["gae_lambda"], target_kl=ft["target_kl"],
        critic_coef=ft["critic_coef"], critic_warmup=ft["critic_warmup"],
        normalize_advantages=ft["normalize_advantages"],
    )
    reg_cfg = RegularizerConfig(entropy_coef=reg["entropy_coef"], w2_coef=reg["w2_coef"],
                                w2_samples=reg["w2_samples"])
    actor_schedule = LrSchedule(kind=ScheduleKind.COSINE_WARM_RESTART, base=sched["actor_lr"],
                                final=sched["actor_lr_final"], warmup=sched["actor_warmup"],
                                cycle=sched["actor_cycle"])
    critic_schedule = LrSchedule(kind=ScheduleKind.COSINE_WARM_RESTART, base=sched["critic_lr"],
                                 final=sched["critic_lr_final"], warmup=sched["critic_lr_warmup"],
                                 cycle=sched["critic_cycle"])
    noise_schedule = NoiseSchedule(hold_fraction=noise_cfg["hold_fraction"],
                                   decay_mix=noise_cfg["decay_mix"],
                                   total_iterations=ft["iterations"])
    return FinetuneState(
        policy=policy, frozen_ref=frozen_ref, critic=critic, venv=venv,
        n_steps=ft["n_steps"], ppo=ppo, reg=reg_cfg,
        actor_schedule=actor_schedule, critic_schedule=critic_schedule,
        noise_schedule=noise_schedule, update_rng=SeededRng(seed, STREAM_UPDATE),
        reward_scale=ft["reward_scale"], normalize_rewards_flag=ft["normalize_rewards"],
        diagnostics_dir=diagnostics_dir,
    )
