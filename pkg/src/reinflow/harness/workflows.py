"""The four user-facing workflows: demo generation, pretraining, fine-tuning,
and evaluation. Each writes its outputs (plus the resolved config) into
out_root/run_name; the REINFLOW_OUT_DIR environment variable overrides the
output root."""

from __future__ import annotations

import json
import os
from pathlib import Path

import numpy as np

from ..envsim.expert import generate_demos, save_demos
from ..errors import CheckpointError, ConfigurationError
from ..flowmatch.dataset import load_dataset
from ..numerics.rng import STREAM_DATA, SeededRng
from ..rlcore.reward_norm import RewardScaler
from ..rlcore.trainer import finetune_iteration
from .build import build_critic, build_finetune_state, build_policy, env_config, time_sampler
from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .config import RunConfig
from .evaluate import evaluate_policy
from .metrics import MetricsLog
from .plots import emit_plot
from .pretrain import pretrain_policy


def resolve_out_dir(cfg: RunConfig) -> Path:
    root = os.environ.get("REINFLOW_OUT_DIR", cfg["logging"]["out_dir"])
    out = Path(root) / cfg["logging"]["run_name"]
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def run_demos(cfg: RunConfig, seed: int | None = None) -> Path:
    seed = cfg["logging"]["seed"] if seed is None else seed
    out = resolve_out_dir(cfg)
    cfg.write_resolved(out / "resolved_config.txt")
    demos = generate_demos(env_config(cfg), cfg["logging"]["demo_noise"],
                           cfg["logging"]["demo_episodes"], SeededRng(seed, STREAM_DATA + 500))
    path = out / "demos.txt"
    save_demos(demos, path)
    return path


def run_pretrain(cfg: RunConfig, seed: int | None = None) -> Path:
    seed = cfg["logging"]["seed"] if seed is None else seed
    out = resolve_out_dir(cfg)
    cfg.write_resolved(out / "resolved_config.txt")
    pre = cfg["pretrain"]
    if not pre["dataset"]:
        raise ConfigurationError("missing config key [pretrain] dataset")
    dataset = load_dataset(pre["dataset"])

    policy = build_policy(cfg, seed)
    critic = build_critic(cfg, seed)
    env = env_config(cfg)
    if dataset.chunk_dim != env.chunk_dim or dataset.cond_dim != env.obs_dim:
        raise ConfigurationError(
            f"dataset dims ({dataset.chunk_dim}, {dataset.cond_dim}) do not match the env"
        )

    history = pretrain_policy(
        policy, dataset, steps=pre["steps"], batch_size=pre["batch_size"], lr=pre["lr"],
        seed=seed, time_sampler=time_sampler(cfg), lr_final=pre["lr_final"],
        lr_warmup=pre["lr_warmup"], lr_cycle=pre["lr_cycle"],
        shortcut_kmax=pre["shortcut_kmax"], shortcut_sc_fraction=pre["shortcut_sc_fraction"],
    )
    log = MetricsLog(out / "pretrain_metrics.csv", columns=["iter", "loss", "lr"])
    for row in history:
        log.append(row)

    evaluation = evaluate_policy(policy, env, cfg["logging"]["eval_episodes"], seed)
    _write_json(out / "pretrain_eval.json", evaluation)

    ckpt_path = out / "pretrain.ckpt"
    save_checkpoint(Checkpoint(
        policy=policy, critic=critic, iteration=0, seed=seed,
        extra={"phase": "pretrain", "eval": evaluation},
    ), ckpt_path)
    return ckpt_path


def run_finetune(cfg: RunConfig, seed: int | None = None,
                 resume: str | Path | None = None) -> Path:
    seed = cfg["logging"]["seed"] if seed is None else seed
    out = resolve_out_dir(cfg)
    cfg.write_resolved(out / "resolved_config.txt")
    ft = cfg["finetune"]

    if resume is not None:
        ck = load_checkpoint(resume)
        if ck.frozen_ref is None or ck.actor_adam is None or ck.rng_states is None:
            raise CheckpointError(f"{resume} is not a resumable fine-tune checkpoint")
        policy, critic, frozen_ref = ck.policy, ck.critic, ck.frozen_ref
        pretrain_eval = ck.extra.get("pretrain_eval", {})
    else:
        if not ft["pretrained_checkpoint"]:
            raise CheckpointError("missing config key [finetune] pretrained_checkpoint")
        ck = load_checkpoint(ft["pretrained_checkpoint"])
        policy, critic = ck.policy, ck.critic
        frozen_ref = policy.copy()
        pretrain_eval = ck.extra.get("eval", {})

    state = build_finetune_state(cfg, policy, critic, frozen_ref, seed,
                                 diagnostics_dir=str(out))
    if resume is not None:
        state.iteration = ck.iteration
        state.actor_adam = ck.actor_adam
        state.critic_adam = ck.critic_adam
        state.scaler = RewardScaler.from_state_dict(ck.scaler_state)
        state.update_rng = SeededRng.from_state_dict(ck.rng_states["update"])
        state.venv.load_rng_state_dicts(ck.rng_states["venv"])
        state.last_ep_reward = ck.extra.get("last_ep_reward", 0.0)
        state.last_success_rate = ck.extra.get("last_success_rate", 0.0)
        state.env_ticks = ck.extra.get("env_ticks", 0)

    log = MetricsLog(out / "metrics.csv")
    checkpoint_every = cfg["logging"]["checkpoint_every"]

    def snapshot(path: Path):
        save_checkpoint(Checkpoint(
            policy=state.policy, critic=state.critic, iteration=state.iteration,
            seed=seed, frozen_ref=state.frozen_ref, actor_adam=state.actor_adam,
            critic_adam=state.critic_adam,
            rng_states={"update": state.update_rng.state_dict(),
                        "venv": state.venv.rng_state_dicts()},
            scaler_state=state.scaler.state_dict(),
            extra={"phase": "finetune", "pretrain_eval": pretrain_eval,
                   "last_ep_reward": state.last_ep_reward,
                   "last_success_rate": state.last_success_rate,
                   "env_ticks": state.env_ticks},
        ), path)

    while state.iteration < ft["iterations"]:
        row = finetune_iteration(state)
        log.append(row)
        if checkpoint_every and state.iteration % checkpoint_every == 0:
            snapshot(out / f"checkpoint_iter{state.iteration}.ckpt")

    ckpt_path = out / "finetune.ckpt"
    snapshot(ckpt_path)

    baseline = pretrain_eval.get("mean_reward")
    emit_plot(out / "metrics.csv", ["mean_episode_reward_raw"], out / "reward_curve.svg",
              baseline=baseline)
    emit_plot(out / "metrics.csv", ["success_rate"], out / "success_curve.svg",
              baseline=pretrain_eval.get("success_rate"))

    evaluation = evaluate_policy(state.policy, env_config(cfg),
                                 cfg["logging"]["eval_episodes"], seed)
    _write_json(out / "finetune_eval.json", evaluation)
    return ckpt_path


def run_eval(cfg: RunConfig, checkpoint_path: str | Path,
             seed: int | None = None, episodes: int | None = None) -> dict:
    seed = cfg["logging"]["seed"] if seed is None else seed
    episodes = cfg["logging"]["eval_episodes"] if episodes is None else episodes
    ck = load_checkpoint(checkpoint_path)
    result = evaluate_policy(ck.policy, env_config(cfg), episodes, seed)
    out = resolve_out_dir(cfg)
    _write_json(out / "eval.json", result)
    return result
