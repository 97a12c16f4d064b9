"""Run configuration: `[section]` / `key = value` text files with strict
key validation. Defaults for the shared RL hyperparameters follow the
published table values; sizes and rates are desk-scale and meant to be
overridden per experiment. Every run writes its fully resolved config next
to its outputs.
"""

from __future__ import annotations

import configparser
import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from ..errors import ConfigurationError

# schema: section -> key -> (parser, default)
_BOOL_TRUE = {"1", "true", "yes", "on"}
_BOOL_FALSE = {"0", "false", "no", "off"}


def _parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in _BOOL_TRUE:
        return True
    if low in _BOOL_FALSE:
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_int_list(text: str) -> list[int]:
    text = text.strip()
    if not text:
        return []
    return [int(v) for v in text.split(",")]


def _fmt(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, list):
        return ",".join(str(v) for v in value)
    return repr(value) if isinstance(value, float) else str(value)


SCHEMA: dict[str, dict[str, tuple]] = {
    "env": {
        "kind": (str, "dense"),
        "arena": (float, 2.0),
        "dt": (float, 0.1),
        "v_max": (float, 2.0),
        "horizon": (int, 64),
        "chunk_size": (int, 4),
        "goal_radius": (float, 0.1),
        "ctrl_cost": (float, 0.01),
        "obs_noise": (float, 0.0),
        "start_box": (float, 1.0),
        "goal_box": (float, 1.0),
    },
    "model": {
        "velocity_hidden": (_parse_int_list, [64, 64]),
        "noise_hidden": (_parse_int_list, [32]),
        "critic_hidden": (_parse_int_list, [64, 64]),
        "time_embed_dim": (int, 16),
        "denoising_steps": (int, 4),
        "shortcut": (_parse_bool, False),
        "action_clip": (float, 1.0),
        "critic_output_bias": (float, 0.0),
    },
    "noise": {
        "sigma_min": (float, 0.10),
        "sigma_max": (float, 0.24),
        "conditioning": (str, "obs_and_time"),
        "hold_fraction": (float, 0.35),
        "decay_mix": (float, 0.3),
    },
    "pretrain": {
        "dataset": (str, ""),
        "steps": (int, 3000),
        "batch_size": (int, 128),
        "lr": (float, 1e-3),
        "lr_final": (float, 1e-4),
        "lr_warmup": (int, 100),
        "lr_cycle": (int, 100000),
        "time_sampler": (str, "uniform"),
        "beta_alpha": (float, 1.5),
        "beta_beta": (float, 1.0),
        "logit_mu": (float, 0.0),
        "logit_sigma": (float, 1.0),
        "shortcut_kmax": (int, 8),
        "shortcut_sc_fraction": (float, 0.25),
    },
    "finetune": {
        "pretrained_checkpoint": (str, ""),
        "iterations": (int, 200),
        "n_envs": (int, 16),
        "n_steps": (int, 64),
        "update_epochs": (int, 5),
        "minibatch_size": (int, 256),
        "clip_eps": (float, 0.01),
        "gamma": (float, 0.99),
        "gae_lambda": (float, 0.95),
        "target_kl": (float, 1.0),
        "critic_coef": (float, 0.5),
        "critic_warmup": (int, 0),
        "normalize_advantages": (_parse_bool, True),
        "reward_scale": (float, 1.0),
        "normalize_rewards": (_parse_bool, True),
    },
    "regularize": {
        "entropy_coef": (float, 0.03),
        "w2_coef": (float, 0.0),
        "w2_samples": (int, 16),
    },
    "schedule": {
        "actor_lr": (float, 4.5e-5),
        "actor_lr_final": (float, 2.0e-5),
        "actor_warmup": (int, 0),
        "actor_cycle": (int, 100),
        "critic_lr": (float, 6.5e-4),
        "critic_lr_final": (float, 3.0e-4),
        "critic_lr_warmup": (int, 10),
        "critic_cycle": (int, 100),
    },
    "logging": {
        "out_dir": (str, "runs"),
        "run_name": (str, "run"),
        "seed": (int, 0),
        "eval_episodes": (int, 100),
        "demo_episodes": (int, 200),
        "demo_noise": (float, 0.0),
        "checkpoint_every": (int, 0),
    },
}


@dataclass
class RunConfig:
    values: dict[str, dict[str, Any]] = field(default_factory=dict)

    def __post_init__(self):
        if not self.values:
            self.values = {s: {k: spec[1] for k, spec in keys.items()} for s, keys in SCHEMA.items()}

    def __getitem__(self, section: str) -> dict[str, Any]:
        return self.values[section]

    def get(self, section: str, key: str) -> Any:
        return self.values[section][key]

    def set(self, section: str, key: str, value: Any) -> None:
        if section not in SCHEMA or key not in SCHEMA[section]:
            raise ConfigurationError(f"unknown config key [{section}] {key}")
        self.values[section][key] = value

    @classmethod
    def from_file(cls, path: str | Path) -> "RunConfig":
        path = Path(path)
        if not path.exists():
            raise ConfigurationError(f"config file not found: {path}")
        parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
        try:
            parser.read_string(path.read_text(encoding="utf-8"))
        except configparser.Error as exc:
            raise ConfigurationError(f"cannot parse config {path}: {exc}") from exc
        cfg = cls()
        for section in parser.sections():
            if section not in SCHEMA:
                raise ConfigurationError(f"unknown config section [{section}]")
            for key, raw in parser.items(section):
                if key not in SCHEMA[section]:
                    raise ConfigurationError(f"unknown config key [{section}] {key}")
                parse = SCHEMA[section][key][0]
                try:
                    cfg.values[section][key] = parse(raw)
                except ValueError as exc:
                    raise ConfigurationError(f"bad value for [{section}] {key}: {raw!r}") from exc
        return cfg

    def to_text(self) -> str:
        out = io.StringIO()
        for section, keys in self.values.items():
            out.write(f"[{section}]\n")
            for key, value in keys.items():
                out.write(f"{key} = {_fmt(value)}\n")
            out.write("\n")
        return out.getvalue()

    def write_resolved(self, path: str | Path) -> None:
        Path(path).write_text(self.to_text(), encoding="utf-8")
