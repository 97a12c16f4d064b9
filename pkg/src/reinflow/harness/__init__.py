from .build import build_critic, build_finetune_state, build_policy, env_config, time_sampler
from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .config import SCHEMA, RunConfig
from .evaluate import evaluate_policy
from .metrics import MetricsLog, read_metrics
from .plots import emit_plot
from .pretrain import pretrain_policy
from .workflows import resolve_out_dir, run_demos, run_eval, run_finetune, run_pretrain

__all__ = [
    "Checkpoint",
    "MetricsLog",
    "RunConfig",
    "SCHEMA",
    "build_critic",
    "build_finetune_state",
    "build_policy",
    "emit_plot",
    "env_config",
    "evaluate_policy",
    "load_checkpoint",
    "pretrain_policy",
    "read_metrics",
    "resolve_out_dir",
    "run_demos",
    "run_eval",
    "run_finetune",
    "run_pretrain",
    "save_checkpoint",
    "time_sampler",
]
