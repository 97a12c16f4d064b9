from .advantages import gae_advantages
from .buffer import RolloutBuffer
from .critic import Critic, critic_loss
from .ppo import PpoLossResult, approx_kl, ppo_clip_loss
from .regularizers import (
    entropy_rate_sigma_cotangent,
    entropy_rate_value,
    entropy_regularizer,
    gaussian_entropy,
    integrate_deterministic,
    w2_regularizer,
)
from .reward_norm import RewardScaler, normalize_rewards
from .trainer import (
    METRICS_COLUMNS,
    FinetuneState,
    PpoConfig,
    RegularizerConfig,
    finetune_iteration,
)

__all__ = [
    "Critic",
    "FinetuneState",
    "METRICS_COLUMNS",
    "PpoConfig",
    "PpoLossResult",
    "RegularizerConfig",
    "RewardScaler",
    "RolloutBuffer",
    "approx_kl",
    "critic_loss",
    "entropy_rate_sigma_cotangent",
    "entropy_rate_value",
    "entropy_regularizer",
    "finetune_iteration",
    "gae_advantages",
    "gaussian_entropy",
    "integrate_deterministic",
    "normalize_rewards",
    "ppo_clip_loss",
    "w2_regularizer",
]
