from .mlp import (
    Activation,
    MlpGrads,
    MlpParams,
    MlpTape,
    finite_diff_grad,
    flatten_params,
    init_mlp,
    mlp_apply,
    mlp_backward,
    sinusoidal_embed,
    unflatten_into,
)
from .optim import AdamState, LrSchedule, ScheduleKind, adam_update, schedule_lr
from .rng import SeededRng

__all__ = [
    "Activation",
    "AdamState",
    "LrSchedule",
    "MlpGrads",
    "MlpParams",
    "MlpTape",
    "ScheduleKind",
    "SeededRng",
    "adam_update",
    "finite_diff_grad",
    "flatten_params",
    "init_mlp",
    "mlp_apply",
    "mlp_backward",
    "schedule_lr",
    "sinusoidal_embed",
    "unflatten_into",
]
