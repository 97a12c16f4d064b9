from .expert import DemoSet, generate_demos, save_demos, scripted_expert
from .pointmass import PointMassConfig, PointMassEnv, PointMassState, StepResult, tick_dynamics
from .vecenv import VecEnv, vec_rollout

__all__ = [
    "DemoSet",
    "PointMassConfig",
    "PointMassEnv",
    "PointMassState",
    "StepResult",
    "VecEnv",
    "generate_demos",
    "save_demos",
    "scripted_expert",
    "tick_dynamics",
    "vec_rollout",
]
