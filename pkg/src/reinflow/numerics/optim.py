"""Adam with bias correction and the warmup/cosine-restart LR schedule."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from ..errors import ConfigurationError


@dataclass
class AdamState:
    """First/second moment accumulators, shaped like the parameter list."""

    m: list[np.ndarray]
    v: list[np.ndarray]
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_params(cls, arrays: list[np.ndarray], beta1: float = 0.9,
                   beta2: float = 0.999, eps: float = 1e-8) -> "AdamState":
        return cls(
            m=[np.zeros_like(a) for a in arrays],
            v=[np.zeros_like(a) for a in arrays],
            beta1=beta1, beta2=beta2, eps=eps,
        )


def adam_update(state: AdamState, arrays: list[np.ndarray],
                grads: list[np.ndarray], lr: float) -> None:
    """One Adam step, in place on `arrays`. lr = 0 still advances the moments."""
    if lr < 0:
        raise ConfigurationError("learning rate must be non-negative")
    if len(arrays) != len(state.m) or len(arrays) != len(grads):
        raise ConfigurationError("parameter/gradient/state lengths differ")
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    bc1 = 1.0 - b1 ** state.step
    bc2 = 1.0 - b2 ** state.step
    for a, g, m, v in zip(arrays, grads, state.m, state.v):
        if a.shape != g.shape:
            raise ConfigurationError(f"gradient shape {g.shape} != parameter shape {a.shape}")
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        a -= lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)


class ScheduleKind(Enum):
    CONSTANT = "constant"
    COSINE_WARM_RESTART = "cosine_warm_restart"


@dataclass
class LrSchedule:
    kind: ScheduleKind
    base: float
    final: float = 0.0
    warmup: int = 0
    cycle: int = 100

    def __post_init__(self):
        if self.base < 0 or self.final < 0:
            raise ConfigurationError("learning rates must be non-negative")
        if self.kind is ScheduleKind.COSINE_WARM_RESTART and self.cycle < 1:
            raise ConfigurationError("cycle length must be >= 1")


def schedule_lr(schedule: LrSchedule, iteration: int) -> float:
    """Linear 0->base warmup, then (for the cosine kind) base->final decay
    over each cycle, restarting every `cycle` iterations."""
    if iteration < schedule.warmup:
        return schedule.base * iteration / schedule.warmup
    if schedule.kind is ScheduleKind.CONSTANT:
        return schedule.base
    phase = ((iteration - schedule.warmup) % schedule.cycle) / schedule.cycle
    return float(schedule.final + (schedule.base - schedule.final) * 0.5 * (1.0 + np.cos(np.pi * phase)))
