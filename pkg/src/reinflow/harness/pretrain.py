"""Behavior-cloning pretraining of the velocity field from demonstrations."""

from __future__ import annotations

import numpy as np

from ..flowmatch.dataset import FlowDataset
from ..flowmatch.losses import reflow_loss, shortcut_loss
from ..flowmatch.model import TimeSampler, sample_time
from ..numerics import AdamState, LrSchedule, ScheduleKind, adam_update, schedule_lr
from ..numerics.rng import STREAM_DATA, SeededRng
from ..stochpolicy.policy import NoisyFlowPolicy


def pretrain_policy(policy: NoisyFlowPolicy, dataset: FlowDataset, *, steps: int,
                    batch_size: int, lr: float, seed: int,
                    time_sampler: TimeSampler | None = None,
                    lr_final: float | None = None, lr_warmup: int = 0,
                    lr_cycle: int | None = None,
                    shortcut_kmax: int = 8, shortcut_sc_fraction: float = 0.25,
                    log_every: int = 50) -> list[dict]:
    """Train the velocity net in place; returns the loss log.

    Base samples x0 are drawn fresh from a standard normal every step rather
    than stored with the data. Shortcut-conditioned fields get the combined
    flow-matching + self-consistency objective.
    """
    rng = SeededRng(seed, STREAM_DATA)
    sampler = time_sampler if time_sampler is not None else TimeSampler()
    field = policy.velocity
    adam = AdamState.for_params(field.net.param_arrays())
    schedule = LrSchedule(
        kind=ScheduleKind.COSINE_WARM_RESTART, base=lr,
        final=lr if lr_final is None else lr_final,
        warmup=lr_warmup, cycle=lr_cycle if lr_cycle else max(steps, 1),
    )
    n = len(dataset)
    batch_size = min(batch_size, n)
    history = []
    for step in range(steps):
        idx = rng.integers(0, n, batch_size)
        x1 = dataset.x1[idx]
        cond = dataset.cond[idx]
        x0 = rng.standard_normal(x1.shape)
        if field.shortcut:
            loss, grads = shortcut_loss(field, x0, x1, cond, rng, k_max=shortcut_kmax,
                                        sc_fraction=shortcut_sc_fraction, time_sampler=sampler)
        else:
            t = sample_time(sampler, rng, size=batch_size)
            loss, grads = reflow_loss(field, x0, x1, cond, t)
        rate = schedule_lr(schedule, step)
        adam_update(adam, field.net.param_arrays(), grads.param_arrays(), rate)
        if step % log_every == 0 or step == steps - 1:
            history.append({"iter": step, "loss": loss, "lr": rate})
    return history
