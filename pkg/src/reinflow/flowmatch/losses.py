"""Pretraining losses: straight-path flow matching and the few-step
self-consistency variant."""

from __future__ import annotations

import numpy as np

from ..errors import ConfigurationError, NumericError
from ..numerics import MlpGrads
from .model import TimeSampler, VelocityField, sample_time


def reflow_loss(field: VelocityField, x0: np.ndarray, x1: np.ndarray,
                cond: np.ndarray, t: np.ndarray) -> tuple[float, MlpGrads]:
    """Mean squared residual ||x1 - x0 - v(t, x_t, cond)||^2 over the batch,
    with x_t on the straight interpolation path. Returns exact gradients."""
    x0 = np.atleast_2d(np.asarray(x0, dtype=np.float64))
    x1 = np.atleast_2d(np.asarray(x1, dtype=np.float64))
    if x0.shape != x1.shape or x0.shape[0] == 0:
        raise ConfigurationError("x0/x1 must be a nonempty batch of matching shape")
    t = np.asarray(t, dtype=np.float64).reshape(-1)
    b = x0.shape[0]
    xt = t[:, None] * x1 + (1.0 - t[:, None]) * x0
    step = 0.0 if field.shortcut else None
    v, tape = field.forward(t, xt, cond, step=step)
    residual = x1 - x0 - v
    loss = float(np.sum(residual * residual) / b)
    if not np.isfinite(loss):
        raise NumericError("non-finite flow-matching loss")
    grads, _ = field.backward(tape, -2.0 * residual / b)
    return loss, grads


def shortcut_step_sizes(k_max: int) -> np.ndarray:
    """Dyadic self-consistency step grid {1/k_max, 2/k_max, ...} capped at 1/2
    so that the doubled step never exceeds a full integration."""
    if k_max < 2 or (k_max & (k_max - 1)) != 0:
        raise ConfigurationError("k_max must be a power of two >= 2")
    sizes = []
    d = 1.0 / k_max
    while d <= 0.5:
        sizes.append(d)
        d *= 2.0
    return np.array(sizes)


def shortcut_loss_components(field: VelocityField, x0, x1, cond, t, delta,
                             sc_mask: np.ndarray, frozen_target: np.ndarray | None = None):
    """Loss for fixed draws of (t, delta, branch split).

    For rows where sc_mask is True: self-consistency residual between the
    doubled-step velocity and the two-step composition (composition held
    fixed — pass `frozen_target` to reproduce the same stop-gradient target
    when finite-differencing). Remaining rows: flow-matching residual at step
    size 0. Returns (loss, grads, target) with grads flowing only through the
    predicted branches.
    """
    x0 = np.atleast_2d(np.asarray(x0, dtype=np.float64))
    x1 = np.atleast_2d(np.asarray(x1, dtype=np.float64))
    t = np.asarray(t, dtype=np.float64).reshape(-1)
    delta = np.asarray(delta, dtype=np.float64).reshape(-1)
    cond = np.atleast_2d(np.asarray(cond, dtype=np.float64))
    b = x0.shape[0]
    sc = np.asarray(sc_mask, dtype=bool)
    fm = ~sc
    xt = t[:, None] * x1 + (1.0 - t[:, None]) * x0

    grads = MlpGrads.zeros_like(field.net)
    total = 0.0

    if np.any(fm):
        v, tape = field.forward(t[fm], xt[fm], cond[fm], step=0.0)
        residual = x1[fm] - x0[fm] - v
        total += float(np.sum(residual * residual))
        g, _ = field.backward(tape, -2.0 * residual / b)
        grads.add_(g)

    if np.any(sc):
        t_s, d_s = t[sc], delta[sc]
        if frozen_target is None:
            s1, _ = field.forward(t_s, xt[sc], cond[sc], step=d_s)
            x_mid = xt[sc] + d_s[:, None] * s1
            s2, _ = field.forward(t_s + d_s, x_mid, cond[sc], step=d_s)
            target = 0.5 * (s1 + s2)
        else:
            target = frozen_target
        pred, tape = field.forward(t_s, xt[sc], cond[sc], step=2.0 * d_s)
        residual = pred - target
        total += float(np.sum(residual * residual))
        g, _ = field.backward(tape, 2.0 * residual / b)
        grads.add_(g)
    else:
        target = np.zeros((0, field.chunk_dim))

    loss = total / b
    if not np.isfinite(loss):
        raise NumericError("non-finite shortcut loss")
    return loss, grads, target


def shortcut_loss(field: VelocityField, x0, x1, cond, rng, *, k_max: int = 8,
                  sc_fraction: float = 0.25,
                  time_sampler: TimeSampler | None = None):
    """Combined flow-matching + self-consistency objective for shortcut fields.

    A `sc_fraction` share of the batch trains two-step/one-step alignment with
    step sizes drawn from the dyadic grid; the rest trains the straight-path
    velocity target at step size 0.
    """
    if not field.shortcut:
        raise ConfigurationError("shortcut_loss requires a shortcut-conditioned field")
    x0 = np.atleast_2d(np.asarray(x0, dtype=np.float64))
    b = x0.shape[0]
    n_sc = int(round(b * sc_fraction))
    sc_mask = np.zeros(b, dtype=bool)
    sc_mask[:n_sc] = True

    sampler = time_sampler if time_sampler is not None else TimeSampler()
    t = sample_time(sampler, rng, size=b)
    sizes = shortcut_step_sizes(k_max)
    delta = sizes[rng.integers(0, sizes.size, b)]
    # Keep t + 2*delta inside [0, 1] for the composed two-step target.
    t = np.where(sc_mask, t * (1.0 - 2.0 * delta), t)

    loss, grads, _ = shortcut_loss_components(field, x0, x1, cond, t, delta, sc_mask)
    return loss, grads
