"""Continuous-time log-density of the flow via divergence integration.

This is the verification-side likelihood: the instantaneous change of
variables integrated along the Euler path, with the velocity Jacobian trace
either computed exactly (one VJP per coordinate) or estimated with Rademacher
probes. The fine-tuned stochastic policy never uses this path; it exists so
tests can compare both likelihood notions on constructed fields.
"""

from __future__ import annotations

import numpy as np

from ..errors import ConfigurationError
from .model import DiscretizationScheme, VelocityField

LOG_2PI = float(np.log(2.0 * np.pi))


def standard_normal_logpdf(x: np.ndarray) -> float:
    x = np.asarray(x, dtype=np.float64)
    return float(-0.5 * x.size * LOG_2PI - 0.5 * np.sum(x * x))


def trace_jacobian_exact(field: VelocityField, t: float, x: np.ndarray,
                         cond: np.ndarray, step=None) -> float:
    """Exact trace of d v / d x via one VJP per action coordinate."""
    x = np.asarray(x, dtype=np.float64)
    d = x.size
    total = 0.0
    for i in range(d):
        _, tape = field.forward(t, x, cond, step=step)
        e = np.zeros(d)
        e[i] = 1.0
        _, da = field.backward(tape, e)
        total += float(da[0, i])
    return total


def trace_jacobian_hutchinson(field: VelocityField, t: float, x: np.ndarray,
                              cond: np.ndarray, probes: int, rng,
                              step=None) -> tuple[float, np.ndarray]:
    """Rademacher-probe trace estimate; returns (mean, per-probe values)."""
    if probes < 1:
        raise ConfigurationError("need at least one probe")
    x = np.asarray(x, dtype=np.float64)
    d = x.size
    z = rng.integers(0, 2, (probes, d)) * 2.0 - 1.0
    estimates = np.empty(probes)
    for p in range(probes):
        _, tape = field.forward(t, x, cond, step=step)
        _, da = field.backward(tape, z[p])
        estimates[p] = float(da[0] @ z[p])
    return float(estimates.mean()), estimates


def exact_log_density(field: VelocityField, x0: np.ndarray, cond: np.ndarray,
                      scheme: DiscretizationScheme, probes, rng=None) -> float:
    """log p1 at the Euler endpoint: log p0(x0) minus the integrated divergence.

    `probes="exact"` builds the full Jacobian trace per step; an integer uses
    that many Hutchinson probes (requires `rng`).
    """
    exact = probes == "exact"
    if not exact:
        probes = int(probes)
        if probes < 1:
            raise ConfigurationError("probes must be >= 1 or 'exact'")
        if rng is None:
            raise ConfigurationError("Hutchinson estimation needs an rng")
    x = np.array(x0, dtype=np.float64, copy=True)
    deltas = scheme.deltas
    divergence = 0.0
    for k in range(scheme.n_steps):
        t_k = scheme.knots[k]
        step = deltas[k] if field.shortcut else None
        if exact:
            tr = trace_jacobian_exact(field, t_k, x, cond, step=step)
        else:
            tr, _ = trace_jacobian_hutchinson(field, t_k, x, cond, probes, rng, step=step)
        divergence += tr * deltas[k]
        v, _ = field.forward(t_k, x, cond, step=step)
        x = x + v * deltas[k]
    return standard_normal_logpdf(np.asarray(x0)) - divergence
