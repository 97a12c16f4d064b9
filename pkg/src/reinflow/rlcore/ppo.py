"""Clipped-surrogate policy loss over chain log-probabilities."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigurationError, NumericError

LOG_RATIO_CLAMP = 20.0


@dataclass
class PpoLossResult:
    loss: float
    ratios: np.ndarray
    d_logp_new: np.ndarray   # gradient of the loss w.r.t. each new log-prob
    clip_fraction: float
    clamp_count: int


def ppo_clip_loss(logp_new: np.ndarray, logp_old: np.ndarray, adv: np.ndarray,
                  clip_eps: float) -> PpoLossResult:
    """-mean(min(rho * A, clip(rho, 1-eps, 1+eps) * A)) with rho from summed
    transition log-probs. Log-ratios are clamped at +-20 before exponentiation;
    the clamp count is surfaced for the metrics row."""
    logp_new = np.asarray(logp_new, dtype=np.float64)
    logp_old = np.asarray(logp_old, dtype=np.float64)
    adv = np.asarray(adv, dtype=np.float64)
    if not (logp_new.shape == logp_old.shape == adv.shape):
        raise ConfigurationError("log-prob/advantage lengths differ")
    if not (np.all(np.isfinite(logp_new)) and np.all(np.isfinite(logp_old))):
        raise NumericError("non-finite log-probabilities in surrogate loss")
    if not 0.0 < clip_eps < 1.0:
        raise ConfigurationError("clip epsilon must lie in (0, 1)")

    log_ratio = logp_new - logp_old
    clamp_count = int(np.sum(np.abs(log_ratio) > LOG_RATIO_CLAMP))
    log_ratio = np.clip(log_ratio, -LOG_RATIO_CLAMP, LOG_RATIO_CLAMP)
    ratios = np.exp(log_ratio)

    unclipped = ratios * adv
    clipped = np.clip(ratios, 1.0 - clip_eps, 1.0 + clip_eps) * adv
    per_sample = np.minimum(unclipped, clipped)
    loss = float(-per_sample.mean())
    if not np.isfinite(loss):
        raise NumericError("non-finite surrogate loss")

    n = logp_new.size
    # The clipped branch (and the clamp) have zero derivative; the unclipped
    # branch is active wherever it attains the min or rho is inside the band.
    inside = np.abs(ratios - 1.0) <= clip_eps
    active = (unclipped <= clipped) | inside
    active &= np.abs(log_ratio) < LOG_RATIO_CLAMP
    d_logp_new = np.where(active, -ratios * adv / n, 0.0)
    clip_fraction = float(np.mean(np.abs(ratios - 1.0) > clip_eps))
    return PpoLossResult(loss=loss, ratios=ratios, d_logp_new=d_logp_new,
                         clip_fraction=clip_fraction, clamp_count=clamp_count)


def approx_kl(logp_new: np.ndarray, logp_old: np.ndarray) -> float:
    """Non-negative KL estimator mean(rho - 1 - ln rho)."""
    logp_new = np.asarray(logp_new, dtype=np.float64)
    logp_old = np.asarray(logp_old, dtype=np.float64)
    if logp_new.shape != logp_old.shape:
        raise ConfigurationError("log-prob lengths differ")
    log_ratio = np.clip(logp_new - logp_old, -LOG_RATIO_CLAMP, LOG_RATIO_CLAMP)
    return float(np.mean(np.exp(log_ratio) - 1.0 - log_ratio))
