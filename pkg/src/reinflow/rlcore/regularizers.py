"""Exploration and trust-region regularizers for fine-tuning.

Entropy: the negative per-symbol entropy rate of the denoising chain — the
joint differential entropy of (a^0 ... a^K), which is Gaussian at every
transition, divided by the chain length K+1. Minimizing it raises the noise
head's output and with it the policy's exploration.

W2: a sample-coupled upper bound on the squared Wasserstein-2 distance
between the fine-tuned and frozen pretrained action distributions — both
policies are integrated noise-free from a shared base draw and the mean
half squared distance between the endpoints is penalized.
"""

from __future__ import annotations

import numpy as np

from ..errors import ConfigurationError, NumericError
from ..numerics import MlpGrads
from ..stochpolicy.noise import sigma_backward, sigma_forward
from ..stochpolicy.policy import LOG_2PI, NoisyFlowPolicy

LOG_2PI_E = LOG_2PI + 1.0


def gaussian_entropy(sigma: np.ndarray) -> np.ndarray:
    """Differential entropy of diagonal Gaussians; sums over the last axis."""
    return 0.5 * (LOG_2PI_E + 2.0 * np.log(sigma)).sum(axis=-1)


def entropy_rate_value(sigmas: np.ndarray, chunk_dim: int) -> float:
    """Negative per-symbol entropy rate from per-transition stds (B, K, d)."""
    b, k_steps, _ = sigmas.shape
    h0 = 0.5 * chunk_dim * LOG_2PI_E
    per_sample = h0 + gaussian_entropy(sigmas).sum(axis=1)
    return float(-per_sample.mean() / (k_steps + 1))


def entropy_rate_sigma_cotangent(sigmas: np.ndarray) -> np.ndarray:
    """d(entropy regularizer)/d(sigma), shaped like `sigmas`."""
    b, k_steps, _ = sigmas.shape
    return -1.0 / ((k_steps + 1) * b * sigmas)


def entropy_regularizer(policy: NoisyFlowPolicy, chain_actions: np.ndarray,
                        obs: np.ndarray) -> tuple[float, MlpGrads]:
    """Closed-form regularizer value and gradients through the noise head.

    `chain_actions` is (B, K+1, d) of sampled chains; only the noise head's
    stds at each visited state are differentiated — chain values are data.
    """
    obs = np.atleast_2d(np.asarray(obs, dtype=np.float64))
    chain_actions = np.asarray(chain_actions, dtype=np.float64)
    b, k_plus_1, d = chain_actions.shape
    k_steps = k_plus_1 - 1
    scheme = policy.scheme
    if k_steps != scheme.n_steps:
        raise ConfigurationError("chain length does not match the policy scheme")

    sigmas = np.empty((b, k_steps, d))
    tapes = []
    for k in range(k_steps):
        sigma, tape = sigma_forward(policy.noise, scheme.knots[k], chain_actions[:, k],
                                    obs, policy.sigma_max_current, batch=b)
        if np.any(sigma <= 0):
            raise NumericError("non-positive std in entropy regularizer", context=f"step {k}")
        sigmas[:, k] = sigma
        tapes.append(tape)

    value = entropy_rate_value(sigmas, d)
    cotangent = entropy_rate_sigma_cotangent(sigmas)
    grads = MlpGrads.zeros_like(policy.noise.net)
    for k in range(k_steps):
        grads.add_(sigma_backward(policy.noise, tapes[k], cotangent[:, k]))
    return value, grads


def integrate_deterministic(policy: NoisyFlowPolicy, obs: np.ndarray,
                            a0: np.ndarray, with_tapes: bool = False):
    """Clipped noise-free Euler integration from given base samples.

    With `with_tapes=True` also returns the per-step tapes and clip masks
    needed to backpropagate through the integration.
    """
    obs = np.atleast_2d(np.asarray(obs, dtype=np.float64))
    a = np.array(a0, dtype=np.float64, copy=True)
    scheme = policy.scheme
    deltas = scheme.deltas
    tapes, masks = [], []
    for k in range(scheme.n_steps):
        step = deltas[k] if policy.velocity.shortcut else None
        v, tape = policy.velocity.forward(scheme.knots[k], a, obs, step=step)
        pre = a + v * deltas[k]
        a = np.clip(pre, -policy.action_clip, policy.action_clip)
        if with_tapes:
            tapes.append(tape)
            masks.append(np.abs(pre) <= policy.action_clip)
    if with_tapes:
        return a, tapes, masks
    return a


def w2_regularizer(policy: NoisyFlowPolicy, frozen_ref: NoisyFlowPolicy,
                   obs: np.ndarray, rng,
                   max_samples: int | None = None) -> tuple[float, MlpGrads]:
    """Coupled upper bound on the squared W2 distance to the frozen policy.

    Returns the bound and its gradient w.r.t. the current velocity net,
    backpropagated through the whole clipped Euler integration (the frozen
    reference contributes no gradient).
    """
    if frozen_ref.chunk_dim != policy.chunk_dim:
        raise ConfigurationError("policy and reference disagree on the chunk dim")
    obs = np.atleast_2d(np.asarray(obs, dtype=np.float64))
    if max_samples is not None and obs.shape[0] > max_samples:
        idx = rng.permutation(obs.shape[0])[:max_samples]
        obs = obs[idx]
    n = obs.shape[0]
    a0 = rng.standard_normal((n, policy.chunk_dim))

    a_old = integrate_deterministic(frozen_ref, obs, a0)
    a_new, tapes, masks = integrate_deterministic(policy, obs, a0, with_tapes=True)

    diff = a_new - a_old
    value = float(0.5 * np.sum(diff * diff) / n)

    grads = MlpGrads.zeros_like(policy.velocity.net)
    g = diff / n
    deltas = policy.scheme.deltas
    for k in range(policy.scheme.n_steps - 1, -1, -1):
        g = g * masks[k]
        g_step, da = policy.velocity.backward(tapes[k], g * deltas[k])
        grads.add_(g_step)
        g = g + da
    return value, grads
