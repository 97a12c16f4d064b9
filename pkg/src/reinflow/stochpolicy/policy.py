"""Noise-injected flow policy: stochastic denoising chains with exact
Gaussian transition likelihoods.

Sampling follows a^{k+1} = clip(a^k + v(t_k, a^k, o) dt_k + sigma(t_k, a^k, o) * eps).
The per-transition density is the pre-clip Gaussian evaluated at the stored
(clipped) next action; clipping is treated as an environment-side projection,
so the recorded joint log-probability is exactly reproducible from the stored
chain. Gradients never flow through sampled chain values — the chain is data,
the likelihood is the differentiable object.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigurationError, NumericError
from ..numerics import MlpGrads
from ..flowmatch.model import DiscretizationScheme, VelocityField
from .noise import NoiseHead, SigmaTape, sigma_backward, sigma_forward

LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass
class NoisyFlowPolicy:
    velocity: VelocityField
    noise: NoiseHead
    scheme: DiscretizationScheme
    action_clip: float = 1.0

    def __post_init__(self):
        if self.noise.net.out_dim != self.velocity.chunk_dim:
            raise ConfigurationError("noise head output width must equal the chunk dim")
        if self.action_clip <= 0:
            raise ConfigurationError("action clip bound must be positive")
        self.sigma_max_current = self.noise.sigma_max

    @property
    def chunk_dim(self) -> int:
        return self.velocity.chunk_dim

    @property
    def cond_dim(self) -> int:
        return self.velocity.cond_dim

    def actor_param_arrays(self) -> list[np.ndarray]:
        """Velocity then noise parameters, in declaration order."""
        return self.velocity.net.param_arrays() + self.noise.net.param_arrays()

    def copy(self) -> "NoisyFlowPolicy":
        from copy import deepcopy

        return deepcopy(self)


@dataclass
class ChainBatch:
    """A batch of denoising chains for a batch of observations."""

    actions: np.ndarray       # (B, K+1, d), post-clip
    means: np.ndarray         # (B, K, d), pre-clip transition means
    sigmas: np.ndarray        # (B, K, d)
    logp0: np.ndarray         # (B,) standard-normal density of a^0
    transitions: np.ndarray   # (B, K) per-transition log-probabilities
    knots: np.ndarray         # (K+1,)

    @property
    def joint(self) -> np.ndarray:
        return self.logp0 + self.transitions.sum(axis=1)

    @property
    def transition_sum(self) -> np.ndarray:
        return self.transitions.sum(axis=1)

    @property
    def final_actions(self) -> np.ndarray:
        return self.actions[:, -1, :]


@dataclass
class DenoisingChain:
    """One observation's denoising trajectory a^0 ... a^K with its likelihood."""

    actions: np.ndarray       # (K+1, d)
    means: np.ndarray         # (K, d)
    sigmas: np.ndarray        # (K, d)
    logp0: float
    transitions: np.ndarray   # (K,)
    knots: np.ndarray

    @property
    def joint_logprob(self) -> float:
        return float(self.logp0 + self.transitions.sum())

    @classmethod
    def from_batch(cls, batch: ChainBatch, i: int) -> "DenoisingChain":
        return cls(
            actions=batch.actions[i], means=batch.means[i], sigmas=batch.sigmas[i],
            logp0=float(batch.logp0[i]), transitions=batch.transitions[i],
            knots=batch.knots,
        )

    def as_batch(self) -> ChainBatch:
        return ChainBatch(
            actions=self.actions[None], means=self.means[None], sigmas=self.sigmas[None],
            logp0=np.array([self.logp0]), transitions=self.transitions[None],
            knots=self.knots,
        )


def _gaussian_logpdf_rows(x: np.ndarray, mean: np.ndarray, sigma: np.ndarray) -> np.ndarray:
    z = (x - mean) / sigma
    return -0.5 * (z * z).sum(axis=-1) - np.log(sigma).sum(axis=-1) - 0.5 * x.shape[-1] * LOG_2PI


def simulate_chains(policy: NoisyFlowPolicy, obs: np.ndarray, a0: np.ndarray,
                    eps: np.ndarray) -> ChainBatch:
    """Roll the noisy Euler chain for given base samples and noise draws."""
    obs = np.atleast_2d(np.asarray(obs, dtype=np.float64))
    a0 = np.atleast_2d(np.asarray(a0, dtype=np.float64))
    b, d = a0.shape
    scheme = policy.scheme
    k_steps = scheme.n_steps
    if eps.shape != (b, k_steps, d):
        raise ConfigurationError(f"noise draws shape {eps.shape} != {(b, k_steps, d)}")

    actions = np.empty((b, k_steps + 1, d))
    means = np.empty((b, k_steps, d))
    sigmas = np.empty((b, k_steps, d))
    transitions = np.empty((b, k_steps))
    actions[:, 0] = a0
    deltas = scheme.deltas
    a = a0
    for k in range(k_steps):
        t_k = scheme.knots[k]
        step = deltas[k] if policy.velocity.shortcut else None
        v, _ = policy.velocity.forward(t_k, a, obs, step=step)
        mean = a + v * deltas[k]
        sigma, _ = sigma_forward(policy.noise, t_k, a, obs, policy.sigma_max_current, batch=b)
        a_next = np.clip(mean + sigma * eps[:, k], -policy.action_clip, policy.action_clip)
        if not np.all(np.isfinite(a_next)):
            raise NumericError("non-finite action in denoising chain", context=f"step {k}")
        means[:, k] = mean
        sigmas[:, k] = sigma
        transitions[:, k] = _gaussian_logpdf_rows(a_next, mean, sigma)
        actions[:, k + 1] = a_next
        a = a_next

    logp0 = -0.5 * (a0 * a0).sum(axis=1) - 0.5 * d * LOG_2PI
    return ChainBatch(actions=actions, means=means, sigmas=sigmas, logp0=logp0,
                      transitions=transitions, knots=scheme.knots.copy())


def sample_chains(policy: NoisyFlowPolicy, obs: np.ndarray, rng) -> ChainBatch:
    """Draw fresh chains for a batch of observations from one rng stream."""
    obs = np.atleast_2d(np.asarray(obs, dtype=np.float64))
    b = obs.shape[0]
    d = policy.chunk_dim
    a0 = rng.standard_normal((b, d))
    eps = rng.standard_normal((b, policy.scheme.n_steps, d))
    return simulate_chains(policy, obs, a0, eps)


def sample_chain(policy: NoisyFlowPolicy, obs: np.ndarray, rng) -> DenoisingChain:
    """Single-observation convenience wrapper around sample_chains.

    Draws a^0 first and then one noise vector per denoising step, so per-env
    streams consume randomness in a fixed order regardless of batching.
    """
    obs = np.asarray(obs, dtype=np.float64)
    d = policy.chunk_dim
    a0 = rng.standard_normal(d)[None, :]
    eps = rng.standard_normal((policy.scheme.n_steps, d))[None]
    batch = simulate_chains(policy, obs[None, :], a0, eps)
    return DenoisingChain.from_batch(batch, 0)


def act_deterministic(policy: NoisyFlowPolicy, obs: np.ndarray) -> np.ndarray:
    """Noise-free inference: clipped Euler integration from the base mean.

    Consumes no randomness; repeated calls are bitwise identical.
    """
    obs_arr = np.asarray(obs, dtype=np.float64)
    single = obs_arr.ndim == 1
    obs2 = np.atleast_2d(obs_arr)
    a = np.zeros((obs2.shape[0], policy.chunk_dim))
    deltas = policy.scheme.deltas
    for k in range(policy.scheme.n_steps):
        step = deltas[k] if policy.velocity.shortcut else None
        v, _ = policy.velocity.forward(policy.scheme.knots[k], a, obs2, step=step)
        a = np.clip(a + v * deltas[k], -policy.action_clip, policy.action_clip)
        if not np.all(np.isfinite(a)):
            raise NumericError("non-finite action during deterministic inference",
                               context=f"step {k}")
    return a[0] if single else a


@dataclass
class ChainLogprobResult:
    """Recomputed chain likelihood plus everything needed for its backward pass."""

    joint: np.ndarray          # (B,) including the theta-independent initial term
    transitions: np.ndarray    # (B, K)
    transition_sum: np.ndarray # (B,)
    sigmas: np.ndarray         # (B, K, d)
    _policy: NoisyFlowPolicy
    _residuals: np.ndarray     # (B, K, d) a^{k+1} - mean_k
    _deltas: np.ndarray
    _v_tapes: list
    _s_tapes: list[SigmaTape]

    def backward(self, d_logp: np.ndarray,
                 d_sigma_extra: np.ndarray | None = None) -> tuple[MlpGrads, MlpGrads]:
        """Gradients of sum_b d_logp[b] * transition_sum[b] (+ optional direct
        sigma cotangents, e.g. from an entropy term) w.r.t. velocity and noise
        parameters. Chain values are constants."""
        policy = self._policy
        w = np.asarray(d_logp, dtype=np.float64)[:, None]
        vel_grads = MlpGrads.zeros_like(policy.velocity.net)
        noise_grads = MlpGrads.zeros_like(policy.noise.net)
        sig = self.sigmas
        res = self._residuals
        for k in range(res.shape[1]):
            s_k = sig[:, k]
            r_k = res[:, k]
            d_mean = w * r_k / (s_k * s_k)
            g_v, _ = policy.velocity.backward(self._v_tapes[k], d_mean * self._deltas[k])
            vel_grads.add_(g_v)
            d_sigma = w * (r_k * r_k / (s_k ** 3) - 1.0 / s_k)
            if d_sigma_extra is not None:
                d_sigma = d_sigma + d_sigma_extra[:, k]
            noise_grads.add_(sigma_backward(policy.noise, self._s_tapes[k], d_sigma))
        return vel_grads, noise_grads


def chain_logprob_batch(policy: NoisyFlowPolicy, actions: np.ndarray,
                        obs: np.ndarray) -> ChainLogprobResult:
    """Joint log-probability of stored chains under the current parameters.

    `actions` is (B, K+1, d) of recorded (clipped) chain values; the Gaussian
    transition densities are evaluated at those stored points.
    """
    obs = np.atleast_2d(np.asarray(obs, dtype=np.float64))
    actions = np.asarray(actions, dtype=np.float64)
    if actions.ndim != 3 or actions.shape[1] != policy.scheme.n_steps + 1:
        raise ConfigurationError(
            f"chain array shape {actions.shape} incompatible with K={policy.scheme.n_steps}"
        )
    b, _, d = actions.shape
    scheme = policy.scheme
    deltas = scheme.deltas
    k_steps = scheme.n_steps

    transitions = np.empty((b, k_steps))
    residuals = np.empty((b, k_steps, d))
    sigmas = np.empty((b, k_steps, d))
    v_tapes, s_tapes = [], []
    for k in range(k_steps):
        t_k = scheme.knots[k]
        a_k = actions[:, k]
        step = deltas[k] if policy.velocity.shortcut else None
        v, v_tape = policy.velocity.forward(t_k, a_k, obs, step=step)
        mean = a_k + v * deltas[k]
        sigma, s_tape = sigma_forward(policy.noise, t_k, a_k, obs,
                                      policy.sigma_max_current, batch=b)
        if np.any(sigma <= 0):
            raise NumericError("non-positive noise std in chain likelihood",
                               context=f"step {k}")
        residuals[:, k] = actions[:, k + 1] - mean
        sigmas[:, k] = sigma
        transitions[:, k] = _gaussian_logpdf_rows(actions[:, k + 1], mean, sigma)
        v_tapes.append(v_tape)
        s_tapes.append(s_tape)

    a0 = actions[:, 0]
    logp0 = -0.5 * (a0 * a0).sum(axis=1) - 0.5 * d * LOG_2PI
    transition_sum = transitions.sum(axis=1)
    return ChainLogprobResult(
        joint=logp0 + transition_sum, transitions=transitions,
        transition_sum=transition_sum, sigmas=sigmas, _policy=policy,
        _residuals=residuals, _deltas=deltas, _v_tapes=v_tapes, _s_tapes=s_tapes,
    )


def chain_logprob(policy: NoisyFlowPolicy, chain: DenoisingChain,
                  obs: np.ndarray) -> tuple[float, np.ndarray, tuple[MlpGrads, MlpGrads]]:
    """Single-chain likelihood: (joint, per-transition, (velocity, noise) grads).

    The gradients are of the transition sum (the initial Gaussian term carries
    no parameters).
    """
    result = chain_logprob_batch(policy, chain.actions[None], np.asarray(obs)[None])
    grads = result.backward(np.ones(1))
    return float(result.joint[0]), result.transitions[0], grads
