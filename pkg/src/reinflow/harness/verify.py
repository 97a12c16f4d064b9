"""Built-in oracle suite, runnable without the test harness.

Every analytic gradient in the package is checked against central finite
differences; the chain likelihood is recomputed transition by transition;
the divergence estimators are checked on linear fields; and the
score-function policy-gradient estimator is validated on a one-step bandit
against a common-random-numbers finite difference of the expected reward.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..flowmatch.likelihood import exact_log_density, standard_normal_logpdf, trace_jacobian_exact, trace_jacobian_hutchinson
from ..flowmatch.losses import reflow_loss, shortcut_loss_components, shortcut_step_sizes
from ..flowmatch.model import DiscretizationScheme, VelocityField
from ..numerics import (
    Activation,
    LrSchedule,
    MlpParams,
    ScheduleKind,
    finite_diff_grad,
    flatten_params,
    init_mlp,
    mlp_apply,
    mlp_backward,
    schedule_lr,
    unflatten_into,
)
from ..numerics.rng import SeededRng
from ..rlcore.critic import Critic, critic_loss
from ..rlcore.regularizers import entropy_regularizer, w2_regularizer
from ..stochpolicy.noise import NoiseConditioning, NoiseHead, NoiseSchedule, noise_bound_at, sigma_forward
from ..stochpolicy.policy import (
    NoisyFlowPolicy,
    chain_logprob_batch,
    sample_chains,
    simulate_chains,
)

GRAD_RTOL = 1e-5


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str


def grad_rel_err(analytic, numeric) -> float:
    """Worst-case component error relative to the gradient's magnitude."""
    a = np.asarray(analytic, dtype=np.float64).reshape(-1)
    f = np.asarray(numeric, dtype=np.float64).reshape(-1)
    scale = max(float(np.max(np.abs(f))), 1e-8)
    return float(np.max(np.abs(a - f)) / scale)


def make_policy(rng, chunk_dim=2, cond_dim=3, k_steps=2, hidden=(6,),
                sigma_min=0.1, sigma_max=0.3, action_clip=10.0,
                conditioning=NoiseConditioning.OBS_AND_TIME,
                shortcut=False, time_embed_dim=4) -> NoisyFlowPolicy:
    velocity = VelocityField.create(chunk_dim, cond_dim, list(hidden), time_embed_dim,
                                    rng, shortcut=shortcut)
    noise = NoiseHead.create(chunk_dim, cond_dim, list(hidden), rng, sigma_min=sigma_min,
                             sigma_max=sigma_max, conditioning=conditioning,
                             time_embed_dim=time_embed_dim)
    return NoisyFlowPolicy(velocity=velocity, noise=noise,
                           scheme=DiscretizationScheme.uniform(k_steps),
                           action_clip=action_clip)


def make_linear_field(matrix: np.ndarray, cond_dim=0, time_embed_dim=2) -> VelocityField:
    """Field computing v(t, x, cond) = matrix @ x, ignoring t and cond."""
    d = matrix.shape[0]
    in_dim = d + cond_dim + time_embed_dim
    w = np.zeros((in_dim, d))
    w[:d, :] = matrix.T
    net = MlpParams([in_dim, d], [w], [np.zeros(d)], Activation.IDENTITY)
    return VelocityField(net=net, chunk_dim=d, cond_dim=cond_dim,
                         time_embed_dim=time_embed_dim)


# ---------------------------------------------------------------------------
# Gradient checks
# ---------------------------------------------------------------------------

def check_gradient_mlp(seeds=range(10)) -> CheckResult:
    worst = 0.0
    for seed in seeds:
        rng = SeededRng(seed, 1)
        params = init_mlp([4, 6, 3], Activation.MISH, rng)
        x = rng.standard_normal((5, 4))
        weights = rng.standard_normal((5, 3))

        def loss_fn(p):
            y, _ = mlp_apply(p, x)
            return float(np.sum(weights * y))

        _, tape = mlp_apply(params, x)
        grads, _ = mlp_backward(tape, weights)
        fd = finite_diff_grad(loss_fn, params)
        worst = max(worst, grad_rel_err(flatten_params(grads.param_arrays()),
                                        flatten_params(fd.param_arrays())))
    return CheckResult("gradient/mlp", worst <= GRAD_RTOL, f"max rel err {worst:.2e}")


def check_gradient_reflow(seeds=range(10)) -> CheckResult:
    worst = 0.0
    for seed in seeds:
        rng = SeededRng(seed, 2)
        field = VelocityField.create(2, 3, [6], 4, rng)
        x0 = rng.standard_normal((4, 2))
        x1 = rng.standard_normal((4, 2))
        cond = rng.standard_normal((4, 3))
        t = rng.uniform(0.05, 0.95, 4)
        _, grads = reflow_loss(field, x0, x1, cond, t)
        fd = finite_diff_grad(lambda p: reflow_loss(field, x0, x1, cond, t)[0], field.net)
        worst = max(worst, grad_rel_err(flatten_params(grads.param_arrays()),
                                        flatten_params(fd.param_arrays())))
    return CheckResult("gradient/reflow_loss", worst <= GRAD_RTOL, f"max rel err {worst:.2e}")


def check_gradient_shortcut(seeds=range(10)) -> CheckResult:
    worst = 0.0
    for seed in seeds:
        rng = SeededRng(seed, 3)
        field = VelocityField.create(2, 2, [6], 4, rng, shortcut=True)
        b = 4
        x0 = rng.standard_normal((b, 2))
        x1 = rng.standard_normal((b, 2))
        cond = rng.standard_normal((b, 2))
        sizes = shortcut_step_sizes(8)
        delta = sizes[rng.integers(0, sizes.size, b)]
        t = rng.uniform(0.05, 0.95, b) * (1.0 - 2.0 * delta)
        sc_mask = np.zeros(b, dtype=bool)
        sc_mask[: b // 2] = True

        _, grads, target = shortcut_loss_components(field, x0, x1, cond, t, delta, sc_mask)
        fd = finite_diff_grad(
            lambda p: shortcut_loss_components(field, x0, x1, cond, t, delta, sc_mask,
                                               frozen_target=target)[0],
            field.net,
        )
        worst = max(worst, grad_rel_err(flatten_params(grads.param_arrays()),
                                        flatten_params(fd.param_arrays())))
    return CheckResult("gradient/shortcut_loss", worst <= GRAD_RTOL, f"max rel err {worst:.2e}")


def check_gradient_chain_logprob(seeds=range(10)) -> CheckResult:
    worst = 0.0
    for seed in seeds:
        rng = SeededRng(seed, 4)
        policy = make_policy(rng)
        obs = rng.standard_normal((3, 3))
        batch = sample_chains(policy, obs, rng)
        result = chain_logprob_batch(policy, batch.actions, obs)
        vel_g, noise_g = result.backward(np.ones(3))

        def total(_p):
            r = chain_logprob_batch(policy, batch.actions, obs)
            return float(r.transition_sum.sum())

        fd_v = finite_diff_grad(total, policy.velocity.net)
        fd_n = finite_diff_grad(total, policy.noise.net)
        worst = max(worst, grad_rel_err(flatten_params(vel_g.param_arrays()),
                                        flatten_params(fd_v.param_arrays())))
        worst = max(worst, grad_rel_err(flatten_params(noise_g.param_arrays()),
                                        flatten_params(fd_n.param_arrays())))
    return CheckResult("gradient/chain_logprob", worst <= GRAD_RTOL, f"max rel err {worst:.2e}")


def check_gradient_critic(seeds=range(10)) -> CheckResult:
    worst = 0.0
    for seed in seeds:
        rng = SeededRng(seed, 5)
        critic = Critic.create(4, [6], rng)
        obs = rng.standard_normal((5, 4))
        returns = rng.standard_normal(5)
        _, grads = critic_loss(critic, obs, returns)
        fd = finite_diff_grad(lambda p: critic_loss(critic, obs, returns)[0], critic.net)
        worst = max(worst, grad_rel_err(flatten_params(grads.param_arrays()),
                                        flatten_params(fd.param_arrays())))
    return CheckResult("gradient/critic_loss", worst <= GRAD_RTOL, f"max rel err {worst:.2e}")


def check_gradient_entropy(seeds=range(10)) -> CheckResult:
    worst = 0.0
    for seed in seeds:
        rng = SeededRng(seed, 6)
        policy = make_policy(rng)
        obs = rng.standard_normal((3, 3))
        batch = sample_chains(policy, obs, rng)
        _, grads = entropy_regularizer(policy, batch.actions, obs)
        fd = finite_diff_grad(
            lambda p: entropy_regularizer(policy, batch.actions, obs)[0], policy.noise.net
        )
        worst = max(worst, grad_rel_err(flatten_params(grads.param_arrays()),
                                        flatten_params(fd.param_arrays())))
    return CheckResult("gradient/entropy_regularizer", worst <= GRAD_RTOL,
                       f"max rel err {worst:.2e}")


def check_gradient_w2(seeds=range(10)) -> CheckResult:
    worst = 0.0
    for seed in seeds:
        rng = SeededRng(seed, 7)
        policy = make_policy(rng, action_clip=100.0)
        ref = make_policy(SeededRng(seed + 100, 7), action_clip=100.0)
        obs = rng.standard_normal((3, 3))

        draw_seed = seed + 999

        def value(_p):
            return w2_regularizer(policy, ref, obs, SeededRng(draw_seed, 0))[0]

        _, grads = w2_regularizer(policy, ref, obs, SeededRng(draw_seed, 0))
        fd = finite_diff_grad(value, policy.velocity.net)
        worst = max(worst, grad_rel_err(flatten_params(grads.param_arrays()),
                                        flatten_params(fd.param_arrays())))
    return CheckResult("gradient/w2_regularizer", worst <= GRAD_RTOL, f"max rel err {worst:.2e}")


def check_gradient_sigma(seeds=range(10)) -> CheckResult:
    from ..stochpolicy.noise import sigma_backward

    worst = 0.0
    for seed in seeds:
        rng = SeededRng(seed, 8)
        head = NoiseHead.create(2, 3, [5], rng, sigma_min=0.1, sigma_max=0.3, time_embed_dim=4)
        obs = rng.standard_normal((4, 3))
        weights = rng.standard_normal((4, 2))

        def value(_p):
            sigma, _ = sigma_forward(head, 0.3, None, obs, 0.3, batch=4)
            return float(np.sum(weights * sigma))

        sigma, tape = sigma_forward(head, 0.3, None, obs, 0.3, batch=4)
        grads = sigma_backward(head, tape, weights)
        fd = finite_diff_grad(value, head.net)
        worst = max(worst, grad_rel_err(flatten_params(grads.param_arrays()),
                                        flatten_params(fd.param_arrays())))
    return CheckResult("gradient/sigma_forward", worst <= GRAD_RTOL, f"max rel err {worst:.2e}")


# ---------------------------------------------------------------------------
# Likelihood and divergence checks
# ---------------------------------------------------------------------------

def check_likelihood_exactness() -> CheckResult:
    worst = 0.0
    for k in (1, 2, 4, 8):
        rng = SeededRng(k, 9)
        policy = make_policy(rng, k_steps=k)
        obs = rng.standard_normal((8, 3))
        batch = sample_chains(policy, obs, rng)
        for i in range(8):
            recomputed = 0.0
            a0 = batch.actions[i, 0]
            recomputed += standard_normal_logpdf(a0)
            for step in range(k):
                mean = batch.means[i, step]
                sigma = batch.sigmas[i, step]
                nxt = batch.actions[i, step + 1]
                z = (nxt - mean) / sigma
                recomputed += float(-0.5 * np.sum(z * z) - np.sum(np.log(sigma))
                                    - 0.5 * a0.size * np.log(2 * np.pi))
            worst = max(worst, abs(recomputed - float(batch.joint[i])))
    return CheckResult("likelihood/exactness", worst <= 1e-12, f"max abs err {worst:.2e}")


def check_divergence_linear() -> CheckResult:
    rng = SeededRng(0, 10)
    a_mat = rng.standard_normal((3, 3)) * 0.3
    field = make_linear_field(a_mat)
    worst = 0.0
    for k in (1, 4):
        x0 = rng.standard_normal(3)
        lp = exact_log_density(field, x0, np.zeros(0), DiscretizationScheme.uniform(k), "exact")
        expected = standard_normal_logpdf(x0) - float(np.trace(a_mat))
        worst = max(worst, abs(lp - expected))
    return CheckResult("likelihood/divergence_linear", worst <= 1e-6, f"max abs err {worst:.2e}")


def check_divergence_hutchinson(probes=10_000) -> CheckResult:
    rng = SeededRng(3, 11)
    field = VelocityField.create(3, 2, [8], 4, rng)
    x = rng.standard_normal(3)
    cond = rng.standard_normal(2)
    exact = trace_jacobian_exact(field, 0.4, x, cond)
    estimate, per_probe = trace_jacobian_hutchinson(field, 0.4, x, cond, probes,
                                                    SeededRng(4, 11))
    se = float(per_probe.std(ddof=1) / np.sqrt(probes))
    err = abs(estimate - exact)
    ok = err <= 4.0 * se + 1e-12
    return CheckResult("likelihood/hutchinson", ok,
                       f"|est-exact|={err:.2e} vs 4*SE={4 * se:.2e}")


# ---------------------------------------------------------------------------
# Bandit policy-gradient check
# ---------------------------------------------------------------------------

def bandit_gradient_check(k_steps: int, n_rollouts: int = 100_000, seed: int = 0,
                          n_chunks: int = 100, fd_h: float = 1e-4) -> dict:
    """One-step quadratic-reward bandit: score-function MC gradient vs a
    common-random-numbers finite difference of the expected reward.

    Returns per-parameter estimates, the FD reference, standard errors, and
    the worst |difference|/SE ratio.
    """
    rng = SeededRng(seed, 12)
    policy = make_policy(rng, chunk_dim=1, cond_dim=1, k_steps=k_steps, hidden=(4,),
                         sigma_min=0.2, sigma_max=0.6, action_clip=50.0)
    obs = np.full((n_rollouts, 1), 0.5)
    a0 = rng.standard_normal((n_rollouts, 1))
    eps = rng.standard_normal((n_rollouts, k_steps, 1))

    def reward(actions: np.ndarray) -> np.ndarray:
        a = actions[:, 0]
        return -((a - 2.0) ** 2)

    arrays = policy.actor_param_arrays()
    n_params = sum(a.size for a in arrays)
    chunk = n_rollouts // n_chunks
    chunk_means = np.zeros((n_chunks, n_params))
    for c in range(n_chunks):
        sl = slice(c * chunk, (c + 1) * chunk)
        batch = simulate_chains(policy, obs[sl], a0[sl], eps[sl])
        r = reward(batch.final_actions)
        result = chain_logprob_batch(policy, batch.actions, obs[sl])
        vel_g, noise_g = result.backward(r / chunk)
        chunk_means[c] = flatten_params(vel_g.param_arrays() + noise_g.param_arrays())
    mc_grad = chunk_means.mean(axis=0)
    se = chunk_means.std(axis=0, ddof=1) / np.sqrt(n_chunks)

    flat = flatten_params(arrays)

    def mean_reward() -> float:
        batch = simulate_chains(policy, obs, a0, eps)
        return float(reward(batch.final_actions).mean())

    fd_grad = np.zeros(n_params)
    for j in range(n_params):
        orig = flat[j]
        flat[j] = orig + fd_h
        unflatten_into(arrays, flat)
        up = mean_reward()
        flat[j] = orig - fd_h
        unflatten_into(arrays, flat)
        down = mean_reward()
        flat[j] = orig
        fd_grad[j] = (up - down) / (2.0 * fd_h)
    unflatten_into(arrays, flat)

    z = np.abs(mc_grad - fd_grad) / np.maximum(4.0 * se + 1e-6, 1e-12)
    return {"mc": mc_grad, "fd": fd_grad, "se": se, "max_ratio": float(z.max()),
            "n_params": n_params}


def check_bandit_gradient(k_values=(1, 2, 4), n_rollouts=100_000) -> CheckResult:
    worst = 0.0
    for k in k_values:
        res = bandit_gradient_check(k, n_rollouts=n_rollouts, seed=k)
        worst = max(worst, res["max_ratio"])
    return CheckResult("policy_gradient/bandit", worst <= 1.0,
                       f"worst |MC-FD| / (4*SE) = {worst:.3f}")


# ---------------------------------------------------------------------------
# Schedule fidelity
# ---------------------------------------------------------------------------

def check_schedule_fidelity() -> CheckResult:
    sched = LrSchedule(kind=ScheduleKind.COSINE_WARM_RESTART, base=4.5e-5,
                       final=2.0e-5, warmup=10, cycle=100)
    mid = schedule_lr(sched, 10 + 50)
    ok = abs(mid - 3.25e-5) <= 1e-12
    noise_sched = NoiseSchedule(hold_fraction=0.35, decay_mix=0.3, total_iterations=1000)
    start = noise_bound_at(noise_sched, 0, 0.10, 0.24)
    end = noise_bound_at(noise_sched, 1000, 0.10, 0.24)
    ok = ok and abs(start - 0.24) <= 1e-15 and abs(end - 0.198) <= 1e-15
    hold_all = NoiseSchedule(hold_fraction=1.0, decay_mix=0.3, total_iterations=100)
    ok = ok and abs(noise_bound_at(hold_all, 100, 0.10, 0.24) - 0.24) <= 1e-15
    return CheckResult("schedule/fidelity", ok,
                       f"lr mid {mid:.3e}, bound start {start}, end {end}")


def run_all_checks(quick: bool = False) -> list[CheckResult]:
    seeds = range(3) if quick else range(10)
    results = [
        check_gradient_mlp(seeds),
        check_gradient_reflow(seeds),
        check_gradient_shortcut(seeds),
        check_gradient_chain_logprob(seeds),
        check_gradient_sigma(seeds),
        check_gradient_critic(seeds),
        check_gradient_entropy(seeds),
        check_gradient_w2(seeds),
        check_likelihood_exactness(),
        check_divergence_linear(),
        check_divergence_hutchinson(2000 if quick else 10_000),
        check_bandit_gradient(k_values=(1, 2) if quick else (1, 2, 4),
                              n_rollouts=20_000 if quick else 100_000),
        check_schedule_fidelity(),
    ]
    return results
