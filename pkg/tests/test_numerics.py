"""MLP forward/backward, Adam, schedules, embeddings, and the FD oracle."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import flat_grads, rel_err
from reinflow.errors import ConfigurationError, NumericError
from reinflow.numerics import (
    Activation,
    AdamState,
    LrSchedule,
    MlpParams,
    ScheduleKind,
    SeededRng,
    adam_update,
    finite_diff_grad,
    flatten_params,
    init_mlp,
    mlp_apply,
    mlp_backward,
    schedule_lr,
    sinusoidal_embed,
    unflatten_into,
)


class TestMlpApply:
    def test_identity_single_layer(self):
        params = MlpParams([2, 2], [np.eye(2)], [np.zeros(2)], Activation.IDENTITY)
        out, _ = mlp_apply(params, np.array([1.0, 2.0]))
        np.testing.assert_array_equal(out, [1.0, 2.0])

    def test_constant_map(self):
        params = MlpParams([2, 1], [np.zeros((2, 1))], [np.array([3.0])], Activation.IDENTITY)
        for x in ([0.0, 0.0], [5.0, -7.0]):
            out, _ = mlp_apply(params, np.array(x))
            np.testing.assert_array_equal(out, [3.0])

    def test_dimension_mismatch(self, rng):
        params = init_mlp([3, 4], Activation.MISH, rng)
        with pytest.raises(ConfigurationError):
            mlp_apply(params, np.zeros(5))

    def test_nonfinite_reports_layer(self, rng):
        params = init_mlp([2, 3, 1], Activation.MISH, rng)
        params.weights[1][0, 0] = np.inf
        with pytest.raises(NumericError, match="layer 1"):
            mlp_apply(params, np.ones(2))

    @pytest.mark.parametrize("seed", range(10))
    def test_gradient_vs_finite_difference(self, seed):
        rng = SeededRng(seed, 0)
        params = init_mlp([3, 6, 2], Activation.MISH, rng)
        x = rng.standard_normal((4, 3))

        def loss_fn(p):
            y, _ = mlp_apply(p, x)
            return float(np.sum(y))

        _, tape = mlp_apply(params, x)
        grads, _ = mlp_backward(tape, np.ones((4, 2)))
        fd = finite_diff_grad(loss_fn, params)
        assert rel_err(flat_grads(grads), flat_grads(fd)) <= 1e-5

    def test_input_gradient(self, rng):
        params = init_mlp([3, 5, 2], Activation.MISH, rng)
        x = rng.standard_normal(3)
        w = rng.standard_normal(2)
        _, tape = mlp_apply(params, x)
        _, dx = mlp_backward(tape, w)
        h = 1e-6
        fd = np.zeros(3)
        for i in range(3):
            xp, xm = x.copy(), x.copy()
            xp[i] += h
            xm[i] -= h
            fd[i] = (np.sum(w * mlp_apply(params, xp)[0]) - np.sum(w * mlp_apply(params, xm)[0])) / (2 * h)
        assert rel_err(dx, fd) <= 1e-5

    def test_batch_matches_rows(self, rng):
        params = init_mlp([3, 4, 2], Activation.TANH, rng)
        x = rng.standard_normal((5, 3))
        batch_out, _ = mlp_apply(params, x)
        for i in range(5):
            row_out, _ = mlp_apply(params, x[i])
            np.testing.assert_allclose(row_out, batch_out[i], rtol=1e-14)


class TestAdam:
    def test_zero_lr_keeps_params(self, rng):
        params = init_mlp([2, 3], Activation.MISH, rng)
        arrays = params.param_arrays()
        before = flatten_params(arrays).copy()
        state = AdamState.for_params(arrays)
        grads = [np.ones_like(a) for a in arrays]
        adam_update(state, arrays, grads, lr=0.0)
        np.testing.assert_array_equal(flatten_params(arrays), before)
        assert state.step == 1
        assert any(np.any(m != 0) for m in state.m)

    def test_zero_grads_keep_params(self, rng):
        params = init_mlp([2, 3], Activation.MISH, rng)
        arrays = params.param_arrays()
        before = flatten_params(arrays).copy()
        state = AdamState.for_params(arrays)
        adam_update(state, arrays, [np.zeros_like(a) for a in arrays], lr=0.1)
        np.testing.assert_array_equal(flatten_params(arrays), before)

    def test_first_step_direction(self):
        w = np.array([1.0])
        g = np.array([0.25])
        state = AdamState.for_params([w])
        adam_update(state, [w], [g], lr=0.1)
        expected = 1.0 - 0.1 * g[0] / (abs(g[0]) + state.eps)
        np.testing.assert_allclose(w[0], expected, rtol=1e-12)

    def test_converges_on_quadratic(self):
        w = np.array([1.0])
        state = AdamState.for_params([w])
        for _ in range(100):
            adam_update(state, [w], [2.0 * w], lr=0.05)
        assert abs(w[0]) < 0.1


class TestLrSchedule:
    def _sched(self):
        return LrSchedule(kind=ScheduleKind.COSINE_WARM_RESTART, base=4.5e-5,
                          final=2.0e-5, warmup=10, cycle=100)

    def test_warmup_start_is_zero(self):
        assert schedule_lr(self._sched(), 0) == 0.0

    def test_warmup_end_is_base(self):
        assert schedule_lr(self._sched(), 10) == pytest.approx(4.5e-5, abs=0)

    def test_cosine_midpoint(self):
        # Midpoint of a base->final cosine arc is the arithmetic mean.
        assert schedule_lr(self._sched(), 10 + 50) == pytest.approx(3.25e-5, abs=1e-12)

    def test_restart(self):
        sched = self._sched()
        assert schedule_lr(sched, 10 + 100) == pytest.approx(4.5e-5, abs=1e-18)

    @given(it=st.integers(min_value=0, max_value=10_000))
    @settings(max_examples=200, deadline=None)
    def test_bounded(self, it):
        sched = self._sched()
        rate = schedule_lr(sched, it)
        assert 0.0 <= rate <= sched.base + 1e-18
        if it >= sched.warmup:
            assert min(sched.base, sched.final) - 1e-18 <= rate


class TestSinusoidalEmbed:
    def test_t_zero(self):
        emb = sinusoidal_embed(0.0, 8)
        np.testing.assert_array_equal(emb[:4], 0.0)
        np.testing.assert_array_equal(emb[4:], 1.0)

    def test_norm_at_zero(self):
        emb = sinusoidal_embed(0.0, 12)
        assert np.sum(emb * emb) == pytest.approx(6.0)

    def test_lipschitz(self):
        a = sinusoidal_embed(0.3, 16)
        b = sinusoidal_embed(0.300001, 16)
        assert np.max(np.abs(a - b)) < 1e-4

    def test_odd_dim_rejected(self):
        with pytest.raises(ConfigurationError):
            sinusoidal_embed(0.5, 7)

    def test_batch(self):
        t = np.array([0.1, 0.9])
        emb = sinusoidal_embed(t, 6)
        assert emb.shape == (2, 6)
        np.testing.assert_allclose(emb[0], sinusoidal_embed(0.1, 6))


class TestFiniteDiff:
    def test_quadratic(self):
        params = MlpParams([1, 1], [np.array([[3.0]])], [np.zeros(1)], Activation.IDENTITY)

        def loss_fn(p):
            return float(p.weights[0][0, 0] ** 2)

        fd = finite_diff_grad(loss_fn, params)
        assert fd.weights[0][0, 0] == pytest.approx(6.0, abs=1e-6)

    def test_constant_loss(self, rng):
        params = init_mlp([2, 2], Activation.MISH, rng)
        fd = finite_diff_grad(lambda p: 1.5, params)
        np.testing.assert_array_equal(flat_grads(fd), 0.0)

    def test_rejects_nonpositive_h(self, rng):
        params = init_mlp([2, 2], Activation.MISH, rng)
        with pytest.raises(ConfigurationError):
            finite_diff_grad(lambda p: 0.0, params, h=0.0)


class TestDeterminism:
    def test_training_is_bitwise_reproducible(self):
        def run():
            rng = SeededRng(7, 0)
            params = init_mlp([3, 8, 2], Activation.MISH, rng)
            arrays = params.param_arrays()
            state = AdamState.for_params(arrays)
            for _ in range(50):
                x = rng.standard_normal((6, 3))
                out, tape = mlp_apply(params, x)
                grads, _ = mlp_backward(tape, 2.0 * out / out.size)
                adam_update(state, arrays, grads.param_arrays(), lr=1e-3)
            return flatten_params(arrays)

        np.testing.assert_array_equal(run(), run())

    def test_seeded_rng_streams_are_stable(self):
        a = SeededRng(42, 3).standard_normal(4)
        b = SeededRng(42, 3).standard_normal(4)
        c = SeededRng(42, 4).standard_normal(4)
        np.testing.assert_array_equal(a, b)
        assert not np.array_equal(a, c)

    def test_rng_state_roundtrip(self):
        rng = SeededRng(5, 9)
        rng.standard_normal(10)
        state = rng.state_dict()
        rest = SeededRng.from_state_dict(state)
        np.testing.assert_array_equal(rng.standard_normal(5), rest.standard_normal(5))
