"""EMA recurrence checked bit-exactly against a scalar reference."""

import numpy as np
import pytest

from kdfm.ema import effective_decay, ema_params, ema_update, init_ema
from kdfm.errors import ConfigError, ShapeError, UninitializedEmaError


def scalar_reference(shadow, sequence, base_decay=0.9999, t0=0):
    """Independent recurrence: d_t = min(base, (1+t)/(10+t))."""
    t = t0
    for value in sequence:
        d = min(base_decay, (1.0 + t) / (10.0 + t))
        shadow = d * shadow + (1.0 - d) * value
        t += 1
    return shadow


class TestUpdate:
    def test_first_update_hand_oracle(self):
        state = init_ema(np.array([1.0]))
        assert effective_decay(state) == 0.1  # (1+0)/(10+0)
        state = ema_update(state, np.array([0.0]))
        assert state.shadow[0] == 0.1
        assert state.num_updates == 1

    def test_decay_limit(self):
        state = init_ema(np.zeros(1))
        state.num_updates = 10**9
        assert effective_decay(state) == 0.9999

    def test_fixed_point(self):
        state = init_ema(np.array([3.0, -1.0]))
        before = state.shadow.copy()
        state = ema_update(state, before)
        np.testing.assert_array_equal(state.shadow, before)

    def test_bit_exact_against_scalar_reference(self):
        rng = np.random.default_rng(0)
        sequence = rng.normal(size=1000)
        state = init_ema(np.array([1.5]))
        for value in sequence:
            state = ema_update(state, np.array([value]))
        expected = scalar_reference(1.5, sequence)
        assert state.shadow[0] == expected

    def test_counter_start_ten(self):
        state = init_ema(np.array([1.0]), counter_start=10)
        assert effective_decay(state) == 0.55  # (1+10)/(10+10)
        state = ema_update(state, np.array([0.0]))
        assert state.shadow[0] == 0.55

    def test_convex_hull(self):
        rng = np.random.default_rng(3)
        start = rng.normal(size=4)
        state = init_ema(start)
        lo, hi = start.copy(), start.copy()
        for _ in range(200):
            params = rng.normal(size=4)
            lo, hi = np.minimum(lo, params), np.maximum(hi, params)
            state = ema_update(state, params)
            assert np.all(state.shadow >= lo - 1e-12)
            assert np.all(state.shadow <= hi + 1e-12)

    def test_shape_mismatch(self):
        state = init_ema(np.zeros(3))
        with pytest.raises(ShapeError):
            ema_update(state, np.zeros(4))


class TestQuery:
    def test_uninitialized_error(self):
        state = init_ema(np.zeros(2))
        with pytest.raises(UninitializedEmaError):
            ema_params(state)

    def test_returns_shadow_after_update(self):
        state = init_ema(np.array([1.0]))
        state = ema_update(state, np.array([0.0]))
        assert ema_params(state)[0] == 0.1

    def test_constant_params_converge(self):
        state = init_ema(np.array([5.0]))
        for _ in range(100):
            state = ema_update(state, np.array([2.0]))
        assert abs(ema_params(state)[0] - 2.0) < 1e-6

    def test_uninitialized_with_counter_start(self):
        state = init_ema(np.zeros(1), counter_start=10)
        with pytest.raises(UninitializedEmaError):
            ema_params(state)

    def test_bad_config(self):
        with pytest.raises(ConfigError):
            init_ema(np.zeros(1), base_decay=1.0)
        with pytest.raises(ConfigError):
            init_ema(np.zeros(1), counter_start=-1)
