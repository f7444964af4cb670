import logging
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qpi.stochastic import (ExponentialFilter, FilterSpec, ModulatedFilter, NoiseHistory,
                            delayed_increment, filter_evaluate, grid_steps, momentum_estimator,
                            sample_increment)
from conftest import seeds


class TestSampleIncrement:
    def test_reproducible_and_distinct(self):
        a = np.random.default_rng(11)
        b = np.random.default_rng(11)
        x1, x2 = sample_increment(a, 0.01), sample_increment(a, 0.01)
        assert x1 != x2
        assert (x1, x2) == (sample_increment(b, 0.01), sample_increment(b, 0.01))

    def test_moments(self):
        n, dt = 10 ** 6, 0.01
        x = sample_increment(np.random.default_rng(12), dt, n)
        assert abs(x.mean()) < 4 * math.sqrt(dt / n)
        assert abs(x.var() / dt - 1) < 0.01

    def test_no_autocorrelation(self):
        n = 10 ** 5
        x = sample_increment(np.random.default_rng(13), 1.0, n)
        for lag in (1, 2, 7):
            r = np.mean(x[:-lag] * x[lag:]) / np.var(x)
            assert abs(r) < 5 / math.sqrt(n)

    def test_rejects_bad_dt(self):
        with pytest.raises(ValueError):
            sample_increment(np.random.default_rng(0), 0.0)


class TestGridSteps:
    def test_exact_multiple(self, caplog):
        assert grid_steps(3.0, 0.01) == 300
        assert "not a multiple" not in caplog.text

    def test_rounding_warns_with_both_values(self, caplog):
        with caplog.at_level(logging.WARNING):
            assert grid_steps(0.0337, 0.01, "tau_probe") == 3
        assert "tau_probe" in caplog.text and "0.0337" in caplog.text

    def test_negative(self):
        with pytest.raises(ValueError):
            grid_steps(-1, 0.1)


class TestNoiseHistory:
    def test_lag_zero_is_latest(self):
        h = NoiseHistory(0.1, 5)
        h.push(0.3, 1.0)
        h.push(0.7, 2.0)
        assert h.increment(0) == 0.7 and h.error(0) == 2.0

    def test_prehistory_is_zero(self):
        h = NoiseHistory(0.1, 5)
        h.push(0.3)
        assert h.increment(3) == 0.0

    def test_lag_beyond_capacity(self):
        with pytest.raises(IndexError):
            NoiseHistory(0.1, 2).increment(3)

    def test_batched_zero_fill(self):
        h = NoiseHistory(0.1, 3, (4,))
        assert np.array_equal(h.error(2), np.zeros(4))

    @given(st.lists(st.floats(-10, 10), min_size=1, max_size=40), st.integers(0, 6))
    def test_matches_list_oracle(self, values, lag):
        h = NoiseHistory(1.0, 6)
        for v in values:
            h.push(v)
        expected = values[-1 - lag] if lag < len(values) else 0.0
        assert h.increment(lag) == expected


class TestDelayedIncrement:
    def test_zero_delay(self):
        h = NoiseHistory(0.01, 4)
        h.push(0.5)
        assert delayed_increment(h, 0.0) == 0.5

    def test_before_delay(self):
        h = NoiseHistory(0.01, 4)
        h.push(0.5)
        assert delayed_increment(h, 0.03) == 0.0

    def test_three_steps_back(self):
        h = NoiseHistory(0.01, 4)
        for v in (1, 2, 3, 4, 5):
            h.push(float(v))
        assert delayed_increment(h, 0.03) == 2.0

    def test_exceeds_capacity(self):
        h = NoiseHistory(0.01, 2)
        h.push(1.0)
        with pytest.raises(IndexError):
            delayed_increment(h, 0.05)


def filled(dt, cap, values):
    h = NoiseHistory(dt, cap)
    for v in values:
        h.push(0.0, v)
    return h


class TestFilterEvaluate:
    def test_zero_signal(self):
        spec = FilterSpec("exponential", 0.3)
        assert filter_evaluate(filled(0.01, 30, np.zeros(50)), spec) == 0.0

    def test_constant_signal(self):
        dt, tau = 0.001, 1.0
        spec = FilterSpec("exponential", tau)
        W = spec.window(dt)
        val = filter_evaluate(filled(dt, W, np.full(W + 10, 1.0)), spec)
        # left-point sum exceeds the integral by O(dt / tau)
        assert val == pytest.approx(1 - math.exp(-1), abs=1e-3)

    def test_modulated_cos_recovers_amplitude(self):
        omega = 1.0
        T = 2 * math.pi / omega
        dt = T / 2000
        spec = FilterSpec("modulated", T / 2, omega=omega)
        n = 3000
        e = 2 * np.cos(omega * dt * np.arange(n))
        val = filter_evaluate(filled(dt, spec.window(dt), e), spec)
        assert val == pytest.approx(1.0, abs=5e-3)

    def test_goal_samples_subtracted(self):
        spec = FilterSpec("exponential", 0.05)
        h = filled(0.01, 5, np.full(10, 3.0))
        assert filter_evaluate(h, spec, goal_samples=np.full(5, 3.0)) == pytest.approx(0.0)

    def test_empty(self):
        with pytest.raises(ValueError):
            filter_evaluate(NoiseHistory(0.1, 3), FilterSpec("exponential", 0.2))

    def test_invalid_filter_kernel(self):
        with pytest.raises(ValueError):
            FilterSpec("gaussian", 1.0)
        with pytest.raises(ValueError):
            FilterSpec("exponential", 0.0)


class TestRecursiveFilters:
    @given(seeds, st.integers(1, 40))
    @settings(max_examples=30, deadline=None)
    def test_exponential_matches_direct(self, seed, W):
        dt = 0.01
        tau = W * dt
        rng = np.random.default_rng(seed)
        e = rng.normal(size=10 * W) * 10
        f = ExponentialFilter(tau, dt)
        h = NoiseHistory(dt, W)
        spec = FilterSpec("exponential", tau)
        for v in e:
            f.update(v)
            h.push(0.0, v)
            assert abs(f.value - filter_evaluate(h, spec)) < 1e-10

    def test_modulated_matches_direct(self):
        dt, omega, m = 0.01, 1.3, 0.7
        tau = 0.5
        rng = np.random.default_rng(3)
        f = ModulatedFilter(tau, dt, omega, m)
        h = NoiseHistory(dt, 50)
        sc = FilterSpec("modulated", tau, omega, "cos", m)
        ss = FilterSpec("modulated", tau, omega, "sin", m)
        for n in range(300):
            v = rng.normal()
            jx, jp = f.update(v, n * dt)
            h.push(0.0, v)
            assert abs(jx - filter_evaluate(h, sc)) < 1e-10
            assert abs(jp - filter_evaluate(h, ss)) < 1e-10

    def test_initial_value_zero(self):
        assert ExponentialFilter(1.0, 0.1).value == 0.0


class TestMomentumEstimator:
    def test_zero(self):
        assert momentum_estimator(0.0, 0.0, 1.2, 1.0, 1.0) == 0.0

    def test_at_origin(self):
        assert momentum_estimator(3.0, 2.0, 0.0, 1.0, 1.0) == pytest.approx(2.0)

    def test_quarter_turn(self):
        m, w = 2.0, 0.5
        assert momentum_estimator(3.0, 2.0, math.pi / 2 / w, m, w) == pytest.approx(-m * w * 3.0)
