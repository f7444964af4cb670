import math

import numpy as np
import pytest
from hypothesis import given, settings

from qpi import quantum as q
from qpi.ensemble import EnsembleConfig, run_ensemble
from qpi.feedback import PIController
from qpi.stochastic import ExponentialFilter, NoiseHistory
from qpi.twoqubit import (PositivityMonitor, TwoQubitBlock, TwoQubitEngine, TwoQubitModel,
                          analytic_T0_steady, deterministic_mean_step, exact_T0_steady,
                          measurement_current, stationary_mean_state, step_no_delay,
                          step_with_delay, triplet_component_step)
from conftest import random_density, seeds

T = {lab: q.projector(q.triplet_state(lab)) for lab in q.TRIPLET_LABELS}
MODEL = TwoQubitModel()


def generic_state():
    psi = np.array([1, 0.3, 0.2j, 0.1])
    return q.projector(psi / np.linalg.norm(psi))


def run_matrix_and_components(ctrl, model, n, dt=0.01, seed=3):
    """Step the matrix and component forms on shared noise; return the max deviation."""
    dWs = np.random.default_rng(seed).normal(0, math.sqrt(dt), n)
    rho = generic_state()
    dec = q.triplet_decompose(rho)
    d = ctrl.delay_steps(dt)
    hist = NoiseHistory(dt, d)
    filt = ExponentialFilter(ctrl.tau_i, dt)
    worst = 0.0
    for dW in dWs:
        j = measurement_current(model, rho, dW, dt)
        hist.push(dW, j)
        J = filt.value
        jd = hist.error(d) if d > 0 and hist.count > d else None
        stepper = step_no_delay if d == 0 else step_with_delay
        rho = stepper(model, ctrl, rho, hist, J, dt)
        dec = triplet_component_step(dec, model, ctrl, jd, J, dW, dt)
        filt.update(j)
        worst = max(worst, np.abs(q.to_triplet_basis(rho) - dec.to_matrix()).max())
    return worst, rho, dWs


class TestModel:
    def test_operators(self):
        ops = q.two_qubit_ops()
        assert np.allclose(MODEL.H, 0.1 * ops["sz1"] + 0.1 * ops["sz2"])
        assert np.allclose(MODEL.c, MODEL.Lz)
        for A in (MODEL.H, MODEL.Lx, MODEL.Lz):
            assert np.allclose(A, A.conj().T)

    def test_validation(self):
        with pytest.raises(ValueError):
            TwoQubitModel(eta=0)
        with pytest.raises(ValueError):
            TwoQubitModel(k=-1)


class TestCurrent:
    def test_t0(self):
        assert measurement_current(MODEL, T["T_0"], 0.0, 0.01) == 0.0

    def test_t1(self):
        assert measurement_current(MODEL, T["T_1"], 0.0, 0.01) == pytest.approx(2.0)

    def test_noise_scaling(self):
        val = measurement_current(MODEL, T["T_0"], 0.01, 0.001)
        assert val == pytest.approx(0.01 / (0.001 * math.sqrt(0.4)), rel=1e-12)
        assert val == pytest.approx(15.811, abs=1e-3)


class TestSteppers:
    def test_t0_invariant_without_feedback(self):
        hist = NoiseHistory(0.01, 0)
        rho = T["T_0"]
        for dW in np.random.default_rng(0).normal(0, 0.1, 50):
            hist.push(dW)
            rho = step_no_delay(MODEL, PIController(), rho, hist, 0.0, 0.01)
        assert np.allclose(rho, T["T_0"], atol=1e-14)

    def test_delayed_equals_free_before_delay(self):
        dt = 0.01
        free, delayed = PIController(), PIController(alpha_p=0.2, tau_p=0.5)
        h1, h2 = NoiseHistory(dt, 0), NoiseHistory(dt, 50)
        r1 = r2 = generic_state()
        for dW in np.random.default_rng(1).normal(0, 0.1, 50):
            h1.push(dW)
            h2.push(dW, 1.0)
            r1 = step_no_delay(MODEL, free, r1, h1, 0.0, dt)
            r2 = step_with_delay(MODEL, delayed, r2, h2, 0.0, dt)
        assert np.allclose(r1, r2, atol=1e-15)

    def test_wrong_stepper_for_delay(self):
        with pytest.raises(ValueError):
            step_no_delay(MODEL, PIController(tau_p=1.0), T["T_1"], NoiseHistory(0.01, 100),
                          0.0, 0.01)
        with pytest.raises(ValueError):
            step_with_delay(MODEL, PIController(), T["T_1"], NoiseHistory(0.01, 0), 0.0, 0.01)

    @given(seeds)
    @settings(max_examples=10, deadline=None)
    def test_trace_and_hermiticity(self, seed):
        rng = np.random.default_rng(seed)
        ctrl = PIController(alpha_p=0.1, alpha_i=0.1, tau_i=0.5)
        rho = random_density(rng)
        hist = NoiseHistory(0.01, 0)
        for dW in rng.normal(0, 0.1, 100):
            hist.push(dW)
            rho = step_no_delay(MODEL, ctrl, rho, hist, rng.normal(), 0.01)
        assert abs(np.trace(rho) - 1) < 1e-12
        assert np.allclose(rho, rho.conj().T, atol=1e-12)


class TestComponentOracle:
    def test_t0_is_stationary(self):
        dec = q.triplet_decompose(T["T_0"])
        out = triplet_component_step(dec, MODEL, PIController(), None, 0.0, 0.3, 0.01)
        assert np.allclose(out.to_matrix(), dec.to_matrix(), atol=1e-15)

    @pytest.mark.parametrize("ctrl,h2", [
        (PIController(alpha_p=0.2), 0.1),
        (PIController(alpha_p=0.2), 0.03),
        (PIController(alpha_i=0.2, tau_i=3), 0.1),
        (PIController(alpha_p=0.03, alpha_i=0.17, tau_i=3), 0.03),
        (PIController(alpha_p=0.2, tau_p=5), 0.05),
    ], ids=["P", "P-unequal-fields", "I", "PI", "P-delayed"])
    def test_same_noise_equivalence(self, ctrl, h2):
        worst, _, _ = run_matrix_and_components(ctrl, TwoQubitModel(0.1, h2), 10_000)
        assert worst < 1e-9


class TestEngine:
    @pytest.mark.parametrize("ctrl", [
        PIController(alpha_p=0.2),
        PIController(alpha_p=0.03, alpha_i=0.17, tau_i=3),
        PIController(alpha_p=0.2, tau_p=5),
    ], ids=["P", "PI", "P-delayed"])
    def test_matches_matrix_stepper(self, ctrl):
        model = TwoQubitModel(0.1, 0.05)
        n = 2000
        _, rho, dWs = run_matrix_and_components(ctrl, model, n)
        eng = TwoQubitEngine(model, ctrl, 0.01)
        out = eng.run(generic_state(), [dWs[:, None]], n, lambda r, e: {"rho": e.states(r)[0]})
        assert np.abs(out["rho"][-1] - rho).max() < 1e-10

    def test_symmetric_subspace_preserved(self):
        eng = TwoQubitEngine(MODEL, PIController(alpha_p=0.03, alpha_i=0.17, tau_i=3), 0.01)
        noise = np.random.default_rng(4).normal(0, 0.1, (5000, 8))
        out = eng.run(T["T_1"], [noise], 100, lambda r, e: {"S": r @ e.pop_vecs[3]})
        assert np.abs(out["S"]).max() < 1e-9

    def test_no_feedback_mean_matches_lindblad(self):
        dt, n, B = 0.01, 300, 500
        rho0 = generic_state()
        eng = TwoQubitEngine(MODEL, PIController(), dt)
        noise = np.random.default_rng(5).normal(0, math.sqrt(dt), (n, B))
        stride = 30
        out = eng.run(rho0, [noise], stride, lambda r, e: {"pops": r @ e.pop_vecs.T,
                                                          "lz": r @ e.lz_vec})
        rho = rho0
        for i in range(n // stride):
            for _ in range(stride):
                rho = deterministic_mean_step(MODEL, 0.0, rho, dt)
            ref = np.diag(q.to_triplet_basis(rho)).real
            sample = out["pops"][i + 1]
            se = sample.std(axis=0, ddof=1) / math.sqrt(B) + 1e-12
            assert np.all(np.abs(sample.mean(axis=0) - ref) < 4 * se + 1e-12)

    def test_rejects_schedules(self):
        with pytest.raises(ValueError):
            TwoQubitEngine(MODEL, PIController(alpha_p=np.ones(3)), 0.01)


class TestMeanEvolution:
    def test_t1_frozen_without_feedback(self):
        rho = T["T_1"]
        for _ in range(100):
            rho = deterministic_mean_step(MODEL, 0.0, rho, 0.1)
        assert np.allclose(rho, T["T_1"], atol=1e-14)

    def test_analytic_examples(self):
        assert analytic_T0_steady(MODEL, 0.2) == pytest.approx(1.784 / 3.08, abs=1e-12)
        assert analytic_T0_steady(MODEL, 1e6) == pytest.approx(1 / 3, abs=1e-9)
        assert analytic_T0_steady(TwoQubitModel(0, 0, 1, 1), 0.0) == pytest.approx(9 / 11)

    def test_exact_matches_stationary_state(self):
        for h, eta, ap in ((0.1, 0.4, 0.2), (0.3, 0.7, 0.5), (0.0, 1.0, 0.1)):
            model = TwoQubitModel(h, h, 1.0, eta)
            rho = stationary_mean_state(model, ap)
            t0 = q.triplet_decompose(rho).t_0
            assert exact_T0_steady(model, ap) == pytest.approx(t0, abs=1e-10)

    def test_closed_forms_agree_without_field(self):
        model = TwoQubitModel(0.2, -0.2, 1.0, 0.4)
        assert exact_T0_steady(model, 0.3) == pytest.approx(analytic_T0_steady(model, 0.3))

    def test_integration_reaches_exact_steady(self):
        rho = T["T_1"]
        for _ in range(4000):
            rho = deterministic_mean_step(MODEL, 0.2, rho, 0.1)
        assert q.triplet_decompose(rho).t_0 == pytest.approx(exact_T0_steady(MODEL, 0.2), abs=1e-6)


class TestMonitor:
    def test_counts_and_aborts(self):
        m = PositivityMonitor(abort=-0.1)
        m.check(np.array([0.0, -1e-6, 0.2]))
        assert m.n_below_warn == 1 and m.min_eig == -1e-6
        with pytest.raises(q.PositivityError, match="seed 7"):
            m.check(np.array([0.0, -0.2]), seeds=[6, 7])


def test_block_reproducible_and_batch_invariant():
    block = TwoQubitBlock(MODEL, PIController(alpha_i=0.2, tau_i=3), 0.01, 5.0, 50,
                          positivity_abort=-10)
    a = run_ensemble(block, EnsembleConfig(12, 40, 0.01, 5.0, 50, batch_size=12))
    b = run_ensemble(block, EnsembleConfig(12, 40, 0.01, 5.0, 50, batch_size=5))
    assert np.allclose(a.mean["concurrence"], b.mean["concurrence"], rtol=0, atol=1e-15)
    c = run_ensemble(block, EnsembleConfig(12, 40, 0.01, 5.0, 50, batch_size=5))
    assert np.array_equal(b.mean["T_0"], c.mean["T_0"])
