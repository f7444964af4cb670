import numpy as np
import pytest
from hypothesis import given, settings

from qpi import quantum as q
from conftest import random_density, random_hermitian, random_unitary, seeds

T = {lab: q.projector(q.triplet_state(lab)) for lab in q.TRIPLET_LABELS}


def outer(a, b):
    return np.outer(q.triplet_state(a), q.triplet_state(b).conj())


class TestDissipator:
    def test_identity_vanishes(self):
        rho = random_density(np.random.default_rng(0))
        assert np.allclose(q.dissipator(np.eye(4), rho), 0, atol=1e-14)

    def test_lz_on_t0_vanishes(self, spins):
        _, Lz = spins
        assert np.allclose(q.dissipator(Lz, T["T_0"]), 0, atol=1e-14)

    def test_coherence_damped_at_half_rate(self, spins):
        _, Lz = spins
        rho = 0.5 * (T["T_0"] + T["T_1"]) + 0.3 * (outer("T_0", "T_1") + outer("T_1", "T_0"))
        out = q.to_triplet_basis(q.dissipator(Lz, rho))
        # indices: 0 = T_-1, 1 = T_0, 2 = T_1; Lz eigenvalues 0 and 1 on the pair
        expected = np.zeros((4, 4), dtype=complex)
        expected[1, 2] = expected[2, 1] = -0.5 * 0.3
        assert np.allclose(out, expected, atol=1e-14)

    def test_dimension_mismatch(self):
        with pytest.raises(q.DimensionError):
            q.dissipator(np.eye(2), np.eye(4) / 4)

    @given(seeds)
    @settings(max_examples=50, deadline=None)
    def test_traceless_and_hermitian(self, seed):
        rng = np.random.default_rng(seed)
        A, rho = random_hermitian(rng), random_density(rng)
        D = q.dissipator(A, rho)
        assert abs(np.trace(D)) < 1e-12
        assert np.allclose(D, D.conj().T, atol=1e-12)

    @given(seeds)
    @settings(max_examples=30, deadline=None)
    def test_traceless_for_non_hermitian_operator(self, seed):
        rng = np.random.default_rng(seed)
        A = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        assert abs(np.trace(q.dissipator(A, random_density(rng)))) < 1e-10


class TestInnovation:
    def test_eigenstates_vanish(self, spins):
        _, Lz = spins
        assert np.allclose(q.innovation(Lz, T["T_1"]), 0, atol=1e-14)
        assert np.allclose(q.innovation(Lz, T["T_0"]), 0, atol=1e-14)

    def test_mixture_of_extremes(self, spins):
        _, Lz = spins
        rho = 0.5 * (T["T_1"] + T["T_-1"])
        assert np.allclose(q.innovation(Lz, rho), T["T_1"] - T["T_-1"], atol=1e-14)

    @given(seeds)
    @settings(max_examples=50, deadline=None)
    def test_traceless(self, seed):
        rng = np.random.default_rng(seed)
        assert abs(np.trace(q.innovation(random_hermitian(rng), random_density(rng)))) < 1e-12

    @given(seeds)
    @settings(max_examples=30, deadline=None)
    def test_pure_eigenstate_gives_zero(self, seed):
        rng = np.random.default_rng(seed)
        A = random_hermitian(rng)
        _, v = np.linalg.eigh(A)
        psi = v[:, rng.integers(4)]
        assert np.allclose(q.innovation(A, q.projector(psi)), 0, atol=1e-12)


class TestExpectation:
    def test_identity_gives_trace(self):
        assert q.expectation(np.eye(4), random_density(np.random.default_rng(1))) == pytest.approx(1)

    def test_lz_eigenvalue(self, spins):
        assert q.expectation(spins[1], T["T_1"]) == pytest.approx(1)

    def test_lz_mixed_state(self, spins):
        assert abs(q.expectation(spins[1], np.eye(4) / 4)) < 1e-15

    @given(seeds)
    @settings(max_examples=30, deadline=None)
    def test_real_for_hermitian(self, seed):
        rng = np.random.default_rng(seed)
        assert abs(q.expectation(random_hermitian(rng), random_density(rng)).imag) < 1e-12

    def test_batched(self, spins):
        stack = np.stack([T["T_1"], T["T_-1"], T["T_0"]])
        assert np.allclose(q.expectation(spins[1], stack), [1, -1, 0])


class TestNormalize:
    def test_unit_trace_unchanged(self):
        rho = random_density(np.random.default_rng(2))
        assert np.allclose(q.normalize(rho), rho, atol=1e-15)

    def test_scaling_removed(self):
        rho = random_density(np.random.default_rng(3))
        assert np.allclose(q.normalize(2 * rho), rho, atol=1e-15)

    def test_small_drift_rescaled(self):
        rho = random_density(np.random.default_rng(4)) * (1 + 3e-4)
        assert abs(np.trace(q.normalize(rho)) - 1) < 1e-15

    def test_collapse_raises(self):
        with pytest.raises(q.TraceCollapseError):
            q.normalize(np.zeros((4, 4)))


class TestConcurrence:
    def test_product_state(self):
        assert q.concurrence(T["T_1"]) == pytest.approx(0, abs=1e-7)

    def test_t0_maximal(self):
        assert q.concurrence(T["T_0"]) == pytest.approx(1, abs=1e-12)

    def test_werner_state(self):
        phi = np.array([1, 0, 0, 1]) / np.sqrt(2)
        rho = 0.5 * q.projector(phi) + 0.5 * np.eye(4) / 4
        assert q.concurrence(rho) == pytest.approx(0.25, abs=1e-12)

    @pytest.mark.parametrize("p", np.linspace(0, 1, 11))
    def test_werner_closed_form(self, p):
        phi = np.array([1, 0, 0, 1]) / np.sqrt(2)
        rho = p * q.projector(phi) + (1 - p) * np.eye(4) / 4
        assert q.concurrence(rho) == pytest.approx(max(0, (3 * p - 1) / 2), abs=1e-7)

    def test_pure_state_formula(self):
        # for pure states C = 2 |ad - bc|
        rng = np.random.default_rng(5)
        for _ in range(20):
            psi = rng.normal(size=4) + 1j * rng.normal(size=4)
            psi /= np.linalg.norm(psi)
            a, b, c, d = psi
            assert q.concurrence(q.projector(psi)) == pytest.approx(2 * abs(a * d - b * c), abs=1e-6)

    @given(seeds)
    @settings(max_examples=40, deadline=None)
    def test_local_unitary_invariance(self, seed):
        rng = np.random.default_rng(seed)
        rho = random_density(rng)
        U = np.kron(random_unitary(rng), random_unitary(rng))
        c0 = q.concurrence(rho)
        c1 = q.concurrence(U @ rho @ U.conj().T)
        assert abs(c0 - c1) < 1e-9
        assert 0 <= c0 <= 1

    def test_rejects_non_hermitian(self):
        rho = T["T_0"].copy()
        rho[0, 1] = 0.3
        with pytest.raises(ValueError):
            q.concurrence(rho)

    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            q.concurrence(np.diag([1.2, -0.2, 0, 0]).astype(complex))

    def test_rejects_wrong_size(self):
        with pytest.raises(q.DimensionError):
            q.concurrence(np.eye(2) / 2)


class TestTripletDecomposition:
    def test_t1(self):
        d = q.triplet_decompose(T["T_1"])
        assert d.t_1 == pytest.approx(1)
        others = [v for k, v in vars(d).items() if k != "t_1"]
        assert np.allclose(others, 0)

    def test_t0(self):
        assert q.triplet_decompose(T["T_0"]).t_0 == pytest.approx(1)

    def test_up_down(self):
        d = q.triplet_decompose(q.projector([0, 1, 0, 0]))
        assert d.t_0 == pytest.approx(0.5)
        assert d.t_s == pytest.approx(0.5)
        assert abs(d.t_s0) == pytest.approx(0.5)

    def test_roundtrip(self):
        rho = random_density(np.random.default_rng(6))
        d = q.triplet_decompose(rho)
        assert np.allclose(q.from_triplet_basis(d.to_matrix()), rho, atol=1e-14)

    def test_rejects_wrong_size(self):
        with pytest.raises(q.DimensionError):
            q.triplet_decompose(np.eye(2))

    @given(seeds)
    @settings(max_examples=50, deadline=None)
    def test_populations_and_cauchy_schwarz(self, seed):
        d = q.triplet_decompose(random_density(np.random.default_rng(seed)))
        pops = dict(m=d.t_m1, z=d.t_0, p=d.t_1, s=d.t_s)
        assert abs(sum(pops.values()) - 1) < 1e-10
        pairs = {"t_1m1": ("p", "m"), "t_01": ("z", "p"), "t_0m1": ("z", "m"),
                 "t_sm1": ("s", "m"), "t_s0": ("s", "z"), "t_s1": ("s", "p")}
        for name, (a, b) in pairs.items():
            assert abs(getattr(d, name)) ** 2 <= pops[a] * pops[b] + 1e-10


class TestPositivity:
    def test_check_passes_valid_state(self):
        assert q.check_positivity(T["T_0"]) == pytest.approx(0, abs=1e-12)

    def test_check_aborts(self):
        with pytest.raises(q.PositivityError):
            q.check_positivity(np.diag([1.001, -0.001, 0, 0]))

    def test_check_warns(self, caplog):
        q.check_positivity(np.diag([1 + 1e-6, -1e-6, 0, 0]))
        assert "eigenvalue" in caplog.text


def test_collective_spin_algebra(spins):
    Lx, Lz = spins
    Ly = 0.5 * (q.two_qubit_ops()["sy1"] + q.two_qubit_ops()["sy2"])
    assert np.allclose(q.commutator(Lx, Ly), 1j * Lz)
    assert np.allclose(Lz @ q.triplet_state("T_1"), q.triplet_state("T_1"))
    assert np.allclose(Lx @ q.triplet_state("S"), 0)
