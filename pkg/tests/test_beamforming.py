import numpy as np
import pytest
import scipy.linalg as la
from hypothesis import given, settings, strategies as st

from semnoma.beamforming import (CovariancePair, build_covariances, canonical_phase,
                                 optimal_beamformer, rayleigh_quotient, reference_beamformer,
                                 worst_case_beamformers)
from semnoma.channel import NetworkScenario, gain_matrix, sinr_all
from semnoma.errors import NumericalError


def scenario(h, p=1.0, noise=1.0):
    h = np.atleast_2d(np.asarray(h, dtype=complex))
    K = h.shape[0]
    return NetworkScenario(channels=h, bandwidth=1.0, noise_psd=noise, tx_power=np.full(K, p),
                           distances=np.ones(K))


def random_scenario(rng, K=3, Z=4):
    h = (rng.standard_normal((K, Z)) + 1j * rng.standard_normal((K, Z))) / np.sqrt(2)
    return NetworkScenario(channels=h * rng.uniform(0.3, 3.0, (K, 1)), bandwidth=1.0,
                           noise_psd=rng.uniform(0.01, 1.0), tx_power=rng.uniform(0.5, 2.0, K),
                           distances=np.ones(K))


def unit_probes(rng, n, Z):
    v = rng.standard_normal((n, Z)) + 1j * rng.standard_normal((n, Z))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def probe_quotients(pair, probes):
    num = pair.power * np.abs(probes.conj() @ pair.channel) ** 2
    den = np.real(np.einsum("ni,ij,nj->n", probes.conj(), pair.interference_matrix, probes))
    return num / den


class TestCovariances:
    def test_no_interferer_is_scaled_identity(self):
        s = scenario([[1.0, 2.0]], noise=0.5)
        pair = build_covariances(0, s, np.zeros(1))
        assert np.allclose(pair.interference_matrix, 0.5 * np.eye(2))

    def test_trace_identity(self):
        h = np.array([[1.0, 0.5j], [0.3, 2.0 - 1j]])
        s = scenario(h, p=2.0, noise=0.25)
        pair = build_covariances(0, s, np.array([0.0, 1.0]))
        expected = 2.0 * np.linalg.norm(h[1]) ** 2 + 2 * 0.25
        assert np.trace(pair.interference_matrix).real == pytest.approx(expected, rel=1e-12)

    def test_hermitian_pd_and_rank_one(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            s = random_scenario(rng)
            pair = build_covariances(1, s, np.ones(3))
            Hb = pair.interference_matrix
            assert np.allclose(Hb, Hb.conj().T, atol=1e-12)
            assert np.min(np.linalg.eigvalsh(Hb)) >= s.noise_power - 1e-12
            assert np.linalg.matrix_rank(pair.signal_matrix, tol=1e-10) == 1

    def test_self_entry_ignored(self):
        rng = np.random.default_rng(1)
        s = random_scenario(rng)
        a = build_covariances(0, s, np.array([0.0, 1.0, 1.0]))
        b = build_covariances(0, s, np.array([1.0, 1.0, 1.0]))
        assert np.allclose(a.interference_matrix, b.interference_matrix)


class TestOptimalBeamformer:
    def test_matched_filter_without_interference(self):
        h = np.array([1.0 + 1j, 2.0, -0.5j])
        pair = CovariancePair(h, 1.0, 0.3 * np.eye(3))
        w = optimal_beamformer(pair)
        mf = canonical_phase(h / np.linalg.norm(h))
        assert np.allclose(w, mf, atol=1e-12)

    def test_orthogonal_interferer(self):
        s = scenario([[1.0, 0.0], [0.0, 1.0]])
        w = optimal_beamformer(build_covariances(0, s, np.array([0.0, 1.0])))
        assert np.allclose(w, [1.0, 0.0], atol=1e-14)

    def test_unit_norm_and_canonical_phase(self):
        rng = np.random.default_rng(2)
        pair = build_covariances(0, random_scenario(rng), np.ones(3))
        w = optimal_beamformer(pair)
        assert np.linalg.norm(w) == pytest.approx(1.0, abs=1e-12)
        i = np.argmax(np.abs(w))
        assert w[i].imag == pytest.approx(0.0, abs=1e-14) and w[i].real > 0

    def test_beats_random_probes(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            pair = build_covariances(0, random_scenario(rng), np.ones(3))
            best = rayleigh_quotient(optimal_beamformer(pair), pair)
            probes = probe_quotients(pair, unit_probes(rng, 10_000, 4))
            assert np.max(probes) <= best * (1 + 1e-9)

    def test_matches_dense_eigensolver(self):
        rng = np.random.default_rng(4)
        for _ in range(50):
            s = random_scenario(rng)
            for k in range(3):
                pair = build_covariances(k, s, np.ones(3))
                a = rayleigh_quotient(optimal_beamformer(pair), pair)
                b = rayleigh_quotient(reference_beamformer(pair), pair)
                lam = la.eigh(pair.signal_matrix, pair.interference_matrix, eigvals_only=True)[-1]
                assert a == pytest.approx(b, rel=1e-9)
                assert a == pytest.approx(lam, rel=1e-9)

    def test_singular_covariance_raises(self):
        pair = CovariancePair(np.array([1.0, 0.0]), 1.0, np.array([[1.0, 1.0], [1.0, 1.0]]))
        with pytest.raises(NumericalError):
            optimal_beamformer(pair)

    @settings(max_examples=50, deadline=None)
    @given(seed=st.integers(0, 10_000), phase=st.floats(0, 2 * np.pi))
    def test_channel_phase_invariance(self, seed, phase):
        rng = np.random.default_rng(seed)
        s = random_scenario(rng)
        pair = build_covariances(0, s, np.ones(3))
        rotated = CovariancePair(pair.channel * np.exp(1j * phase), pair.power,
                                 pair.interference_matrix)
        w1, w2 = optimal_beamformer(pair), optimal_beamformer(rotated)
        assert rayleigh_quotient(w1, pair) == pytest.approx(rayleigh_quotient(w2, rotated), rel=1e-9)
        # same direction up to a phase
        assert abs(np.vdot(w1, w2)) == pytest.approx(1.0, abs=1e-9)


class TestWorstCase:
    def test_single_user_is_matched_filter(self):
        h = np.array([[0.3 - 1j, 2.0]])
        w = worst_case_beamformers(scenario(h))
        assert np.allclose(w[0], canonical_phase(h[0] / np.linalg.norm(h[0])))

    def test_two_users_treat_each_other_as_interference(self):
        rng = np.random.default_rng(5)
        s = random_scenario(rng, K=2, Z=3)
        w = worst_case_beamformers(s)
        for k in range(2):
            row = np.ones(2)
            assert np.allclose(w[k], optimal_beamformer(build_covariances(k, s, row)))

    def test_quotient_equals_worst_case_sinr(self):
        rng = np.random.default_rng(6)
        s = random_scenario(rng)
        w = worst_case_beamformers(s)
        pi = np.ones((3, 3)) - np.eye(3)
        sinr = sinr_all(s, w, pi)
        for k in range(3):
            pair = build_covariances(k, s, np.ones(3))
            lam = la.eigh(pair.signal_matrix, pair.interference_matrix, eigvals_only=True)[-1]
            assert sinr[k] == pytest.approx(lam, rel=1e-9)
        assert gain_matrix(s, w).shape == (3, 3)
