import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from semnoma.channel import (INFEASIBLE_LATENCY, LinkState, NetworkScenario, capacity, capacities,
                             dbm_to_watts, dbmhz_to_whz, gain_matrix, per_su_latency,
                             rate_from_sinr, sample_rayleigh_scenario, sinr, sinr_all,
                             system_latency)
from semnoma.errors import ConfigurationError


def _scenario(h, p=1.0, B=1.0, psd=1.0):
    h = np.atleast_2d(np.asarray(h, dtype=complex))
    K = h.shape[0]
    return NetworkScenario(channels=h, bandwidth=B, noise_psd=psd, tx_power=np.full(K, p),
                           distances=np.ones(K))


def reference_sinr(k, h, w, p, pi, noise):
    """Written out term by term, no vectorization."""
    inner = sum(np.conj(h[k][z]) * w[k][z] for z in range(len(w[k])))
    num = (inner.real ** 2 + inner.imag ** 2) * p[k]
    den = noise
    for j in range(len(h)):
        if j == k:
            continue
        ij = sum(np.conj(h[j][z]) * w[k][z] for z in range(len(w[k])))
        den += pi[k][j] * (ij.real ** 2 + ij.imag ** 2) * p[j]
    return num / den


def random_instance(rng, K=3, Z=4):
    h = (rng.standard_normal((K, Z)) + 1j * rng.standard_normal((K, Z))) * rng.uniform(0.1, 3)
    w = rng.standard_normal((K, Z)) + 1j * rng.standard_normal((K, Z))
    w /= np.linalg.norm(w, axis=1, keepdims=True)
    perm = rng.permutation(K)
    pos = np.empty(K, int)
    pos[perm] = np.arange(K)
    pi = (pos[:, None] < pos[None, :]).astype(float)
    p = rng.uniform(0.1, 2.0, K)
    scen = NetworkScenario(channels=h, bandwidth=rng.uniform(1e5, 1e7),
                           noise_psd=rng.uniform(1e-8, 1e-6), tx_power=p, distances=np.ones(K))
    return scen, w, pi


class TestScenario:
    def test_seeded_sampling_is_bit_identical(self):
        a = sample_rayleigh_scenario(7, 3, 4, [50, 80, 120], 3)
        b = sample_rayleigh_scenario(7, 3, 4, [50, 80, 120], 3)
        assert a.channels.shape == (3, 4)
        assert np.array_equal(a.channels, b.channels)

    def test_unit_pathloss_has_unit_mean_power(self):
        rng = np.random.default_rng(7)
        from semnoma.channel import rayleigh_channels
        draws = np.concatenate([rayleigh_channels(rng, [1.0], 1, 0.0)[:, 0] for _ in range(100_000)])
        assert abs(np.mean(np.abs(draws) ** 2) - 1.0) < 0.02

    def test_zero_sus_rejected(self):
        with pytest.raises(ConfigurationError):
            sample_rayleigh_scenario(7, 0, 4, [], 3)

    @pytest.mark.parametrize("kwargs", [
        dict(bandwidth=0.0), dict(noise_psd=-1.0), dict(tx_power=np.array([1.0, 0.0])),
        dict(big_m=2.0),
    ])
    def test_invalid_fields_rejected(self, kwargs):
        base = dict(channels=np.ones((2, 2), complex), bandwidth=1.0, noise_psd=1.0,
                    tx_power=np.ones(2), distances=np.ones(2))
        base.update(kwargs)
        with pytest.raises(ConfigurationError):
            NetworkScenario(**base)

    def test_non_finite_channel_rejected(self):
        with pytest.raises(ConfigurationError):
            _scenario([[1.0, np.nan]])

    def test_default_big_m_exceeds_k(self):
        s = sample_rayleigh_scenario(1, 4, 2, [10, 20, 30, 40], 2)
        assert s.big_m > s.num_sus

    def test_json_round_trip(self, tmp_path):
        s = sample_rayleigh_scenario(3, 3, 4, [200, 300, 400], 3.76, reference_gain_db=-35.3)
        s.save(tmp_path / "s.json")
        t = NetworkScenario.load(tmp_path / "s.json")
        assert np.allclose(t.channels, s.channels, rtol=1e-15, atol=0)
        assert np.allclose(t.tx_power, s.tx_power, rtol=1e-12)
        assert t.noise_psd == pytest.approx(s.noise_psd, rel=1e-12)
        assert t.rng_seed == 3

    def test_arrays_are_read_only(self):
        s = _scenario([[1.0, 0.0]])
        with pytest.raises(ValueError):
            s.channels[0, 0] = 2.0


class TestUnits:
    def test_dbm(self):
        assert dbm_to_watts(30) == pytest.approx(1.0)
        assert dbm_to_watts(0) == pytest.approx(1e-3)

    def test_noise_density(self):
        assert dbmhz_to_whz(-174) == pytest.approx(10 ** (-17.4) * 1e-3, rel=1e-12)
        assert dbmhz_to_whz(-174) == pytest.approx(3.98e-21, rel=1e-3)


class TestSinr:
    def test_single_user(self):
        # |h^H w|^2 p = 3 B sigma^2
        s = _scenario([[math.sqrt(3.0)]])
        link = LinkState(np.ones((1, 1)), np.zeros((1, 1)))
        assert sinr(0, s, link) == pytest.approx(3.0)

    def test_one_interferer(self):
        s = _scenario([[math.sqrt(3.0)], [1.0]])
        link = LinkState(np.ones((2, 1)), np.array([[0, 1], [0, 0]]))
        assert sinr(0, s, link) == pytest.approx(1.5)
        assert sinr(1, s, link) == pytest.approx(1.0)

    def test_matches_reference_on_random_instances(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            scen, w, pi = random_instance(rng)
            vec = sinr_all(scen, w, pi)
            link = LinkState(w, pi)
            for k in range(3):
                ref = reference_sinr(k, scen.channels, w, scen.tx_power, pi, scen.noise_power)
                assert vec[k] == pytest.approx(ref, rel=1e-12)
                assert sinr(k, scen, link) == pytest.approx(ref, rel=1e-12)

    def test_gain_matrix_orientation(self):
        h = np.array([[1.0, 0.0], [0.0, 2.0]], complex)
        s = _scenario(h)
        w = np.array([[1.0, 0.0], [0.0, 1.0]], complex)
        G = gain_matrix(s, w)
        assert np.allclose(G, [[1.0, 0.0], [0.0, 4.0]])

    @settings(max_examples=60, deadline=None)
    @given(seed=st.integers(0, 10_000), scale=st.floats(1.01, 10.0))
    def test_strictly_decreasing_in_interferer_gain(self, seed, scale):
        rng = np.random.default_rng(seed)
        scen, w, _ = random_instance(rng)
        pi = np.ones((3, 3)) - np.eye(3)
        base = sinr_all(scen, w, pi)[0]
        h = np.array(scen.channels)
        h[1] *= math.sqrt(scale)
        louder = sinr_all(scen.replace(channels=h), w, pi)[0]
        if gain_matrix(scen, w)[0, 1] > 0:
            assert louder < base

    @settings(max_examples=60, deadline=None)
    @given(seed=st.integers(0, 10_000))
    def test_interference_free_row_dominates(self, seed):
        rng = np.random.default_rng(seed)
        scen, w, pi = random_instance(rng)
        free = capacities(scen, w, np.zeros((3, 3)))
        loaded = capacities(scen, w, pi)
        assert np.all(free >= loaded)


class TestCapacityAndLatency:
    def test_capacity_plugin(self):
        assert rate_from_sinr(2e6, 3.0) == pytest.approx(4e6)
        assert rate_from_sinr(2e6, 0.0) == 0.0

    def test_capacity_matches_reference(self):
        rng = np.random.default_rng(1)
        for _ in range(100):
            scen, w, pi = random_instance(rng)
            link = LinkState(w, pi)
            for k in range(3):
                ref = scen.bandwidth * math.log2(
                    1 + reference_sinr(k, scen.channels, w, scen.tx_power, pi, scen.noise_power))
                assert capacity(k, scen, link) == pytest.approx(ref, rel=1e-12)

    def test_capacity_monotone_in_signal_gain(self):
        s1 = _scenario([[1.0]])
        s2 = _scenario([[2.0]])
        link = LinkState(np.ones((1, 1)), np.zeros((1, 1)))
        assert capacity(0, s2, link) >= capacity(0, s1, link)

    def test_latency_examples(self):
        assert system_latency([4e6, 2e6], [4e6, 4e6]) == 1.0
        assert system_latency([0, 0], [1, 1]) == 0.0
        assert system_latency([1, 0], [0, 1]) == INFEASIBLE_LATENCY
        assert math.isinf(INFEASIBLE_LATENCY)

    def test_zero_rate_without_demand_is_fine(self):
        assert system_latency([0, 2], [0, 1]) == 2.0

    def test_per_su_latency(self):
        out = per_su_latency([2, 0, 3], [1, 0, 0])
        assert out[0] == 2 and out[1] == 0 and math.isinf(out[2])

    @settings(max_examples=100, deadline=None)
    @given(q=st.lists(st.floats(0, 1e7), min_size=1, max_size=6), seed=st.integers(0, 1000))
    def test_latency_permutation_invariant(self, q, seed):
        rng = np.random.default_rng(seed)
        q = np.array(q)
        r = rng.uniform(1e3, 1e7, len(q))
        perm = rng.permutation(len(q))
        assert system_latency(q, r) == system_latency(q[perm], r[perm])


class TestLinkState:
    def test_rejects_non_unit_beams(self):
        with pytest.raises(ConfigurationError):
            LinkState(np.array([[2.0, 0.0]]), np.zeros((1, 1)))

    def test_rejects_negative_demand(self):
        with pytest.raises(ConfigurationError):
            LinkState(np.array([[1.0, 0.0]]), np.zeros((1, 1)), demands=[-1.0])
