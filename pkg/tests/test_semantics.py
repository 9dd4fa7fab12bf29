import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from semnoma.errors import ConfigurationError
from semnoma.semantics import (CatalogLayout, FeatureCatalog, Heatmap, SegmentationMask,
                               SelectionMask, binarize, catalog_from_grids, contribution_vector,
                               dependency_matrix, heatmap_from_attribution, prune_textual,
                               prune_visual, synthesize_catalog, textual_importance,
                               traffic_demand, traffic_split, visual_importance)


def jaccard_loop(supports):
    n = len(supports)
    D = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            a = set(zip(*np.nonzero(supports[i])))
            b = set(zip(*np.nonzero(supports[j])))
            D[i, j] = len(a & b) / len(a | b) if a | b else 0.0
    return D


def importance_loop(C, D):
    return np.array([sum(C[i] * D[i, j] for j in range(len(C))) for i in range(len(C))])


def visual_loop(masks, supports):
    out = []
    for m in masks:
        cells = set(zip(*np.nonzero(m)))
        out.append(sum(len(cells & set(zip(*np.nonzero(h)))) / len(cells) for h in supports))
    return np.array(out)


def random_supports(rng, n, shape=(12, 12), density=0.3):
    return [rng.random(shape) < density for _ in range(n)]


class TestHeatmap:
    def test_negative_attributions_vanish(self):
        regions = np.random.default_rng(0).random((3, 4, 4))
        assert np.all(heatmap_from_attribution([-1.0, -0.5, 0.0], regions) == 0.0)

    def test_single_region_identity(self):
        pattern = np.arange(16.0).reshape(4, 4)
        assert np.array_equal(heatmap_from_attribution([1.0], pattern[None]), pattern)

    def test_two_region_combination(self):
        A = np.zeros((2, 2, 2))
        A[0, 0, 0] = 1.0
        A[0, 1, 1] = 2.0
        A[1, 1, 1] = 1.0
        A[1, 0, 1] = 3.0
        H = heatmap_from_attribution([0.5, -1.0], A)
        expected = np.maximum(0.5 * A[0] - 1.0 * A[1], 0.0)
        assert np.array_equal(H, expected)
        assert H[0, 0] == 0.5 and H[1, 1] == 0.0 and H[0, 1] == 0.0

    def test_region_mismatch(self):
        with pytest.raises(ConfigurationError):
            heatmap_from_attribution([1.0, 2.0], np.ones((3, 2, 2)))

    def test_heatmap_rejects_negative(self):
        with pytest.raises(ConfigurationError):
            Heatmap("x", -np.ones((2, 2)))

    def test_mask_rejects_empty(self):
        with pytest.raises(ConfigurationError):
            SegmentationMask("x", np.zeros((2, 2), bool))


class TestBinarize:
    def test_constant(self):
        assert binarize(np.full((3, 3), 0.7), 1.0).all()

    def test_zero(self):
        assert not binarize(np.zeros((3, 3)), 0.25).any()

    def test_ramp(self):
        ramp = np.arange(1, 101, dtype=float).reshape(10, 10)
        sup = binarize(ramp, 0.5)
        assert sup.sum() == sum(1 for v in ramp.ravel() if v >= 50.0)
        assert sup.sum() == 51

    @settings(max_examples=50, deadline=None)
    @given(seed=st.integers(0, 1000), scale=st.floats(1e-3, 1e3))
    def test_amplitude_invariant(self, seed, scale):
        h = np.random.default_rng(seed).random((8, 8))
        assert np.array_equal(binarize(h, 0.3), binarize(scale * h, 0.3))


class TestScores:
    def test_dependency_examples(self):
        a = np.zeros((20, 20), bool)
        a[:5, :] = True
        c = np.zeros_like(a)
        c[10:15, :] = True
        D = dependency_matrix([a, a.copy(), c])
        assert D[0, 1] == 1.0 and D[0, 2] == 0.0
        h1 = np.zeros((20, 20), bool)
        h1[:5] = True
        h2 = np.zeros((20, 20), bool)
        h2[:5, 10:] = True
        h2[5:10, 0:10] = True                     # 50 overlapping + 50 outside
        assert h1.sum() == 100 and h2.sum() == 100 and (h1 & h2).sum() == 50
        assert dependency_matrix([h1, h2])[0, 1] == pytest.approx(1 / 3)

    def test_empty_support_conventions(self):
        e = np.zeros((3, 3), bool)
        f = np.ones((3, 3), bool)
        D = dependency_matrix([e, f, e])
        assert D[0, 0] == 0 and D[0, 2] == 0 and D[1, 1] == 1
        assert np.allclose(contribution_vector([e, e]), [0.5, 0.5])

    def test_contribution_examples(self):
        assert np.array_equal(contribution_vector([np.ones((2, 2), bool)]), [1.0])
        a = np.zeros(100, bool)
        a[:30] = True
        b = np.zeros(100, bool)
        b[:70] = True
        assert np.allclose(contribution_vector([a, b]), [0.3, 0.7])

    def test_textual_importance_plugin(self):
        C = np.array([0.5, 0.5])
        D = np.array([[1.0, 1.0], [1.0, 1.0]])
        assert textual_importance(C, D)[0] == 1.0
        D = np.eye(3)
        C = np.array([0.2, 0.3, 0.5])
        assert np.allclose(textual_importance(C, D), C)
        assert np.allclose(textual_importance(C, D, include_diagonal=False), 0.0)

    def test_visual_examples(self):
        m = np.zeros((10, 10), bool)    # 100 cells
        m[:, :] = True
        h1 = np.zeros_like(m)
        h1.flat[:40] = True
        h2 = np.zeros_like(m)
        h2.flat[90:] = True
        assert visual_importance([m], [h1, h2])[0] == pytest.approx(0.5)
        small = np.zeros_like(m)
        small[0, 0] = True
        assert visual_importance([small], [h1])[0] == 1.0
        far = np.zeros_like(m)
        far[9, 0] = True
        assert visual_importance([far], [h1])[0] == 0.0

    def test_random_instances_match_loops(self):
        rng = np.random.default_rng(0)
        for _ in range(30):
            S = random_supports(rng, 4)
            D = dependency_matrix(S)
            assert np.allclose(D, jaccard_loop(S), rtol=1e-12, atol=0)
            C = contribution_vector(S)
            assert np.sum(C) == pytest.approx(1.0, abs=1e-12)
            assert np.allclose(textual_importance(C, D), importance_loop(C, D), rtol=1e-12, atol=0)
            masks = [m for m in random_supports(rng, 3) if m.any()]
            assert np.allclose(visual_importance(masks, S), visual_loop(masks, S), rtol=1e-12, atol=0)

    @settings(max_examples=60, deadline=None)
    @given(seed=st.integers(0, 10_000), n=st.integers(1, 6))
    def test_dependency_properties(self, seed, n):
        rng = np.random.default_rng(seed)
        S = random_supports(rng, n, density=rng.uniform(0.05, 0.6))
        D = dependency_matrix(S)
        assert np.allclose(D, D.T)
        assert np.all((D >= 0) & (D <= 1))
        for i, s in enumerate(S):
            if s.any():
                assert D[i, i] == 1.0

    @settings(max_examples=60, deadline=None)
    @given(seed=st.integers(0, 10_000))
    def test_visual_score_bounded_by_retained_count(self, seed):
        rng = np.random.default_rng(seed)
        S = random_supports(rng, 3)
        masks = [m for m in random_supports(rng, 4, density=0.2) if m.any()]
        Iv = visual_importance(masks, S)
        assert np.all((Iv >= 0) & (Iv <= len(S)))

    @settings(max_examples=60, deadline=None)
    @given(seed=st.integers(0, 10_000), scale=st.floats(0.01, 100))
    def test_importance_amplitude_invariant(self, seed, scale):
        rng = np.random.default_rng(seed)
        H = [rng.random((8, 8)) for _ in range(3)]
        a = textual_importance(contribution_vector([binarize(h) for h in H]),
                               dependency_matrix([binarize(h) for h in H]))
        b = textual_importance(contribution_vector([binarize(scale * h) for h in H]),
                               dependency_matrix([binarize(scale * h) for h in H]))
        assert np.allclose(a, b)


class TestPruning:
    def test_examples(self):
        assert prune_textual([0.6, 0.4], 0.5) == [0]
        assert prune_textual([0.6, 0.4], 0.0) == [0, 1]
        assert prune_textual([0.1, 0.3, 0.2], 0.5) == [1]
        assert prune_visual([0.05, 0.2, 0.1], 0.1) == [1, 2]
        assert prune_visual([0.01, 0.02], 0.1) == [1]
        assert prune_visual([0.01, 0.02], 0.0) == [0, 1]

    @settings(max_examples=100, deadline=None)
    @given(scores=st.lists(st.floats(0, 3), min_size=1, max_size=8),
           lo=st.floats(0, 3), hi=st.floats(0, 3))
    def test_monotone_in_threshold(self, scores, lo, hi):
        lo, hi = min(lo, hi), max(lo, hi)
        # the keep-top-1 fallback is the argmax, which any lower threshold also keeps
        assert set(prune_textual(scores, hi)) <= set(prune_textual(scores, lo))
        assert set(prune_visual(scores, hi)) <= set(prune_visual(scores, lo))

    def test_catalog_monotone_in_both_thresholds(self):
        cat = synthesize_catalog(3, num_sus=2)
        for su in cat:
            counts_t = [len(su.with_thresholds(xi_t=x).retained_textual) for x in np.linspace(0, 1, 11)]
            counts_v = [len(su.with_thresholds(xi_v=x).retained_visual) for x in np.linspace(0, 1, 11)]
            assert counts_t == sorted(counts_t, reverse=True)
            assert counts_v == sorted(counts_v, reverse=True)


class TestTraffic:
    def _catalog(self):
        g = np.zeros((4, 4))
        g[0, 0] = 1.0
        m = np.zeros((4, 4), bool)
        m[1, 1] = True
        return catalog_from_grids([g, g], [m], [8e3, 2e4], [5e3])

    def test_examples(self):
        su = self._catalog()
        assert traffic_demand(np.zeros(3, bool), su, header_bits=100.0) == 100.0
        assert traffic_demand(np.array([1, 1, 0], bool), su) == 2.8e4
        assert traffic_split(np.array([1, 0, 1], bool), su) == (8e3, 5e3)

    def test_random_catalog_matches_sum(self):
        cat = synthesize_catalog(9, num_sus=3)
        rng = np.random.default_rng(0)
        for k, su in enumerate(cat):
            bits = rng.random(su.num_features) < 0.5
            oracle = sum(s for s, b in zip(su.sizes, bits) if b)
            assert traffic_demand(bits, cat, k) == pytest.approx(oracle, rel=1e-12)

    def test_selection_mask_restricted_to_candidates(self):
        with pytest.raises(ConfigurationError):
            SelectionMask([1, 0, 1], [1, 1, 0])
        s = SelectionMask([1, 0, 0], [1, 1, 0])
        assert s.ratio == 0.5


class TestSynthesis:
    def test_deterministic(self, tmp_path):
        a = synthesize_catalog(5, num_sus=2)
        b = synthesize_catalog(5, num_sus=2)
        for x, y in zip(a, b):
            assert np.array_equal(x.supports, y.supports)
            assert np.array_equal(x.sizes, y.sizes)

    def test_zero_overlap_gives_identity(self):
        for seed in range(10):
            su = synthesize_catalog(seed, CatalogLayout(overlap=0.0))[0]
            assert np.array_equal(su.dependency, np.eye(su.num_textual))

    def test_masks_tile_the_grid(self):
        su = synthesize_catalog(1)[0]
        total = np.sum([m.grid.astype(int) for m in su.visual], axis=0)
        assert np.all(total == 1)

    def test_low_importance_features_get_pruned(self):
        for seed in range(10):
            su = synthesize_catalog(seed)[0]
            assert su.pruned_mask().sum() < su.num_features
            # the weak textual features are the last two
            assert not su.pruned_mask()[3] and not su.pruned_mask()[4]

    def test_export_import_export_is_byte_identical(self, tmp_path):
        cat = synthesize_catalog(2, num_sus=3)
        (tmp_path / "a").mkdir()
        (tmp_path / "b").mkdir()
        cat.save(tmp_path / "a")
        back = FeatureCatalog.load(tmp_path / "a")
        back.save(tmp_path / "b")
        for f in sorted((tmp_path / "a").iterdir()):
            assert f.read_bytes() == (tmp_path / "b" / f.name).read_bytes()
        for x, y in zip(cat, back):
            assert np.array_equal(x.importance, y.importance)

    def test_save_needs_existing_dir(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            synthesize_catalog(0).save(tmp_path / "missing")

    def test_import_rejects_truncated_grid(self, tmp_path):
        synthesize_catalog(0).save(tmp_path)
        f = tmp_path / "su0_masks.u8"
        f.write_bytes(f.read_bytes()[:-1])
        with pytest.raises(ConfigurationError):
            FeatureCatalog.load(tmp_path)

    def test_shared_catalog(self):
        cat = synthesize_catalog(0, num_sus=3, shared=True)
        assert cat.shared and cat[0] is cat[2]

    def test_grid_shape_mismatch(self):
        with pytest.raises(ConfigurationError):
            catalog_from_grids([np.ones((2, 2))], [np.ones((3, 3), bool)], [1.0], [1.0])
