import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from mexp.errors import DataError
from mexp.selection import (
    PairFeature,
    build_pairs,
    chi_square,
    default_p_grid,
    fit_selection,
    laplacian_scores,
    pairwise_group_distances,
    select_groups,
    weight_matrix,
)


def brute_force_score(features, r):
    """Independent evaluation: sum over unordered pairs of
    (g_ru - g_rv)^2 W_uv divided by the D-weighted variance."""
    W = weight_matrix(features)
    n = len(features)
    g = np.array([f.values[r] for f in features])
    num = 0.0
    for u in range(n):
        for v in range(u + 1, n):
            num += (g[u] - g[v]) ** 2 * W[u, v]
    d = W.sum(axis=1)
    mu = (g * d).sum() / d.sum()
    var = (d * (g - mu) ** 2).sum()
    return num / var


def random_features(rng, n=6, dims=5, zero_dim=None):
    feats = []
    for i in range(n):
        values = rng.uniform(0, 3, dims)
        if zero_dim is not None:
            values[zero_dim] = 1.5
        feats.append(PairFeature(values, 1 if i % 2 else -1, (f"a{i}", f"b{i}")))
    return feats


class FakeDescriptor:
    def __init__(self, hists, clip_id):
        self.clip_id = clip_id
        self.groups = [type("G", (), {"histogram": h})() for h in hists]

    def histograms(self):
        return [g.histogram for g in self.groups]

    def concatenated(self, group_indices=None):
        picked = (
            self.groups
            if group_indices is None
            else [self.groups[i] for i in sorted(group_indices)]
        )
        return np.concatenate([g.histogram for g in picked])


def make_descriptors(rng, n, n_groups=3, bins=4):
    out = []
    for i in range(n):
        hists = [rng.uniform(0, 1, bins) for _ in range(n_groups)]
        hists = [h / h.sum() for h in hists]
        out.append(FakeDescriptor(hists, f"c{i}"))
    return out


class TestChiSquare:
    def test_identical(self):
        h = np.array([0.2, 0.8])
        assert chi_square(h, h) == 0.0

    def test_hand_value(self):
        assert chi_square(np.array([1.0, 0.0]), np.array([0.0, 1.0])) == 2.0

    def test_empty_bins_contribute_zero(self):
        assert chi_square(np.array([0.0, 1.0]), np.array([0.0, 1.0])) == 0.0

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            chi_square(np.zeros(3), np.zeros(4))

    @given(
        arrays(np.float64, 6, elements=st.floats(0, 10)),
        arrays(np.float64, 6, elements=st.floats(0, 10)),
    )
    @settings(max_examples=40)
    def test_symmetry_and_nonnegativity(self, a, b):
        assert chi_square(a, b) == chi_square(b, a)
        assert chi_square(a, b) >= 0.0


class TestBuildPairs:
    def test_pair_count(self):
        rng = np.random.default_rng(0)
        descs = make_descriptors(rng, 5)
        labels = [0, 0, 0, 1, 1]
        feats = build_pairs(descs, labels)
        assert len(feats) == 10  # C(5,2): 3 + 1 same-class, 6 cross
        assert sum(f.label == 1 for f in feats) == 4
        assert sum(f.label == -1 for f in feats) == 6

    def test_no_self_pairs_and_duplicate_descriptor(self):
        rng = np.random.default_rng(1)
        descs = make_descriptors(rng, 4)
        descs[1] = FakeDescriptor([h.copy() for h in descs[0].histograms()], "c1")
        feats = build_pairs(descs, [0, 0, 1, 1])
        assert all(f.pair[0] != f.pair[1] for f in feats)
        dup = next(f for f in feats if set(f.pair) == {"c0", "c1"})
        assert dup.label == 1
        np.testing.assert_array_equal(dup.values, np.zeros(3))

    def test_nonnegative_entries(self):
        rng = np.random.default_rng(2)
        feats = build_pairs(make_descriptors(rng, 6), [0, 0, 0, 1, 1, 1])
        assert all((f.values >= 0).all() for f in feats)

    def test_small_class_rejected(self):
        rng = np.random.default_rng(3)
        with pytest.raises(DataError):
            build_pairs(make_descriptors(rng, 3), [0, 0, 1])

    def test_requires_two_classes(self):
        rng = np.random.default_rng(4)
        with pytest.raises(DataError):
            build_pairs(make_descriptors(rng, 4), [0, 0, 0, 0])


class TestPairwiseGroupDistances:
    def test_matches_chi_square(self):
        rng = np.random.default_rng(5)
        descs = make_descriptors(rng, 4)
        dist = pairwise_group_distances(descs)
        for i in range(4):
            for j in range(4):
                for r in range(3):
                    expected = chi_square(
                        descs[i].histograms()[r], descs[j].histograms()[r]
                    )
                    assert abs(dist[i, j, r] - expected) < 1e-12

    def test_cross_lists(self):
        rng = np.random.default_rng(6)
        a = make_descriptors(rng, 3)
        b = make_descriptors(rng, 2)
        dist = pairwise_group_distances(a, b)
        assert dist.shape == (3, 2, 3)
        assert abs(
            dist[1, 0, 2]
            - chi_square(a[1].histograms()[2], b[0].histograms()[2])
        ) < 1e-12


class TestWeightMatrix:
    def test_identical_same_label(self):
        g = np.array([1.0, 2.0])
        feats = [PairFeature(g, 1, ("a", "b")), PairFeature(g.copy(), 1, ("c", "d"))]
        W = weight_matrix(feats)
        assert W[0, 1] == pytest.approx(1.0, abs=1e-12)
        assert W[0, 0] == 1.0

    def test_different_labels_zero(self):
        feats = [
            PairFeature(np.array([1.0, 0.0]), 1, ("a", "b")),
            PairFeature(np.array([1.0, 0.0]), -1, ("c", "d")),
        ]
        assert weight_matrix(feats)[0, 1] == 0.0

    def test_orthogonal_same_label(self):
        feats = [
            PairFeature(np.array([1.0, 0.0]), 1, ("a", "b")),
            PairFeature(np.array([0.0, 1.0]), 1, ("c", "d")),
        ]
        assert weight_matrix(feats)[0, 1] == 0.0

    def test_zero_norm_convention(self):
        feats = [
            PairFeature(np.zeros(2), 1, ("a", "b")),
            PairFeature(np.array([1.0, 1.0]), 1, ("c", "d")),
        ]
        assert weight_matrix(feats)[0, 1] == 1.0

    def test_symmetric_bounded(self):
        rng = np.random.default_rng(7)
        feats = random_features(rng, n=8)
        W = weight_matrix(feats)
        np.testing.assert_array_equal(W, W.T)
        assert W.max() <= 1.0 and W.min() >= -1.0


class TestLaplacianScores:
    def test_constant_dimension_sentinel(self):
        rng = np.random.default_rng(8)
        feats = random_features(rng, n=6, dims=4, zero_dim=2)
        scores = laplacian_scores(feats)
        assert np.isinf(scores[2])
        assert np.isfinite(scores[[0, 1, 3]]).all()

    def test_two_sample_hand_case(self):
        feats = [
            PairFeature(np.array([1.0, 0.0]), 1, ("a", "b")),
            PairFeature(np.array([1.0, 0.0]), 1, ("c", "d")),
        ]
        scores = laplacian_scores(feats)
        assert np.isinf(scores[0]) and np.isinf(scores[1])

    def test_matches_double_sum_oracle(self):
        rng = np.random.default_rng(9)
        for _ in range(50):
            n = int(rng.integers(4, 13))
            dims = int(rng.integers(2, 11))
            feats = random_features(rng, n=n, dims=dims)
            scores = laplacian_scores(feats)
            for r in range(dims):
                if np.isinf(scores[r]):
                    continue
                assert abs(scores[r] - brute_force_score(feats, r)) < 1e-10

    def test_positive_scaling_invariance(self):
        # scaling a dimension by c > 0 scales the score's numerator and
        # denominator by c^2; the similarity graph is held fixed
        rng = np.random.default_rng(10)
        feats = random_features(rng, n=8, dims=5)
        graph = weight_matrix(feats)
        scores = laplacian_scores(feats, weights=graph)
        scale = rng.uniform(0.1, 50.0, 5)
        scaled = [PairFeature(f.values * scale, f.label, f.pair) for f in feats]
        scores2 = laplacian_scores(scaled, weights=graph)
        np.testing.assert_allclose(scores, scores2, atol=1e-9)

    def test_too_few_samples(self):
        with pytest.raises(DataError):
            laplacian_scores([PairFeature(np.ones(2), 1, ("a", "b"))])


class TestSelectGroups:
    def test_identity_when_all_selected(self):
        scores = np.array([0.4, 0.1, 0.9])
        np.testing.assert_array_equal(sorted(select_groups(scores, 3)), [0, 1, 2])

    def test_smallest_first(self):
        np.testing.assert_array_equal(
            select_groups(np.array([3.0, 1.0, 2.0]), 2), [1, 2]
        )

    def test_tie_breaks_to_lower_index(self):
        np.testing.assert_array_equal(
            select_groups(np.array([1.0, 1.0, 0.5]), 2), [2, 0]
        )

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            select_groups(np.ones(3), 0)
        with pytest.raises(ValueError):
            select_groups(np.ones(3), 4)

    def test_infinite_scores_never_beat_finite(self):
        scores = np.array([np.inf, 0.2, np.inf, 0.1])
        np.testing.assert_array_equal(select_groups(scores, 2), [3, 1])


class TestFitSelection:
    def test_pairs_cover_all_class_pairs(self):
        rng = np.random.default_rng(11)
        descs = make_descriptors(rng, 9)
        labels = [0, 0, 0, 1, 1, 1, 2, 2, 2]
        model = fit_selection(descs, labels, p=2)
        assert set(model.pairs) == {(0, 1), (0, 2), (1, 2)}
        for psel in model.pairs.values():
            assert len(psel.selected) == 2
            assert len(set(psel.selected.tolist())) == 2

    def test_p_grid_covers_extremes(self):
        grid = default_p_grid(84)
        assert grid[0] >= 1 and grid[-1] == 84
        assert grid == sorted(set(grid))
