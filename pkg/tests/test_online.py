"""Online recognizer tests.

The oracles here are plain-Python re-derivations: scalar distance math plus
explicit claim loops, independent of the vectorized implementation, compared
for exact equality on random observations.
"""

import math

import numpy as np
import pytest

from conftest import (make_random_observation, make_separated_observation,
                      nearest_cluster_oracle, separation_margin)

from cubecolor import online
from cubecolor.online import (CENTER_INDICES, COLOR_NAMES, N_BLOCKS, N_FACES,
                              block_distance, default_color_weights, dwlp,
                              knn_baseline, validate_center_colors, wlhp,
                              wlhp_star)


def sim_distance(a, b, w=(1.0, 1.0, 1.0)):
    dh = abs(a[0] - b[0])
    dh = min(dh, 360.0 - dh) / 360.0
    return math.sqrt((w[0] * dh) ** 2 + (w[1] * (a[1] - b[1])) ** 2
                     + (w[2] * (a[2] - b[2])) ** 2)


def sim_nearest(feats, anchor, pool, count, w):
    ranked = sorted(pool, key=lambda j: (sim_distance(feats[anchor], feats[j], w), j))
    return ranked[:count]


def sim_knn(feats):
    labels = [-1] * N_BLOCKS
    pool = [i for i in range(N_BLOCKS) if i not in CENTER_INDICES]
    for face in range(N_FACES):
        center = CENTER_INDICES[face]
        labels[center] = face
        for idx in sim_nearest(feats, center, pool, 8, (1, 1, 1)):
            labels[idx] = face
            pool.remove(idx)
    return labels


def sim_wlhp(feats):
    """Stepwise simulation of the two-pass hierarchic schedule."""
    labels = [-1] * N_BLOCKS
    pool = [i for i in range(N_BLOCKS) if i not in CENTER_INDICES]
    first = {}
    for face in range(N_FACES):
        labels[CENTER_INDICES[face]] = face
        first[face] = sim_nearest(feats, CENTER_INDICES[face], pool, 2, (1, 1, 1))
        for idx in first[face]:
            labels[idx] = face
            pool.remove(idx)
    for face in range(N_FACES):
        for mid in first[face]:
            for idx in sim_nearest(feats, mid, pool, 3, (1, 1, 1)):
                labels[idx] = face
                pool.remove(idx)
    return labels


class TestBlockDistance:
    def test_zero_self_distance(self):
        a = np.array([123.0, 0.4, 0.9])
        assert block_distance(a, a) == 0.0

    def test_circular_hue_wrap(self):
        a = np.array([350.0, 0.5, 0.5])
        b = np.array([10.0, 0.5, 0.5])
        assert np.isclose(block_distance(a, b), 20.0 / 360.0, atol=1e-15)

    def test_zero_hue_weight_ignores_hue(self):
        a = np.array([10.0, 0.3, 0.8])
        b = np.array([300.0, 0.7, 0.5])
        want = math.hypot(0.4, 0.3)
        assert np.isclose(block_distance(a, b, (0, 1, 1)), want, atol=1e-15)

    def test_negative_weights_rejected(self):
        with pytest.raises(ValueError):
            block_distance(np.zeros(3), np.zeros(3), (-1, 1, 1))

    def test_pseudo_metric_properties(self):
        rng = np.random.default_rng(5)
        for _ in range(10_000):
            pts = np.stack([rng.uniform(0, 360, 3), rng.uniform(0, 1, 3),
                            rng.uniform(0, 1, 3)], axis=1)
            a, b, c = pts
            assert block_distance(a, a) == 0.0
            assert abs(block_distance(a, b) - block_distance(b, a)) <= 1e-12
            assert (block_distance(a, c)
                    <= block_distance(a, b) + block_distance(b, c) + 1e-12)


class TestStructural:
    """Every recognizer: 9 blocks per face, centers pinned, deterministic."""

    @pytest.mark.parametrize("runner", [
        knn_baseline, wlhp, wlhp_star,
        lambda f: dwlp(f, COLOR_NAMES),
    ], ids=["knn", "wlhp", "wlhp_star", "dwlp"])
    def test_random_observations(self, runner):
        for seed in range(100):
            feats = make_random_observation(seed)
            labels = runner(feats)
            assert np.array_equal(np.bincount(labels, minlength=6), [9] * 6)
            for face in range(N_FACES):
                assert labels[CENTER_INDICES[face]] == face
            assert np.array_equal(labels, runner(feats))  # deterministic

    def test_observation_validation(self):
        with pytest.raises(ValueError):
            knn_baseline(np.zeros((53, 3)))
        bad = make_random_observation(0)
        bad[3, 0] = 361.0
        with pytest.raises(ValueError):
            wlhp(bad)


class TestKnnBaseline:
    def test_separated_clusters_recovered(self):
        for seed in range(20):
            feats, truth = make_separated_observation(seed)
            oracle = nearest_cluster_oracle(feats, truth)
            assert np.array_equal(oracle, truth)
            assert np.array_equal(knn_baseline(feats), truth)

    def test_identical_features_assign_by_index(self):
        feats = np.tile([100.0, 0.5, 0.5], (N_BLOCKS, 1))
        labels = knn_baseline(feats)
        # every distance ties, so faces take the lowest-index pool blocks
        pool = [i for i in range(N_BLOCKS) if i not in CENTER_INDICES]
        expected = np.full(N_BLOCKS, -1)
        for face in range(N_FACES):
            expected[CENTER_INDICES[face]] = face
            take, pool = pool[:8], pool[8:]
            expected[take] = face
        assert np.array_equal(labels, expected)

    def test_matches_simulation_oracle(self):
        for seed in range(50):
            feats = make_random_observation(1000 + seed)
            assert np.array_equal(knn_baseline(feats), sim_knn(feats))


class TestWlhp:
    def test_separated_clusters_match_knn_and_truth(self):
        for seed in range(20):
            feats, truth = make_separated_observation(100 + seed)
            got = wlhp(feats)
            assert np.array_equal(got, truth)
            assert np.array_equal(got, knn_baseline(feats))

    def test_edge_center_still_recovers_cluster(self):
        # cluster members strung out in hue; the center sits at one edge but
        # stays nearer its own members than any other cluster at every step
        rng = np.random.default_rng(3)
        hues = np.array([0.0, 60.0, 120.0, 180.0, 240.0, 300.0])
        truth = np.empty(N_BLOCKS, dtype=np.intp)
        feats = np.empty((N_BLOCKS, 3))
        order = rng.permutation([i for i in range(N_BLOCKS)
                                 if i not in CENTER_INDICES]).tolist()
        for face in range(N_FACES):
            center = CENTER_INDICES[face]
            truth[center] = face
            feats[center] = [hues[face] % 360.0, 0.7, 0.7]
            for step in range(8):  # members drift away from the center
                idx = order.pop()
                truth[idx] = face
                feats[idx] = [(hues[face] + 2.0 * (step + 1)) % 360.0, 0.7, 0.7]
        got = wlhp(feats)
        assert np.array_equal(got, truth)
        assert got.tolist() == sim_wlhp(feats)

    def test_matches_simulation_oracle(self):
        for seed in range(50):
            feats = make_random_observation(2000 + seed)
            assert wlhp(feats).tolist() == sim_wlhp(feats)

    def test_neighbor_query_counts(self, monkeypatch):
        calls = []
        real = online._nearest_in_pool

        def spy(features, anchor, pool, count, weights):
            calls.append(count)
            return real(features, anchor, pool, count, weights)

        monkeypatch.setattr(online, "_nearest_in_pool", spy)
        wlhp(make_random_observation(9))
        assert calls.count(2) == 6  # pass 1: two neighbors per face
        assert calls.count(3) == 12  # pass 2: three per first-level block
        assert len(calls) == 18


class TestWlhpStar:
    def test_low_saturation_blocks_all_white(self):
        rng = np.random.default_rng(11)
        white_face = 3
        chrom_hues = {0: 40.0, 1: 110.0, 2: 180.0, 4: 250.0, 5: 320.0}
        truth = np.empty(N_BLOCKS, dtype=np.intp)
        feats = np.empty((N_BLOCKS, 3))
        order = rng.permutation([i for i in range(N_BLOCKS)
                                 if i not in CENTER_INDICES]).tolist()
        blocks_of = {f: [CENTER_INDICES[f]] for f in range(N_FACES)}
        for face in range(N_FACES):
            for _ in range(8):
                blocks_of[face].append(order.pop())
        for face, blocks in blocks_of.items():
            for idx in blocks:
                truth[idx] = face
                if face == white_face:
                    feats[idx] = [rng.uniform(0, 360), rng.uniform(0.02, 0.1),
                                  rng.uniform(0.85, 0.95)]
                else:
                    feats[idx] = [chrom_hues[face] + rng.uniform(-3, 3),
                                  rng.uniform(0.5, 0.9), rng.uniform(0.5, 0.9)]
        labels = wlhp_star(feats)
        white_blocks = {i for i in range(N_BLOCKS) if truth[i] == white_face}
        assert {i for i in range(N_BLOCKS) if labels[i] == white_face} == white_blocks

    def test_unit_hue_weight_equals_wlhp_on_separable_data(self):
        for seed in range(10):
            feats, truth = make_separated_observation(300 + seed)
            got = wlhp_star(feats, hue_weight=1.0)
            assert np.array_equal(got, wlhp(feats))
            assert np.array_equal(got, truth)

    def test_separated_clusters_recovered(self):
        for seed in range(20):
            feats, truth = make_separated_observation(400 + seed)
            assert np.array_equal(wlhp_star(feats), truth)

    def test_hue_weight_below_one_rejected(self):
        with pytest.raises(ValueError):
            wlhp_star(make_random_observation(1), hue_weight=0.5)


class TestDwlp:
    def test_separated_clusters_identity_weights(self):
        ident = {name: (1.0, 1.0, 1.0) for name in COLOR_NAMES}
        for seed in range(20):
            feats, truth = make_separated_observation(500 + seed)
            got = dwlp(feats, COLOR_NAMES, color_weights=ident)
            assert np.array_equal(got, truth)
            assert np.array_equal(got, nearest_cluster_oracle(feats, truth))

    def test_separated_clusters_default_weights(self):
        for seed in range(20):
            feats, truth = make_separated_observation(600 + seed)
            assert np.array_equal(dwlp(feats, COLOR_NAMES), truth)

    def test_hue_consistent_block_claimed_under_green_weights(self):
        # two candidates exactly equidistant from the green center under unit
        # weights; the hue-emphasizing green weights must pick the
        # hue-consistent one
        g = np.array([120.0, 0.8, 0.7])
        x3 = np.array([120.0, 0.7, 0.6])  # green, shifted in s and v
        x2 = np.array([156.0, 0.74, 0.78])  # foreign hue, closer in s and v
        d3 = block_distance(g, x3)  # sqrt(0.1^2 + 0.1^2)
        d2 = block_distance(g, x2)  # sqrt((36/360)^2 + 0.06^2 + 0.08^2)
        assert abs(d3 - d2) <= 1e-12
        green_w = default_color_weights()["green"]
        assert block_distance(g, x3, green_w) < block_distance(g, x2, green_w)

        rng = np.random.default_rng(21)
        truth = np.empty(N_BLOCKS, dtype=np.intp)
        feats = np.empty((N_BLOCKS, 3))
        bases = {0: [10.0, 0.05, 0.95], 1: [60.0, 0.85, 0.8],
                 2: [345.0, 0.85, 0.8], 3: [25.0, 0.85, 0.8],
                 4: [120.0, 0.8, 0.7], 5: [220.0, 0.85, 0.8]}
        order = rng.permutation([i for i in range(N_BLOCKS)
                                 if i not in CENTER_INDICES]).tolist()
        members = {f: [] for f in range(N_FACES)}
        for face in range(N_FACES):
            truth[CENTER_INDICES[face]] = face
            feats[CENTER_INDICES[face]] = bases[face]
            for _ in range(8):
                idx = order.pop()
                truth[idx] = face
                members[face].append(idx)
                jitter = rng.uniform(-0.004, 0.004, 3) * [360.0, 1.0, 1.0]
                feats[idx] = bases[face] + jitter
                feats[idx, 0] %= 360.0
        planted_green, planted_blue = members[4][0], members[5][0]
        feats[planted_green] = x3
        truth[planted_green] = 4
        feats[planted_blue] = x2
        truth[planted_blue] = 5
        labels = dwlp(feats, COLOR_NAMES)
        assert labels[planted_green] == 4
        assert labels[planted_blue] != 4

    def test_default_weights_shape_and_ranking(self):
        weights = default_color_weights()
        assert set(weights) == set(COLOR_NAMES)
        for name, triple in weights.items():
            assert len(triple) == 3
            assert all(w >= 0 for w in triple)
            assert any(w > 0 for w in triple)
        assert weights["red"][0] > weights["green"][0]
        assert weights["orange"][0] > weights["green"][0]

    def test_default_weights_beat_identity_on_drifted_benchmark(self):
        from cubecolor.evaluate import drift_benchmark, online_accuracy
        _, drifted = drift_benchmark(n_states=100, seed=42)
        default = online_accuracy(drifted, methods=("dwlp",))
        ident = online_accuracy(drifted, methods=("dwlp",),
                                color_weights={n: (1.0, 1.0, 1.0)
                                               for n in COLOR_NAMES})
        assert default.values[0, -1] >= ident.values[0, -1]

    def test_center_colors_validation(self):
        feats = make_random_observation(2)
        with pytest.raises(ValueError):
            dwlp(feats, ["white"] * 6)
        with pytest.raises(ValueError):
            dwlp(feats, COLOR_NAMES[:5])
        assert validate_center_colors(
            {i: name for i, name in enumerate(COLOR_NAMES)}) == COLOR_NAMES

    def test_missing_weight_rejected(self):
        feats = make_random_observation(3)
        weights = default_color_weights()
        del weights["red"]
        with pytest.raises(ValueError):
            dwlp(feats, COLOR_NAMES, color_weights=weights)


class TestSeparationFixture:
    def test_margin_is_strict(self, separated_observation):
        feats, truth = separated_observation
        intra, inter = separation_margin(feats, truth)
        assert intra < inter
