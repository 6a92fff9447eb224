"""Shared builders for observations and records used across the suite."""

import numpy as np
import pytest

from cubecolor.online import (CENTER_INDICES, COLOR_NAMES, N_BLOCKS, N_FACES,
                              block_distance)

# Cube-like cluster bases aligned with COLOR_NAMES (white, yellow, red,
# orange, green, blue). Chosen so the six clusters separate under unit
# weights, under (0, 1, 1) for white, and under hue-emphasized weights for
# the chromatic colors.
CLUSTER_BASES = np.array([
    [0.0, 0.05, 0.95],
    [60.0, 0.8, 0.75],
    [340.0, 0.8, 0.75],
    [20.0, 0.8, 0.75],
    [120.0, 0.8, 0.75],
    [220.0, 0.8, 0.75],
])


def random_assignment(rng):
    """A valid 9-per-cluster block assignment with face i's center in cluster i."""
    truth = np.empty(N_BLOCKS, dtype=np.intp)
    truth[list(CENTER_INDICES)] = np.arange(N_FACES)
    rest = [i for i in range(N_BLOCKS) if i not in CENTER_INDICES]
    truth[rest] = rng.permutation(np.repeat(np.arange(N_FACES), 8))
    return truth


def separation_margin(features, truth):
    """(max intra-cluster, min inter-cluster) distance under unit weights."""
    dists = np.array([block_distance(features[i], features)
                      for i in range(N_BLOCKS)])
    same = truth[:, None] == truth[None, :]
    off_diag = ~np.eye(N_BLOCKS, dtype=bool)
    return dists[same & off_diag].max(), dists[~same].min()


def make_separated_observation(seed, jitter_h=1.0, jitter_sv=0.005):
    """Six tight clusters with max intra-distance < min inter-distance.

    Returns (features, truth) where truth[j] is block j's cluster (= face).
    """
    rng = np.random.default_rng(seed)
    truth = random_assignment(rng)
    base = CLUSTER_BASES[truth]
    h = (base[:, 0] + rng.uniform(-jitter_h, jitter_h, N_BLOCKS)) % 360.0
    s = base[:, 1] + rng.uniform(-jitter_sv, jitter_sv, N_BLOCKS)
    v = base[:, 2] + rng.uniform(-jitter_sv, jitter_sv, N_BLOCKS)
    features = np.stack([h, s, v], axis=1)
    intra, inter = separation_margin(features, truth)
    assert intra < inter, "construction must be separable"
    return features, truth


def make_random_observation(seed):
    """Uniformly random (and usually meaningless) observation."""
    rng = np.random.default_rng(seed)
    h = rng.uniform(0.0, 360.0, N_BLOCKS)
    s = rng.uniform(0.0, 1.0, N_BLOCKS)
    v = rng.uniform(0.0, 1.0, N_BLOCKS)
    return np.stack([h, s, v], axis=1)


def nearest_cluster_oracle(features, truth):
    """Assign every block to the cluster with the closest member (exhaustive)."""
    labels = np.empty(N_BLOCKS, dtype=np.intp)
    for j in range(N_BLOCKS):
        best = None
        for cluster in range(N_FACES):
            members = np.flatnonzero((truth == cluster) & (np.arange(N_BLOCKS) != j))
            d = min(block_distance(features[j], features[m]) for m in members)
            if best is None or d < best[0]:
                best = (d, cluster)
        labels[j] = best[1]
    return labels


@pytest.fixture
def separated_observation():
    return make_separated_observation(seed=7)
