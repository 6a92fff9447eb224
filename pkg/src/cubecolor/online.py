"""Training-free recognizers for one cube observation.

An observation is the 54 per-sticker feature triples (h*, s*, v*) of a cube,
ordered face-major (face 0..5) and row-major within each face, so the center
sticker of face i sits at index 9*i + 4. All recognizers label every block
with a face index in 0..5, exactly nine blocks per face, seeded by the six
center blocks (the one sticker per face whose face is known a priori).
"""

from __future__ import annotations

import numpy as np

N_FACES = 6
N_BLOCKS = 54
CENTER_INDICES = tuple(9 * i + 4 for i in range(N_FACES))

COLOR_NAMES = ("white", "yellow", "red", "orange", "green", "blue")

UNIT_WEIGHTS = (1.0, 1.0, 1.0)


def hue_distance(h1, h2):
    """Circular distance between two hue angles in degrees."""
    d = np.abs(np.asarray(h1, dtype=np.float64) - h2)
    return np.minimum(d, 360.0 - d)


def block_distance(a, b, weights=UNIT_WEIGHTS):
    """Weighted distance between two sticker features.

    The hue difference is circular and scaled by 1/360 so unit weights make
    the three channels commensurate:
    sqrt(wh^2 (dh/360)^2 + ws^2 ds^2 + wv^2 dv^2).
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    wh, ws, wv = weights
    if wh < 0 or ws < 0 or wv < 0:
        raise ValueError(f"weights must be non-negative, got {weights}")
    dh = hue_distance(a[..., 0], b[..., 0]) / 360.0
    ds = a[..., 1] - b[..., 1]
    dv = a[..., 2] - b[..., 2]
    return np.sqrt((wh * dh) ** 2 + (ws * ds) ** 2 + (wv * dv) ** 2)


def validate_observation(features):
    """Check and return an observation as a (54, 3) float array."""
    feats = np.asarray(features, dtype=np.float64)
    if feats.shape != (N_BLOCKS, 3):
        raise ValueError(f"observation must be ({N_BLOCKS}, 3), got {feats.shape}")
    h, s, v = feats[:, 0], feats[:, 1], feats[:, 2]
    if np.any(h < 0) or np.any(h >= 360):
        raise ValueError("hue values must lie in [0, 360)")
    for name, col in (("saturation", s), ("value", v)):
        if np.any(col < 0) or np.any(col > 1):
            raise ValueError(f"{name} values must lie in [0, 1]")
    return feats


def _nearest_in_pool(features, anchor, pool, count, weights):
    """Indices of the ``count`` pool blocks closest to an anchor feature.

    Ties are broken toward the lower block index (pool is kept sorted).
    """
    dists = block_distance(anchor, features[pool], weights)
    order = np.argsort(dists, kind="stable")[:count]
    return [pool[i] for i in order]


def knn_baseline(features):
    """Label each face's center plus its 8 nearest non-center blocks.

    Faces are processed in index order; claimed blocks leave the pool.
    """
    feats = validate_observation(features)
    labels = np.full(N_BLOCKS, -1, dtype=np.intp)
    pool = [i for i in range(N_BLOCKS) if i not in CENTER_INDICES]
    for face in range(N_FACES):
        center = CENTER_INDICES[face]
        labels[center] = face
        taken = _nearest_in_pool(feats, feats[center], pool, 8, UNIT_WEIGHTS)
        for idx in taken:
            labels[idx] = face
            pool.remove(idx)
    return labels


def _propagate_hierarchic(feats, faces, pool, labels, weights_for_face):
    """Two-pass hierarchic claim: centers take 2 neighbors, those take 3 each."""
    first_level = {}
    for face in faces:
        w = weights_for_face(face)
        taken = _nearest_in_pool(feats, feats[CENTER_INDICES[face]], pool, 2, w)
        for idx in taken:
            labels[idx] = face
            pool.remove(idx)
        first_level[face] = taken
    for face in faces:
        w = weights_for_face(face)
        for mid in first_level[face]:
            taken = _nearest_in_pool(feats, feats[mid], pool, 3, w)
            for idx in taken:
                labels[idx] = face
                pool.remove(idx)


def wlhp(features):
    """Weak-label hierarchic propagation.

    Pass 1 gives every face its center plus the center's 2 nearest pool
    blocks; pass 2 lets each of those claim its 3 nearest pool blocks, for
    1 + 2 + 2*3 = 9 blocks per face. Distances use unit weights; ties go to
    the lower block index.
    """
    feats = validate_observation(features)
    labels = np.full(N_BLOCKS, -1, dtype=np.intp)
    for face in range(N_FACES):
        labels[CENTER_INDICES[face]] = face
    pool = [i for i in range(N_BLOCKS) if i not in CENTER_INDICES]
    _propagate_hierarchic(feats, range(N_FACES), pool, labels,
                          lambda face: UNIT_WEIGHTS)
    return labels


def wlhp_star(features, hue_weight=4.0):
    """Hierarchic propagation with white detection and hue emphasis.

    The white face is the one whose center has the lowest saturation. Its
    nine blocks are claimed first with weights (0, 1, 1) (hue carries no
    information for white); the remaining faces then run the hierarchic
    schedule in index order with weights (hue_weight, 1, 1).
    """
    if hue_weight < 1.0:
        raise ValueError(f"hue_weight must be >= 1, got {hue_weight}")
    feats = validate_observation(features)
    labels = np.full(N_BLOCKS, -1, dtype=np.intp)
    for face in range(N_FACES):
        labels[CENTER_INDICES[face]] = face
    pool = [i for i in range(N_BLOCKS) if i not in CENTER_INDICES]

    white = int(np.argmin(feats[list(CENTER_INDICES), 1]))
    _propagate_hierarchic(feats, [white], pool, labels,
                          lambda face: (0.0, 1.0, 1.0))
    rest = [f for f in range(N_FACES) if f != white]
    _propagate_hierarchic(feats, rest, pool, labels,
                          lambda face: (float(hue_weight), 1.0, 1.0))
    return labels


def default_color_weights():
    """Per-color channel weights for the dynamic-weight recognizer.

    White is matched on saturation and value only; red and orange get the
    strongest hue emphasis because their hue distributions sit closest.
    """
    return {
        "white": (0.0, 2.0, 1.0),
        "yellow": (4.0, 1.0, 1.0),
        "green": (4.0, 1.0, 1.0),
        "blue": (4.0, 1.0, 1.0),
        "red": (6.0, 1.0, 2.0),
        "orange": (6.0, 1.0, 2.0),
    }


def validate_center_colors(center_colors):
    """Normalize a face -> color-name mapping; must cover all six colors."""
    if isinstance(center_colors, dict):
        try:
            names = [center_colors[face] for face in range(N_FACES)]
        except KeyError as exc:
            raise ValueError(f"center colors missing face {exc}") from exc
    else:
        names = list(center_colors)
    if len(names) != N_FACES or sorted(names) != sorted(COLOR_NAMES):
        raise ValueError(
            f"center colors must be the six names {COLOR_NAMES} exactly once, got {names}"
        )
    return tuple(names)


def _validate_color_weights(color_weights):
    weights = {}
    for name in COLOR_NAMES:
        if name not in color_weights:
            raise ValueError(f"missing weights for color {name!r}")
        triple = tuple(float(w) for w in color_weights[name])
        if len(triple) != 3 or any(w < 0 for w in triple):
            raise ValueError(f"weights for {name!r} must be 3 non-negative values")
        if not any(w > 0 for w in triple):
            raise ValueError(f"weights for {name!r} must have a positive entry")
        weights[name] = triple
    return weights


def dwlp(features, center_colors, color_weights=None):
    """Dynamic-weight label propagation from the known center colors.

    Every face starts with its center as the sole member. Then, one block
    per sweep: each face still short of nine members proposes its closest
    pool block, measured with that face's color-specific weights from the
    face's current member set; the proposal with the smallest distance wins
    (ties: lower face, then lower block index) and the block immediately
    becomes a member, extending the frontier for later sweeps.

    Args:
        features: (54, 3) observation.
        center_colors: face -> color name (sequence or dict), a bijection
            onto the six color names.
        color_weights: color name -> (wh, ws, wv); defaults to
            default_color_weights().
    """
    feats = validate_observation(features)
    names = validate_center_colors(center_colors)
    if color_weights is None:
        color_weights = default_color_weights()
    color_weights = _validate_color_weights(color_weights)
    face_weights = [color_weights[names[face]] for face in range(N_FACES)]

    labels = np.full(N_BLOCKS, -1, dtype=np.intp)
    counts = np.zeros(N_FACES, dtype=np.intp)
    pool = np.ones(N_BLOCKS, dtype=bool)
    # member_dist[f, j]: distance from block j to face f's nearest member
    member_dist = np.empty((N_FACES, N_BLOCKS))
    for face in range(N_FACES):
        center = CENTER_INDICES[face]
        labels[center] = face
        counts[face] = 1
        pool[center] = False
        member_dist[face] = block_distance(feats[center], feats, face_weights[face])

    while pool.any():
        best = None
        for face in range(N_FACES):
            if counts[face] >= 9:
                continue
            dists = np.where(pool, member_dist[face], np.inf)
            block = int(np.argmin(dists))
            key = (float(dists[block]), face, block)
            if best is None or key < best:
                best = key
        _, face, block = best
        labels[block] = face
        counts[face] += 1
        pool[block] = False
        np.minimum(member_dist[face],
                   block_distance(feats[block], feats, face_weights[face]),
                   out=member_dist[face])
    return labels
