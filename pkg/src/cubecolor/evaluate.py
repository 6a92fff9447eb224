"""Accuracy evaluation: per-circumstance tables for the offline classifier
at varying train sizes and for the online recognizers.

A sticker counts as correct when the center of its predicted face carries
the sticker's ground-truth color, so recognizers that only group blocks by
face are scored through the center-color mapping.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import online, sbelm
from .dataset import default_drift_config, generate_synthetic, no_drift_config
from .online import CENTER_INDICES, COLOR_NAMES, N_BLOCKS

ONLINE_METHODS = ("knn", "wlhp", "wlhp*", "dwlp")


class InsufficientData(ValueError):
    """Not enough stickers to draw the requested training split."""


@dataclass(frozen=True)
class AccuracyTable:
    """Percent accuracies per circumstance column plus a total column.

    values is (n_rows, n_tags + 1); counts holds each row's per-tag test
    sticker count. Every row's total is its sticker-weighted mean: total
    correct over total count, not the mean of the per-tag percentages.
    """

    row_header: str
    rows: tuple
    tags: tuple
    values: np.ndarray
    counts: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        counts = np.asarray(self.counts, dtype=np.int64)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "rows", tuple(self.rows))
        object.__setattr__(self, "tags", tuple(self.tags))
        if values.shape != (len(self.rows), len(self.tags) + 1):
            raise ValueError(f"values shape {values.shape} does not match labels")
        if counts.shape != (len(self.rows), len(self.tags)):
            raise ValueError(f"counts shape {counts.shape} does not match labels")
        if np.any(values < 0) or np.any(values > 100):
            raise ValueError("accuracies must lie in [0, 100]")
        if np.any(counts.sum(axis=1) <= 0):
            raise ValueError("every row needs a positive test sticker count")
        weighted = (values[:, :-1] * counts).sum(axis=1) / counts.sum(axis=1)
        if not np.allclose(weighted, values[:, -1], atol=1e-9):
            raise ValueError("total column must be the sticker-weighted mean")

    @property
    def columns(self):
        return self.tags + ("total",)

    def to_text(self):
        width = max(8, max(len(str(r)) for r in self.rows) + 2,
                    len(self.row_header) + 2)
        lines = [f"{self.row_header:>{width}}" +
                 "".join(f"{c:>9}" for c in self.columns)]
        for row, vals in zip(self.rows, self.values):
            lines.append(f"{str(row):>{width}}" +
                         "".join(f"{v:9.2f}" for v in vals))
        return "\n".join(lines) + "\n"

    def to_csv(self):
        lines = [",".join([self.row_header, *map(str, self.columns)])]
        for row, vals in zip(self.rows, self.values):
            lines.append(",".join([str(row)] + [format(v, ".17g") for v in vals]))
        return "\n".join(lines) + "\n"


def _build_table(row_header, rows, tags, correct_by_row, count_by_row):
    """Assemble a table from per-row {tag: correct} / {tag: count} maps."""
    tags = tuple(tags)
    values = np.zeros((len(rows), len(tags) + 1))
    counts = np.zeros((len(rows), len(tags)), dtype=np.int64)
    for i, row in enumerate(rows):
        hits = np.array([correct_by_row[row].get(t, 0.0) for t in tags])
        n = np.array([count_by_row[row].get(t, 0) for t in tags], dtype=np.float64)
        if np.any(n <= 0):
            raise InsufficientData(f"row {row!r} has an empty circumstance column")
        values[i, :-1] = 100.0 * hits / n
        values[i, -1] = 100.0 * hits.sum() / n.sum()
        counts[i] = n
    return AccuracyTable(row_header=row_header, rows=tuple(rows), tags=tags,
                         values=values, counts=counts)


def score_labeling(record, labels):
    """Fraction of stickers whose predicted face's center matches in color."""
    labels = np.asarray(labels, dtype=np.intp)
    if labels.shape != (N_BLOCKS,):
        raise ValueError(f"labels must be ({N_BLOCKS},), got {labels.shape}")
    centers = np.asarray(CENTER_INDICES, dtype=np.intp)
    predicted_colors = record.labels[centers[labels]]
    return float(np.mean(predicted_colors == record.labels))


def run_method(method, record, hue_weight=4.0, color_weights=None):
    """Apply one online recognizer to a record's 3DHSV features."""
    if method == "knn":
        return online.knn_baseline(record.f3)
    if method == "wlhp":
        return online.wlhp(record.f3)
    if method == "wlhp*":
        return online.wlhp_star(record.f3, hue_weight=hue_weight)
    if method == "dwlp":
        return online.dwlp(record.f3, record.center_colors,
                           color_weights=color_weights)
    raise ValueError(f"unknown online method {method!r}")


def online_accuracy(records, methods=ONLINE_METHODS, hue_weight=4.0,
                    color_weights=None):
    """Evaluate online recognizers per cube state.

    Returns an AccuracyTable with one row per method and one column per
    circumstance tag present in the records, plus the weighted total.
    """
    records = list(records)
    if not records:
        raise InsufficientData("no records to evaluate")
    for method in methods:
        if method not in ONLINE_METHODS:
            raise ValueError(f"unknown online method {method!r}")
    correct = {m: {} for m in methods}
    count = {}
    for record in records:
        count[record.tag] = count.get(record.tag, 0) + N_BLOCKS
        for method in methods:
            labels = run_method(method, record, hue_weight=hue_weight,
                                color_weights=color_weights)
            hits = round(score_labeling(record, labels) * N_BLOCKS)
            correct[method][record.tag] = correct[method].get(record.tag, 0.0) + hits
    tags = sorted(count)
    return _build_table("method", list(methods), tags, correct,
                        {m: count for m in methods})


def _sticker_pool(records, feature_family):
    feats = np.concatenate([getattr(r, feature_family) for r in records])
    labels = np.concatenate([r.labels for r in records])
    tags = np.array([r.tag for r in records for _ in range(N_BLOCKS)])
    return feats, labels, tags


def classify_accuracy(model, records):
    """Per-tag (correct, count) of an offline model over record stickers."""
    feats, labels, tags = _sticker_pool(records, "f16")
    predicted = sbelm.sbelm_predict(model, feats)
    out = {}
    for tag in np.unique(tags):
        mask = tags == tag
        out[str(tag)] = (int(np.sum(predicted[mask] == labels[mask])),
                         int(np.sum(mask)))
    return out


def offline_accuracy(records, sizes, n_components=sbelm.DEFAULT_COMPONENTS,
                     n_hidden=sbelm.DEFAULT_HIDDEN, reg=sbelm.DEFAULT_REG,
                     split_seed=42, model_seed=sbelm.DEFAULT_SEED,
                     sizes_per_class=True, test_on_train=False):
    """Train/test the offline classifier at several training-set sizes.

    For each size, that many training stickers are drawn per class (or
    size // 6 per class when sizes_per_class is false) without replacement,
    seeded per size from split_seed; the remaining stickers form the test
    set. test_on_train is a diagnostic that scores the training stickers
    themselves instead of the held-out ones.

    Raises:
        InsufficientData: a class cannot supply the requested count.
    """
    records = list(records)
    if not records:
        raise InsufficientData("no records to evaluate")
    feats, labels, tags = _sticker_pool(records, "f16")
    n_classes = len(COLOR_NAMES)
    all_tags = sorted({str(t) for t in np.unique(tags)})

    correct_by_row = {}
    count_by_row = {}
    for i, size in enumerate(sizes):
        rng = np.random.default_rng([split_seed, i])
        per_class = size if sizes_per_class else size // n_classes
        if per_class < 1:
            raise InsufficientData(f"size {size} leaves no samples per class")
        train_parts = []
        for c in range(n_classes):
            rows = np.flatnonzero(labels == c)
            needed = per_class + (0 if test_on_train else 1)
            if rows.size < needed:
                raise InsufficientData(
                    f"class {COLOR_NAMES[c]!r} has {rows.size} stickers, "
                    f"needs {needed} for size {size}")
            train_parts.append(rng.choice(rows, size=per_class, replace=False))
        train_idx = np.concatenate(train_parts)
        test_mask = np.zeros(labels.shape[0], dtype=bool)
        test_mask[train_idx] = True
        if not test_on_train:
            test_mask = ~test_mask

        data = sbelm.LabeledDataset(feats[train_idx], labels[train_idx], n_classes)
        model = sbelm.sbelm_train(data, n_components=n_components,
                                  n_hidden=n_hidden, reg=reg, seed=model_seed)
        hits = sbelm.sbelm_predict(model, feats[test_mask]) == labels[test_mask]
        test_tags = tags[test_mask]
        correct_by_row[size] = {t: float(np.sum(hits[test_tags == t]))
                                for t in all_tags}
        count_by_row[size] = {t: int(np.sum(test_tags == t)) for t in all_tags}
    return _build_table("samples", list(sizes), all_tags,
                        correct_by_row, count_by_row)


def drift_benchmark(n_states=100, seed=42):
    """The stock benchmark pair: a clean condition and a drifted condition.

    Both use the same state count and seed; the clean condition applies
    per-sticker noise only, the drifted one additionally the default
    per-state drift ranges.
    """
    clean = generate_synthetic(no_drift_config(seed=seed), n_states,
                               tag="A", id_prefix="clean")
    drifted = generate_synthetic(default_drift_config(seed=seed), n_states,
                                 tag="A", id_prefix="drift")
    return clean, drifted
