"""Offline classifier: scatter-balance projection followed by an extreme
learning machine.

The projection maximizes tr(W^T M W) with M = I/d - Sw + Sb, where Sw and Sb
are within/between-class scatter matrices built from *unitized* difference
vectors, so only the angles of the differences matter, not their lengths.
The classifier is a single-hidden-layer network with random input weights
and a closed-form ridge solve for the output weights.
"""

from __future__ import annotations

import base64
import json
from dataclasses import dataclass, field

import numpy as np

from .features import UnevenPartition, default_partition

DEFAULT_COMPONENTS = 8
DEFAULT_HIDDEN = 100
DEFAULT_REG = 1.0
DEFAULT_SEED = 42

_MODEL_FORMAT = "cubecolor-sbelm"
_MODEL_VERSION = 1


class DimensionError(ValueError):
    """Input dimension does not match the model or dataset."""


class SingularSystem(ValueError):
    """The regularized output-weight system could not be solved."""


class ModelFormatError(ValueError):
    """Serialized model file is malformed or has an unsupported version."""


@dataclass(frozen=True)
class LabeledDataset:
    """Feature matrix with integer class labels.

    X is (n_samples, n_features); y holds labels in {0..n_classes-1} and
    every class must be represented at least once.
    """

    x: np.ndarray
    y: np.ndarray
    n_classes: int

    def __post_init__(self):
        x = np.asarray(self.x, dtype=np.float64)
        y = np.asarray(self.y, dtype=np.intp)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        if x.ndim != 2 or x.shape[1] < 1:
            raise DimensionError(f"X must be 2-D with >= 1 feature, got shape {x.shape}")
        if y.shape != (x.shape[0],):
            raise DimensionError("y must have one label per row of X")
        if self.n_classes < 1 or x.shape[0] < self.n_classes:
            raise ValueError("need at least one sample per class")
        counts = np.bincount(y, minlength=self.n_classes)
        if y.size and (y.min() < 0 or y.max() >= self.n_classes):
            raise ValueError("labels must lie in {0..n_classes-1}")
        if np.any(counts == 0):
            raise ValueError(f"every class needs >= 1 sample, counts={counts.tolist()}")

    @classmethod
    def from_arrays(cls, x, y, n_classes=None):
        y = np.asarray(y, dtype=np.intp)
        if n_classes is None:
            n_classes = int(y.max()) + 1 if y.size else 0
        return cls(x, y, n_classes)


@dataclass(frozen=True)
class ScatterPair:
    """Within-class (sw) and between-class (sb) scatter matrices."""

    sw: np.ndarray
    sb: np.ndarray


def unitize(v):
    """Scale a vector to unit length; near-zero vectors map to zero."""
    v = np.asarray(v, dtype=np.float64)
    norm = np.linalg.norm(v)
    if norm > 1e-12:
        return v / norm
    return np.zeros_like(v)


def compute_scatter(data: LabeledDataset) -> ScatterPair:
    """Scatter matrices from unitized difference vectors.

    sw averages outer products of unitized (sample - class mean) vectors
    over all samples; sb averages class-size-weighted outer products of
    unitized (class mean - global mean) vectors. Both are symmetric PSD.
    """
    x, y = data.x, data.y
    n, d = x.shape
    mu = x.mean(axis=0)
    sw = np.zeros((d, d))
    sb = np.zeros((d, d))
    for c in range(data.n_classes):
        rows = x[y == c]
        mu_c = rows.mean(axis=0)
        diffs = rows - mu_c
        norms = np.linalg.norm(diffs, axis=1)
        keep = norms > 1e-12
        unit = diffs[keep] / norms[keep, None]
        sw += unit.T @ unit
        between = unitize(mu_c - mu)
        sb += rows.shape[0] * np.outer(between, between)
    sw /= n
    sb /= n
    return ScatterPair(sw=(sw + sw.T) / 2.0, sb=(sb + sb.T) / 2.0)


@dataclass(frozen=True)
class ProjectionModel:
    """Orthonormal projection onto the leading scatter-balance directions."""

    w: np.ndarray  # (input_dim, output_dim), orthonormal columns

    def __post_init__(self):
        w = np.asarray(self.w, dtype=np.float64)
        object.__setattr__(self, "w", w)
        if w.ndim != 2:
            raise DimensionError("projection matrix must be 2-D")
        gram = w.T @ w
        if not np.allclose(gram, np.eye(w.shape[1]), atol=1e-8):
            raise ValueError("projection columns must be orthonormal")

    @property
    def input_dim(self):
        return self.w.shape[0]

    @property
    def output_dim(self):
        return self.w.shape[1]


def balance_matrix(data: LabeledDataset) -> np.ndarray:
    """The symmetric objective matrix I/d - sw + sb."""
    pair = compute_scatter(data)
    d = data.x.shape[1]
    m = np.eye(d) / d - pair.sw + pair.sb
    return (m + m.T) / 2.0


def alde_fit(data: LabeledDataset, n_components) -> ProjectionModel:
    """Fit the scatter-balance projection.

    The columns of the result are the eigenvectors of the balance matrix for
    its n_components largest eigenvalues, in non-increasing eigenvalue
    order. Each column is sign-fixed so its largest-magnitude entry is
    positive.

    Raises:
        DimensionError: n_components outside [1, n_features].
    """
    d = data.x.shape[1]
    if not 1 <= n_components <= d:
        raise DimensionError(f"n_components must be in [1, {d}], got {n_components}")
    m = balance_matrix(data)
    _, vecs = np.linalg.eigh(m)  # ascending eigenvalues
    w = vecs[:, ::-1][:, :n_components].copy()
    for col in range(w.shape[1]):
        pivot = np.argmax(np.abs(w[:, col]))
        if w[pivot, col] < 0:
            w[:, col] = -w[:, col]
    return ProjectionModel(w=w)


def alde_transform(model: ProjectionModel, x):
    """Project vectors (d,) or stacked rows (n, d) into the embedding."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != model.input_dim:
        raise DimensionError(
            f"expected feature dimension {model.input_dim}, got {x.shape[-1]}"
        )
    return x @ model.w


def sigmoid(x):
    """Logistic function, stable for arguments of any magnitude."""
    arr = np.asarray(x, dtype=np.float64)
    out = np.empty_like(arr)
    pos = arr >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-arr[pos]))
    ex = np.exp(arr[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class ElmModel:
    """Trained single-hidden-layer network.

    a (n_hidden, input_dim) and b (n_hidden,) are the randomly drawn input
    weights and biases; beta (n_hidden, n_classes) is the solved output
    layer; reg is the ridge constant used and seed the RNG seed.
    """

    a: np.ndarray
    b: np.ndarray
    beta: np.ndarray
    reg: float
    seed: int

    @property
    def input_dim(self):
        return self.a.shape[1]

    @property
    def n_hidden(self):
        return self.a.shape[0]

    @property
    def n_classes(self):
        return self.beta.shape[1]


def _hidden_layer(a, b, x):
    return sigmoid(x @ a.T + b)


def elm_train(x, y, n_hidden=DEFAULT_HIDDEN, reg=DEFAULT_REG, seed=DEFAULT_SEED,
              n_classes=None) -> ElmModel:
    """Train the network: random input layer, ridge-solved output layer.

    Input weights and biases are drawn i.i.d. uniform on [-1, 1] from a
    generator seeded with ``seed`` (weights first, then biases). Targets are
    one-hot rows; the output weights solve
    (I/reg + H^T H) beta = H^T T, the exact minimizer of the regularized
    squared-error objective.

    Raises:
        SingularSystem: non-finite inputs or a numerically singular system.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.intp)
    if x.ndim != 2 or y.shape != (x.shape[0],):
        raise DimensionError("x must be (n, d) with one label per row")
    if n_hidden < 1:
        raise ValueError(f"n_hidden must be >= 1, got {n_hidden}")
    if not reg > 0:
        raise ValueError(f"reg must be > 0, got {reg}")
    if not np.all(np.isfinite(x)):
        raise SingularSystem("training features contain NaN or Inf")
    if y.size and y.min() < 0:
        raise ValueError("labels must be non-negative")
    if n_classes is None:
        n_classes = int(y.max()) + 1
    elif y.size and y.max() >= n_classes:
        raise ValueError(f"label {int(y.max())} outside 0..{n_classes - 1}")

    rng = np.random.default_rng(seed)
    a = rng.uniform(-1.0, 1.0, size=(n_hidden, x.shape[1]))
    b = rng.uniform(-1.0, 1.0, size=n_hidden)

    hidden = _hidden_layer(a, b, x)
    targets = np.zeros((x.shape[0], n_classes))
    targets[np.arange(x.shape[0]), y] = 1.0

    lhs = np.eye(n_hidden) / reg + hidden.T @ hidden
    rhs = hidden.T @ targets
    try:
        beta = np.linalg.solve(lhs, rhs)
    except np.linalg.LinAlgError as exc:
        raise SingularSystem("output-weight system is singular") from exc
    if not np.all(np.isfinite(beta)):
        raise SingularSystem("output weights are not finite")
    return ElmModel(a=a, b=b, beta=beta, reg=float(reg), seed=int(seed))


def elm_scores(model: ElmModel, x):
    """Network outputs, one score per class."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != model.input_dim:
        raise DimensionError(
            f"expected feature dimension {model.input_dim}, got {x.shape[-1]}"
        )
    return _hidden_layer(model.a, model.b, x) @ model.beta


def elm_predict(model: ElmModel, x):
    """Predicted class label(s); ties go to the lowest class index."""
    scores = elm_scores(model, x)
    if scores.ndim == 1:
        return int(np.argmax(scores))
    return np.argmax(scores, axis=1)


@dataclass(frozen=True)
class SbElmModel:
    """Projection + network, plus the histogram partition used at training."""

    projection: ProjectionModel
    elm: ElmModel
    partition: UnevenPartition = field(default_factory=default_partition)

    def __post_init__(self):
        if self.elm.input_dim != self.projection.output_dim:
            raise DimensionError("network input dimension must equal projection output")


def sbelm_train(data: LabeledDataset, n_components=DEFAULT_COMPONENTS,
                n_hidden=DEFAULT_HIDDEN, reg=DEFAULT_REG, seed=DEFAULT_SEED,
                partition=None) -> SbElmModel:
    """Fit the projection on the dataset, then the network on projected rows."""
    projection = alde_fit(data, n_components)
    z = alde_transform(projection, data.x)
    elm = elm_train(z, data.y, n_hidden=n_hidden, reg=reg, seed=seed,
                    n_classes=data.n_classes)
    if partition is None:
        partition = default_partition()
    return SbElmModel(projection=projection, elm=elm, partition=partition)


def sbelm_predict(model: SbElmModel, x):
    """Predict labels for raw feature vectors (d,) or rows (n, d)."""
    return elm_predict(model.elm, alde_transform(model.projection, x))


def _encode_array(arr):
    arr = np.ascontiguousarray(arr, dtype="<f8")
    return {"shape": list(arr.shape),
            "data": base64.b64encode(arr.tobytes()).decode("ascii")}


def _decode_array(obj):
    try:
        raw = base64.b64decode(obj["data"])
        arr = np.frombuffer(raw, dtype="<f8").astype(np.float64)
        return arr.reshape(obj["shape"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"bad matrix block in model file: {exc}") from exc


def save_model(model: SbElmModel, path):
    """Write a model to a versioned JSON file (matrices as base64 float64)."""
    doc = {
        "format": _MODEL_FORMAT,
        "version": _MODEL_VERSION,
        "projection": _encode_array(model.projection.w),
        "elm": {
            "a": _encode_array(model.elm.a),
            "b": _encode_array(model.elm.b),
            "beta": _encode_array(model.elm.beta),
            "reg": model.elm.reg,
            "seed": model.elm.seed,
        },
        "partition": model.partition.to_config(),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def load_model(path) -> SbElmModel:
    """Load a model written by save_model.

    Raises:
        ModelFormatError: wrong format marker, unsupported version, or
            malformed contents.
    """
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ModelFormatError(f"model file is not valid JSON: {exc}") from exc
    if doc.get("format") != _MODEL_FORMAT:
        raise ModelFormatError(f"not a {_MODEL_FORMAT} file")
    if doc.get("version") != _MODEL_VERSION:
        raise ModelFormatError(
            f"unsupported model version {doc.get('version')!r}, expected {_MODEL_VERSION}"
        )
    try:
        elm_doc = doc["elm"]
        elm = ElmModel(a=_decode_array(elm_doc["a"]),
                       b=_decode_array(elm_doc["b"]).reshape(-1),
                       beta=_decode_array(elm_doc["beta"]),
                       reg=float(elm_doc["reg"]),
                       seed=int(elm_doc["seed"]))
        projection = ProjectionModel(w=_decode_array(doc["projection"]))
        partition = UnevenPartition.from_config(doc["partition"])
    except KeyError as exc:
        raise ModelFormatError(f"model file is missing field {exc}") from exc
    return SbElmModel(projection=projection, elm=elm, partition=partition)
