"""Dataset handling: annotated cube photos, synthetic drifted states, and
the per-sticker feature CSV.

Real data enters through a JSON manifest describing groups of three images
(each showing two faces of one cube state) with corner quads and ground
truth sticker colors. Because no public image set ships with this package,
a synthetic generator produces drifted cube states with the same record
structure and is the default path for benchmarks.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from . import features as feat
from .features import UnevenPartition, default_partition
from .online import CENTER_INDICES, COLOR_NAMES, N_BLOCKS, N_FACES

CIRCUMSTANCE_TAGS = ("A", "B", "C", "D", "E")

CSV_FIXED_COLUMNS = ("state_id", "source", "circumstance", "face", "position",
                     "label", "h3", "s3", "v3")


class DatasetError(ValueError):
    """Base class for manifest / record problems."""


class ParseError(DatasetError):
    """Manifest is syntactically or structurally malformed."""


class InvalidTag(DatasetError):
    """Circumstance tag outside A..E."""


class MissingImage(DatasetError):
    """Referenced image file does not exist or cannot be decoded."""


class IncompleteGroup(DatasetError):
    """A group does not consist of exactly 3 images covering all 6 faces."""


class DuplicateFace(DatasetError):
    """The same face appears twice within one group."""


@dataclass(frozen=True)
class FaceAnnotation:
    """One annotated face within an image: slot index, corner quad, labels."""

    face: int
    quad: tuple  # four (x, y) corners, TL TR BR BL
    labels: tuple  # nine color names, row-major


@dataclass(frozen=True)
class AnnotationRecord:
    """One manifest entry: an image showing two annotated faces."""

    image: Path
    group: str
    tag: str
    faces: tuple  # two FaceAnnotation


@dataclass(frozen=True)
class CubeStateRecord:
    """Features and ground truth for all 54 stickers of one cube state.

    f3 is (54, 3) histogram-mode features, f16 (54, n_cells) uneven
    histogram features, labels (54,) color indices into COLOR_NAMES. Every
    color appears exactly 9 times and the six centers carry six distinct
    colors.
    """

    state_id: str
    source: str  # "real" | "synthetic"
    tag: str
    f3: np.ndarray
    f16: np.ndarray
    labels: np.ndarray
    seed: int | None = None

    def __post_init__(self):
        f3 = np.asarray(self.f3, dtype=np.float64)
        f16 = np.asarray(self.f16, dtype=np.float64)
        labels = np.asarray(self.labels, dtype=np.intp)
        object.__setattr__(self, "f3", f3)
        object.__setattr__(self, "f16", f16)
        object.__setattr__(self, "labels", labels)
        if self.source not in ("real", "synthetic"):
            raise DatasetError(f"source must be 'real' or 'synthetic', got {self.source!r}")
        if f3.shape != (N_BLOCKS, 3):
            raise DatasetError(f"f3 must be ({N_BLOCKS}, 3), got {f3.shape}")
        if f16.ndim != 2 or f16.shape[0] != N_BLOCKS:
            raise DatasetError(f"f16 must be ({N_BLOCKS}, n), got {f16.shape}")
        if labels.shape != (N_BLOCKS,):
            raise DatasetError(f"labels must be ({N_BLOCKS},), got {labels.shape}")
        if labels.size and (labels.min() < 0 or labels.max() >= len(COLOR_NAMES)):
            raise DatasetError("labels must be color indices in 0..5")
        counts = np.bincount(labels, minlength=len(COLOR_NAMES))
        if np.any(counts != 9):
            raise DatasetError(f"need exactly 9 stickers per color, got {counts.tolist()}")
        centers = labels[list(CENTER_INDICES)]
        if len(set(centers.tolist())) != N_FACES:
            raise DatasetError("the six center stickers must carry six distinct colors")

    @property
    def label_names(self):
        return tuple(COLOR_NAMES[i] for i in self.labels)

    @property
    def center_colors(self):
        """Face index -> color name of that face's center sticker."""
        return tuple(COLOR_NAMES[self.labels[c]] for c in CENTER_INDICES)


def default_base_colors():
    """Nominal HSV triple per sticker color, before any drift.

    Red and orange sit 25 degrees apart in hue, the tightest gap among the
    six colors, so red/orange confusion dominates under hue drift.
    """
    return {
        "white": (0.0, 0.03, 0.95),
        "yellow": (55.0, 0.85, 0.9),
        "red": (355.0, 0.9, 0.8),
        "orange": (20.0, 0.9, 0.85),
        "green": (120.0, 0.8, 0.7),
        "blue": (220.0, 0.85, 0.7),
    }


@dataclass(frozen=True)
class DriftConfig:
    """Synthetic drift model: per-state shifts plus per-sticker noise.

    Each generated state draws one hue shift (degrees), one saturation
    scale, and one value scale uniformly from the configured ranges; every
    sticker then adds independent Gaussian noise per channel. Hue wraps,
    saturation and value clamp to [0, 1].
    """

    base_colors: dict = None
    hue_shift: tuple = (-10.0, 10.0)
    s_scale: tuple = (0.6, 1.05)
    v_scale: tuple = (0.5, 1.1)
    noise_sigma: tuple = (2.0, 0.02, 0.02)
    seed: int = 0

    def __post_init__(self):
        if self.base_colors is None:
            object.__setattr__(self, "base_colors", default_base_colors())
        missing = [n for n in COLOR_NAMES if n not in self.base_colors]
        if missing:
            raise DatasetError(f"base_colors missing {missing}")
        for name in COLOR_NAMES:
            h, s, v = self.base_colors[name]
            if not (0 <= h < 360 and 0 <= s <= 1 and 0 <= v <= 1):
                raise DatasetError(f"base color {name!r} outside HSV ranges: {(h, s, v)}")
        for label, (lo, hi) in (("hue_shift", self.hue_shift),
                                ("s_scale", self.s_scale), ("v_scale", self.v_scale)):
            if lo > hi:
                raise DatasetError(f"{label} range is inverted: {(lo, hi)}")
        if self.s_scale[0] <= 0 or self.v_scale[0] <= 0:
            raise DatasetError("scale ranges must be positive")
        if any(s < 0 for s in self.noise_sigma):
            raise DatasetError(f"noise sigmas must be >= 0, got {self.noise_sigma}")


def default_drift_config(seed=0):
    """The stock drift used by the drifted benchmark condition."""
    return DriftConfig(seed=seed)


def no_drift_config(seed=0):
    """Per-sticker noise only: all per-state drift ranges collapsed."""
    return DriftConfig(hue_shift=(0.0, 0.0), s_scale=(1.0, 1.0),
                       v_scale=(1.0, 1.0), seed=seed)


def generate_synthetic(config: DriftConfig, n_states, tag="A", partition=None,
                       id_prefix="synth"):
    """Generate drifted cube states.

    Each state gets a uniformly random arrangement with 9 stickers per color
    and the fixed center assignment (face i's center carries COLOR_NAMES[i]).
    The per-state RNG stream is derived from (config.seed, state index), so
    generation order does not matter.

    f3 features are the drifted colors plus per-sticker noise; f16 features
    are the one-hot partition cell of the drifted color itself (state-level
    drift only), so within one state all stickers of a color share a cell.
    """
    if n_states < 0:
        raise ValueError(f"n_states must be >= 0, got {n_states}")
    if partition is None:
        partition = default_partition()
    base = np.array([config.base_colors[name] for name in COLOR_NAMES])
    sigma = np.asarray(config.noise_sigma, dtype=np.float64)

    records = []
    for state in range(n_states):
        rng = np.random.default_rng([config.seed, state])
        labels = np.empty(N_BLOCKS, dtype=np.intp)
        labels[list(CENTER_INDICES)] = np.arange(N_FACES)
        rest = [i for i in range(N_BLOCKS) if i not in CENTER_INDICES]
        labels[rest] = rng.permutation(np.repeat(np.arange(N_FACES), 8))

        shift = rng.uniform(config.hue_shift[0], config.hue_shift[1])
        s_scale = rng.uniform(config.s_scale[0], config.s_scale[1])
        v_scale = rng.uniform(config.v_scale[0], config.v_scale[1])
        noise = rng.normal(0.0, 1.0, size=(N_BLOCKS, 3)) * sigma

        drift_h = (base[labels, 0] + shift) % 360.0
        drift_s = np.clip(base[labels, 1] * s_scale, 0.0, 1.0)
        drift_v = np.clip(base[labels, 2] * v_scale, 0.0, 1.0)

        h = (drift_h + noise[:, 0]) % 360.0
        s = np.clip(drift_s + noise[:, 1], 0.0, 1.0)
        v = np.clip(drift_v + noise[:, 2], 0.0, 1.0)
        f3 = np.stack([h, s, v], axis=1)

        cells = partition.assign(np.stack([drift_h, drift_s, drift_v], axis=1))
        f16 = np.zeros((N_BLOCKS, partition.n_cells))
        f16[np.arange(N_BLOCKS), cells] = 1.0

        records.append(CubeStateRecord(
            state_id=f"{id_prefix}-{config.seed}-{state:05d}",
            source="synthetic", tag=tag, f3=f3, f16=f16, labels=labels,
            seed=config.seed))
    return records


def load_image(path):
    """Decode a PNG or PPM (P6) file into an (H, W, 3) uint8 RGB array."""
    path = Path(path)
    if not path.exists():
        raise MissingImage(f"image file not found: {path}")
    try:
        with Image.open(path) as img:
            return np.asarray(img.convert("RGB"), dtype=np.uint8)
    except (UnidentifiedImageError, OSError) as exc:
        raise MissingImage(f"cannot decode image {path}: {exc}") from exc


def _parse_quad(value, where):
    quad = np.asarray(value, dtype=np.float64)
    if quad.shape != (4, 2):
        raise ParseError(f"{where}: quad must be four [x, y] corners")
    return tuple(map(tuple, quad.tolist()))


def _parse_face(entry, where):
    for key in ("face", "quad", "labels"):
        if key not in entry:
            raise ParseError(f"{where}: missing field {key!r}")
    face = entry["face"]
    if not isinstance(face, int) or not 0 <= face < N_FACES:
        raise ParseError(f"{where}: face must be an integer in 0..5, got {face!r}")
    labels = entry["labels"]
    if len(labels) != 9 or any(lab not in COLOR_NAMES for lab in labels):
        raise ParseError(f"{where}: labels must be nine of {COLOR_NAMES}")
    return FaceAnnotation(face=face, quad=_parse_quad(entry["quad"], where),
                          labels=tuple(labels))


def load_manifest(path):
    """Parse and validate an annotation manifest.

    The manifest is a JSON object {"records": [...]}; each record holds an
    image path (relative to the manifest), a group id, a circumstance tag,
    and two annotated faces. Referenced images must exist and decode.

    Raises:
        ParseError, InvalidTag, MissingImage.
    """
    path = Path(path)
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(
                f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}"
            ) from exc
    if not isinstance(doc, dict) or "records" not in doc:
        raise ParseError(f"{path}: manifest must be an object with a 'records' list")

    records = []
    for i, entry in enumerate(doc["records"]):
        where = f"{path}: record {i}"
        for key in ("image", "group", "tag", "faces"):
            if key not in entry:
                raise ParseError(f"{where}: missing field {key!r}")
        tag = entry["tag"]
        if tag not in CIRCUMSTANCE_TAGS:
            raise InvalidTag(f"{where}: tag must be one of {CIRCUMSTANCE_TAGS}, got {tag!r}")
        if len(entry["faces"]) != 2:
            raise ParseError(f"{where}: each image must annotate exactly 2 faces")
        image = Path(entry["image"])
        if not image.is_absolute():
            image = path.parent / image
        if not image.exists():
            raise MissingImage(f"{where}: image file not found: {image}")
        faces = tuple(_parse_face(f, f"{where}, face {j}")
                      for j, f in enumerate(entry["faces"]))
        records.append(AnnotationRecord(image=image, group=str(entry["group"]),
                                        tag=tag, faces=faces))
    return records


def extract_records(annotations, size=feat.DEFAULT_RECTIFY_SIZE,
                    margin=feat.DEFAULT_BLOCK_MARGIN, bins=feat.DEFAULT_BINS,
                    partition=None):
    """Turn annotated image groups into feature records.

    Records are grouped by group id; each group must contain exactly 3
    images covering all six faces once. Faces are rectified, split into
    blocks, and both feature families computed per block.

    Raises:
        IncompleteGroup, DuplicateFace, MissingImage.
    """
    if partition is None:
        partition = default_partition()
    groups = {}
    order = []
    for rec in annotations:
        if rec.group not in groups:
            order.append(rec.group)
        groups.setdefault(rec.group, []).append(rec)

    out = []
    for gid in order:
        members = groups[gid]
        if len(members) != 3:
            raise IncompleteGroup(f"group {gid!r} has {len(members)} images, expected 3")
        tags = {m.tag for m in members}
        if len(tags) != 1:
            raise IncompleteGroup(f"group {gid!r} mixes circumstance tags {sorted(tags)}")
        seen = set()
        f3 = np.zeros((N_BLOCKS, 3))
        f16 = np.zeros((N_BLOCKS, partition.n_cells))
        labels = np.zeros(N_BLOCKS, dtype=np.intp)
        for member in members:
            image = load_image(member.image)
            for ann in member.faces:
                if ann.face in seen:
                    raise DuplicateFace(f"group {gid!r} annotates face {ann.face} twice")
                seen.add(ann.face)
                rectified = feat.rectify_face(image, ann.quad, size=size)
                for pos, patch in enumerate(feat.split_blocks(rectified, margin)):
                    block = 9 * ann.face + pos
                    f3[block] = feat.feature_3dhsv(patch, bins)
                    f16[block] = feat.feature_16dhsv(patch, partition)
                    labels[block] = COLOR_NAMES.index(ann.labels[pos])
        if seen != set(range(N_FACES)):
            raise IncompleteGroup(
                f"group {gid!r} covers faces {sorted(seen)}, expected all of 0..5"
            )
        out.append(CubeStateRecord(state_id=gid, source="real", tag=members[0].tag,
                                   f3=f3, f16=f16, labels=labels))
    return out


def _fmt(x):
    return format(float(x), ".17g")


def export_features(records, path):
    """Write records as a per-sticker CSV (one row per block, 54 per state).

    Floats are written with 17 significant digits so the file reads back
    losslessly.
    """
    records = list(records)
    n_cells = records[0].f16.shape[1] if records else default_partition().n_cells
    header = list(CSV_FIXED_COLUMNS) + [f"f16_{i:02d}" for i in range(n_cells)]
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for rec in records:
                if rec.f16.shape[1] != n_cells:
                    raise DatasetError("all records must share one partition size")
                for block in range(N_BLOCKS):
                    row = [rec.state_id, rec.source, rec.tag,
                           block // 9, block % 9, COLOR_NAMES[rec.labels[block]]]
                    row += [_fmt(v) for v in rec.f3[block]]
                    row += [_fmt(v) for v in rec.f16[block]]
                    writer.writerow(row)
    except OSError as exc:
        raise DatasetError(f"cannot write feature CSV {path}: {exc}") from exc


def load_features(path):
    """Read a feature CSV back into CubeStateRecords."""
    path = Path(path)
    try:
        fh = open(path, "r", encoding="utf-8", newline="")
    except OSError as exc:
        raise DatasetError(f"cannot read feature CSV {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty feature CSV") from None
        fixed = list(CSV_FIXED_COLUMNS)
        if header[:len(fixed)] != fixed or not all(
                c.startswith("f16_") for c in header[len(fixed):]):
            raise ParseError(f"{path}: unexpected header {header}")
        n_cells = len(header) - len(fixed)

        states = {}
        order = []
        for line_no, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise ParseError(f"{path}: line {line_no}: expected {len(header)} fields")
            state_id, source, tag, face, pos, label = row[:6]
            if label not in COLOR_NAMES:
                raise ParseError(f"{path}: line {line_no}: unknown label {label!r}")
            try:
                block = 9 * int(face) + int(pos)
                values = [float(v) for v in row[6:]]
            except ValueError as exc:
                raise ParseError(f"{path}: line {line_no}: {exc}") from exc
            if state_id not in states:
                order.append(state_id)
                states[state_id] = {
                    "source": source, "tag": tag,
                    "f3": np.full((N_BLOCKS, 3), np.nan),
                    "f16": np.full((N_BLOCKS, n_cells), np.nan),
                    "labels": np.full(N_BLOCKS, -1, dtype=np.intp),
                    "seen": set(),
                }
            st = states[state_id]
            if block in st["seen"]:
                raise ParseError(f"{path}: line {line_no}: duplicate block {block} "
                                 f"for state {state_id!r}")
            st["seen"].add(block)
            st["f3"][block] = values[:3]
            st["f16"][block] = values[3:]
            st["labels"][block] = COLOR_NAMES.index(label)

    out = []
    for state_id in order:
        st = states[state_id]
        if len(st["seen"]) != N_BLOCKS:
            raise ParseError(f"{path}: state {state_id!r} has {len(st['seen'])} blocks, "
                             f"expected {N_BLOCKS}")
        out.append(CubeStateRecord(state_id=state_id, source=st["source"],
                                   tag=st["tag"], f3=st["f3"], f16=st["f16"],
                                   labels=st["labels"]))
    return out
