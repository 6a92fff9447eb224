"""Command-line interface.

Subcommands:
    features   extract per-sticker features from an annotated image manifest
    synth      generate synthetic drifted cube states
    train      train and serialize the offline SB-ELM classifier
    recognize  label cube states with one recognizer
    bench      produce offline/online accuracy tables

Exit codes: 0 success, 2 validation error (flags, files, formats),
1 runtime error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import dataset, evaluate, features, online, sbelm

FACE_LETTERS = "URFDLB"

_METHOD_FLAGS = ("sbelm", "knn", "wlhp", "wlhp-star", "dwlp")
_ONLINE_FROM_FLAG = {"knn": "knn", "wlhp": "wlhp", "wlhp-star": "wlhp*",
                     "dwlp": "dwlp"}
_DEFAULT_SIZES = "50,100,150,200,250,300"


class CliError(ValueError):
    """Flag/file validation problem; maps to exit code 2."""


def _load_partition_file(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return features.UnevenPartition.from_config(json.load(fh))
    except OSError as exc:
        raise CliError(f"--partition: cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise CliError(f"--partition: {path} is not valid JSON: {exc}") from exc
    except features.InvalidPartition as exc:
        raise CliError(f"--partition: {path}: {exc}") from exc


def _load_weights_file(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
        return {name: tuple(float(w) for w in triple)
                for name, triple in doc.items()}
    except OSError as exc:
        raise CliError(f"--weights: cannot read {path}: {exc}") from exc
    except (json.JSONDecodeError, TypeError, ValueError, AttributeError) as exc:
        raise CliError(f"--weights: {path}: expected a JSON object mapping "
                       f"color names to three numbers: {exc}") from exc


def _load_centers_file(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
        if isinstance(doc, dict):
            doc = {int(k): v for k, v in doc.items()}
        return online.validate_center_colors(doc)
    except OSError as exc:
        raise CliError(f"--centers: cannot read {path}: {exc}") from exc
    except (json.JSONDecodeError, ValueError) as exc:
        raise CliError(f"--centers: {path}: {exc}") from exc


def _parse_int_list(text, flag):
    try:
        return [int(part) for part in text.split(",") if part != ""]
    except ValueError as exc:
        raise CliError(f"{flag}: expected comma-separated integers, got {text!r}") from exc


def _load_records(paths):
    records = []
    for path in paths:
        records.extend(dataset.load_features(path))
    return records


def _write_text(path, text):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def labels_to_strings(labels):
    """Render face labels as the digit string and the URFDLB facelet string.

    Observation faces 0..5 occupy the U, R, F, D, L, B slots in that order,
    so the facelet string is the label string mapped through 'URFDLB'.
    """
    digits = "".join(str(int(l)) for l in labels)
    facelets = "".join(FACE_LETTERS[int(l)] for l in labels)
    return digits, facelets


def face_labels_from_colors(predicted):
    """Derive face labels from per-sticker color predictions.

    The six predicted center colors name the faces; every sticker is
    assigned the face whose center shares its predicted color. Fails when
    the predicted centers do not resolve to six distinct colors.
    """
    predicted = np.asarray(predicted, dtype=np.intp)
    centers = predicted[list(online.CENTER_INDICES)]
    if len(set(centers.tolist())) != online.N_FACES:
        names = [online.COLOR_NAMES[c] for c in centers]
        raise RuntimeError(
            f"predicted center colors are not six distinct colors: {names}; "
            f"cannot derive a facelet string")
    face_of_color = {int(c): face for face, c in enumerate(centers)}
    try:
        return np.array([face_of_color[int(c)] for c in predicted], dtype=np.intp)
    except KeyError as exc:
        raise RuntimeError(
            f"sticker predicted color {online.COLOR_NAMES[exc.args[0]]!r} does not "
            f"match any predicted center color") from exc


def cmd_features(args):
    records = dataset.load_manifest(args.manifest)
    partition = _load_partition_file(args.partition) if args.partition else None
    bins = _parse_int_list(args.bins, "--bins")
    if len(bins) != 3:
        raise CliError(f"--bins: expected three comma-separated counts, got {args.bins!r}")
    states = dataset.extract_records(records, size=args.size, margin=args.margin,
                                     bins=tuple(bins), partition=partition)
    dataset.export_features(states, args.out)
    print(f"wrote {len(states)} states ({len(states) * online.N_BLOCKS} stickers) "
          f"to {args.out}")
    return 0


def cmd_synth(args):
    partition = _load_partition_file(args.partition) if args.partition else None
    if args.drift == "none":
        config = dataset.no_drift_config(seed=args.seed)
    else:
        config = dataset.default_drift_config(seed=args.seed)
    overrides = {}
    if args.hue_shift is not None:
        overrides["hue_shift"] = tuple(args.hue_shift)
    if args.s_scale is not None:
        overrides["s_scale"] = tuple(args.s_scale)
    if args.v_scale is not None:
        overrides["v_scale"] = tuple(args.v_scale)
    if args.noise is not None:
        overrides["noise_sigma"] = tuple(args.noise)
    if overrides:
        config = dataset.DriftConfig(
            base_colors=config.base_colors,
            hue_shift=overrides.get("hue_shift", config.hue_shift),
            s_scale=overrides.get("s_scale", config.s_scale),
            v_scale=overrides.get("v_scale", config.v_scale),
            noise_sigma=overrides.get("noise_sigma", config.noise_sigma),
            seed=args.seed)
    states = dataset.generate_synthetic(config, args.n, tag=args.tag,
                                        partition=partition)
    dataset.export_features(states, args.out)
    print(f"wrote {len(states)} synthetic states to {args.out}")
    return 0


def cmd_train(args):
    records = _load_records(args.features)
    partition = _load_partition_file(args.partition) if args.partition else None
    feats = np.concatenate([r.f16 for r in records])
    labels = np.concatenate([r.labels for r in records])
    data = sbelm.LabeledDataset(feats, labels, len(online.COLOR_NAMES))
    model = sbelm.sbelm_train(data, n_components=args.k, n_hidden=args.hidden,
                              reg=args.reg, seed=args.seed, partition=partition)
    sbelm.save_model(model, args.out)
    print(f"trained on {feats.shape[0]} stickers, model written to {args.out}")
    return 0


def _recognize_one(args, record, model, weights, centers):
    if args.method == "sbelm":
        predicted = sbelm.sbelm_predict(model, record.f16)
        labels = face_labels_from_colors(predicted)
    else:
        method = _ONLINE_FROM_FLAG[args.method]
        if method == "dwlp":
            labels = online.dwlp(record.f3, centers or record.center_colors,
                                 color_weights=weights)
        else:
            labels = evaluate.run_method(method, record, hue_weight=args.hue_weight)
    return labels


def cmd_recognize(args):
    if args.method == "sbelm" and not args.model:
        raise CliError("--model is required when --method sbelm")
    model = sbelm.load_model(args.model) if args.model else None
    weights = _load_weights_file(args.weights) if args.weights else None
    centers = _load_centers_file(args.centers) if args.centers else None

    records = _load_records(args.features)
    if args.state_id is not None:
        records = [r for r in records if r.state_id == args.state_id]
        if not records:
            raise CliError(f"--state-id: no state {args.state_id!r} in the input")

    lines = []
    if args.format == "csv":
        lines.append("state_id,labels,facelets")
    for record in records:
        labels = _recognize_one(args, record, model, weights, centers)
        digits, facelets = labels_to_strings(labels)
        if args.format == "csv":
            lines.append(f"{record.state_id},{digits},{facelets}")
        else:
            lines.append(f"{record.state_id} {digits} {facelets}")
    text = "\n".join(lines) + "\n"
    if args.out:
        _write_text(args.out, text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_bench(args):
    records = _load_records(args.features)
    sections = []
    if not args.skip_offline:
        sizes = _parse_int_list(args.sizes, "--sizes")
        if not sizes:
            raise CliError("--sizes: need at least one training size")
        table = evaluate.offline_accuracy(
            records, sizes, n_components=args.k, n_hidden=args.hidden,
            reg=args.reg, split_seed=args.split_seed, model_seed=args.model_seed,
            sizes_per_class=not args.sizes_are_total)
        sections.append(("offline sb-elm (16dhsv)", table))
    if not args.skip_online:
        flags = [m.strip() for m in args.methods.split(",") if m.strip()]
        bad = [m for m in flags if m not in _ONLINE_FROM_FLAG]
        if bad:
            raise CliError(f"--methods: unknown method(s) {bad}; choose from "
                           f"{sorted(_ONLINE_FROM_FLAG)}")
        weights = _load_weights_file(args.weights) if args.weights else None
        table = evaluate.online_accuracy(
            records, methods=[_ONLINE_FROM_FLAG[m] for m in flags],
            hue_weight=args.hue_weight, color_weights=weights)
        sections.append(("online (3dhsv)", table))
    if not sections:
        raise CliError("nothing to do: both --skip-offline and --skip-online given")

    parts = []
    for title, table in sections:
        if args.format == "csv":
            parts.append(f"# {title}\n" + table.to_csv())
        else:
            parts.append(f"{title}\n" + table.to_text())
    text = "\n".join(parts)
    if args.out:
        _write_text(args.out, text)
    else:
        sys.stdout.write(text)
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="cubecolor",
        description="Color recognition for Rubik's cube stickers.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("features", help="extract features from an image manifest")
    p.add_argument("--manifest", required=True, help="annotation manifest (JSON)")
    p.add_argument("--out", required=True, help="output feature CSV path")
    p.add_argument("--size", type=int, default=features.DEFAULT_RECTIFY_SIZE,
                   help="rectified face side length in pixels (default %(default)s)")
    p.add_argument("--margin", type=float, default=features.DEFAULT_BLOCK_MARGIN,
                   help="cell margin fraction trimmed per side (default %(default)s)")
    p.add_argument("--bins", default="36,32,32",
                   help="histogram bin counts h,s,v (default %(default)s)")
    p.add_argument("--partition", help="JSON file with the uneven partition cells")
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("synth", help="generate synthetic drifted cube states")
    p.add_argument("--n", type=int, required=True, help="number of cube states")
    p.add_argument("--out", required=True, help="output feature CSV path")
    p.add_argument("--seed", type=int, default=0, help="master seed (default %(default)s)")
    p.add_argument("--tag", default="A", help="circumstance tag to stamp (default %(default)s)")
    p.add_argument("--drift", choices=("default", "none"), default="default",
                   help="drift ranges preset (default %(default)s)")
    p.add_argument("--hue-shift", type=float, nargs=2, metavar=("LO", "HI"),
                   help="override hue shift range in degrees")
    p.add_argument("--s-scale", type=float, nargs=2, metavar=("LO", "HI"),
                   help="override saturation scale range")
    p.add_argument("--v-scale", type=float, nargs=2, metavar=("LO", "HI"),
                   help="override value scale range")
    p.add_argument("--noise", type=float, nargs=3, metavar=("SH", "SS", "SV"),
                   help="override per-sticker noise sigmas (hue deg, sat, val)")
    p.add_argument("--partition", help="JSON file with the uneven partition cells")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train and serialize the offline classifier")
    p.add_argument("--features", required=True, nargs="+",
                   help="input feature CSV file(s)")
    p.add_argument("--out", required=True, help="output model file")
    p.add_argument("--k", type=int, default=sbelm.DEFAULT_COMPONENTS,
                   help="projection output dimension (default %(default)s)")
    p.add_argument("--hidden", "--h", type=int, default=sbelm.DEFAULT_HIDDEN,
                   dest="hidden", help="hidden node count (default %(default)s)")
    p.add_argument("--reg", "--C", type=float, default=sbelm.DEFAULT_REG,
                   dest="reg", help="ridge constant (default %(default)s)")
    p.add_argument("--seed", type=int, default=sbelm.DEFAULT_SEED,
                   help="input-weight RNG seed (default %(default)s)")
    p.add_argument("--partition", help="partition JSON recorded with the model")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("recognize", help="label cube states")
    p.add_argument("--features", required=True, nargs="+",
                   help="input feature CSV file(s)")
    p.add_argument("--method", required=True, choices=_METHOD_FLAGS)
    p.add_argument("--model", help="model file (required for --method sbelm)")
    p.add_argument("--weights", help="JSON color-weight file for dwlp")
    p.add_argument("--centers", help="JSON face->color file for dwlp "
                                     "(default: the record's ground-truth centers)")
    p.add_argument("--hue-weight", type=float, default=4.0,
                   help="hue emphasis for wlhp-star (default %(default)s)")
    p.add_argument("--state-id", help="only recognize this state")
    p.add_argument("--out", help="output path (default: stdout)")
    p.add_argument("--format", choices=("text", "csv"), default="text")
    p.set_defaults(func=cmd_recognize)

    p = sub.add_parser("bench", help="accuracy tables for offline and online methods")
    p.add_argument("--features", required=True, nargs="+",
                   help="input feature CSV file(s)")
    p.add_argument("--out", help="output path (default: stdout)")
    p.add_argument("--format", choices=("text", "csv"), default="text")
    p.add_argument("--methods", default="knn,wlhp,wlhp-star,dwlp",
                   help="online methods to run (default %(default)s)")
    p.add_argument("--sizes", default=_DEFAULT_SIZES,
                   help="training sizes for the offline table (default %(default)s)")
    p.add_argument("--sizes-are-total", action="store_true",
                   help="interpret --sizes as totals instead of per class")
    p.add_argument("--skip-offline", action="store_true",
                   help="skip the offline table")
    p.add_argument("--skip-online", action="store_true",
                   help="skip the online table")
    p.add_argument("--k", type=int, default=sbelm.DEFAULT_COMPONENTS,
                   help="projection output dimension (default %(default)s)")
    p.add_argument("--hidden", "--h", type=int, default=sbelm.DEFAULT_HIDDEN,
                   dest="hidden", help="hidden node count (default %(default)s)")
    p.add_argument("--reg", "--C", type=float, default=sbelm.DEFAULT_REG,
                   dest="reg", help="ridge constant (default %(default)s)")
    p.add_argument("--split-seed", type=int, default=42,
                   help="train/test split seed (default %(default)s)")
    p.add_argument("--model-seed", type=int, default=sbelm.DEFAULT_SEED,
                   help="model RNG seed (default %(default)s)")
    p.add_argument("--hue-weight", type=float, default=4.0,
                   help="hue emphasis for wlhp-star (default %(default)s)")
    p.add_argument("--weights", help="JSON color-weight file for dwlp")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if exc.code is not None else 0
    try:
        return args.func(args)
    except (CliError, dataset.DatasetError, features.InvalidPartition,
            sbelm.ModelFormatError, evaluate.InsufficientData, OSError) as exc:
        # bad flags, unreadable/unwritable files, malformed inputs
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # runtime failures
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
