"""Command-line interface.

    soundsource synth --out corpus/ [--spec spec.txt] [--seed 42] [--n-per-class 60]
    soundsource featurize --manifest corpus/manifest.csv --out features.csv
    soundsource train --features features.csv --out model.json
    soundsource predict --model model.json (--wav clip.wav | --features features.csv) [--gate human]
    soundsource evaluate --features features.csv --k 10 --seed 42 --out report.json
    soundsource select-features --features features.csv --out selection.json

Exit codes: 0 ok, 2 usage error, 3 data error, 4 internal invariant violation.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np

from . import __version__
from .corpus import atomic_write_text, load_clip, load_manifest
from .errors import DataError, InvariantViolation

DEFAULT_SEED = 42
EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 2, 3, 4

log = logging.getLogger("soundsource")


def _svm_config(args):
    from .svm import SvmConfig

    return SvmConfig(C=args.c, gamma=args.gamma, scaling=args.scaling)


def _load_features(path):
    from .pooling import read_pooled_csv

    ids, labels, X = read_pooled_csv(path)
    if len(ids) == 0:
        raise DataError(f"{path}: no feature rows")
    return ids, labels, X


def _sibling(path, suffix) -> Path:
    return Path(path).with_suffix(suffix)


def cmd_synth(args) -> int:
    from .synthgen import SynthSpec, format_synth_spec, generate_corpus, parse_synth_spec

    spec = parse_synth_spec(Path(args.spec).read_text()) if args.spec else SynthSpec()
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.n_per_class is not None:
        overrides["n_per_class"] = args.n_per_class
    spec = replace(spec, **overrides).validate()
    out = Path(args.out)
    manifest = generate_corpus(spec, out)
    atomic_write_text(out / "synth_spec.txt", format_synth_spec(spec))
    print(f"wrote {len(manifest)} clips and manifest.csv to {out} (seed {spec.seed})")
    return 0


def cmd_featurize(args) -> int:
    from .features import extract_frame_features, frame_features_csv
    from .corpus import normalize_peak
    from .pipeline import featurize_manifest
    from .pooling import pooled_to_csv

    manifest = load_manifest(args.manifest, check_files=False)
    skipped = []

    def on_skip(rec, reason):
        skipped.append(rec)
        print(f"warning: skipped {rec.path}: {reason}", file=sys.stderr)

    vectors = featurize_manifest(manifest, on_skip, jobs=args.jobs)
    if not vectors:
        raise DataError("no clip could be featurized")
    atomic_write_text(args.out, pooled_to_csv(vectors))
    if args.frames_dir:
        fdir = Path(args.frames_dir)
        fdir.mkdir(parents=True, exist_ok=True)
        done = {v.clip_id for v in vectors}
        for rec in manifest.records:
            if rec.path in done:
                clip = normalize_peak(load_clip(manifest.resolve(rec)))
                name = Path(rec.path).with_suffix(".frames.csv").name
                atomic_write_text(fdir / name, frame_features_csv(rec.path, extract_frame_features(clip)))
    print(f"featurized {len(vectors)} clip(s), skipped {len(skipped)} -> {args.out}")
    return 0


def _selected_indices(path):
    try:
        doc = json.loads(Path(path).read_text())
        return [int(i) for i in doc["selected"]]
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise DataError(f"cannot read feature selection {path}: {exc}") from None


def cmd_train(args) -> int:
    from .svm import check_machine, train_multiclass

    _, labels, X = _load_features(args.features)
    idx = _selected_indices(args.use_selected) if args.use_selected else None
    model = train_multiclass(X, labels, _svm_config(args), feature_indices=idx)
    for m in model.machines:
        check_machine(m, model.config.C)
    atomic_write_text(args.out, model.dumps())
    n_sv = len(model.support_vectors)
    print(f"trained {len(model.machines)} machine(s) over {len(model.classes)} classes, {n_sv} support vectors -> {args.out}")
    return 0


def cmd_predict(args) -> int:
    from .pipeline import clip_to_pooled
    from .svm import SvmModel, predict

    try:
        model = SvmModel.loads(Path(args.model).read_text())
    except OSError as exc:
        raise DataError(f"cannot read model {args.model}: {exc}") from None
    if args.gate and args.gate not in model.classes:
        raise DataError(f"model has no {args.gate!r} class to gate on")
    if args.wav:
        clip = load_clip(args.wav)
        try:
            rows = [(args.wav, clip_to_pooled(clip).values)]
        except DataError:
            if not args.gate:
                raise
            # silence cannot be normalised and is never a live speaker
            print("silent\tREJECT")
            return 0
    else:
        ids, _, X = _load_features(args.features)
        rows = list(zip(ids, X))
    for cid, vec in rows:
        label, _ = predict(model, vec)
        fields = [label] if args.wav else [cid, label]
        if args.gate:
            fields.append("ACCEPT" if label == args.gate else "REJECT")
        print("\t".join(fields))
    return 0


def cmd_evaluate(args) -> int:
    from .evaluation import (
        MERGE_MAPS,
        cross_validate,
        cross_validate_binary,
        make_folds,
        merge_classes,
    )

    ids, labels, X = _load_features(args.features)
    config = _svm_config(args)
    plan = make_folds(labels, args.k, args.seed)
    report = cross_validate(X, labels, config, plan)
    names = list(MERGE_MAPS) if args.merge == "all" else ([] if args.merge == "none" else [args.merge])
    for name in names:
        if args.retrain_binary:
            report.merged[name] = cross_validate_binary(X, labels, MERGE_MAPS[name], config, args.k, args.seed)
        else:
            report.merged[name] = merge_classes(report, MERGE_MAPS[name])
        if report.merged[name].total > report.total:
            raise InvariantViolation("merging increased the confusion-matrix total")

    print(report.format_table())
    for name, r in report.merged.items():
        print(f"\n[{name}{' (retrained)' if args.retrain_binary else ''}]")
        print(r.format_table())
    doc = {
        "tool": f"soundsource {__version__}",
        "seed": args.seed,
        "k": args.k,
        "config": asdict(config),
        "merge": args.merge,
        "retrain_binary": bool(args.retrain_binary),
        "n_clips": len(ids),
        "folds": {cid: int(f) for cid, f in zip(ids, plan.assignment)},
        "predictions": dict(zip(ids, report.predictions)),
        **report.to_dict(),
    }
    if args.out:
        atomic_write_text(args.out, json.dumps(doc, indent=1) + "\n")
        if not args.no_figure:
            from .plotting import plot_report

            plot_report(report, args.figure or _sibling(args.out, ".png"))
    return 0


def cmd_select(args) -> int:
    from .featsel import format_selection, select_features

    _, labels, X = _load_features(args.features)
    subset = select_features(X, labels)
    print(format_selection(subset))
    if args.out:
        atomic_write_text(args.out, subset.to_json())
        if not args.no_figure:
            from .plotting import plot_selection

            plot_selection(subset, args.figure or _sibling(args.out, ".png"))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="soundsource", description="Live-human vs. playback sound source identification.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def svm_flags(sp):
        sp.add_argument("--c", type=float, default=1.0, help="SVM cost (default 1)")
        sp.add_argument("--gamma", type=float, default=0.25, help="RBF width (default 0.25)")
        sp.add_argument("--scaling", choices=("minmax", "zscore"), default="minmax")

    sp = sub.add_parser("synth", help="generate a synthetic labelled corpus")
    sp.add_argument("--out", required=True, help="output directory")
    sp.add_argument("--spec", help="synth spec file (key = value lines)")
    sp.add_argument("--seed", type=int, default=None, help=f"overrides the seed in --spec (default {DEFAULT_SEED})")
    sp.add_argument("--n-per-class", type=int, default=None)
    sp.set_defaults(func=cmd_synth)

    sp = sub.add_parser("featurize", help="manifest -> pooled feature CSV")
    sp.add_argument("--manifest", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--frames-dir", help="also write per-frame feature CSVs here")
    sp.add_argument("--jobs", type=int, default=1)
    sp.add_argument("--seed", type=int, default=DEFAULT_SEED, help="unused; featurization is deterministic")
    sp.set_defaults(func=cmd_featurize)

    sp = sub.add_parser("train", help="train a one-vs-one RBF SVM")
    sp.add_argument("--features", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--use-selected", metavar="SELECTION_JSON", help="train only on dims chosen by select-features")
    sp.add_argument("--seed", type=int, default=DEFAULT_SEED, help="unused; training is deterministic")
    svm_flags(sp)
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("predict", help="classify a WAV or a feature file")
    sp.add_argument("--model", required=True)
    src = sp.add_mutually_exclusive_group(required=True)
    src.add_argument("--wav")
    src.add_argument("--features")
    sp.add_argument("--gate", metavar="LABEL", help="print ACCEPT/REJECT for this label (e.g. human)")
    sp.set_defaults(func=cmd_predict)

    sp = sub.add_parser("evaluate", help="stratified k-fold cross-validation")
    sp.add_argument("--features", required=True)
    sp.add_argument("--k", type=int, default=10)
    sp.add_argument("--seed", type=int, default=DEFAULT_SEED)
    sp.add_argument("--merge", choices=("none", "playback", "ipod-headphone", "all"), default="all")
    sp.add_argument("--retrain-binary", action="store_true", help="retrain on merged labels instead of merging predictions")
    sp.add_argument("--out", help="report JSON path (figure written next to it)")
    sp.add_argument("--figure", help="figure path (default: report path with .png)")
    sp.add_argument("--no-figure", action="store_true")
    svm_flags(sp)
    sp.set_defaults(func=cmd_evaluate)

    sp = sub.add_parser("select-features", help="correlation-based feature subset selection")
    sp.add_argument("--features", required=True)
    sp.add_argument("--out", help="selection JSON path (figure written next to it)")
    sp.add_argument("--figure")
    sp.add_argument("--no-figure", action="store_true")
    sp.add_argument("--seed", type=int, default=DEFAULT_SEED, help="unused; selection is deterministic")
    sp.set_defaults(func=cmd_select)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    np.seterr(all="ignore")
    try:
        return args.func(args)
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (InvariantViolation, AssertionError) as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
