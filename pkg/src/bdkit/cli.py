"""Command-line front end.

Subcommands: bd, bdci, gen-corpus, train, bench.  Machine-readable JSON
result documents go to stdout; human-oriented one-liners to stderr.
Exit codes: 0 success, 2 input validation, 3 empty intersection, 4 bundle
errors, 64 usage errors.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys

from . import __version__
from .bench import ALL_ESTIMATORS, eval_bias, eval_calibration, eval_runtime
from .bundle import load_bundle, save_bundle
from .classic import CLASSIC_METHODS, compute_bd, compute_bd_dense_anchor
from .core import MODE_BR, MODE_QUALITY, validate_samples
from .errors import BDKitError, BundleError, EmptyIntersection
from .estimator import DENSE_ANCHOR_THRESHOLD, compute_bdci
from .nn import TrainConfig
from .synth import corpus_hash, read_records, write_corpus_dir
from .training import train_bundle_models

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_EMPTY_INTERSECTION = 3
EXIT_BUNDLE = 4
EXIT_USAGE = 64

_MODE_FLAGS = {"br": MODE_BR, "quality": MODE_QUALITY}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.exit(EXIT_USAGE, f"error: {message}\n")


def _fail(code: int, reason: str, detail: str):
    print(f"error: {reason}: {detail}", file=sys.stderr)
    return code


def _file_digest(path: str) -> str:
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()


def read_rd_file(path: str):
    """Parse a `rate,quality` text table; '#' starts a comment line."""
    points = []
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.readlines()
    header_seen = False
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if not header_seen:
            if [c.strip().lower() for c in line.split(",")] != ["rate", "quality"]:
                raise BDKitError(
                    f"{path}:{lineno}: expected header 'rate,quality', got {line!r}"
                )
            header_seen = True
            continue
        cells = line.split(",")
        if len(cells) != 2:
            raise BDKitError(f"{path}:{lineno}: expected 'rate,quality', got {line!r}")
        try:
            points.append((float(cells[0]), float(cells[1])))
        except ValueError:
            raise BDKitError(f"{path}:{lineno}: non-numeric value in {line!r}")
    if not header_seen:
        raise BDKitError(f"{path}: missing 'rate,quality' header")
    if not points:
        raise BDKitError(f"{path}: no data rows")
    return points


def _load_curve(path: str, label: str):
    points = read_rd_file(path)
    try:
        return validate_samples(points, metric_name="file", source_label=label)
    except BDKitError as exc:
        raise type(exc)(f"{path}: {exc}") from exc


def _emit(document: dict):
    print(json.dumps(document, sort_keys=True, indent=2))


def cmd_bd(args) -> int:
    try:
        anchor = _load_curve(args.anchor, "anchor")
        target = _load_curve(args.target, "target")
        mode = _MODE_FLAGS[args.mode]
        dense_anchor = anchor.n >= args.dense_anchor_threshold
        if dense_anchor:
            bd = compute_bd_dense_anchor(anchor, target, mode, args.method)
        else:
            bd = compute_bd(anchor, target, mode, args.method)
    except EmptyIntersection as exc:
        return _fail(EXIT_EMPTY_INTERSECTION, "EmptyIntersection", str(exc))
    except BDKitError as exc:
        return _fail(EXIT_VALIDATION, type(exc).__name__, str(exc))

    document = {
        "tool_version": __version__,
        "command": "bd",
        "mode": bd.mode_tag,
        "method": bd.method_tag,
        "dense_anchor": dense_anchor,
        "delta": bd.delta_r_or_d,
        "delta_R_percent": bd.delta_R_percent,
        "interval": [bd.interval.lo, bd.interval.hi],
        "inputs": {
            "anchor": {"path": args.anchor, "sha256": _file_digest(args.anchor)},
            "target": {"path": args.target, "sha256": _file_digest(args.target)},
        },
    }
    if bd.delta_R_percent is not None:
        document["summary"] = f"BD-BR {bd.delta_R_percent:.4f}%"
        print(f"BD-BR ({bd.method_tag}): {bd.delta_R_percent:.4f}%", file=sys.stderr)
    else:
        document["summary"] = f"BD-quality {bd.delta_r_or_d:.4f}"
        print(f"BD-quality ({bd.method_tag}): {bd.delta_r_or_d:.4f}", file=sys.stderr)
    _emit(document)
    return EXIT_OK


def cmd_bdci(args) -> int:
    try:
        with open(args.models, "rb") as fh:
            bundle = load_bundle(fh.read())
    except FileNotFoundError as exc:
        return _fail(EXIT_BUNDLE, "BundleNotFound", str(exc))
    except BundleError as exc:
        return _fail(EXIT_BUNDLE, type(exc).__name__, str(exc))

    try:
        anchor = _load_curve(args.anchor, "anchor")
        target = _load_curve(args.target, "target")
        mode = _MODE_FLAGS[args.mode]
        result = compute_bdci(
            anchor, target, mode, bundle,
            anchor_dense_threshold=args.dense_anchor_threshold,
        )
    except EmptyIntersection as exc:
        return _fail(EXIT_EMPTY_INTERSECTION, "EmptyIntersection", str(exc))
    except BDKitError as exc:
        return _fail(EXIT_VALIDATION, type(exc).__name__, str(exc))

    document = {
        "tool_version": __version__,
        "command": "bdci",
        "mode": result.mode_tag,
        "method": result.method_tag,
        "bundle_hash": bundle.content_hash,
        "mean_delta": result.mean_delta,
        "sigma_delta": result.sigma_delta,
        "interval_delta": list(result.interval_delta),
        "mean_R_percent": result.mean_R_percent,
        "interval_R_percent": (
            list(result.interval_R_percent) if result.interval_R_percent else None
        ),
        "interval": [result.interval.lo, result.interval.hi],
        "degenerate_fallback": result.degenerate_fallback_flag,
        "breakdown": [
            {
                "source": b.source_label,
                "n_points": b.n_points,
                "dense": b.dense,
                "degenerate_fallback": b.degenerate_fallback,
                "mu": b.mu,
                "sigma": b.sigma,
                "categories": list(b.categories),
            }
            for b in result.breakdown
        ],
        "inputs": {
            "anchor": {"path": args.anchor, "sha256": _file_digest(args.anchor)},
            "target": {"path": args.target, "sha256": _file_digest(args.target)},
        },
    }
    if result.mode_tag == MODE_BR:
        lo, hi = result.interval_R_percent
        summary = (
            f"BDCI-BR {result.mean_R_percent:.4f}% "
            f"[{lo:.4f}%, {hi:.4f}%]"
        )
    else:
        lo, hi = result.interval_delta
        summary = f"BDCI-quality {result.mean_delta:.4f} [{lo:.4f}, {hi:.4f}]"
    if result.degenerate_fallback_flag:
        summary += " (degenerate-span fallback: reduced trust)"
    document["summary"] = summary
    print(summary, file=sys.stderr)
    _emit(document)
    return EXIT_OK


def cmd_gen_corpus(args) -> int:
    manifest = write_corpus_dir(
        args.out,
        num_curves=args.curves,
        n_range=(args.n_min, args.n_max),
        seed=args.seed,
        num_eval_cases=args.cases,
        samplings_per_curve=args.samplings_per_curve,
        snap_prob=args.snap_prob,
    )
    print(
        f"corpus written to {args.out}: {manifest['train_records']} train, "
        f"{manifest['test_records']} test records, "
        f"{manifest['eval_cases']} eval cases",
        file=sys.stderr,
    )
    _emit({"tool_version": __version__, "command": "gen-corpus", "manifest": manifest})
    return EXIT_OK


def cmd_train(args) -> int:
    train_path = os.path.join(args.corpus, "train_records.ndjson")
    try:
        _, records = read_records(train_path)
    except (OSError, ValueError) as exc:
        return _fail(EXIT_VALIDATION, "CorpusError", str(exc))
    config = TrainConfig(
        learning_rate=args.lr,
        batch_size=args.batch_size,
        max_epochs=args.max_epochs,
        patience=args.patience,
        seed=args.seed,
    )
    try:
        models, metadata, reports = train_bundle_models(
            records, config, corpus_digest=corpus_hash(train_path)
        )
    except BDKitError as exc:
        return _fail(EXIT_VALIDATION, type(exc).__name__, str(exc))
    blob = save_bundle(models, metadata)
    with open(args.out, "wb") as fh:
        fh.write(blob)
    digest = hashlib.sha256(blob).hexdigest()
    report_doc = {
        "tool_version": __version__,
        "command": "train",
        "bundle_path": args.out,
        "bundle_hash": digest,
        "metadata": metadata,
        "reports": reports,
    }
    report_path = args.out + ".report.json"
    with open(report_path, "w", encoding="utf-8") as fh:
        json.dump(report_doc, fh, sort_keys=True, indent=2)
        fh.write("\n")
    print(f"bundle written to {args.out} (sha256 {digest})", file=sys.stderr)
    _emit(report_doc)
    return EXIT_OK


def cmd_bench(args) -> int:
    try:
        with open(args.models, "rb") as fh:
            bundle = load_bundle(fh.read())
    except (FileNotFoundError, BundleError) as exc:
        return _fail(EXIT_BUNDLE, type(exc).__name__, str(exc))
    cases_path = os.path.join(args.corpus, "eval_cases.ndjson")
    try:
        header, cases = read_records(cases_path)
    except (OSError, ValueError) as exc:
        return _fail(EXIT_VALIDATION, "CorpusError", str(exc))
    if header.get("split") == "train":
        print(
            "warning: benchmarking on the training split; results are not "
            "held-out",
            file=sys.stderr,
        )

    bias = eval_bias(cases, ALL_ESTIMATORS, bundle=bundle)
    calibration = eval_calibration(cases, bundle)
    runtime = (
        eval_runtime(bundle, repetitions=args.runtime_reps)
        if args.runtime_reps > 0
        else {}
    )
    document = {
        "tool_version": __version__,
        "command": "bench",
        "bundle_hash": bundle.content_hash,
        "bias": bias.to_dict(),
        "calibration": calibration.to_dict(),
        "runtime_ms": {str(k): v for k, v in sorted(runtime.items())},
        "width_vs_n": [  # plot-ready: x = sample count, y = mean BDCI width
            {"n": n, "mean_width": w}
            for n, w in sorted(calibration.mean_width_per_n.items())
        ],
    }
    if args.report:
        with open(args.report, "w", encoding="utf-8") as fh:
            json.dump(document, fh, sort_keys=True, indent=2)
            fh.write("\n")
    print(bias.format_table(), file=sys.stderr)
    print(
        f"outside 3-sigma fraction: {calibration.outside_fraction:.4f} "
        f"({calibration.n_outside}/{calibration.n_cases})",
        file=sys.stderr,
    )
    _emit(document)
    return EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(prog="bdkit", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_bd = sub.add_parser("bd", help="classical BD between two R-D files")
    p_bd.add_argument("anchor")
    p_bd.add_argument("target")
    p_bd.add_argument("--mode", choices=("br", "quality"), default="br")
    p_bd.add_argument("--method", choices=CLASSIC_METHODS, default="pchip")
    p_bd.add_argument(
        "--dense-anchor-threshold", type=int, default=DENSE_ANCHOR_THRESHOLD
    )
    p_bd.set_defaults(func=cmd_bd)

    p_bdci = sub.add_parser("bdci", help="BD with a neural confidence interval")
    p_bdci.add_argument("anchor")
    p_bdci.add_argument("target")
    p_bdci.add_argument("--mode", choices=("br", "quality"), default="br")
    p_bdci.add_argument("--models", required=True)
    p_bdci.add_argument(
        "--dense-anchor-threshold", type=int, default=DENSE_ANCHOR_THRESHOLD
    )
    p_bdci.set_defaults(func=cmd_bdci)

    p_gen = sub.add_parser("gen-corpus", help="generate a synthetic training corpus")
    p_gen.add_argument("--out", required=True)
    p_gen.add_argument("--curves", type=int, default=2000)
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.add_argument("--n-min", type=int, default=4)
    p_gen.add_argument("--n-max", type=int, default=16)
    p_gen.add_argument("--cases", type=int, default=1000)
    p_gen.add_argument("--samplings-per-curve", type=int, default=1)
    p_gen.add_argument(
        "--snap-prob",
        type=float,
        default=0.2,
        help="probability that an integration bound snaps to a data extreme",
    )
    p_gen.set_defaults(func=cmd_gen_corpus)

    p_train = sub.add_parser("train", help="train the 7 category models")
    p_train.add_argument("--corpus", required=True)
    p_train.add_argument("--out", required=True)
    p_train.add_argument("--seed", type=int, default=0)
    p_train.add_argument("--lr", type=float, default=1e-3)
    p_train.add_argument("--batch-size", type=int, default=256)
    p_train.add_argument("--max-epochs", type=int, default=400)
    p_train.add_argument("--patience", type=int, default=40)
    p_train.set_defaults(func=cmd_train)

    p_bench = sub.add_parser("bench", help="bias/calibration/runtime reports")
    p_bench.add_argument("--corpus", required=True)
    p_bench.add_argument("--models", required=True)
    p_bench.add_argument("--report", default="")
    p_bench.add_argument("--runtime-reps", type=int, default=0)
    p_bench.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
