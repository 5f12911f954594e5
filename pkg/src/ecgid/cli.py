"""Command-line entry points for the identification pipeline.

Six subcommands cover the full workflow: ``synth`` fabricates a raw
gallery, ``preprocess`` standardizes it, ``partition`` materializes the
per-cluster files for one k, ``select-k`` builds the evidence for choosing
k, ``identify`` answers a single probe, and ``bench`` runs the full
clustered-vs-serial comparison.  Every randomized subcommand takes an
explicit ``--seed`` — there is deliberately no default, so two runs can
never silently diverge.  Errors print to stderr and exit nonzero.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from . import bench as bench_mod
from . import gallery as gallery_mod
from . import kmeans as kmeans_mod
from . import kselect as kselect_mod
from . import partitions as partitions_mod
from . import synth as synth_mod
from .kselect import DecisionWeights
from .matcher import MatchThresholds, best_match

DEFAULT_K_RANGE = "2:10"
DEFAULT_QUERIES = 100
DEFAULT_NOISE_SIGMA = 0.0


@dataclass(frozen=True)
class RunConfig:
    """Bundle of knobs shared by the k-selection and benchmark commands."""

    seed: int
    k_range: range
    weights: DecisionWeights
    thresholds: MatchThresholds
    n_queries: int
    noise_sigma: float
    repeats: int
    in_memory: bool
    tol: float
    max_iter: int
    n_init: int


class _Formatter(argparse.ArgumentDefaultsHelpFormatter):
    """Help formatter that always shows option defaults."""


def parse_k_range(text: str) -> range:
    """Parse ``LO:HI`` as the half-open integer interval [LO, HI)."""
    try:
        lo_text, hi_text = text.split(":")
        lo, hi = int(lo_text), int(hi_text)
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"expected LO:HI (half-open), got {text!r}"
        ) from None
    if hi <= lo:
        raise argparse.ArgumentTypeError(
            f"empty k range {text!r}: HI must exceed LO"
        )
    return range(lo, hi)


def parse_query_vector(text: str) -> np.ndarray:
    """Parse a comma-separated list of 9 feature values."""
    cells = text.split(",")
    if len(cells) != gallery_mod.N_FEATURES:
        raise argparse.ArgumentTypeError(
            f"query needs {gallery_mod.N_FEATURES} comma-separated values, "
            f"got {len(cells)}"
        )
    try:
        return np.array([float(c) for c in cells], dtype=np.float64)
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"query has a non-numeric component: {text!r}"
        ) from None


def _add_fit_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--tol",
        type=float,
        default=kmeans_mod.DEFAULT_TOL,
        help="convergence threshold on max centroid displacement",
    )
    parser.add_argument(
        "--max-iter",
        type=int,
        default=kmeans_mod.DEFAULT_MAX_ITER,
        help="iteration cap per k-means start",
    )
    parser.add_argument(
        "--n-init",
        type=int,
        default=kmeans_mod.DEFAULT_N_INIT,
        help="independent k-means++ starts; best final SSQ wins",
    )


def _add_threshold_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--prd-max",
        type=float,
        default=MatchThresholds().prd_max,
        help="largest PRD a candidate may have and still qualify",
    )
    parser.add_argument(
        "--cc-min",
        type=float,
        default=MatchThresholds().cc_min,
        help="smallest cross-correlation a candidate may have and still qualify",
    )


def _add_weight_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--w-time",
        type=float,
        default=kselect_mod.DEFAULT_TIME_WEIGHT,
        help="decision weight on time reduction",
    )
    parser.add_argument(
        "--w-acc",
        type=float,
        default=kselect_mod.DEFAULT_ACCURACY_WEIGHT,
        help="decision weight on identification accuracy",
    )
    parser.add_argument(
        "--w-sil",
        type=float,
        default=kselect_mod.DEFAULT_SILHOUETTE_WEIGHT,
        help="decision weight on mean silhouette",
    )


def _add_bench_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--queries",
        type=int,
        default=DEFAULT_QUERIES,
        help="number of probe queries drawn from the gallery",
    )
    parser.add_argument(
        "--noise-sigma",
        type=float,
        default=DEFAULT_NOISE_SIGMA,
        help="stddev of Gaussian noise added to each probe (0 = exact copies)",
    )
    parser.add_argument(
        "--repeats",
        type=int,
        default=bench_mod.DEFAULT_REPEATS,
        help="timed runs per query and path; the median is reported",
    )
    parser.add_argument(
        "--in-memory",
        action="store_true",
        help="preload all records and time only the scans (no file I/O)",
    )


def _run_config(args: argparse.Namespace) -> RunConfig:
    return RunConfig(
        seed=args.seed,
        k_range=args.k_range,
        weights=DecisionWeights(args.w_time, args.w_acc, args.w_sil),
        thresholds=MatchThresholds(prd_max=args.prd_max, cc_min=args.cc_min),
        n_queries=args.queries,
        noise_sigma=args.noise_sigma,
        repeats=args.repeats,
        in_memory=args.in_memory,
        tol=args.tol,
        max_iter=args.max_iter,
        n_init=args.n_init,
    )


# --- subcommands -------------------------------------------------------------


def cmd_preprocess(args: argparse.Namespace) -> int:
    raw = gallery_mod.load_gallery_csv(args.input)
    processed, stats = gallery_mod.preprocess_gallery(raw)
    gallery_mod.write_gallery_csv(args.output, processed)
    stats_path = (
        args.stats_out
        if args.stats_out is not None
        else Path(str(args.output) + ".stats.json")
    )
    gallery_mod.save_stats(stats_path, stats)
    print(
        f"preprocessed {len(raw)} rows -> {len(processed)} subjects "
        f"({args.output}, stats {stats_path})"
    )
    return 0


def cmd_synth(args: argparse.Namespace) -> int:
    records = synth_mod.synth_gallery(
        args.subjects, args.blobs, args.spread, args.seed
    )
    gallery_mod.write_gallery_csv(args.out, records)
    print(
        f"wrote {len(records)} subjects in {args.blobs} blobs to {args.out}"
    )
    return 0


def cmd_partition(args: argparse.Namespace) -> int:
    records = partitions_mod.load_serial(args.gallery)
    model, _ = kmeans_mod.kmeans_fit(
        records,
        args.k,
        args.seed,
        tol=args.tol,
        max_iter=args.max_iter,
        n_init=args.n_init,
    )
    index = partitions_mod.partition(records, model, args.out_dir)
    sizes = ",".join(str(s) for s in index.sizes)
    print(f"k={index.k} partitions written to {index.k_dir} (sizes {sizes})")
    return 0


def cmd_select_k(args: argparse.Namespace) -> int:
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if args.rows_from_file is not None:
        rows = kselect_mod.read_decision_rows(args.rows_from_file)
        weights = DecisionWeights(args.w_time, args.w_acc, args.w_sil)
        best_k, scored = kselect_mod.decide_k(rows, weights)
        kselect_mod.write_decision_csv(out_dir / "decision.csv", scored)
        print(f"best_k={best_k}")
        return 0
    if args.seed is None:
        raise ValueError(
            "--seed is required unless --rows-from-file is given"
        )
    if args.gallery is None:
        raise ValueError(
            "--gallery is required unless --rows-from-file is given"
        )
    config = _run_config(args)
    records = partitions_mod.load_serial(args.gallery)
    curve = kselect_mod.elbow_curve(
        records,
        config.k_range,
        config.seed,
        tol=config.tol,
        max_iter=config.max_iter,
        n_init=config.n_init,
    )
    kselect_mod.write_elbow_csv(out_dir / "elbow.csv", curve)
    knee = kselect_mod.detect_knee(curve)
    scored, best_k = bench_mod.build_decision_table(
        args.gallery,
        config.k_range,
        out_dir / "partitions",
        config.seed,
        thresholds=config.thresholds,
        weights=config.weights,
        n_queries=config.n_queries,
        noise_sigma=config.noise_sigma,
        repeats=config.repeats,
        in_memory=config.in_memory,
        tol=config.tol,
        max_iter=config.max_iter,
        n_init=config.n_init,
    )
    kselect_mod.write_decision_csv(out_dir / "decision.csv", scored)
    print(f"elbow_knee={knee}")
    print(f"best_k={best_k}")
    return 0


def cmd_identify(args: argparse.Namespace) -> int:
    thresholds = MatchThresholds(prd_max=args.prd_max, cc_min=args.cc_min)
    if args.partitions is not None:
        if args.k is None:
            raise ValueError("--k is required with --partitions")
        index = partitions_mod.load_index(args.partitions, args.k)
        label = kmeans_mod.assign(args.query, index.model)
        records = partitions_mod.load_partition(index, label)
    elif args.gallery is not None:
        records = partitions_mod.load_serial(args.gallery)
    else:
        raise ValueError("give either --partitions with --k, or --gallery")
    result = best_match(args.query, records, thresholds)
    hit = result.hit_id if result.hit_id is not None else "NONE"
    print(
        f"hit={hit} prd={result.prd:.6g} cc={result.cc:.6g} "
        f"confidence={result.confidence:.6g}"
    )
    return 0


def cmd_bench(args: argparse.Namespace) -> int:
    config = _run_config(args)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    reports: list[bench_mod.BenchReport] = []
    scored, best_k = bench_mod.build_decision_table(
        args.gallery,
        config.k_range,
        out_dir / "partitions",
        config.seed,
        thresholds=config.thresholds,
        weights=config.weights,
        n_queries=config.n_queries,
        noise_sigma=config.noise_sigma,
        repeats=config.repeats,
        in_memory=config.in_memory,
        tol=config.tol,
        max_iter=config.max_iter,
        n_init=config.n_init,
        report_sink=reports.append,
    )
    for k in sorted(set(config.k_range)):
        index = partitions_mod.load_index(out_dir / "partitions", k)
        partitions_mod.verify_index(index)
    kselect_mod.write_decision_csv(out_dir / "decision.csv", scored)
    bench_mod.write_query_csv(out_dir / "queries.csv", reports)
    for report in reports:
        print(
            f"k={report.k} t_avg_pct={report.t_avg_pct:.3f} "
            f"accuracy_pct={report.accuracy_pct:.3f}"
        )
    print(f"best_k={best_k}")
    return 0


# --- parser ------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ecgid",
        description=(
            "Cluster-partitioned biometric identification over fixed-length "
            "ECG feature vectors."
        ),
        formatter_class=_Formatter,
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser(
        "preprocess",
        help="standardize a raw gallery (fill, fuse, round, z-score)",
        formatter_class=_Formatter,
    )
    p.add_argument("--in", dest="input", required=True, help="raw gallery CSV")
    p.add_argument("--out", dest="output", required=True, help="processed gallery CSV")
    p.add_argument(
        "--stats-out",
        default=None,
        help="stats sidecar path (default: <out>.stats.json)",
    )
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser(
        "synth",
        help="generate a synthetic raw gallery of Gaussian blobs",
        formatter_class=_Formatter,
    )
    p.add_argument("--subjects", type=int, required=True, help="number of subjects")
    p.add_argument("--blobs", type=int, required=True, help="number of blobs")
    p.add_argument(
        "--spread", type=float, default=40.0, help="per-blob Gaussian stddev"
    )
    p.add_argument(
        "--seed", type=int, required=True, help="generator seed (no default)"
    )
    p.add_argument("--out", required=True, help="output raw gallery CSV")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser(
        "partition",
        help="fit k-means for one k and materialize per-cluster files",
        formatter_class=_Formatter,
    )
    p.add_argument("--gallery", required=True, help="processed gallery CSV")
    p.add_argument("--k", type=int, required=True, help="number of clusters")
    p.add_argument(
        "--seed", type=int, required=True, help="fit seed (no default)"
    )
    p.add_argument("--out-dir", required=True, help="partition root directory")
    _add_fit_options(p)
    p.set_defaults(func=cmd_partition)

    p = sub.add_parser(
        "select-k",
        help="build the elbow curve and decision table, pick the best k",
        formatter_class=_Formatter,
    )
    p.add_argument("--gallery", default=None, help="processed gallery CSV")
    p.add_argument("--out-dir", required=True, help="report output directory")
    p.add_argument(
        "--seed",
        type=int,
        default=None,
        help="seed for fits and query draws (required unless --rows-from-file)",
    )
    p.add_argument(
        "--k-range",
        type=parse_k_range,
        default=DEFAULT_K_RANGE,
        help="half-open LO:HI interval of cluster counts",
    )
    p.add_argument(
        "--rows-from-file",
        default=None,
        help="score an existing measurement CSV instead of benchmarking",
    )
    _add_weight_options(p)
    _add_threshold_options(p)
    _add_bench_options(p)
    _add_fit_options(p)
    p.set_defaults(func=cmd_select_k)

    p = sub.add_parser(
        "identify",
        help="match one probe vector against partitions or a flat gallery",
        formatter_class=_Formatter,
    )
    p.add_argument(
        "--query",
        type=parse_query_vector,
        required=True,
        help="comma-separated feature vector (9 values)",
    )
    p.add_argument(
        "--partitions", default=None, help="partition root directory"
    )
    p.add_argument(
        "--k", type=int, default=None, help="cluster count of the partition set"
    )
    p.add_argument(
        "--gallery", default=None, help="flat gallery CSV (serial scan)"
    )
    _add_threshold_options(p)
    p.set_defaults(func=cmd_identify)

    p = sub.add_parser(
        "bench",
        help="time clustered vs serial identification over a k range",
        formatter_class=_Formatter,
    )
    p.add_argument("--gallery", required=True, help="processed gallery CSV")
    p.add_argument("--out-dir", required=True, help="report output directory")
    p.add_argument(
        "--seed", type=int, required=True, help="seed for fits and query draws"
    )
    p.add_argument(
        "--k-range",
        type=parse_k_range,
        default=DEFAULT_K_RANGE,
        help="half-open LO:HI interval of cluster counts",
    )
    _add_weight_options(p)
    _add_threshold_options(p)
    _add_bench_options(p)
    _add_fit_options(p)
    p.set_defaults(func=cmd_bench)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    tokens = list(sys.argv[1:] if argv is None else argv)
    # A query vector often starts with a minus sign, which argparse would
    # misread as an option; glue the value onto the flag so both
    # "--query V" and "--query=V" work.
    for i, tok in enumerate(tokens):
        if tok == "--query" and i + 1 < len(tokens):
            tokens[i : i + 2] = ["--query=" + tokens[i + 1]]
            break
    parser = build_parser()
    args = parser.parse_args(tokens)
    try:
        return args.func(args)
    except (ValueError, OSError, partitions_mod.PartitionIntegrityError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
