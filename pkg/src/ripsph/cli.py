"""Command-line interface.

    ripsph [options] FILE              compute a barcode
    ripsph bench [options] FILE        time the pipeline stage by stage
    ripsph version                     print version / build information

Exit codes: 0 success, 1 data errors, 2 flag errors.
"""

from __future__ import annotations

import argparse
import math
import statistics
import sys
import time

from . import __version__
from .backend import available_backends, compiled_available
from .core import (
    ComputeParams,
    DTMWeighting,
    EngineError,
    default_threads,
)
from .engine import compute_persistence
from .io import (
    read_lower_distance_matrix,
    read_point_cloud,
    read_sparse_graph,
    write_barcode,
)

_FORMATS = ("lower-distance", "point-cloud", "sparse")

_EXTENSIONS = {
    ".lower_distance_matrix": "lower-distance",
    ".lower": "lower-distance",
    ".distance_matrix": "lower-distance",
    ".point_cloud": "point-cloud",
    ".points": "point-cloud",
    ".xyz": "point-cloud",
    ".csv": "point-cloud",
    ".sparse": "sparse",
    ".graph": "sparse",
    ".edges": "sparse",
}

_READERS = {
    "lower-distance": read_lower_distance_matrix,
    "point-cloud": read_point_cloud,
    "sparse": read_sparse_graph,
}

_STAGES = (
    ("load", "time_load_s"),
    ("validate", "time_validate_s"),
    ("weight", "time_weight_s"),
    ("threshold", "time_threshold_s"),
    ("collapse", "time_collapse_s"),
    ("dim0", "time_dim0_s"),
    ("reduce", "time_reduce_s"),
    ("total", "time_total_s"),
)


def _add_compute_flags(parser):
    parser.add_argument("file", help="input file")
    parser.add_argument("--dim", type=int, default=1, metavar="D",
                        help="maximum homology dimension (default 1)")
    parser.add_argument("--threshold", default=None, metavar="T",
                        help="filtration cutoff; default: enclosing radius "
                             "for dense inputs, inf for sparse")
    parser.add_argument("--modulus", type=int, default=2, metavar="P",
                        help="prime coefficient field (default 2)")
    parser.add_argument("--threads", type=int, default=None, metavar="N",
                        help="worker threads (default: hardware concurrency)")
    parser.add_argument("--collapse", action="store_true",
                        help="run the edge collapser before reduction")
    parser.add_argument("--format", choices=_FORMATS, default=None,
                        help="input format (default: inferred from extension)")
    parser.add_argument("--weights", choices=("dtm",), default=None,
                        help="vertex re-weighting scheme")
    parser.add_argument("--weight-params", default="", metavar="KV",
                        help="comma list k=..,r=..,p=1|2|inf[,mode=vr|strict]")
    parser.add_argument("--backend", choices=("auto", "compiled", "python"),
                        default=None, help="reduction backend (default auto)")
    parser.add_argument("--pin", action="store_true",
                        help="pin worker threads to CPUs")


def _build_params(args):
    threshold = None
    if args.threshold is not None:
        text = str(args.threshold).strip().lower()
        if text not in ("auto", ""):
            try:
                threshold = float(text)
            except ValueError:
                raise ValueError(f"bad --threshold value {args.threshold!r}")
            if math.isnan(threshold):
                raise ValueError("--threshold must not be NaN")

    weighting = None
    if args.weights == "dtm":
        kv = {}
        if args.weight_params:
            for item in args.weight_params.split(","):
                if not item:
                    continue
                if "=" not in item:
                    raise ValueError(f"bad --weight-params entry {item!r}")
                key, val = item.split("=", 1)
                kv[key.strip()] = val.strip()
        k = int(kv.pop("k", 10))
        r = float(kv.pop("r", 2))
        p_raw = kv.pop("p", "1").lower()
        p_mix = math.inf if p_raw in ("inf", "infinity") else float(p_raw)
        if p_mix in (1.0, 2.0):
            p_mix = int(p_mix)
        mode = kv.pop("mode", "vr")
        if kv:
            raise ValueError(f"unknown --weight-params keys: {sorted(kv)}")
        weighting = DTMWeighting(k=k, r=r, p_mix=p_mix, mode=mode)

    params = ComputeParams(
        max_dim=args.dim,
        threshold=threshold,
        modulus=args.modulus,
        threads=args.threads,
        collapse=args.collapse,
        weighting=weighting,
        pin=args.pin,
        backend=None if args.backend in (None, "auto") else args.backend,
    )
    return params.validated()


def _infer_format(path):
    for ext, fmt in _EXTENSIONS.items():
        if path.endswith(ext):
            return fmt
    return None


def _read_input(path, fmt):
    if fmt is None:
        fmt = _infer_format(path)
        if fmt is None:
            raise ValueError(
                f"cannot infer input format from {path!r}; pass --format"
            )
    with open(path, "r", encoding="utf-8") as fh:
        return _READERS[fmt](fh)


def _run_compute(args):
    params = _build_params(args)

    t0 = time.perf_counter()
    data = _read_input(args.file, args.format)
    load_s = time.perf_counter() - t0

    report = compute_persistence(data, params)
    report.stats["time_load_s"] = load_s

    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            write_barcode(report, fh, args.barcode_format)
    else:
        write_barcode(report, sys.stdout, args.barcode_format)
    if args.stats:
        for key, value in report.stats.items():
            print(f"{key}={value}", file=sys.stderr)
    return 0


def _run_bench(args):
    params = _build_params(args)
    backends = [args.bench_backend]
    if args.bench_backend == "both":
        backends = [b for b in ("compiled", "python") if b in available_backends()]

    for backend in backends:
        runs = []
        for _ in range(args.repeat):
            t0 = time.perf_counter()
            data = _read_input(args.file, args.format)
            load_s = time.perf_counter() - t0
            bp = ComputeParams(
                max_dim=params.max_dim, threshold=params.threshold,
                modulus=params.modulus, threads=params.threads,
                collapse=params.collapse, weighting=params.weighting,
                pin=params.pin, backend=None if backend == "auto" else backend,
            )
            report = compute_persistence(data, bp)
            report.stats["time_load_s"] = load_s
            runs.append(report.stats)
        print(f"backend={runs[0]['backend']} threads={params.threads} "
              f"repeat={args.repeat}")
        print(f"{'stage':<12}{'min_s':>12}{'median_s':>12}")
        for label, key in _STAGES:
            times = [r.get(key, 0.0) for r in runs]
            print(f"{label:<12}{min(times):>12.6f}{statistics.median(times):>12.6f}")
    return 0


def _run_version():
    info = version_details()
    for key, value in info.items():
        print(f"{key}={value}")
    return 0


def version_details():
    return {
        "version": __version__,
        "compiled_available": str(compiled_available()).lower(),
        "backend_default": available_backends()[0],
        "threads_default": default_threads(),
        "python": "%d.%d.%d" % sys.version_info[:3],
    }


def cli_main(argv) -> int:
    argv = list(argv)
    try:
        if argv and argv[0] == "version":
            return _run_version()
        if argv and argv[0] == "bench":
            parser = argparse.ArgumentParser(
                prog="ripsph bench",
                description="Run the pipeline repeatedly and report per-stage "
                            "wall times (min/median).")
            _add_compute_flags(parser)
            parser.add_argument("--repeat", type=int, default=3, metavar="T",
                                help="number of runs (default 3)")
            parser.add_argument("--bench-backend", dest="bench_backend",
                                choices=("auto", "compiled", "python", "both"),
                                default="auto",
                                help="backend(s) to time (default auto)")
            args = parser.parse_args(argv[1:])
            if args.repeat < 1:
                parser.error("--repeat must be >= 1")
            return _run_bench(args)

        parser = argparse.ArgumentParser(
            prog="ripsph",
            description="Persistent homology barcodes of Vietoris-Rips and "
                        "flag filtrations.")
        _add_compute_flags(parser)
        parser.add_argument("--output", default=None, metavar="FILE",
                            help="write the barcode here (default stdout)")
        parser.add_argument("--barcode-format", choices=("csv", "human"),
                            default="csv", help="output format (default csv)")
        parser.add_argument("--stats", action="store_true",
                            help="emit key=value pipeline stats to stderr")
        args = parser.parse_args(argv)
        return _run_compute(args)
    except SystemExit as exc:  # argparse errors carry their own exit code
        return int(exc.code or 0)
    except (ValueError, EngineError) as exc:
        name = type(exc).__name__
        if isinstance(exc, EngineError) and _is_data_error(exc):
            print(f"{name}: {exc}", file=sys.stderr)
            return 1
        print(f"error: {name}: {exc}", file=sys.stderr)
        print("run 'ripsph --help' for usage", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def _is_data_error(exc: EngineError) -> bool:
    # Flag/parameter problems exit 2; anything tied to the input data exits 1.
    from .core import (
        AsymmetricMatrix, DuplicateEdge, IndexOverflow, NonFiniteEntry,
        NonTriangularCount, ParseError, RaggedRows, RankOutOfRange,
    )
    return isinstance(exc, (AsymmetricMatrix, DuplicateEdge, IndexOverflow,
                            NonFiniteEntry, NonTriangularCount, ParseError,
                            RaggedRows, RankOutOfRange))


def main():
    sys.exit(cli_main(sys.argv[1:]))


if __name__ == "__main__":
    main()
