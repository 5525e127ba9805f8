"""Command-line entry point.

Subcommands: `analyze` (complexity ledger), `train`, `search`,
`gradcheck`, plus `--replay <manifest>` to re-execute a recorded run.
Every run writes a manifest with the resolved arguments so results can
be reproduced byte for byte in deterministic (single-worker) mode.

Exit codes: 0 success, 2 spec/parse problem, 3 missing or malformed
data, 4 training divergence, 5 infeasible search threshold, 1 any other
failure (including gradcheck mismatches).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from dataclasses import replace
from pathlib import Path

from . import __version__
from .accounting import analyze, diff_reports
from .container import save_checkpoint
from .golden import GOLDEN_LEDGERS, check_against_golden, display_ratio
from .gradcheck import LAYERS, run_suite
from .mnist import MissingDataError, IdxFormatError, load_data_dir
from .netspec import (
    NetSpec,
    SpecError,
    baseline_spec,
    dropped_conv2_spec,
    load_spec,
    optimized_3x3_spec,
    optimized_spec,
)
from .ops import ShapeError
from .search import (
    SearchError,
    default_plan,
    load_plan,
    run_search,
    table_oracle,
    trained_oracle,
)
from .trainer import TrainConfig, TrainingDiverged, train

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_SPEC = 2
EXIT_DATA = 3
EXIT_DIVERGED = 4
EXIT_INFEASIBLE = 5

DATA_DIR_ENV = "SLIMNET_DATA_DIR"

PRESETS = {
    "baseline": baseline_spec,
    "dropped-conv2": dropped_conv2_spec,
    "optimized": optimized_spec,
    "optimized-3x3": optimized_3x3_spec,
}


def _resolve_spec(token: str) -> NetSpec:
    if token in PRESETS:
        return PRESETS[token]()
    if not Path(token).exists():
        raise SpecError(f"spec '{token}' is neither a preset ({', '.join(PRESETS)}) nor a file")
    return load_spec(token)


def _write_manifest(out_dir: Path, command: str, argv: list[str]) -> None:
    manifest = {
        "artifact_version": __version__,
        "command": command,
        "argv": argv,
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S"),
    }
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "manifest.json", "w", encoding="utf-8") as f:
        json.dump(manifest, f, indent=2)
        f.write("\n")


def _data_dir_or_fail(value: str | None) -> Path:
    data_dir = value or os.environ.get(DATA_DIR_ENV)
    if not data_dir:
        raise MissingDataError(
            "no data directory given: pass --data-dir or set "
            f"{DATA_DIR_ENV}. The directory must hold the four canonical MNIST "
            "IDX files (train-images-idx3-ubyte, train-labels-idx1-ubyte, "
            "t10k-images-idx3-ubyte, t10k-labels-idx1-ubyte, optionally .gz), "
            "available from any MNIST mirror; this tool never downloads."
        )
    return Path(data_dir)


# --- subcommands ---------------------------------------------------------------


def cmd_analyze(args, argv) -> int:
    spec = _resolve_spec(args.spec)
    report = analyze(spec, args.convention.replace("-", "_"))
    print(report.render())
    if args.bytes:
        print(f"\nactivation bytes (double precision): {report.total_memory * 8:,}")
    print()
    print(report.to_kv())
    if args.diff_against:
        other = analyze(_resolve_spec(args.diff_against), args.convention.replace("-", "_"))
        print("\ncompared against", other.spec_name)
        print(diff_reports(other, report).render())
        # the rounded display totals of the stock ledgers give slightly
        # different headline ratios; show them alongside the exact ones
        for column in ("params", "memory"):
            rounded = display_ratio(other.spec_name, report.spec_name, column)
            if rounded is not None:
                print(f"ratio from rounded display totals ({column}): {rounded:.1f}x")
    if args.expect_golden:
        problems = check_against_golden(report, args.expect_golden)
        golden = GOLDEN_LEDGERS[args.expect_golden]
        for note in golden.notes:
            print(f"note: {note}")
        if problems:
            for p in problems:
                print(f"golden mismatch: {p}", file=sys.stderr)
            return EXIT_FAIL
        print(f"golden check '{args.expect_golden}': all cells match")
    return EXIT_OK


def cmd_train(args, argv) -> int:
    spec = _resolve_spec(args.spec)
    data_dir = _data_dir_or_fail(args.data_dir)
    data = load_data_dir(data_dir)
    config = TrainConfig(
        learning_rate=args.lr,
        batch_size=args.batch,
        iterations=args.iterations,
        seed=args.seed,
        eval_every=args.eval_every,
    )
    out_dir = Path(args.out)
    resolved = [
        "train", args.spec, "--data-dir", str(data_dir),
        "--iterations", str(args.iterations), "--batch", str(args.batch),
        "--lr", f"{args.lr:g}", "--seed", str(args.seed),
        "--eval-every", str(args.eval_every), "--out", str(out_dir),
    ]
    _write_manifest(out_dir, "train", resolved)
    result = train(spec, data, config)
    save_checkpoint(out_dir / "checkpoint.bin", result.params, result.adam_state, result.iterations_run)
    metrics = {
        "spec": spec.name,
        "final_test_accuracy": result.final_test_accuracy,
        "iterations": result.iterations_run,
        "wall_time_seconds": result.wall_time_seconds,
        "eval_trace": result.eval_trace,
    }
    with open(out_dir / "metrics.json", "w", encoding="utf-8") as f:
        json.dump(metrics, f, indent=2)
        f.write("\n")
    print(f"final test accuracy: {result.final_test_accuracy:.4f}")
    print(f"checkpoint: {out_dir / 'checkpoint.bin'}")
    return EXIT_OK


def cmd_search(args, argv) -> int:
    if args.plan:
        plan = load_plan(args.plan)
    else:
        plan = default_plan()
    overrides = {}
    if args.threshold is not None:
        overrides["threshold"] = args.threshold
    if args.seeds is not None:
        overrides["seeds"] = tuple(int(s) for s in args.seeds.split(","))
    if args.iterations is not None:
        overrides["schedule"] = replace(plan.schedule, iterations=args.iterations)
    if overrides:
        plan = replace(plan, **overrides)

    resolved = ["search", "--oracle", args.oracle]
    if args.plan:
        resolved += ["--plan", args.plan]
    if args.oracle == "table":
        oracle = table_oracle()
    else:
        data_dir = _data_dir_or_fail(args.data_dir)
        data = load_data_dir(data_dir)
        oracle = trained_oracle(data, plan.schedule)
        resolved += ["--data-dir", str(data_dir)]
    resolved += ["--threshold", f"{plan.threshold:g}", "--seeds", ",".join(str(s) for s in plan.seeds)]
    if args.iterations is not None:
        resolved += ["--iterations", str(args.iterations)]
    if args.exhaustive:
        resolved += ["--exhaustive"]
    resolved += ["--workers", str(args.workers)]

    out_dir = Path(args.out)
    resolved += ["--out", str(out_dir)]
    _write_manifest(out_dir, "search", resolved)
    output = run_search(plan, oracle, out_dir=out_dir, workers=args.workers,
                        exhaustive=args.exhaustive)
    print(f"swept {len(output.results)} runs; ledger at {output.ledger_path}")
    print(f"frontier points: {len(output.frontier)} (frontier.csv, curves.csv written)")
    print(output.selection.describe())
    if not output.selection.feasible:
        return EXIT_INFEASIBLE
    print(f"selected spec written to {output.selected_spec_path}")
    return EXIT_OK


def cmd_gradcheck(args, argv) -> int:
    layers = args.layers.split(",") if args.layers else None
    if layers:
        unknown = set(layers) - set(LAYERS)
        if unknown:
            print(f"unknown layer(s): {', '.join(sorted(unknown))}; "
                  f"choose from {', '.join(sorted(LAYERS))}", file=sys.stderr)
            return EXIT_SPEC
    results = run_suite(layers=layers, trials=args.trials, seed=args.seed,
                        fault_layer=args.inject_fault)
    for r in results:
        print(r.line())
    return EXIT_OK if all(r.ok for r in results) else EXIT_FAIL


# --- argument plumbing -----------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="slimnet",
        description="Train small conv nets, account their exact memory/parameter "
                    "ledgers, and search for the smallest architecture meeting an "
                    "accuracy threshold.",
    )
    parser.add_argument("--version", action="version", version=f"slimnet {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="print the per-layer memory/parameter ledger")
    p.add_argument("spec", help=f"spec file or preset: {', '.join(PRESETS)}")
    p.add_argument("--convention", choices=["paper-compat", "with-biases"], default="paper-compat",
                   help="parameter counting convention (default excludes biases, matching the reference ledgers)")
    p.add_argument("--bytes", action="store_true", help="also print activation bytes at 8 B/element")
    p.add_argument("--diff-against", metavar="SPEC", help="also diff another spec's totals against this one")
    p.add_argument("--expect-golden", choices=sorted(GOLDEN_LEDGERS),
                   help="compare against the named golden ledger; nonzero exit on mismatch")

    p = sub.add_parser("train", help="train a spec and write a checkpoint")
    p.add_argument("spec", help=f"spec file or preset: {', '.join(PRESETS)}")
    p.add_argument("--data-dir", help=f"directory with the canonical IDX files (default ${DATA_DIR_ENV})")
    p.add_argument("--iterations", type=int, default=TrainConfig.iterations)
    p.add_argument("--batch", type=int, default=TrainConfig.batch_size)
    p.add_argument("--lr", type=float, default=TrainConfig.learning_rate)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--eval-every", type=int, default=0,
                   help="validation-accuracy trace interval (0: off)")
    p.add_argument("--out", default="runs/train", help="output directory (default runs/train)")

    p = sub.add_parser("search", help="sweep architectures and select the smallest feasible one")
    p.add_argument("--plan", help="JSON plan file (default: the built-in staged reduction)")
    p.add_argument("--data-dir", help=f"data directory for the trained oracle (default ${DATA_DIR_ENV})")
    p.add_argument("--oracle", choices=["trained", "table"], default="trained",
                   help="accuracy source: real training, or the recorded reference numbers")
    p.add_argument("--threshold", type=float, help="worst-case accuracy threshold (default 0.95)")
    p.add_argument("--seeds", help="comma-separated seeds, e.g. 0,1,2")
    p.add_argument("--iterations", type=int, help="override the schedule's iteration count")
    p.add_argument("--workers", type=int, default=1, help="parallel candidate workers")
    p.add_argument("--exhaustive", action="store_true",
                   help="sweep the full knob lattice instead of the staged procedure")
    p.add_argument("--out", default="runs/search", help="output directory (default runs/search)")

    p = sub.add_parser("gradcheck", help="finite-difference check of every backward kernel")
    p.add_argument("--layers", help=f"comma-separated subset of: {', '.join(sorted(LAYERS))}")
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--inject-fault", metavar="LAYER",
                   help="flip the named layer's analytic gradient (verifies the checker fails)")

    return parser


COMMANDS = {
    "analyze": cmd_analyze,
    "train": cmd_train,
    "search": cmd_search,
    "gradcheck": cmd_gradcheck,
}


def _replay(argv: list[str]) -> int:
    manifest_path = argv[0]
    rest = argv[1:]
    try:
        with open(manifest_path, "r", encoding="utf-8") as f:
            manifest = json.load(f)
        stored = list(manifest["argv"])
    except (OSError, KeyError, json.JSONDecodeError) as exc:
        print(f"cannot replay manifest {manifest_path}: {exc}", file=sys.stderr)
        return EXIT_FAIL
    if rest[:1] == ["--out"] and len(rest) >= 2:
        stored = _override_out(stored, rest[1])
    print(f"replaying: slimnet {' '.join(stored)}")
    return main(stored)


def _override_out(argv: list[str], new_out: str) -> list[str]:
    out = list(argv)
    if "--out" in out:
        i = out.index("--out")
        out[i + 1] = new_out
    else:
        out += ["--out", new_out]
    return out


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    if argv[:1] == ["--replay"]:
        if len(argv) < 2:
            print("--replay needs a manifest path", file=sys.stderr)
            return EXIT_FAIL
        return _replay(argv[1:])
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args, argv)
    except (MissingDataError, IdxFormatError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except TrainingDiverged as exc:
        print(f"training diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (SpecError, ShapeError, SearchError, ValueError) as exc:
        print(f"spec error: {exc}", file=sys.stderr)
        return EXIT_SPEC


if __name__ == "__main__":
    sys.exit(main())
