"""Threshold-constrained architecture reduction.

The procedure sweeps a chain of knobs in a fixed stage order (drop the
second conv stage; shrink the hidden layer; shrink the first conv's
kernel and depth; widen the pooling window), trains or looks up every
candidate, and finally picks the smallest architecture whose accuracy
stays at or above a worst-case threshold.  Each stage also records a
`pick` (the value carried into later stages), so the historical
procedure is reproducible as data rather than re-derived from results.

Accuracy comes from a pluggable oracle: `trained_oracle` runs real
training, `table_oracle` replays the recorded accuracies bundled in
`golden`, which makes selection and frontier logic testable in
milliseconds.
"""

from __future__ import annotations

import json
import logging
import re
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, NamedTuple

from .accounting import analyze
from .golden import RECORDED_ACCURACY
from .netspec import (
    LayerSpec,
    NetSpec,
    SpecError,
    baseline_spec,
    optimized_3x3_spec,
    propagate_shapes,
    save_spec,
    spec_id,
)
from .rng import derive_seed
from .trainer import TrainConfig, TrainingDiverged, train

logger = logging.getLogger(__name__)

__all__ = [
    "SearchError",
    "Stage",
    "SearchPlan",
    "Candidate",
    "CandidateResult",
    "AggregateResult",
    "SelectionResult",
    "FrontierPoint",
    "default_plan",
    "plan_from_dict",
    "apply_knob",
    "enumerate_candidates",
    "exhaustive_candidates",
    "trained_oracle",
    "table_oracle",
    "run_sweep",
    "aggregate_results",
    "select_minimal",
    "build_frontier",
    "export_curves",
    "run_search",
]

KNOBS = ("drop_conv2", "fc1_width", "conv1", "pool_window")


class SearchError(ValueError):
    pass


@dataclass(frozen=True)
class Stage:
    """One knob sweep plus the value adopted for the following stages."""

    knob: str
    values: tuple
    pick: object

    def __post_init__(self):
        if self.knob not in KNOBS:
            raise SearchError(f"unknown knob '{self.knob}'; choose from {KNOBS}")
        if not self.values:
            raise SearchError(f"stage '{self.knob}' has no candidate values")


@dataclass(frozen=True)
class SearchPlan:
    base: NetSpec
    threshold: float = 0.95
    stages: tuple[Stage, ...] = ()
    extras: tuple[NetSpec, ...] = ()
    schedule: TrainConfig = field(default_factory=TrainConfig)
    seeds: tuple[int, ...] = (0,)

    def __post_init__(self):
        if not 0.0 < self.threshold <= 1.0:
            raise SearchError(f"threshold must be in (0, 1], got {self.threshold}")
        if not self.seeds:
            raise SearchError("plan needs at least one seed")


def default_plan(schedule: TrainConfig | None = None, seeds: tuple[int, ...] = (0,),
                 threshold: float = 0.95) -> SearchPlan:
    """The historical reduction procedure over the baseline network."""
    return SearchPlan(
        base=baseline_spec(),
        threshold=threshold,
        stages=(
            Stage("drop_conv2", (False, True), True),
            Stage("fc1_width", (1024, 512, 256, 128, 64, 32), 128),
            Stage("conv1", tuple((k, d) for k in (5, 3, 1) for d in (32, 16, 8, 4, 2)), (5, 2)),
            Stage("pool_window", (2, 4), 4),
        ),
        extras=(optimized_3x3_spec(),),
        schedule=schedule if schedule is not None else TrainConfig(),
        seeds=tuple(seeds),
    )


def _format_value(knob: str, value) -> str:
    if knob == "drop_conv2":
        return "true" if value else "false"
    if knob == "conv1":
        k, d = value
        return f"{k}x{k}x{d}"
    return str(value)


def apply_knob(spec: NetSpec, knob: str, value) -> NetSpec:
    """Return `spec` with one knob changed; raises SearchError if it cannot apply."""
    layers = list(spec.layers)
    if knob == "drop_conv2":
        if not value:
            return spec
        conv_idx = [i for i, l in enumerate(layers) if l.kind == "conv"]
        if len(conv_idx) < 2:
            raise SearchError("drop_conv2: spec has no second conv layer")
        i = conv_idx[1]
        drop = [i]
        if i + 1 < len(layers) and layers[i + 1].kind == "maxpool":
            drop.append(i + 1)
        layers = [l for j, l in enumerate(layers) if j not in drop]
    elif knob == "fc1_width":
        dense_idx = [i for i, l in enumerate(layers) if l.kind == "dense"]
        if len(dense_idx) < 2:
            raise SearchError("fc1_width: spec has no hidden dense layer to resize")
        layers[dense_idx[0]] = LayerSpec.dense(int(value))
    elif knob == "conv1":
        conv_idx = [i for i, l in enumerate(layers) if l.kind == "conv"]
        if not conv_idx:
            raise SearchError("conv1: spec has no conv layer")
        k, d = value
        layers[conv_idx[0]] = LayerSpec.conv(int(k), int(d))
    elif knob == "pool_window":
        pool_idx = [i for i, l in enumerate(layers) if l.kind == "maxpool"]
        if not pool_idx:
            raise SearchError("pool_window: spec has no maxpool layer")
        layers[pool_idx[0]] = LayerSpec.maxpool(int(value))
    else:
        raise SearchError(f"unknown knob '{knob}'")
    return NetSpec(spec.name, tuple(layers))


class Candidate(NamedTuple):
    tag: str
    spec: NetSpec


def _try_candidate(tag: str, spec: NetSpec, out: list[Candidate]):
    try:
        propagate_shapes(spec)
    except SpecError as exc:
        logger.warning("skipping candidate %s: %s", tag, exc)
        return
    out.append(Candidate(tag, NetSpec(tag, spec.layers)))


def enumerate_candidates(plan: SearchPlan) -> list[Candidate]:
    """All stage candidates in order, each applied to the previous picks.

    Shape-incompatible candidates are skipped with a logged reason.  The
    plan's extras are appended with `extra=<name>` tags.
    """
    candidates: list[Candidate] = []
    if not plan.stages:
        _try_candidate("base", plan.base, candidates)
    current = plan.base
    for stage in plan.stages:
        for value in stage.values:
            tag = f"{stage.knob}={_format_value(stage.knob, value)}"
            try:
                candidate = apply_knob(current, stage.knob, value)
            except SearchError as exc:
                logger.warning("skipping candidate %s: %s", tag, exc)
                continue
            _try_candidate(tag, candidate, candidates)
        current = apply_knob(current, stage.knob, stage.pick)
    for extra in plan.extras:
        _try_candidate(f"extra={extra.name}", extra, candidates)
    return candidates


def exhaustive_candidates(plan: SearchPlan) -> list[Candidate]:
    """Full lattice over every stage's values (no picks); skips invalid combos."""
    combos: list[tuple[str, NetSpec]] = [("", plan.base)]
    for stage in plan.stages:
        nxt = []
        for prefix, spec in combos:
            for value in stage.values:
                piece = f"{stage.knob}={_format_value(stage.knob, value)}"
                tag = f"{prefix},{piece}" if prefix else piece
                try:
                    nxt.append((tag, apply_knob(spec, stage.knob, value)))
                except SearchError as exc:
                    logger.warning("skipping lattice point %s: %s", tag, exc)
        combos = nxt
    candidates: list[Candidate] = []
    for tag, spec in combos:
        _try_candidate(f"lattice:{tag}", spec, candidates)
    return candidates


# --- running candidates -------------------------------------------------------


class RunOutcome(NamedTuple):
    accuracy: float
    wall_time: float
    diverged: bool


Oracle = Callable[[str, NetSpec, int], RunOutcome]


def trained_oracle(data, schedule: TrainConfig) -> Oracle:
    """Oracle that really trains: each (candidate, seed) gets its own stream."""

    def run(tag: str, spec: NetSpec, seed: int) -> RunOutcome:
        config = replace(schedule, seed=derive_seed(seed, f"candidate:{tag}"))
        started = time.perf_counter()
        try:
            result = train(spec, data, config)
        except TrainingDiverged as exc:
            logger.warning("candidate %s (seed %d) diverged: %s", tag, seed, exc)
            return RunOutcome(0.0, time.perf_counter() - started, True)
        return RunOutcome(result.final_test_accuracy, result.wall_time_seconds, False)

    run.schedule_id = schedule.schedule_id()
    return run


def table_oracle() -> Oracle:
    """Oracle that replays the recorded accuracies keyed by sweep tag."""

    def run(tag: str, spec: NetSpec, seed: int) -> RunOutcome:
        if tag not in RECORDED_ACCURACY:
            raise SearchError(
                f"no recorded accuracy for candidate '{tag}'; the table oracle only "
                "covers the default plan's sweep"
            )
        return RunOutcome(RECORDED_ACCURACY[tag], 0.0, False)

    run.schedule_id = "table"
    return run


@dataclass(frozen=True)
class CandidateResult:
    tag: str
    ident: str
    params: int
    memory: int
    accuracy: float
    seed: int
    schedule_id: str
    wall_time: float
    diverged: bool
    spec: NetSpec | None = None


def _ledger_line(r: CandidateResult) -> str:
    return (
        f"tag={r.tag} id={r.ident} seed={r.seed} params={r.params} memory={r.memory} "
        f"accuracy={r.accuracy:.6f} schedule={r.schedule_id} wall={r.wall_time:.3f} "
        f"diverged={int(r.diverged)}"
    )


def _parse_ledger_line(line: str) -> CandidateResult:
    fields = {}
    for token in line.split():
        key, _, value = token.partition("=")
        fields[key] = value
    try:
        return CandidateResult(
            tag=fields["tag"],
            ident=fields["id"],
            params=int(fields["params"]),
            memory=int(fields["memory"]),
            accuracy=float(fields["accuracy"]),
            seed=int(fields["seed"]),
            schedule_id=fields["schedule"],
            wall_time=float(fields["wall"]),
            diverged=bool(int(fields["diverged"])),
        )
    except KeyError as exc:
        raise SearchError(f"malformed ledger line (missing {exc}): {line!r}") from None


def load_ledger(path) -> list[CandidateResult]:
    results = []
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if line and not line.startswith("#"):
                results.append(_parse_ledger_line(line))
    return results


def run_sweep(candidates: list[Candidate], oracle: Oracle, seeds=(0,),
              ledger_path=None, workers: int = 1) -> list[CandidateResult]:
    """Run every (candidate, seed) pair not already in the ledger.

    New records are appended to `ledger_path` as they finish, so an
    interrupted sweep resumes where it stopped.  The returned list always
    covers all pairs in candidate x seed order regardless of resume state.
    """
    done: dict[tuple[str, int], CandidateResult] = {}
    if ledger_path is not None and Path(ledger_path).exists():
        for rec in load_ledger(ledger_path):
            done[(rec.tag, rec.seed)] = rec

    by_tag = {c.tag: c.spec for c in candidates}
    accounts = {tag: analyze(spec) for tag, spec in by_tag.items()}
    schedule_id = getattr(oracle, "schedule_id", "unknown")

    def make_record(tag: str, seed: int, outcome: RunOutcome) -> CandidateResult:
        report = accounts[tag]
        return CandidateResult(
            tag=tag,
            ident=report.spec_ident,
            params=report.total_params,
            memory=report.total_memory,
            accuracy=outcome.accuracy,
            seed=seed,
            schedule_id=schedule_id,
            wall_time=outcome.wall_time,
            diverged=outcome.diverged,
        )

    pending = [(c.tag, seed) for c in candidates for seed in seeds if (c.tag, seed) not in done]

    ledger_file = open(ledger_path, "a", encoding="utf-8") if ledger_path is not None else None
    try:
        if workers > 1 and len(pending) > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                futures = {
                    pool.submit(oracle, tag, by_tag[tag], seed): (tag, seed) for tag, seed in pending
                }
                for future, (tag, seed) in futures.items():
                    rec = make_record(tag, seed, future.result())
                    done[(tag, seed)] = rec
                    if ledger_file:
                        ledger_file.write(_ledger_line(rec) + "\n")
                        ledger_file.flush()
        else:
            for tag, seed in pending:
                rec = make_record(tag, seed, oracle(tag, by_tag[tag], seed))
                done[(tag, seed)] = rec
                if ledger_file:
                    ledger_file.write(_ledger_line(rec) + "\n")
                    ledger_file.flush()
    finally:
        if ledger_file:
            ledger_file.close()

    out = []
    for c in candidates:
        for seed in seeds:
            rec = done[(c.tag, seed)]
            out.append(replace(rec, spec=by_tag[c.tag]))
    return out


# --- selection and frontier ----------------------------------------------------


@dataclass(frozen=True)
class AggregateResult:
    """Per-architecture aggregate: median accuracy over all runs sharing an id."""

    ident: str
    params: int
    memory: int
    accuracy: float
    n_runs: int
    tags: tuple[str, ...]
    spec: NetSpec | None = None
    any_diverged: bool = False


def _median(values: list[float]) -> float:
    ordered = sorted(values)
    n = len(ordered)
    mid = n // 2
    return ordered[mid] if n % 2 else 0.5 * (ordered[mid - 1] + ordered[mid])


def aggregate_results(results: list[CandidateResult]) -> list[AggregateResult]:
    groups: dict[str, list[CandidateResult]] = {}
    for r in results:
        groups.setdefault(r.ident, []).append(r)
    out = []
    for ident, group in groups.items():
        spec = next((g.spec for g in group if g.spec is not None), None)
        out.append(
            AggregateResult(
                ident=ident,
                params=group[0].params,
                memory=group[0].memory,
                accuracy=_median([g.accuracy for g in group]),
                n_runs=len(group),
                tags=tuple(dict.fromkeys(g.tag for g in group)),
                spec=spec,
                any_diverged=any(g.diverged for g in group),
            )
        )
    return out


@dataclass(frozen=True)
class SelectionResult:
    feasible: bool
    threshold: float
    choice: AggregateResult | None
    best: AggregateResult

    def describe(self) -> str:
        if self.feasible:
            c = self.choice
            return (
                f"selected {c.ident}: {c.params:,} params, {c.memory:,} memory elements, "
                f"accuracy {c.accuracy:.4f} >= threshold {self.threshold:.4f}"
            )
        return (
            f"infeasible: no candidate reaches threshold {self.threshold:.4f}; "
            f"best is {self.best.ident} at accuracy {self.best.accuracy:.4f}"
        )


def select_minimal(results: list[CandidateResult], threshold: float) -> SelectionResult:
    """Smallest architecture meeting the threshold.

    Ties break by smaller memory, then lexicographic id.  When nothing
    meets the threshold the outcome is explicit rather than an exception,
    and carries the best accuracy found.
    """
    if not results:
        raise SearchError("select_minimal needs at least one result")
    aggregates = aggregate_results(results)
    best = max(aggregates, key=lambda a: a.accuracy)
    feasible = [a for a in aggregates if a.accuracy >= threshold]
    if not feasible:
        return SelectionResult(feasible=False, threshold=threshold, choice=None, best=best)
    choice = min(feasible, key=lambda a: (a.params, a.memory, a.ident))
    return SelectionResult(feasible=True, threshold=threshold, choice=choice, best=best)


@dataclass(frozen=True)
class FrontierPoint:
    size: int  # parameter count
    accuracy: float


def build_frontier(results: list[CandidateResult]) -> list[FrontierPoint]:
    """Minimum model size per achieved accuracy level, as a strict staircase.

    For every achieved accuracy level f (ascending), the frontier holds
    s(f) = min params over results with accuracy >= f; duplicate sizes
    collapse onto their highest accuracy, so sizes and accuracies are
    both strictly increasing.
    """
    if not results:
        raise SearchError("build_frontier needs at least one result")
    aggregates = aggregate_results(results)
    levels = sorted({a.accuracy for a in aggregates})
    by_size: dict[int, float] = {}
    for f in levels:
        size = min(a.params for a in aggregates if a.accuracy >= f)
        by_size[size] = f  # ascending f: highest level per size wins
    return [FrontierPoint(size=s, accuracy=f) for s, f in sorted(by_size.items())]


def frontier_csv(frontier: list[FrontierPoint]) -> str:
    lines = ["params,accuracy"]
    lines += [f"{p.size},{p.accuracy:g}" for p in frontier]
    return "\n".join(lines) + "\n"


def _grid_cell(spec: NetSpec, pool_window: int = 2, fc1_width: int = 128):
    """(kernel, depth) when `spec` is a kernel/depth-grid member, else None."""
    convs = [l for l in spec.layers if l.kind == "conv"]
    pools = [l for l in spec.layers if l.kind == "maxpool"]
    denses = [l for l in spec.layers if l.kind == "dense"]
    if len(convs) != 1 or len(pools) != 1 or len(denses) != 2:
        return None
    if pools[0].window != pool_window or denses[0].out_features != fc1_width:
        return None
    return convs[0].kernel, convs[0].out_channels


_GRID_TAG = re.compile(r"^conv1=(\d+)x\1x(\d+)$")


def export_curves(results: list[CandidateResult], kernels=(5, 3, 1),
                  depths=(32, 16, 8, 4, 2)) -> str:
    """Accuracy-vs-depth series, one column per kernel size, as CSV.

    Grid cells come from the conv1 sweep rows (tags `conv1=KxKxD`),
    median over seeds; when no such tags exist, any result whose spec
    matches the grid template (single conv, 2x2 pool, 128-wide hidden
    layer) is used instead.  Missing cells are left blank, never
    interpolated.
    """
    cells: dict[tuple[int, int], list[float]] = {}
    for r in results:
        m = _GRID_TAG.match(r.tag)
        if m:
            cells.setdefault((int(m.group(1)), int(m.group(2))), []).append(r.accuracy)
    if not cells:
        for agg in aggregate_results(results):
            if agg.spec is None:
                continue
            cell = _grid_cell(agg.spec)
            if cell is not None:
                cells.setdefault(cell, []).append(agg.accuracy)
    lines = ["depth," + ",".join(f"{k}x{k}" for k in kernels)]
    for d in depths:
        row = [str(d)]
        for k in kernels:
            values = cells.get((k, d))
            row.append("" if not values else f"{_median(values):g}")
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


# --- the whole procedure ---------------------------------------------------------


@dataclass
class SearchOutput:
    results: list[CandidateResult]
    selection: SelectionResult
    frontier: list[FrontierPoint]
    curves_csv: str
    ledger_path: Path | None
    selected_spec_path: Path | None


def run_search(plan: SearchPlan, oracle: Oracle, out_dir=None, workers: int = 1,
               exhaustive: bool = False) -> SearchOutput:
    """Sweep, select, and write the ledger/frontier/curves artifacts."""
    candidates = exhaustive_candidates(plan) if exhaustive else enumerate_candidates(plan)
    if not candidates:
        raise SearchError("plan produced no valid candidates")
    out_path = Path(out_dir) if out_dir is not None else None
    ledger_path = None
    if out_path is not None:
        out_path.mkdir(parents=True, exist_ok=True)
        ledger_path = out_path / "results.ledger"
    results = run_sweep(candidates, oracle, seeds=plan.seeds, ledger_path=ledger_path,
                        workers=workers)
    selection = select_minimal(results, plan.threshold)
    frontier = build_frontier(results)
    curves = export_curves(results)
    selected_path = None
    if out_path is not None:
        (out_path / "frontier.csv").write_text(frontier_csv(frontier), encoding="utf-8")
        (out_path / "curves.csv").write_text(curves, encoding="utf-8")
        if selection.feasible and selection.choice.spec is not None:
            selected_path = out_path / "selected.spec"
            save_spec(selection.choice.spec, selected_path)
    return SearchOutput(
        results=results,
        selection=selection,
        frontier=frontier,
        curves_csv=curves,
        ledger_path=ledger_path,
        selected_spec_path=selected_path,
    )


# --- plan (de)serialization ------------------------------------------------------


def _resolve_base(token: str) -> NetSpec:
    from . import netspec

    presets = {
        "baseline": netspec.baseline_spec,
        "dropped-conv2": netspec.dropped_conv2_spec,
        "optimized": netspec.optimized_spec,
        "optimized-3x3": netspec.optimized_3x3_spec,
    }
    if token in presets:
        return presets[token]()
    if "\n" in token:
        return netspec.parse_spec(token)
    raise SearchError(
        f"plan base '{token}' is neither a preset ({', '.join(presets)}) nor inline spec text"
    )


def plan_from_dict(raw: dict, base: NetSpec | None = None) -> SearchPlan:
    """Build a plan from parsed JSON; omitted fields fall back to the default plan.

    `base` may also come from the JSON itself: a preset name or inline
    spec text under the "base" key.
    """
    defaults = default_plan()
    if base is not None:
        spec_base = base
    elif "base" in raw:
        spec_base = _resolve_base(raw["base"])
    else:
        spec_base = defaults.base
    stages = []
    for item in raw.get("stages", [s.__dict__ for s in defaults.stages]):
        try:
            knob = item["knob"]
            values = item["values"]
            if knob == "conv1":
                values = tuple(tuple(v) for v in values)
                pick = tuple(item["pick"])
            else:
                values = tuple(values)
                pick = item["pick"]
        except (KeyError, TypeError) as exc:
            raise SearchError(f"malformed plan stage {item!r}: {exc}") from None
        stages.append(Stage(knob, values, pick))
    try:
        schedule = TrainConfig(**raw.get("schedule", {}))
        schedule.validate()
    except TypeError as exc:
        raise SearchError(f"malformed plan schedule: {exc}") from None
    extras = defaults.extras if raw.get("include_extras", True) else ()
    return SearchPlan(
        base=spec_base,
        threshold=float(raw.get("threshold", defaults.threshold)),
        stages=tuple(stages),
        extras=extras,
        schedule=schedule,
        seeds=tuple(int(s) for s in raw.get("seeds", defaults.seeds)),
    )


def load_plan(path, base: NetSpec | None = None) -> SearchPlan:
    with open(path, "r", encoding="utf-8") as f:
        return plan_from_dict(json.load(f), base=base)
