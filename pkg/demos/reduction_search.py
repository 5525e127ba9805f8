"""Replay the staged architecture reduction and build the size/accuracy frontier.

The `table` oracle scores every candidate with the recorded reference
accuracies, so the whole procedure runs in milliseconds; swap in
`trained_oracle(data, schedule)` to re-run it with real training.

Run: python demos/reduction_search.py
"""

import tempfile
from pathlib import Path

from slimnet.search import (
    build_frontier,
    default_plan,
    enumerate_candidates,
    run_search,
    select_minimal,
    table_oracle,
)

plan = default_plan(threshold=0.95)
print(f"worst-case accuracy threshold: {plan.threshold:.0%}\n")

# ── the staged sweep ─────────────────────────────────────────────────────────
from slimnet.netspec import spec_id

candidates = enumerate_candidates(plan)
print(f"{len(candidates)} candidates across {len(plan.stages)} stages:")
for c in candidates:
    print(f"  {c.tag:<22} {spec_id(c.spec)}")

out_dir = Path(tempfile.mkdtemp(prefix="reduction-search-"))
output = run_search(plan, table_oracle(), out_dir=out_dir)

# ── results ledger ───────────────────────────────────────────────────────────
print(f"\nledger ({output.ledger_path}):")
for r in output.results:
    flag = " DIVERGED" if r.diverged else ""
    print(f"  {r.tag:<22} params {r.params:>9,}  memory {r.memory:>7,}  acc {r.accuracy:.4f}{flag}")

# ── selection ────────────────────────────────────────────────────────────────
print()
print(output.selection.describe())
print(f"selected spec written to {output.selected_spec_path}")

# the 3x3 variant is smaller still, but misses the threshold:
smallest = select_minimal(output.results, 0.0)
print(f"(global minimum ignoring the threshold would be {smallest.choice.ident} "
      f"at {smallest.choice.params:,} params but only {smallest.choice.accuracy:.2%})")

# ── frontier: minimum size per achieved accuracy level ───────────────────────
frontier = build_frontier(output.results)
print("\nfrontier (size strictly increases with accuracy):")
for p in frontier:
    print(f"  s({p.accuracy:.4f}) = {p.size:>9,}")

print("\naccuracy-vs-depth curves (one column per conv kernel):")
print(output.curves_csv)
