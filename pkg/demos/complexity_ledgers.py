"""Walk through the complexity accountant on the stock architectures.

Run: python demos/complexity_ledgers.py
"""

from slimnet.accounting import analyze, diff_reports
from slimnet.golden import GOLDEN_LEDGERS, check_against_golden
from slimnet.netspec import baseline_spec, dropped_conv2_spec, optimized_spec, serialize_spec

# ── the baseline network ─────────────────────────────────────────────────────
base = baseline_spec()
print("Baseline architecture, as text:\n")
print(serialize_spec(base))

base_report = analyze(base)
print(base_report.render())
print(f"\n  -> {base_report.total_params:,} parameters, "
      f"{base_report.total_memory:,} activation elements "
      f"({base_report.total_memory * 8 / 1024:.1f} KiB at double precision)\n")

# ── dropping the second conv stage ───────────────────────────────────────────
# Memory shrinks (the big conv2/pool2 maps disappear) but fc1 now reads the
# full 14x14x32 map, so parameters roughly double.
dropped = analyze(dropped_conv2_spec())
print(dropped.render())
print(f"\n  -> {dropped.total_params:,} parameters, {dropped.total_memory:,} elements\n")

# ── the reduced (optimized) network ──────────────────────────────────────────
opt_report = analyze(optimized_spec())
print(opt_report.render())

diff = diff_reports(base_report, opt_report)
print("\nBaseline vs optimized:")
print(diff.render())
print(f"\nThat is {diff.param_ratio:.1f}x fewer parameters and "
      f"{diff.memory_ratio:.1f}x less activation memory (exact totals).")

# ── golden checks ────────────────────────────────────────────────────────────
# The expected cell values ship with the library; two known misprints in the
# reference tables are flagged as notes rather than reproduced.
for key in ("baseline", "dropped-conv2", "optimized"):
    spec = {"baseline": base, "dropped-conv2": dropped_conv2_spec(), "optimized": optimized_spec()}[key]
    problems = check_against_golden(analyze(spec), key)
    print(f"golden[{key}]: {'OK' if not problems else problems}")
    for note in GOLDEN_LEDGERS[key].notes:
        print(f"  note: {note}")

# ── bias-inclusive counting ──────────────────────────────────────────────────
honest = analyze(optimized_spec(), "with_biases")
print(f"\nWith biases included the optimized net has {honest.total_params:,} parameters "
      f"(vs {opt_report.total_params:,} under the ledger convention).")
