"""Train the optimized network at desk scale and inspect the run.

Uses the real MNIST files if SLIMNET_DATA_DIR points at them, otherwise
renders the synthetic digit corpus.  A desk-scale schedule (2,000
iterations) finishes in well under a minute; the full protocol is 20,000
iterations with the same hyperparameters.

Run: python demos/train_small_net.py
"""

import os

from slimnet.mnist import load_data_dir
from slimnet.netspec import optimized_spec
from slimnet.synth import synthetic_splits
from slimnet.trainer import TrainConfig, evaluate, train

# ── data ─────────────────────────────────────────────────────────────────────
data_dir = os.environ.get("SLIMNET_DATA_DIR")
if data_dir:
    data = load_data_dir(data_dir)
    source = "MNIST"
else:
    data = synthetic_splits(n_train=12000, n_validation=500, n_test=2000, seed=7)
    source = "synthetic digits (set SLIMNET_DATA_DIR for real MNIST)"
print(f"data: {source}; train {len(data.train.images):,}, test {len(data.test.images):,}")

# ── training ─────────────────────────────────────────────────────────────────
spec = optimized_spec()
config = TrainConfig(iterations=2000, seed=0, loss_log_every=200, eval_every=500)
print(f"training '{spec.name}' for {config.iterations} iterations "
      f"(lr {config.learning_rate:g}, batch {config.batch_size}, seed {config.seed}) ...")
result = train(spec, data, config)

print("\niter   minibatch loss")
for it, loss in result.loss_trace:
    print(f"{it:>5}  {loss:.4f}")
print("\niter   validation accuracy")
for it, acc in result.eval_trace:
    print(f"{it:>5}  {acc:.4f}")

print(f"\nfinal test accuracy: {result.final_test_accuracy:.4f}")
print(f"wall time: {result.wall_time_seconds:.1f} s")

# ── the run is a pure function of (spec, data, config) ───────────────────────
again = train(spec, data, config)
print(f"re-run with the same seed: {again.final_test_accuracy:.4f} "
      f"({'bit-identical' if again.final_test_accuracy == result.final_test_accuracy else 'MISMATCH'})")

# evaluation never touches dropout or RNG state
train_acc = evaluate(spec, result.params, data.train.images[:2000], data.train.labels[:2000])
print(f"accuracy on 2,000 training samples: {train_acc:.4f}")
