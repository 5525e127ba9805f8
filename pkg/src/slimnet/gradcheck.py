"""Finite-difference verification of every backward kernel.

Each check builds a random small instance, computes analytical gradients,
and compares every entry against a central difference (step 1e-5) of the
forward map in double precision.  Relative error uses a 1e-6 floor so
exact-zero gradients compare cleanly.  Inputs are sampled away from ReLU
kinks and pooling ties, where the true derivative does not exist.

`fault` flips the sign of the named layer's analytical gradient; it
exists so tests (and the CLI) can demonstrate that the checker actually
catches a broken backward pass.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import ops
from .rng import substream

__all__ = ["CheckResult", "LAYERS", "numerical_gradient", "max_rel_err", "check_layer", "run_suite"]

STEP = 1e-5
TOLERANCE = 1e-4
_FLOOR = 1e-6


@dataclass(frozen=True)
class CheckResult:
    layer: str
    trials: int
    max_rel_err: float
    ok: bool

    def line(self) -> str:
        status = "PASS" if self.ok else "FAIL"
        return f"{status}  {self.layer:<8} trials={self.trials}  max rel err {self.max_rel_err:.3e}"


def numerical_gradient(f, x: np.ndarray, step: float = STEP) -> np.ndarray:
    """Central finite difference of scalar-valued `f` at `x`, entrywise."""
    x = x.astype(np.float64)
    grad = np.zeros_like(x)
    flat = x.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + step
        hi = f(x)
        flat[i] = orig - step
        lo = f(x)
        flat[i] = orig
        gflat[i] = (hi - lo) / (2 * step)
    return grad


def max_rel_err(analytic: np.ndarray, numeric: np.ndarray) -> float:
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), _FLOOR)
    return float((np.abs(analytic - numeric) / denom).max())


def _away_from_zero(rng, shape, margin=1e-2):
    # magnitudes in [margin, 1]: keeps ReLU inputs off the kink
    mag = rng.uniform(margin, 1.0, size=shape)
    sign = np.where(rng.random(shape) < 0.5, -1.0, 1.0)
    return mag * sign


def _separated_windows(rng, shape, window, min_gap=1e-3):
    """Random array whose pooling windows have no near-ties."""
    x = rng.uniform(-1.0, 1.0, size=shape)
    win = ops._pool_windows(x[None, ...], window)[0]
    order = np.sort(win, axis=2)
    while (np.diff(order, axis=2) < min_gap).any():
        x = rng.uniform(-1.0, 1.0, size=shape)
        win = ops._pool_windows(x[None, ...], window)[0]
        order = np.sort(win, axis=2)
    return x


def _weighted_sum(y: np.ndarray, w: np.ndarray) -> float:
    # random linear functional makes the scalar loss sensitive to every entry
    return float((y * w).sum())


def _check_conv(rng, fault: bool) -> float:
    h = int(rng.integers(2, 7))
    wdt = int(rng.integers(2, 7))
    cin = int(rng.integers(1, 5))
    cout = int(rng.integers(1, 5))
    k = int(rng.choice([1, 3, 5]))
    x = rng.uniform(-1, 1, size=(h, wdt, cin))
    p = ops.ConvParams(rng.uniform(-1, 1, size=(k, k, cin, cout)), rng.uniform(-1, 1, size=cout))
    probe = rng.uniform(-1, 1, size=(h, wdt, cout))
    gx, gw, gb = ops.conv2d_backward(x, p, probe)
    if fault:
        gw = -gw
    worst = 0.0
    worst = max(worst, max_rel_err(gx, numerical_gradient(
        lambda v: _weighted_sum(ops.conv2d_forward(v, p), probe), x.copy())))
    worst = max(worst, max_rel_err(gw, numerical_gradient(
        lambda v: _weighted_sum(ops.conv2d_forward(x, ops.ConvParams(v, p.bias)), probe), p.weights.copy())))
    worst = max(worst, max_rel_err(gb, numerical_gradient(
        lambda v: _weighted_sum(ops.conv2d_forward(x, ops.ConvParams(p.weights, v)), probe), p.bias.copy())))
    return worst


def _check_dense(rng, fault: bool) -> float:
    fin = int(rng.integers(2, 8))
    fout = int(rng.integers(1, 6))
    x = rng.uniform(-1, 1, size=fin)
    p = ops.DenseParams(rng.uniform(-1, 1, size=(fin, fout)), rng.uniform(-1, 1, size=fout))
    probe = rng.uniform(-1, 1, size=fout)
    gx, gw, gb = ops.dense_backward(x, p, probe)
    if fault:
        gw = -gw
    worst = max_rel_err(gx, numerical_gradient(
        lambda v: _weighted_sum(ops.dense_forward(v, p), probe), x.copy()))
    worst = max(worst, max_rel_err(gw, numerical_gradient(
        lambda v: _weighted_sum(ops.dense_forward(x, ops.DenseParams(v, p.bias)), probe), p.weights.copy())))
    worst = max(worst, max_rel_err(gb, numerical_gradient(
        lambda v: _weighted_sum(ops.dense_forward(x, ops.DenseParams(p.weights, v)), probe), p.bias.copy())))
    return worst


def _check_relu(rng, fault: bool) -> float:
    x = _away_from_zero(rng, (int(rng.integers(2, 6)), int(rng.integers(2, 6))))
    probe = rng.uniform(-1, 1, size=x.shape)
    g = ops.relu_backward(x, probe)
    if fault:
        g = -g
    return max_rel_err(g, numerical_gradient(lambda v: _weighted_sum(ops.relu(v), probe), x.copy()))


def _check_maxpool(rng, fault: bool) -> float:
    k = int(rng.choice([2, 4]))
    ho = int(rng.integers(1, 3))
    c = int(rng.integers(1, 4))
    x = _separated_windows(rng, (ho * k, ho * k, c), k)
    probe = rng.uniform(-1, 1, size=(ho, ho, c))
    _, argmax = ops.maxpool_forward(x, k)
    g = ops.maxpool_backward(probe, argmax, k)
    if fault:
        g = -g
    return max_rel_err(g, numerical_gradient(
        lambda v: _weighted_sum(ops.maxpool_forward(v, k)[0], probe), x.copy()))


def _check_dropout(rng, fault: bool) -> float:
    # mask held fixed: checks the backward scaling against the masked forward
    x = rng.uniform(-1, 1, size=(4, 4))
    keep = float(rng.uniform(0.3, 0.9))
    mask_rng_seed = int(rng.integers(0, 2**32))
    _, mask = ops.dropout(x, keep, np.random.default_rng(mask_rng_seed), training=True)
    probe = rng.uniform(-1, 1, size=x.shape)
    g = ops.dropout_backward(probe, mask, keep)
    if fault:
        g = -g
    return max_rel_err(g, numerical_gradient(lambda v: _weighted_sum(v * mask / keep, probe), x.copy()))


def _check_softmax(rng, fault: bool) -> float:
    logits = rng.uniform(-2, 2, size=10)
    label = np.zeros(10)
    label[int(rng.integers(0, 10))] = 1.0
    _, grad = ops.softmax_xent(logits, label)
    if fault:
        grad = -grad
    return max_rel_err(grad, numerical_gradient(
        lambda v: ops.softmax_xent(v, label)[0], logits.copy()))


LAYERS = {
    "conv": _check_conv,
    "dense": _check_dense,
    "relu": _check_relu,
    "maxpool": _check_maxpool,
    "dropout": _check_dropout,
    "softmax": _check_softmax,
}


def check_layer(layer: str, trials: int = 20, seed: int = 0, fault: bool = False) -> CheckResult:
    """Run `trials` randomized instances of one layer's gradient check."""
    if layer not in LAYERS:
        raise ValueError(f"unknown layer '{layer}'; choose from {sorted(LAYERS)}")
    rng = substream(seed, f"gradcheck-{layer}")
    worst = 0.0
    for _ in range(trials):
        worst = max(worst, LAYERS[layer](rng, fault))
    return CheckResult(layer=layer, trials=trials, max_rel_err=worst, ok=worst <= TOLERANCE)


def run_suite(layers=None, trials: int = 20, seed: int = 0, fault_layer: str | None = None):
    """Check every requested layer; returns a list of CheckResult."""
    layers = list(LAYERS) if layers is None else list(layers)
    return [check_layer(l, trials=trials, seed=seed, fault=(l == fault_layer)) for l in layers]
