"""Reverse-mode gradients of the batch loss, with a finite-difference oracle.

Only the first-order trainer needs this module; the greedy trainers never
differentiate anything.

One differentiation convention matters and is easy to miss: the per-sample
1/std factor applied before the softmax is treated as a constant during
backward (a stop-gradient on the std), because that scaling is data
preprocessing, not a learned transform.  The finite-difference oracle
mirrors the convention by evaluating every perturbed loss with the scale
cached from the unperturbed weights.  An end-to-end derivative through the
std would differ from what this module computes.
"""

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import DimensionError
from .model import ConvSpec, NetworkModel, PoolSpec, build_three_layer_cnn, init_weights
from .ops import (
    PROB_FLOOR,
    ConvMode,
    channel_sum,
    correlate_valid,
    pool_windows,
    preprocess_scale,
    softmax,
    softmax_cross_entropy,
)
from .proposals import RngStream

FD_EPSILON = 1e-5
# Relative-error denominator floor; entries where backward and the oracle
# are both below this magnitude count as agreeing (dead-ReLU regions give
# exact zeros on one side and pure roundoff on the other).
REL_ERROR_FLOOR = 1e-6
GRADCHECK_TOLERANCE = 1e-4


@dataclass
class _ConvTrace:
    spec: ConvSpec
    x: np.ndarray          # input as fed to the layer
    summed: np.ndarray | None  # channel-summed input (channel-sum mode only)
    mask: np.ndarray | None    # ReLU pass-through mask, None when no activation


@dataclass
class _PoolTrace:
    in_shape: tuple
    argmax: np.ndarray     # (n, c, h/2, w/2) index into the 4-slot window


@dataclass
class ForwardCache:
    """Everything backward needs from one forward pass.

    The cache is valid only for the exact (weights, batch) pair it was
    built from; mutating the model afterwards silently stales it.
    """

    traces: tuple
    logits: np.ndarray        # raw head output (n, num_classes)
    scale: np.ndarray         # per-sample preprocessing divisor (n, 1)
    preprocessed: np.ndarray  # scaled, max-shifted logits
    probs: np.ndarray         # softmax of preprocessed
    loss: float


def forward_with_cache(model: NetworkModel, x, labels):
    """Forward pass recording layer inputs, pool argmaxes, and ReLU masks.

    Returns (loss, cache) where loss is bitwise equal to
    model.batch_loss(x, labels): every stage reduces through the same
    kernels as the plain pipeline.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 4 or x.shape[1:] != model.input_shape:
        raise DimensionError(
            f"batch shape {x.shape} does not match input geometry "
            f"(n, {', '.join(map(str, model.input_shape))})"
        )
    traces = []
    conv_index = 0
    for spec in model.layers:
        if isinstance(spec, PoolSpec):
            windows = pool_windows(x)
            idx = windows.argmax(axis=-1)
            traces.append(_PoolTrace(x.shape, idx))
            x = windows.max(axis=-1)
            continue
        bank = model.bank(conv_index)
        if spec.mode is ConvMode.CHANNEL_SUM:
            summed = channel_sum(x)
            z = correlate_valid(summed, bank.filters[:, np.newaxis])
        else:
            summed = None
            z = correlate_valid(x, bank.filters)
        mask = None
        if spec.activation:
            mask = z > 0.0
            z = np.maximum(z, 0.0)
        traces.append(_ConvTrace(spec, x, summed, mask))
        x = z
        conv_index += 1
    logits = x.reshape(x.shape[0], model.num_classes)
    scale = preprocess_scale(logits)
    z = logits / scale
    preprocessed = z - z.max(axis=-1, keepdims=True)
    probs = softmax(preprocessed)
    loss = softmax_cross_entropy(preprocessed, labels)
    return loss, ForwardCache(tuple(traces), logits, scale, preprocessed, probs, loss)


def _conv_grads(x, filters, upstream, need_dx):
    """Weight and input gradients of correlate_valid.

    x (n,c,h,w), filters (f,c,kh,kw), upstream (n,f,oh,ow).  Contractions
    run through unoptimized einsum, keeping the reduction order fixed.
    """
    n, c, h, w = x.shape
    f, _, kh, kw = filters.shape
    oh, ow = upstream.shape[2], upstream.shape[3]
    windows = sliding_window_view(x, (kh, kw), axis=(2, 3))
    cols = windows.transpose(0, 2, 3, 1, 4, 5).reshape(n * oh * ow, c * kh * kw)
    up_cols = upstream.transpose(0, 2, 3, 1).reshape(n * oh * ow, f)
    dw = np.einsum("mf,mk->fk", up_cols, cols, optimize=False).reshape(f, c, kh, kw)
    if not need_dx:
        return dw, None
    dx = np.zeros_like(x)
    for i in range(kh):
        for j in range(kw):
            dx[:, :, i:i + oh, j:j + ow] += np.einsum(
                "nfpq,fc->ncpq", upstream, filters[:, :, i, j], optimize=False
            )
    return dw, dx


def _pool_backward(trace: _PoolTrace, upstream):
    """Scatter upstream into the argmax slot of each 2x2 window."""
    n, c, h, w = trace.in_shape
    flat = np.zeros((n, c, h // 2, w // 2, 4))
    np.put_along_axis(flat, trace.argmax[..., np.newaxis], upstream[..., np.newaxis], axis=-1)
    windows = flat.reshape(n, c, h // 2, w // 2, 2, 2).transpose(0, 1, 2, 4, 3, 5)
    return windows.reshape(n, c, h, w)


def backward(model: NetworkModel, cache: ForwardCache, labels, loss_scale: float = 1.0):
    """Gradient of loss_scale * batch loss w.r.t. the flat weight vector.

    Exact for the loss as implemented: samples whose label probability sits
    at the clamp floor contribute zero (their loss is locally constant),
    the max-shift term has zero gradient because the softmax rows of the
    cross-entropy gradient sum to zero, and the per-sample scale is a
    constant by convention (see module docstring).
    """
    labels = np.asarray(labels)
    n, k = cache.probs.shape
    rows = np.arange(n)
    dz = cache.probs.copy()
    dz[rows, labels] -= 1.0
    dz[cache.probs[rows, labels] <= PROB_FLOOR] = 0.0
    dz *= loss_scale / n
    upstream = (dz / cache.scale).reshape(n, k, 1, 1)

    grad = np.zeros(model.num_weights)
    conv_index = model.num_conv_layers
    for spec, trace in zip(reversed(model.layers), reversed(cache.traces)):
        if isinstance(spec, PoolSpec):
            upstream = _pool_backward(trace, upstream)
            continue
        conv_index -= 1
        if trace.mask is not None:
            upstream = upstream * trace.mask
        bank = model.bank(conv_index)
        first = conv_index == 0
        if trace.spec.mode is ConvMode.CHANNEL_SUM:
            dw, dsummed = _conv_grads(
                trace.summed, bank.filters[:, np.newaxis], upstream, need_dx=not first
            )
            if dsummed is not None:
                # d(sum over channels)/dx broadcasts the gradient to every channel
                upstream = np.broadcast_to(dsummed, trace.x.shape)
        else:
            dw, upstream = _conv_grads(trace.x, bank.filters, upstream, need_dx=not first)
        grad[model.conv_slice(conv_index)] = dw.ravel()
    return grad


def frozen_scale_loss(model: NetworkModel, x, labels, scale) -> float:
    """Batch loss with the per-sample preprocessing divisor pinned to scale.

    This is the function whose exact gradient backward computes; the oracle
    differentiates it so both sides honor the stop-gradient convention.
    """
    z = model.forward(x) / scale
    z = z - z.max(axis=-1, keepdims=True)
    return softmax_cross_entropy(z, labels)


def finite_difference_gradient(model: NetworkModel, x, labels,
                               epsilon: float = FD_EPSILON):
    """Central differences (L(w+eps) - L(w-eps)) / (2 eps), one weight at a time.

    The preprocessing scale is evaluated once at the base weights and held
    fixed for every perturbed evaluation.
    """
    if epsilon <= 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    scale = preprocess_scale(model.forward(x))
    work = model.copy()
    w = work.weights
    grad = np.zeros_like(w)
    for i in range(w.size):
        original = w[i]
        w[i] = original + epsilon
        plus = frozen_scale_loss(work, x, labels, scale)
        w[i] = original - epsilon
        minus = frozen_scale_loss(work, x, labels, scale)
        w[i] = original
        grad[i] = (plus - minus) / (2.0 * epsilon)
    return grad


def gradient_relative_error(a, b, floor: float = REL_ERROR_FLOOR) -> float:
    """max over entries of |a-b| / max(|a|, |b|, floor)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)
    return float((np.abs(a - b) / denom).max())


def tiny_model(mode: ConvMode, seed: int) -> NetworkModel:
    """The shrunken gradient-check network: 10x10 single-channel input,
    2 filters in each hidden conv, 10 classes."""
    net = build_three_layer_cnn((1, 10, 10), 10, mode, filters=(2, 2))
    return init_weights(net, RngStream(seed).split("tiny-weights"))


def run_gradient_check(seeds, modes=None, epsilon: float = FD_EPSILON,
                       floor: float = REL_ERROR_FLOOR, corrupt: float = 0.0):
    """Compare backward against the oracle on tiny random models.

    Returns a list of dicts {mode, seed, error} sorted as iterated.
    corrupt adds a constant to the analytic gradient's first entry, a
    negative-control hook proving the comparison can fail.
    """
    if modes is None:
        modes = (ConvMode.CHANNEL_SUM, ConvMode.STANDARD)
    results = []
    for mode in modes:
        for seed in seeds:
            net = tiny_model(mode, seed)
            data = RngStream(seed).split("tiny-batch", 1 if mode is ConvMode.CHANNEL_SUM else 2)
            x = data.random((2, 1, 10, 10))
            labels = (data.random(2) * net.num_classes).astype(np.int64)
            _, cache = forward_with_cache(net, x, labels)
            analytic = backward(net, cache, labels)
            if corrupt:
                analytic = analytic.copy()
                analytic[0] += corrupt
            oracle = finite_difference_gradient(net, x, labels, epsilon)
            results.append({
                "mode": mode,
                "seed": int(seed),
                "error": gradient_relative_error(analytic, oracle, floor),
            })
    return results
