"""Dense NCHW tensor kernels: convolution, pooling, activation, loss.

All kernels are pure functions over float64 arrays.  Reductions run in a
fixed per-element order (no BLAS dispatch), so every output element is a
deterministic function of its own inputs and results are bitwise identical
no matter how a batch is split or concatenated.  Training accepts proposals
on a strict loss comparison, so this exactness is load-bearing, not
cosmetic.
"""

from dataclasses import dataclass
from enum import Enum

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import DimensionError

# Tensors are plain float64 ndarrays in (batch, channel, height, width) order.
Tensor4 = np.ndarray

# Degenerate-spread guard for the pre-softmax scaling.
STD_GUARD = 1e-12
# Probabilities are clamped here before the log, keeping saturated losses finite.
PROB_FLOOR = 1e-12


class ConvMode(Enum):
    """Convolution semantics.

    CHANNEL_SUM sums the input channels into one map first and applies each
    2-D filter to the summed map, so filters carry no input-channel axis.
    STANDARD is the conventional semantics: per-channel kernels applied to
    matching input channels, then summed.
    """

    CHANNEL_SUM = "channel-sum"
    STANDARD = "standard"


@dataclass(frozen=True)
class KernelBank:
    """The filters of one convolution layer.

    CHANNEL_SUM filters have shape (num_filters, kh, kw); STANDARD filters
    have shape (num_filters, in_channels, kh, kw).  No bias terms exist
    anywhere in this package.
    """

    mode: ConvMode
    filters: np.ndarray

    def __post_init__(self):
        want = 3 if self.mode is ConvMode.CHANNEL_SUM else 4
        if self.filters.ndim != want:
            raise DimensionError(
                f"{self.mode.value} filters must have {want} axes, "
                f"got shape {self.filters.shape}"
            )
        if self.num_filters < 1 or self.kh < 1 or self.kw < 1:
            raise DimensionError(f"degenerate filter shape {self.filters.shape}")

    @property
    def num_filters(self) -> int:
        return self.filters.shape[0]

    @property
    def in_channels(self):
        """Input-channel count for STANDARD banks; None for CHANNEL_SUM."""
        return None if self.mode is ConvMode.CHANNEL_SUM else self.filters.shape[1]

    @property
    def kh(self) -> int:
        return self.filters.shape[-2]

    @property
    def kw(self) -> int:
        return self.filters.shape[-1]


def channel_sum(x: Tensor4) -> Tensor4:
    """Sum the channel axis, keeping a singleton channel."""
    return x.sum(axis=1, keepdims=True)


def _as_batch(x) -> Tensor4:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 4:
        raise DimensionError(f"expected a (n, c, h, w) tensor, got shape {x.shape}")
    return x


def correlate_valid(x: Tensor4, filters: np.ndarray) -> Tensor4:
    """Valid, stride-1 cross-correlation of (n,c,h,w) with (f,c,kh,kw).

    The contraction runs through einsum's sum-of-products loop (optimize
    off), whose per-element reduction order depends only on the kernel
    volume, never on the batch size.
    """
    n, c, h, w = x.shape
    f, _, kh, kw = filters.shape
    oh, ow = h - kh + 1, w - kw + 1
    windows = sliding_window_view(x, (kh, kw), axis=(2, 3))
    cols = windows.transpose(0, 2, 3, 1, 4, 5).reshape(n * oh * ow, c * kh * kw)
    out = np.einsum("mk,fk->mf", cols, filters.reshape(f, -1), optimize=False)
    return np.ascontiguousarray(out.reshape(n, oh, ow, f).transpose(0, 3, 1, 2))


def conv2d(x, bank: KernelBank) -> Tensor4:
    """Convolve a batch with a kernel bank (valid padding, stride 1, no bias).

    Output shape is (n, num_filters, h-kh+1, w-kw+1).  CHANNEL_SUM input is
    summed over channels before the correlation; a single-channel input
    therefore produces bit-identical results in both modes when the 2-D
    kernels match, because both modes run the same correlation.
    """
    x = _as_batch(x)
    n, c, h, w = x.shape
    if h < bank.kh:
        raise DimensionError(f"input height {h} smaller than kernel height {bank.kh}")
    if w < bank.kw:
        raise DimensionError(f"input width {w} smaller than kernel width {bank.kw}")
    if bank.mode is ConvMode.CHANNEL_SUM:
        return correlate_valid(channel_sum(x), bank.filters[:, np.newaxis])
    if bank.in_channels != c:
        raise DimensionError(
            f"bank expects {bank.in_channels} input channels, got {c}"
        )
    return correlate_valid(x, bank.filters)


def pool_windows(x) -> np.ndarray:
    """The 2x2 pooling windows of a batch, flattened in reading order.

    Returns shape (n, c, h/2, w/2, 4); the last axis walks the window
    row-major, so argmax over it picks the first maximum in scan order.
    The gradient engine reduces these same windows, keeping its cached
    pooling bitwise identical to maxpool2.
    """
    x = _as_batch(x)
    n, c, h, w = x.shape
    if h % 2:
        raise DimensionError(f"input height {h} is odd; 2x2 pooling needs even extents")
    if w % 2:
        raise DimensionError(f"input width {w} is odd; 2x2 pooling needs even extents")
    windows = x.reshape(n, c, h // 2, 2, w // 2, 2).transpose(0, 1, 2, 4, 3, 5)
    return windows.reshape(n, c, h // 2, w // 2, 4)


def maxpool2(x) -> Tensor4:
    """2x2, stride-2, per-channel max pooling; spatial extents must be even."""
    return pool_windows(x).max(axis=-1)


def relu(x):
    """Elementwise max(0, v); shape preserved."""
    return np.maximum(x, 0.0)


def preprocess_scale(logits):
    """Per-sample divisor used by softmax_preprocess.

    Population (divide-by-N) standard deviation over each sample's class
    logits, replaced by 1 when the spread is degenerate (< STD_GUARD).
    """
    std = np.asarray(logits, dtype=np.float64).std(axis=-1, keepdims=True)
    return np.where(std < STD_GUARD, 1.0, std)


def softmax_preprocess(logits):
    """Scale each sample's logits by 1/std, then shift so the max is exactly 0.

    Shifting by the max leaves the softmax unchanged, so this equals pure
    temperature scaling by the per-sample standard deviation; it keeps the
    exp arguments in (-inf, 0] regardless of logit magnitude.
    """
    z = np.asarray(logits, dtype=np.float64) / preprocess_scale(logits)
    return z - z.max(axis=-1, keepdims=True)


def softmax(logits):
    """Row softmax.  Callers pass max-reduced logits (see softmax_preprocess)."""
    e = np.exp(logits)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_cross_entropy(logits, labels) -> float:
    """Mean over the batch of -log softmax(logits)[label].

    Expects (n, num_classes) logits that already went through
    softmax_preprocess.  Probabilities are clamped to PROB_FLOOR before the
    log, so the result is finite and >= 0.
    """
    z = np.asarray(logits, dtype=np.float64)
    if z.ndim != 2:
        raise DimensionError(f"expected (n, num_classes) logits, got shape {z.shape}")
    labels = np.asarray(labels)
    n, k = z.shape
    if labels.shape != (n,):
        raise DimensionError(
            f"labels shape {labels.shape} does not match batch of {n}"
        )
    if labels.size and (labels.min() < 0 or labels.max() >= k):
        raise IndexError(f"label out of range [0, {k})")
    p = softmax(z)[np.arange(n), labels]
    return float(-np.log(np.maximum(p, PROB_FLOOR)).mean())
