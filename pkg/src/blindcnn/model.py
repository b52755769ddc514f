"""Three-conv-layer CNN: layer plans, a flat weight store, forward, eval.

The network is conv (no activation), 2x2 maxpool, conv (ReLU), 2x2 maxpool,
conv (no activation), then a reshape of the final 1x1 spatial maps to
(n, num_classes) logits.  There are no dense layers and no biases; the last
convolution consumes the entire remaining spatial extent, so it plays the
role of a dense head.

Weights live in one flat float64 vector.  Trainers propose, freeze, and
update at the granularity of slices into that vector; per-layer KernelBank
views are materialized on demand for the forward pass.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DimensionError
from .ops import (
    ConvMode,
    KernelBank,
    conv2d,
    maxpool2,
    relu,
    softmax_cross_entropy,
    softmax_preprocess,
)
from .proposals import RngStream


@dataclass(frozen=True)
class ConvSpec:
    """Geometry of one convolution layer.

    in_channels is None under CHANNEL_SUM semantics (filters are 2-D) and
    the incoming channel count under STANDARD.
    """

    mode: ConvMode
    num_filters: int
    kh: int
    kw: int
    in_channels: int | None
    activation: bool

    def __post_init__(self):
        if self.mode is ConvMode.CHANNEL_SUM:
            if self.in_channels is not None:
                raise ConfigurationError(
                    "channel-sum filters carry no input-channel axis"
                )
        elif self.in_channels is None or self.in_channels < 1:
            raise ConfigurationError(
                f"standard conv needs a positive channel count, got {self.in_channels}"
            )
        if min(self.num_filters, self.kh, self.kw) < 1:
            raise ConfigurationError(f"degenerate conv spec {self}")

    @property
    def bank_shape(self) -> tuple:
        if self.mode is ConvMode.CHANNEL_SUM:
            return (self.num_filters, self.kh, self.kw)
        return (self.num_filters, self.in_channels, self.kh, self.kw)

    @property
    def weights_per_filter(self) -> int:
        return int(np.prod(self.bank_shape[1:]))

    @property
    def size(self) -> int:
        return self.num_filters * self.weights_per_filter


@dataclass(frozen=True)
class PoolSpec:
    """A parameter-free 2x2, stride-2 max pooling layer."""


# Kernel-size preference when planning a conv that feeds a pooling layer.
# Sizes near 5 are tried first; the schedule picks the first size whose
# valid-conv output extent is even (poolable) and at least 2.
_KERNEL_PREFERENCE = (5, 4, 6, 3, 7, 2, 8, 1)


def _plan_axis(extent: int):
    """Kernel sizes (k1, k2, k3) for one square spatial extent.

    k1 and k2 each leave an even extent of at least 2 for the pool that
    follows; k3 equals whatever extent remains, collapsing it to 1.
    Yields (5, 5, 4) at 28, (5, 5, 5) at 32, (5, 2, 1) at 10.
    """

    def poolable(e):
        for k in _KERNEL_PREFERENCE:
            out = e - k + 1
            if out >= 2 and out % 2 == 0:
                return k, out // 2
        raise ConfigurationError(f"no kernel schedule fits spatial extent {extent}")

    k1, e1 = poolable(extent)
    k2, e2 = poolable(e1)
    return k1, k2, e2


class NetworkModel:
    """An immutable layer plan plus a mutable flat weight vector.

    The flat layout is conv layers in pipeline order, each bank in C order
    (filter-major).  with_weights() rebinds the vector without copying, so
    trainers can stage proposals cheaply; copy() snapshots it.
    """

    def __init__(self, layers, input_shape, num_classes, weights=None):
        self.layers = tuple(layers)
        self.input_shape = tuple(input_shape)
        self.num_classes = int(num_classes)
        self.conv_specs = tuple(s for s in self.layers if isinstance(s, ConvSpec))
        slices, start = [], 0
        for spec in self.conv_specs:
            slices.append(slice(start, start + spec.size))
            start += spec.size
        self._slices = tuple(slices)
        self.num_weights = start
        if weights is None:
            weights = np.zeros(start)
        weights = np.ascontiguousarray(weights, dtype=np.float64)
        if weights.shape != (start,):
            raise DimensionError(
                f"weight vector has shape {weights.shape}, model needs ({start},)"
            )
        self.weights = weights

    @property
    def num_conv_layers(self) -> int:
        return len(self.conv_specs)

    def conv_slice(self, layer: int) -> slice:
        """Flat-vector slice holding conv layer's weights (pipeline order)."""
        return self._slices[layer]

    def filter_slices(self, layer: int):
        """Flat-vector slices for each filter of one conv layer, in order."""
        spec = self.conv_specs[layer]
        base = self._slices[layer].start
        per = spec.weights_per_filter
        return tuple(
            slice(base + f * per, base + (f + 1) * per)
            for f in range(spec.num_filters)
        )

    def bank(self, layer: int) -> KernelBank:
        """KernelBank view over the flat vector for one conv layer."""
        spec = self.conv_specs[layer]
        return KernelBank(spec.mode, self.weights[self._slices[layer]].reshape(spec.bank_shape))

    def with_weights(self, weights) -> "NetworkModel":
        """Same plan bound to another weight vector (not copied)."""
        return NetworkModel(self.layers, self.input_shape, self.num_classes, weights)

    def copy(self) -> "NetworkModel":
        return self.with_weights(self.weights.copy())

    def forward(self, x) -> np.ndarray:
        """Run the pipeline, returning raw (n, num_classes) logits.

        No softmax here; the loss owns that.  Identical (weights, batch)
        pairs give bitwise-identical logits, and concatenated batches give
        the concatenation of per-sample results bitwise (the conv kernels
        guarantee it, pooling and ReLU are per-sample by construction).
        """
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 4 or x.shape[1:] != self.input_shape:
            raise DimensionError(
                f"batch shape {x.shape} does not match input geometry "
                f"(n, {', '.join(map(str, self.input_shape))})"
            )
        conv_index = 0
        for spec in self.layers:
            if isinstance(spec, PoolSpec):
                x = maxpool2(x)
                continue
            x = conv2d(x, self.bank(conv_index))
            if spec.activation:
                x = relu(x)
            conv_index += 1
        n, c, h, w = x.shape
        if c != self.num_classes or h != 1 or w != 1:
            raise DimensionError(
                f"head produced {(c, h, w)} maps, expected ({self.num_classes}, 1, 1)"
            )
        return x.reshape(n, self.num_classes)

    def batch_loss(self, x, labels) -> float:
        """Scaled-softmax cross-entropy of the batch, as a python float."""
        return softmax_cross_entropy(softmax_preprocess(self.forward(x)), labels)

    def evaluate(self, images, labels, batch_size: int = 256) -> float:
        """Fraction of samples whose argmax logit matches the label.

        Ties break to the lowest class index.  The softmax preprocessing is
        monotone per sample (positive scale, constant shift), so argmax is
        taken on raw logits.  Results do not depend on batch_size because
        the forward pass is batch-independent bitwise.
        """
        labels = np.asarray(labels)
        if len(labels) == 0:
            raise DimensionError("cannot evaluate on an empty dataset")
        hits = 0
        for start in range(0, len(labels), batch_size):
            logits = self.forward(images[start:start + batch_size])
            hits += int((logits.argmax(axis=1) == labels[start:start + batch_size]).sum())
        return hits / len(labels)


def build_three_layer_cnn(input_shape, num_classes: int, mode: ConvMode,
                          filters=(16, 16)) -> NetworkModel:
    """Plan the fixed three-conv topology for a (c, h, w) input geometry.

    Kernel sizes come from the shape schedule (see _plan_axis); filter
    counts are (filters[0], filters[1], num_classes).  Weights start at
    zero; call init_weights for the uniform(-1, 1) draw.
    """
    c, h, w = (int(v) for v in input_shape)
    if min(c, h, w) < 1:
        raise ConfigurationError(f"degenerate input geometry {(c, h, w)}")
    if h != w:
        raise ConfigurationError(
            f"the shape schedule expects square images, got {h}x{w}"
        )
    if num_classes < 2:
        raise ConfigurationError(f"need at least 2 classes, got {num_classes}")
    k1, k2, k3 = _plan_axis(h)
    f1, f2 = (int(v) for v in filters)

    def chans(n):
        # Channel-sum filters are 2-D; standard filters carry the incoming depth.
        return None if mode is ConvMode.CHANNEL_SUM else n

    layers = (
        ConvSpec(mode, f1, k1, k1, chans(c), activation=False),
        PoolSpec(),
        ConvSpec(mode, f2, k2, k2, chans(f1), activation=True),
        PoolSpec(),
        ConvSpec(mode, num_classes, k3, k3, chans(f2), activation=False),
    )
    return NetworkModel(layers, (c, h, w), num_classes)


def init_weights(model: NetworkModel, rng) -> NetworkModel:
    """Fresh model with every weight drawn independently from uniform(-1, 1).

    rng is an RngStream or an integer seed for one.
    """
    if not isinstance(rng, RngStream):
        rng = RngStream(int(rng))
    return model.with_weights(rng.uniform(-1.0, 1.0, model.num_weights))
