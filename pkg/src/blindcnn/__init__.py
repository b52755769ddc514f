"""Gradient-free CNN training laboratory.

A small numpy implementation of greedy random-search training (propose
weights, keep them iff the batch loss strictly drops) next to a first-order
baseline with a log-uniform random step size, on a fixed three-conv-layer
network with two convolution semantics.  A verified backpropagation engine,
MNIST/CIFAR-10 loaders, and a deterministic experiment CLI round it out.
"""

from .datasets import LabeledDataset, batches, load_cifar10_bin, load_mnist_idx, subset
from .errors import ConfigurationError, DimensionError, FormatError
from .gradients import (
    GRADCHECK_TOLERANCE,
    ForwardCache,
    backward,
    finite_difference_gradient,
    forward_with_cache,
    gradient_relative_error,
    run_gradient_check,
    tiny_model,
)
from .model import (
    ConvSpec,
    NetworkModel,
    PoolSpec,
    build_three_layer_cnn,
    init_weights,
)
from .ops import (
    ConvMode,
    KernelBank,
    conv2d,
    maxpool2,
    relu,
    softmax,
    softmax_cross_entropy,
    softmax_preprocess,
)
from .proposals import (
    ProposalKind,
    ProposalSpec,
    RngStream,
    mix64,
    propose,
    sample_learning_rate,
)
from .training import (
    BLIND_DESCENT,
    GRADIENT_CHECK,
    FreezeKind,
    FreezePolicy,
    StepOutcome,
    TrainerConfig,
    TrainResult,
    acceptance_rate,
    blind_descent_step,
    gradient_check_step,
    train,
)

__all__ = [
    "BLIND_DESCENT",
    "GRADIENT_CHECK",
    "ConfigurationError",
    "ConvMode",
    "ConvSpec",
    "DimensionError",
    "FormatError",
    "ForwardCache",
    "FreezeKind",
    "FreezePolicy",
    "GRADCHECK_TOLERANCE",
    "KernelBank",
    "LabeledDataset",
    "NetworkModel",
    "PoolSpec",
    "ProposalKind",
    "ProposalSpec",
    "RngStream",
    "StepOutcome",
    "TrainResult",
    "TrainerConfig",
    "acceptance_rate",
    "backward",
    "batches",
    "blind_descent_step",
    "build_three_layer_cnn",
    "conv2d",
    "finite_difference_gradient",
    "forward_with_cache",
    "gradient_check_step",
    "gradient_relative_error",
    "init_weights",
    "load_cifar10_bin",
    "load_mnist_idx",
    "maxpool2",
    "mix64",
    "propose",
    "relu",
    "run_gradient_check",
    "sample_learning_rate",
    "softmax",
    "softmax_cross_entropy",
    "softmax_preprocess",
    "subset",
    "tiny_model",
    "train",
]
