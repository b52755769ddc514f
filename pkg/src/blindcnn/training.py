"""Greedy trainers: propose (or step along the gradient), keep iff loss drops.

Every trainer shares one acceptance rule: compute the batch loss before and
after a candidate update and keep the candidate only when the loss strictly
decreases.  Ties reject, so a fully frozen proposal can never drift the
weights.  Exactly one candidate is tried per batch; there are no retries.

Randomness discipline: each step uses its own stream derived from the run
seed and the global batch index, drawing in a fixed order (freeze mask
first where applicable, then the proposal, then the learning rate where
applicable).  Any step of a run can therefore be replayed in isolation.
"""

import time
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .datasets import LabeledDataset, batches
from .errors import ConfigurationError
from .gradients import backward, forward_with_cache
from .model import NetworkModel, build_three_layer_cnn, init_weights
from .ops import ConvMode
from .proposals import ProposalSpec, RngStream, propose, sample_learning_rate

BLIND_DESCENT = "blind-descent"
GRADIENT_CHECK = "gradient-check"


class FreezeKind(Enum):
    NONE = "none"                  # propose over every weight
    LAYER_CYCLIC = "layer-cyclic"  # one conv layer per batch, cycling
    RANDOM_FILTER = "random-filter"  # each filter frozen w.p. gamma per batch


@dataclass(frozen=True)
class FreezePolicy:
    """Which weights a proposal may touch; gamma applies to RANDOM_FILTER."""

    kind: FreezeKind = FreezeKind.NONE
    gamma: float = 0.75

    def __post_init__(self):
        if not 0.0 <= self.gamma <= 1.0:
            raise ConfigurationError(f"gamma must be in [0, 1], got {self.gamma}")


@dataclass(frozen=True)
class StepOutcome:
    """One batch's accept/reject decision.

    accepted implies loss_after < loss_before strictly; a rejected step
    leaves the model bitwise untouched.  sampled_eta is the log-uniform
    learning rate of a first-order step (None for proposal steps);
    grad_finite is False when that step was rejected because the gradient
    held non-finite entries (loss_after is +inf then, never evaluated).
    """

    batch_index: int
    loss_before: float
    loss_after: float
    accepted: bool
    trainer: str
    sampled_eta: float | None = None
    grad_finite: bool = True


def sample_filter_freeze(model: NetworkModel, gamma: float, rng: RngStream):
    """Per-filter freeze mask over all conv layers, in layer-major order.

    One uniform draw per filter; a filter freezes when its draw < gamma.
    Resampled by the caller every batch.
    """
    total = sum(spec.num_filters for spec in model.conv_specs)
    return rng.random(total) < gamma


def _free_indices(model: NetworkModel, frozen) -> np.ndarray:
    """Flat weight indices of unfrozen filters, ascending."""
    spans = []
    pos = 0
    for layer in range(model.num_conv_layers):
        for sl in model.filter_slices(layer):
            if not frozen[pos]:
                spans.append(np.arange(sl.start, sl.stop))
            pos += 1
    if not spans:
        return np.empty(0, dtype=np.int64)
    return np.concatenate(spans)


def blind_descent_step(model: NetworkModel, batch, labels, proposal: ProposalSpec,
                       freeze: FreezePolicy, batch_index: int,
                       rng: RngStream) -> StepOutcome:
    """One greedy proposal step; mutates model weights only on acceptance."""
    loss_before = model.batch_loss(batch, labels)
    w = model.weights
    if freeze.kind is FreezeKind.NONE:
        candidate = propose(w, proposal, rng)
    elif freeze.kind is FreezeKind.LAYER_CYCLIC:
        layer = batch_index % model.num_conv_layers
        sl = model.conv_slice(layer)
        candidate = w.copy()
        candidate[sl] = propose(w[sl], proposal, rng)
    else:
        frozen = sample_filter_freeze(model, freeze.gamma, rng)
        free = _free_indices(model, frozen)
        candidate = w.copy()
        if free.size:
            candidate[free] = propose(w[free], proposal, rng)
    loss_after = model.with_weights(candidate).batch_loss(batch, labels)
    accepted = loss_after < loss_before
    if accepted:
        model.weights[:] = candidate
    return StepOutcome(batch_index, loss_before, loss_after, accepted, BLIND_DESCENT)


def gradient_check_step(model: NetworkModel, batch, labels, batch_index: int,
                        rng: RngStream) -> StepOutcome:
    """One first-order step: w - eta1 * grad with eta1 = 10**U(-6, 1).

    One eta1 is drawn per step and shared by every weight.  The step stream
    is advanced by exactly one draw whether or not the gradient is usable,
    so replay alignment never depends on numerical health.
    """
    loss_before, cache = forward_with_cache(model, batch, labels)
    grad = backward(model, cache, labels)
    eta1 = sample_learning_rate(rng)
    if not np.isfinite(grad).all():
        return StepOutcome(batch_index, loss_before, float("inf"), False,
                           GRADIENT_CHECK, sampled_eta=eta1, grad_finite=False)
    candidate = model.weights - eta1 * grad
    loss_after = model.with_weights(candidate).batch_loss(batch, labels)
    accepted = loss_after < loss_before
    if accepted:
        model.weights[:] = candidate
    return StepOutcome(batch_index, loss_before, loss_after, accepted,
                       GRADIENT_CHECK, sampled_eta=eta1)


@dataclass(frozen=True)
class TrainerConfig:
    """Everything a training run depends on besides the data itself.

    proposal/freeze drive BLIND_DESCENT and are ignored by GRADIENT_CHECK,
    which owns its per-step learning-rate distribution.
    """

    trainer: str
    conv_mode: ConvMode
    epochs: int
    batch_size: int
    seed: int
    proposal: ProposalSpec | None = None
    freeze: FreezePolicy = field(default_factory=FreezePolicy)
    filters: tuple = (16, 16)

    def __post_init__(self):
        if self.trainer not in (BLIND_DESCENT, GRADIENT_CHECK):
            raise ConfigurationError(f"unknown trainer {self.trainer!r}")
        if self.trainer == BLIND_DESCENT and self.proposal is None:
            raise ConfigurationError("blind-descent needs a proposal distribution")
        if self.epochs < 0:
            raise ConfigurationError(f"epochs must be >= 0, got {self.epochs}")
        if self.batch_size < 1:
            raise ConfigurationError(f"batch size must be >= 1, got {self.batch_size}")


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    test_accuracy: float
    acceptance_rate: float  # within this epoch
    mean_loss: float        # mean over the epoch's steps of the post-step batch loss
    wall_seconds: float


@dataclass
class TrainResult:
    model: NetworkModel
    steps: list
    epochs: list
    initial_accuracy: float

    @property
    def final_accuracy(self) -> float:
        return self.epochs[-1].test_accuracy if self.epochs else self.initial_accuracy


def acceptance_rate(steps) -> float:
    """Accepted fraction of a step stream."""
    steps = list(steps)
    if not steps:
        raise ValueError("acceptance rate of an empty step stream is undefined")
    return sum(1 for s in steps if s.accepted) / len(steps)


def train(config: TrainerConfig, train_set: LabeledDataset,
          test_set: LabeledDataset) -> TrainResult:
    """Run the configured trainer over epochs x batches.

    The model is built from the training geometry and initialized from the
    run seed.  The batch index is global across epochs (it drives the
    layer-cyclic policy).  Identical (config, data) reruns produce
    identical step streams; epoch records additionally carry wall-clock
    seconds, which reruns do not reproduce.
    """
    if len(train_set) == 0 or len(test_set) == 0:
        raise ConfigurationError("training needs nonempty train and test sets")
    root = RngStream(config.seed)
    model = build_three_layer_cnn(train_set.geometry, train_set.num_classes,
                                  config.conv_mode, config.filters)
    model = init_weights(model, root.split("init"))
    initial_accuracy = model.evaluate(test_set.images, test_set.labels)

    steps = []
    epoch_records = []
    batch_index = 0
    for epoch in range(config.epochs):
        started = time.perf_counter()
        epoch_steps = []
        for x, y in batches(train_set, config.batch_size,
                            shuffle_seed=root.split("shuffle").seed, epoch=epoch):
            step_rng = root.split("step", batch_index)
            if config.trainer == BLIND_DESCENT:
                outcome = blind_descent_step(model, x, y, config.proposal,
                                             config.freeze, batch_index, step_rng)
            else:
                outcome = gradient_check_step(model, x, y, batch_index, step_rng)
            epoch_steps.append(outcome)
            batch_index += 1
        post = [s.loss_after if s.accepted else s.loss_before for s in epoch_steps]
        epoch_records.append(EpochRecord(
            epoch=epoch,
            test_accuracy=model.evaluate(test_set.images, test_set.labels),
            acceptance_rate=acceptance_rate(epoch_steps),
            mean_loss=float(np.mean(post)),
            wall_seconds=time.perf_counter() - started,
        ))
        steps.extend(epoch_steps)
    return TrainResult(model, steps, epoch_records, initial_accuracy)
