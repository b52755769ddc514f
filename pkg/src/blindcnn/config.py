"""Experiment configuration: a flat key=value document, strictly parsed.

The schema is closed: unknown or duplicate keys are errors, every key has a
default, and format_config(parse_config(text)) reparses to an equal value,
so a run can echo its exact configuration for replay.
"""

from dataclasses import dataclass, fields
from pathlib import Path

from .datasets import LabeledDataset, load_cifar10_bin, load_mnist_idx, subset
from .errors import ConfigurationError
from .ops import ConvMode
from .proposals import MASK64, ProposalKind, ProposalSpec, mix64
from .training import (
    BLIND_DESCENT,
    GRADIENT_CHECK,
    FreezeKind,
    FreezePolicy,
    TrainerConfig,
)

MNIST_FILES = {
    "train": ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    "test": ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
}
CIFAR_TRAIN_FILES = tuple(f"data_batch_{i}.bin" for i in range(1, 6))
CIFAR_TEST_FILES = ("test_batch.bin",)


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment, fully determined together with the dataset files."""

    trainer: str = BLIND_DESCENT
    dataset: str = "mnist"
    data_dir: str = "data"
    conv_mode: str = "channel-sum"
    distribution: str = "uniform"
    freeze: str = "none"
    eta: float = 0.001
    gamma: float = 0.75
    epochs: int = 40
    batch_size: int = 16
    seed: int = 1
    subset_train: int = 0  # 0 keeps the full split
    subset_test: int = 0
    out: str = "runs/run"


def _parse_int(key, value, minimum):
    try:
        parsed = int(value)
    except ValueError:
        raise ConfigurationError(f"{key}: expected an integer, got {value!r}") from None
    if parsed < minimum:
        raise ConfigurationError(f"{key}: must be >= {minimum}, got {parsed}")
    return parsed


def _parse_float(key, value):
    try:
        return float(value)
    except ValueError:
        raise ConfigurationError(f"{key}: expected a number, got {value!r}") from None


def _parse_choice(key, value, choices):
    if value not in choices:
        raise ConfigurationError(
            f"{key}: expected one of {', '.join(choices)}; got {value!r}"
        )
    return value


# key -> (attribute, parser); parsers validate type and range only, the
# semantic cross-checks live in to_trainer_config.
_SCHEMA = {
    "trainer": ("trainer", lambda v: _parse_choice("trainer", v, (BLIND_DESCENT, GRADIENT_CHECK))),
    "dataset": ("dataset", lambda v: _parse_choice("dataset", v, ("mnist", "cifar10"))),
    "data-dir": ("data_dir", str),
    "conv-mode": ("conv_mode", lambda v: _parse_choice("conv-mode", v, ("channel-sum", "standard"))),
    "distribution": ("distribution", lambda v: _parse_choice(
        "distribution", v, tuple(k.value for k in ProposalKind))),
    "freeze": ("freeze", lambda v: _parse_choice(
        "freeze", v, tuple(k.value for k in FreezeKind))),
    "eta": ("eta", lambda v: _parse_float("eta", v)),
    "gamma": ("gamma", lambda v: _parse_float("gamma", v)),
    "epochs": ("epochs", lambda v: _parse_int("epochs", v, 0)),
    "batch-size": ("batch_size", lambda v: _parse_int("batch-size", v, 1)),
    "seed": ("seed", lambda v: _parse_int("seed", v, 0) & MASK64),
    "subset-train": ("subset_train", lambda v: _parse_int("subset-train", v, 0)),
    "subset-test": ("subset_test", lambda v: _parse_int("subset-test", v, 0)),
    "out": ("out", str),
}


def parse_config(text: str) -> ExperimentConfig:
    """Parse a key = value document; blank lines and # comments allowed."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigurationError(f"line {lineno}: expected key = value, got {raw!r}")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key not in _SCHEMA:
            raise ConfigurationError(f"line {lineno}: unknown key {key!r}")
        attr, parser = _SCHEMA[key]
        if attr in values:
            raise ConfigurationError(f"line {lineno}: duplicate key {key!r}")
        values[attr] = parser(value)
    return ExperimentConfig(**values)


def _format_value(value) -> str:
    if isinstance(value, float):
        return "%.17g" % value
    return str(value)


def format_config(config: ExperimentConfig) -> str:
    """Canonical text form; parse_config(format_config(c)) == c."""
    attr_of = {attr: key for key, (attr, _) in _SCHEMA.items()}
    lines = [
        f"{attr_of[f.name]} = {_format_value(getattr(config, f.name))}"
        for f in fields(ExperimentConfig)
    ]
    return "\n".join(lines) + "\n"


def load_config(path) -> ExperimentConfig:
    return parse_config(Path(path).read_text())


def to_trainer_config(config: ExperimentConfig) -> TrainerConfig:
    """Cross-validate and convert to the training-loop configuration."""
    proposal = None
    if config.trainer == BLIND_DESCENT:
        kind = ProposalKind(config.distribution)
        if kind is ProposalKind.UNIT_UNIFORM:
            proposal = ProposalSpec(kind)
        else:
            proposal = ProposalSpec(kind, config.eta)
    return TrainerConfig(
        trainer=config.trainer,
        conv_mode=ConvMode(config.conv_mode),
        epochs=config.epochs,
        batch_size=config.batch_size,
        seed=config.seed,
        proposal=proposal,
        freeze=FreezePolicy(FreezeKind(config.freeze), config.gamma),
    )


def _existing(path: Path) -> Path:
    """The path itself or its .gz sibling; error names both candidates."""
    if path.exists():
        return path
    gz = path.with_name(path.name + ".gz")
    if gz.exists():
        return gz
    raise ConfigurationError(f"dataset file not found: {path} (or {gz.name})")


def load_datasets(config: ExperimentConfig):
    """The (train, test) pair named by the config, subsetted when asked.

    MNIST lives in <data-dir>/mnist/ under the conventional IDX file names;
    CIFAR-10 in <data-dir>/cifar-10-batches-bin/ under its standard batch
    names.  Plain or gzipped files both work.
    """
    base = Path(config.data_dir)
    if config.dataset == "mnist":
        folder = base / "mnist"
        train = load_mnist_idx(*(_existing(folder / n) for n in MNIST_FILES["train"]))
        test = load_mnist_idx(*(_existing(folder / n) for n in MNIST_FILES["test"]))
    else:
        folder = base / "cifar-10-batches-bin"
        train = load_cifar10_bin([_existing(folder / n) for n in CIFAR_TRAIN_FILES])
        test = load_cifar10_bin([_existing(folder / n) for n in CIFAR_TEST_FILES])
    if config.subset_train:
        train = subset(train, config.subset_train, mix64(config.seed, "subset", 0))
    if config.subset_test:
        test = subset(test, config.subset_test, mix64(config.seed, "subset", 1))
    return train, test
