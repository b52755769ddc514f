"""Command-line front end: single runs, sweeps, gradient verification, eval.

Every number lands in the output files with 17 significant digits, so a
file can be replayed into the exact floats that produced it.  summary.csv,
config.txt, steps.csv, and weights.npy are byte-identical across reruns of
the same configuration; epochs.csv carries wall-clock seconds and is not.
"""

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .config import (
    ExperimentConfig,
    format_config,
    load_config,
    load_datasets,
    to_trainer_config,
)
from .errors import ConfigurationError, DimensionError, FormatError
from .gradients import GRADCHECK_TOLERANCE, run_gradient_check
from .model import build_three_layer_cnn
from .ops import ConvMode
from .proposals import MASK64, mix64
from .training import BLIND_DESCENT, acceptance_rate, train

# Sweep enumerations: batch sweeps column over the two guided
# distributions; grid sweeps walk distribution-major over all nine
# distribution x freeze cells; row sweeps walk the three distributions.
BATCH_SWEEP_SIZES = (16, 32, 64, 128, 256, 512)
BATCH_SWEEP_DISTS = ("uniform", "normal")
GRID_DISTS = ("unit-uniform", "uniform", "normal")
GRID_FREEZES = ("none", "layer-cyclic", "random-filter")

SUMMARY_FIELDS = (
    "trainer", "dataset", "conv_mode", "distribution", "freeze", "eta",
    "gamma", "epochs", "batch_size", "seed", "subset_train", "subset_test",
    "train_examples", "test_examples", "steps", "accepted",
    "acceptance_rate", "initial_accuracy", "final_accuracy",
)


def f17(value) -> str:
    """17-significant-digit text, enough to reparse any double exactly."""
    return "%.17g" % value


def _write_csv(path: Path, header, rows):
    lines = [",".join(header)]
    lines.extend(",".join(row) for row in rows)
    path.write_text("\n".join(lines) + "\n")


def run_experiment(config: ExperimentConfig, verbose_steps: bool = False):
    """Train per config and write the metrics files into config.out."""
    trainer_config = to_trainer_config(config)
    train_set, test_set = load_datasets(config)
    result = train(trainer_config, train_set, test_set)

    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.txt").write_text(format_config(config))
    np.save(out / "weights.npy", result.model.weights)
    _write_csv(
        out / "epochs.csv",
        ("epoch", "test_accuracy", "acceptance_rate", "mean_loss", "wall_seconds"),
        [(str(r.epoch), f17(r.test_accuracy), f17(r.acceptance_rate),
          f17(r.mean_loss), f17(r.wall_seconds)) for r in result.epochs],
    )
    if verbose_steps:
        _write_csv(
            out / "steps.csv",
            ("batch_index", "loss_before", "loss_after", "accepted", "sampled_eta"),
            [(str(s.batch_index), f17(s.loss_before), f17(s.loss_after),
              "1" if s.accepted else "0",
              "" if s.sampled_eta is None else f17(s.sampled_eta))
             for s in result.steps],
        )
    accepted = sum(1 for s in result.steps if s.accepted)
    summary = {
        "trainer": config.trainer,
        "dataset": config.dataset,
        "conv_mode": config.conv_mode,
        "distribution": config.distribution,
        "freeze": config.freeze,
        "eta": f17(config.eta),
        "gamma": f17(config.gamma),
        "epochs": str(config.epochs),
        "batch_size": str(config.batch_size),
        "seed": str(config.seed),
        "subset_train": str(config.subset_train),
        "subset_test": str(config.subset_test),
        "train_examples": str(len(train_set)),
        "test_examples": str(len(test_set)),
        "steps": str(len(result.steps)),
        "accepted": str(accepted),
        "acceptance_rate": f17(acceptance_rate(result.steps)) if result.steps else "",
        "initial_accuracy": f17(result.initial_accuracy),
        "final_accuracy": f17(result.final_accuracy),
    }
    _write_csv(out / "summary.csv", SUMMARY_FIELDS,
               [tuple(summary[k] for k in SUMMARY_FIELDS)])
    return result


def _effective_config(args) -> ExperimentConfig:
    """Config file (or defaults) with command-line overrides applied."""
    config = load_config(args.config) if args.config else ExperimentConfig()
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed & MASK64
    if args.out is not None:
        overrides["out"] = args.out
    if args.subset_train is not None:
        overrides["subset_train"] = args.subset_train
    if args.subset_test is not None:
        overrides["subset_test"] = args.subset_test
    if args.conv_mode is not None:
        overrides["conv_mode"] = args.conv_mode
    return replace(config, **overrides) if overrides else config


def cmd_train(args) -> int:
    config = _effective_config(args)
    result = run_experiment(config, verbose_steps=args.verbose_steps)
    rate = f17(acceptance_rate(result.steps)) if result.steps else "n/a"
    print(f"final test accuracy {f17(result.final_accuracy)}")
    print(f"acceptance rate {rate}")
    print(f"metrics written to {config.out}")
    return 0


def cmd_eval(args) -> int:
    """Score stored weights (a flat weights.npy) against the test split."""
    config = _effective_config(args)
    weights_path = Path(args.weights) if args.weights else Path(config.out) / "weights.npy"
    _, test_set = load_datasets(config)
    model = build_three_layer_cnn(test_set.geometry, test_set.num_classes,
                                  ConvMode(config.conv_mode))
    model = model.with_weights(np.load(weights_path))
    accuracy = model.evaluate(test_set.images, test_set.labels)
    print(f"test accuracy {f17(accuracy)} on {len(test_set)} examples")
    return 0


def cmd_gradcheck(args) -> int:
    worst = 0.0
    for mode in ConvMode:
        rows = run_gradient_check(range(20), modes=(mode,))
        top = max(r["error"] for r in rows)
        worst = max(worst, top)
        print(f"{mode.value}: max relative error {f17(top)} over {len(rows)} seeds")
    print(f"tolerance {f17(GRADCHECK_TOLERANCE)}: "
          f"{'ok' if worst <= GRADCHECK_TOLERANCE else 'FAILED'}")
    return 0 if worst <= GRADCHECK_TOLERANCE else 1


def _run_cell(base: ExperimentConfig, row: int, col: int, out_name: str,
              verbose_steps: bool, **cell_fields):
    """One sweep cell: derived seed, its own output directory."""
    cell = replace(
        base,
        seed=mix64(base.seed, row, col),
        out=str(Path(base.out) / "cells" / out_name),
        **cell_fields,
    )
    return run_experiment(cell, verbose_steps=verbose_steps), cell


def cmd_sweep_batch(args) -> int:
    base = _effective_config(args)
    sizes = [int(v) for v in args.batch_sizes.split(",")] if args.batch_sizes else list(BATCH_SWEEP_SIZES)
    if any(size < 1 for size in sizes):
        raise ConfigurationError(f"batch sizes must be >= 1, got {sizes}")
    out = Path(base.out)
    table = []
    for row, size in enumerate(sizes):
        cells = []
        for col, dist in enumerate(BATCH_SWEEP_DISTS):
            result, _ = _run_cell(
                base, row, col, f"b{size}-{dist}", args.verbose_steps,
                trainer=BLIND_DESCENT, distribution=dist, batch_size=size,
            )
            cells.append(f17(result.final_accuracy))
        table.append((str(size), *cells))
    out.mkdir(parents=True, exist_ok=True)
    _write_csv(out / "sweep-batch.csv", ("batch_size", *BATCH_SWEEP_DISTS), table)
    print(",".join(("batch_size", *BATCH_SWEEP_DISTS)))
    for row in table:
        print(",".join(row))
    return 0


def cmd_sweep_dist(args) -> int:
    base = _effective_config(args)
    out = Path(base.out)
    table = []
    if args.layout == "grid":
        header = ("experiment", "distribution", "freeze", "accuracy")
        number = 0
        for row, dist in enumerate(GRID_DISTS):
            for col, freeze in enumerate(GRID_FREEZES):
                number += 1
                result, _ = _run_cell(
                    base, row, col, f"{dist}-{freeze}", args.verbose_steps,
                    trainer=BLIND_DESCENT, distribution=dist, freeze=freeze,
                )
                table.append((str(number), dist, freeze, f17(result.final_accuracy)))
    else:
        header = ("distribution", "accuracy")
        for row, dist in enumerate(GRID_DISTS):
            result, _ = _run_cell(
                base, row, 0, dist, args.verbose_steps,
                trainer=BLIND_DESCENT, distribution=dist,
            )
            table.append((dist, f17(result.final_accuracy)))
    out.mkdir(parents=True, exist_ok=True)
    _write_csv(out / "sweep-dist.csv", header, table)
    print(",".join(header))
    for row in table:
        print(",".join(row))
    return 0


def _add_common(parser):
    parser.add_argument("--config", help="key=value configuration file")
    parser.add_argument("--seed", type=int, help="override the run seed")
    parser.add_argument("--out", help="override the output directory")
    parser.add_argument("--subset-train", dest="subset_train", type=int, metavar="N",
                        help="stratified training subset size (0 = full)")
    parser.add_argument("--subset-test", dest="subset_test", type=int, metavar="N",
                        help="stratified test subset size (0 = full)")
    parser.add_argument("--conv-mode", dest="conv_mode",
                        choices=("channel-sum", "standard"),
                        help="override the convolution semantics")
    parser.add_argument("--verbose-steps", dest="verbose_steps", action="store_true",
                        help="also write the per-step record stream")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="blindcnn",
        description="Gradient-free CNN training experiments and their "
                    "first-order baseline.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="run one experiment")
    _add_common(p)
    p.set_defaults(handler=cmd_train)

    p = sub.add_parser("sweep-batch", help="batch-size sweep, uniform and normal columns")
    _add_common(p)
    p.add_argument("--batch-sizes", dest="batch_sizes", metavar="CSV",
                   help=f"comma-separated sizes (default {','.join(map(str, BATCH_SWEEP_SIZES))})")
    p.set_defaults(handler=cmd_sweep_batch)

    p = sub.add_parser("sweep-dist", help="distribution sweep: 3x3 grid or 3 rows")
    _add_common(p)
    p.add_argument("--layout", choices=("grid", "rows"), default="grid",
                   help="grid = distribution x freeze, rows = distributions only")
    p.set_defaults(handler=cmd_sweep_dist)

    p = sub.add_parser("gradcheck", help="verify backward against finite differences")
    p.set_defaults(handler=cmd_gradcheck)

    p = sub.add_parser("eval", help="score stored weights on the test split")
    _add_common(p)
    p.add_argument("--weights", help="weights.npy path (default <out>/weights.npy)")
    p.set_defaults(handler=cmd_eval)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except (ConfigurationError, DimensionError, FormatError, OSError) as error:
        print(f"error: {error}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
