"""Greedy proposal training on synthetic digits, one variant per run.

No real datasets needed: class k of the synthetic set brightens rows
2k..2k+2 of a 28x28 noise image, which is learnable in a few epochs.

Run: python demos/greedy_training.py
"""

import numpy as np

from blindcnn import (
    BLIND_DESCENT,
    GRADIENT_CHECK,
    ConvMode,
    FreezeKind,
    FreezePolicy,
    LabeledDataset,
    ProposalKind,
    ProposalSpec,
    TrainerConfig,
    train,
)


def striped_digits(n, seed):
    rng = np.random.default_rng(seed)
    labels = rng.integers(0, 10, n)
    images = rng.integers(0, 60, (n, 1, 28, 28))
    for i, k in enumerate(labels):
        images[i, 0, 2 * k:2 * k + 3, :] = 220
    return LabeledDataset(images / 255.0, labels.astype(np.int64), 10, "striped")


def run(name, config, train_set, test_set):
    result = train(config, train_set, test_set)
    accepted = sum(1 for s in result.steps if s.accepted)
    print(f"\n{name}")
    print(f"  start accuracy {result.initial_accuracy:.3f} "
          f"(chance is 0.100)")
    for r in result.epochs:
        print(f"  epoch {r.epoch}: accuracy {r.test_accuracy:.3f}  "
              f"accept rate {r.acceptance_rate:.2f}  mean loss {r.mean_loss:.3f}")
    print(f"  {accepted}/{len(result.steps)} proposals accepted")


def main():
    train_set = striped_digits(400, seed=9)
    test_set = striped_digits(100, seed=10)

    # The greedy rule: propose new weights, keep them only if the batch
    # loss strictly drops. One proposal per batch, no retries.
    run("additive uniform proposals, eta 0.1",
        TrainerConfig(BLIND_DESCENT, ConvMode.CHANNEL_SUM, epochs=6,
                      batch_size=16, seed=13,
                      proposal=ProposalSpec(ProposalKind.UNIFORM_ADDITIVE, 0.1)),
        train_set, test_set)

    # Layer-cyclic freezing proposes into one conv layer per batch,
    # cycling with the global batch index.
    run("normal proposals with layer-cyclic freezing",
        TrainerConfig(BLIND_DESCENT, ConvMode.CHANNEL_SUM, epochs=6,
                      batch_size=16, seed=13,
                      proposal=ProposalSpec(ProposalKind.NORMAL_CENTERED, 0.1),
                      freeze=FreezePolicy(FreezeKind.LAYER_CYCLIC)),
        train_set, test_set)

    # Full replacement from U(-1, 1) ignores the current weights entirely;
    # acceptance collapses once the incumbent is halfway decent.
    run("memoryless unit-uniform replacement",
        TrainerConfig(BLIND_DESCENT, ConvMode.CHANNEL_SUM, epochs=6,
                      batch_size=16, seed=13,
                      proposal=ProposalSpec(ProposalKind.UNIT_UNIFORM)),
        train_set, test_set)

    # The first-order baseline steps along the true gradient with a random
    # log-uniform learning rate, still gated by the same accept rule.
    run("first-order steps, random log-uniform learning rate",
        TrainerConfig(GRADIENT_CHECK, ConvMode.STANDARD, epochs=4,
                      batch_size=64, seed=11, filters=(8, 8)),
        striped_digits(256, seed=7), striped_digits(64, seed=8))


if __name__ == "__main__":
    main()
