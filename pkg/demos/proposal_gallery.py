"""The three proposal distributions and the log-uniform learning rate.

Every draw comes from a named, splittable stream, so any sample here can
be replayed exactly from its seed.

Run: python demos/proposal_gallery.py
"""

import numpy as np

from blindcnn import (
    ProposalKind,
    ProposalSpec,
    RngStream,
    propose,
    sample_learning_rate,
)


def describe(name, samples):
    print(f"{name:28s} mean {samples.mean():+.4f}  std {samples.std():.4f}  "
          f"range [{samples.min():+.4f}, {samples.max():+.4f}]")


def main():
    n = 100_000
    w = np.full(n, 0.5)  # every proposal perturbs the same incumbent weight
    eta = 0.05

    # Normal, centered on the weights: mean w, std eta.
    normal = propose(w, ProposalSpec(ProposalKind.NORMAL_CENTERED, eta), RngStream(1))
    describe("normal(mu=w, sigma=eta)", normal)

    # Additive uniform: w + U(-eta, eta), so deltas never exceed eta.
    uniform = propose(w, ProposalSpec(ProposalKind.UNIFORM_ADDITIVE, eta), RngStream(2))
    describe("w + U(-eta, eta)", uniform)
    print(f"{'':28s} max |delta| {np.abs(uniform - w).max():.6f} (<= {eta})")

    # Unit uniform replaces outright: U(-1, 1) regardless of w.
    unit = propose(w, ProposalSpec(ProposalKind.UNIT_UNIFORM), RngStream(3))
    describe("U(-1, 1) replacement", unit)
    corr = np.corrcoef(w + 0.01 * np.arange(n), unit)[0, 1]
    print(f"{'':28s} correlation with incumbent {corr:+.4f} (memoryless)")

    # The first-order trainer draws eta1 = 10**U(-6, 1) fresh each step.
    rng = RngStream(4)
    rates = np.array([sample_learning_rate(rng) for _ in range(n)])
    exponents = np.log10(rates)
    describe("log10 learning rate", exponents)
    decades, edges = np.histogram(exponents, bins=7, range=(-6, 1))
    print("\ndraws per decade of learning rate:")
    for count, lo in zip(decades, edges):
        print(f"  1e{lo:+.0f} .. 1e{lo + 1:+.0f}: {count}")

    # Determinism: the same seed replays the same proposals bit for bit.
    again = propose(w, ProposalSpec(ProposalKind.NORMAL_CENTERED, eta), RngStream(1))
    print("\nsame seed, same proposals:", np.array_equal(normal, again))


if __name__ == "__main__":
    main()
