"""Seeded randomness: weight-proposal distributions and stream discipline.

Every random draw in the package flows through :class:`RngStream`, a thin
wrapper over numpy's counter-based Philox generator.  Gaussians are produced
by Box-Muller over consecutive uniform pairs rather than numpy's ziggurat,
so the normal sample sequence is a documented, replayable transform of the
uniform stream.

A stream is single-owner: exactly one consumer advances it.  Independent
sub-streams are derived with :meth:`RngStream.split`, which mixes the parent
seed with the given path tags through :func:`mix64`.
"""

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import ConfigurationError

MASK64 = (1 << 64) - 1

# Exponent range of the log-uniform learning-rate sampler: 10**U(-6, 1).
LEARNING_RATE_EXPONENTS = (-6.0, 1.0)


def _fnv1a64(text: str) -> int:
    h = 0xCBF29CE484222325
    for byte in text.encode("utf-8"):
        h = ((h ^ byte) * 0x100000001B3) & MASK64
    return h


def mix64(*values) -> int:
    """Fold integers and string tags into one 64-bit seed.

    Each value is absorbed through the splitmix64 finalizer; strings enter
    as their FNV-1a 64 hash.  Pure function of its arguments, so derived
    seeds are reproducible across runs, platforms, and processes.
    """
    acc = 0x9E3779B97F4A7C15
    for v in values:
        v = _fnv1a64(v) if isinstance(v, str) else int(v)
        acc = (acc + (v & MASK64)) & MASK64
        acc ^= acc >> 30
        acc = (acc * 0xBF58476D1CE4E5B9) & MASK64
        acc ^= acc >> 27
        acc = (acc * 0x94D049BB133111EB) & MASK64
        acc ^= acc >> 31
    return acc


class RngStream:
    """Seeded Philox stream with explicit splitting.

    Identical seeds give identical sample sequences; a 64-bit unsigned seed
    is accepted (larger ints are masked).
    """

    def __init__(self, seed: int):
        self.seed = int(seed) & MASK64
        self._gen = np.random.Generator(np.random.Philox(key=self.seed))

    def split(self, *path) -> "RngStream":
        """Derive an independent child stream from integer or string tags.

        The parent state is untouched; the child seed is
        mix64(parent seed, *path).
        """
        return RngStream(mix64(self.seed, *path))

    def random(self, size=None):
        """Uniform doubles in [0, 1)."""
        return self._gen.random(size)

    def uniform(self, low: float, high: float, size=None):
        """Uniform doubles in [low, high)."""
        return low + (high - low) * self._gen.random(size)

    def standard_normal(self, count: int):
        """Standard normals via Box-Muller with fixed pairing.

        Pair i consumes uniforms u1[i], u2[i]; its two outputs land at
        positions i and i + ceil(count/2).  u1 enters through log1p(-u1) so
        u1 = 0 is finite.
        """
        pairs = (int(count) + 1) // 2
        u1 = self._gen.random(pairs)
        u2 = self._gen.random(pairs)
        radius = np.sqrt(-2.0 * np.log1p(-u1))
        theta = (2.0 * np.pi) * u2
        return np.concatenate([radius * np.cos(theta), radius * np.sin(theta)])[:count]

    def permutation(self, n: int):
        return self._gen.permutation(n)


class ProposalKind(Enum):
    NORMAL_CENTERED = "normal"  # w' ~ Normal(mean=w, std=eta)
    UNIFORM_ADDITIVE = "uniform"  # w' = w + U(-eta, eta)
    UNIT_UNIFORM = "unit-uniform"  # w' ~ U(-1, 1), independent of w


@dataclass(frozen=True)
class ProposalSpec:
    """Which candidate-weight distribution to sample, and its width eta.

    eta is ignored by UNIT_UNIFORM, whose proposals replace the weights
    outright (memoryless global search).
    """

    kind: ProposalKind
    eta: float = 0.0

    def __post_init__(self):
        if self.kind is not ProposalKind.UNIT_UNIFORM and not self.eta > 0:
            raise ConfigurationError(
                f"eta must be > 0 for {self.kind.value} proposals, got {self.eta}"
            )


def propose(weights, spec: ProposalSpec, rng: RngStream):
    """Sample a candidate weight vector; the input array is never modified.

    One draw per scalar weight, all weights perturbed jointly.
    """
    w = np.asarray(weights, dtype=np.float64)
    if spec.kind is ProposalKind.NORMAL_CENTERED:
        return w + spec.eta * rng.standard_normal(w.size).reshape(w.shape)
    if spec.kind is ProposalKind.UNIFORM_ADDITIVE:
        return w + rng.uniform(-spec.eta, spec.eta, w.shape)
    return rng.uniform(-1.0, 1.0, w.shape)


def sample_learning_rate(rng: RngStream) -> float:
    """Log-uniform step size 10**U(-6, 1); always inside [1e-6, 10]."""
    lo, hi = LEARNING_RATE_EXPONENTS
    return float(10.0 ** rng.uniform(lo, hi))
