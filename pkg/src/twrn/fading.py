"""Channel-gain sampling and sample-average expectations.

All strategies are compared on one shared :class:`SampleSet` (common random
numbers), so per-sample dominance results carry over to the averages without
statistical slack.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Iterator

import numpy as np

from .errors import ConfigurationError, NumericalError

__all__ = [
    "Distribution",
    "FadingSpec",
    "ChannelSample",
    "SampleSet",
    "sample_channels",
    "expect",
]

LINKS = ("g_1r", "g_2r", "g_r1", "g_r2")


class Distribution(str, enum.Enum):
    RAYLEIGH = "RayleighPowerGain"
    STATIC = "Static"


@dataclass(frozen=True)
class FadingSpec:
    """Mean power gains of the four links plus sampling configuration."""

    mean_gain_1r: float = 1.0
    mean_gain_2r: float = 1.0
    mean_gain_r1: float = 1.0
    mean_gain_r2: float = 1.0
    n_samples: int = 20000
    seed: int = 0
    distribution: Distribution = Distribution.RAYLEIGH

    def __post_init__(self):
        object.__setattr__(self, "distribution", Distribution(self.distribution))
        self.validate()

    def validate(self) -> None:
        for name in ("mean_gain_1r", "mean_gain_2r", "mean_gain_r1", "mean_gain_r2"):
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
                raise ConfigurationError(name, f"must be a positive finite real, got {value!r}")
        if isinstance(self.n_samples, bool) or not isinstance(self.n_samples, (int, np.integer)):
            raise ConfigurationError("n_samples", f"must be an integer, got {self.n_samples!r}")
        if self.n_samples < 1:
            raise ConfigurationError("n_samples", f"must be >= 1, got {self.n_samples}")
        if isinstance(self.seed, bool) or not isinstance(self.seed, (int, np.integer)):
            raise ConfigurationError("seed", f"must be an integer, got {self.seed!r}")
        if not 0 <= self.seed < 2**64:
            raise ConfigurationError("seed", f"must be a 64-bit unsigned integer, got {self.seed}")
        if self.distribution is Distribution.STATIC and self.n_samples != 1:
            raise ConfigurationError("n_samples", "Static distribution requires n_samples = 1")

    @property
    def means(self) -> tuple[float, float, float, float]:
        return (self.mean_gain_1r, self.mean_gain_2r, self.mean_gain_r1, self.mean_gain_r2)

    @classmethod
    def static(cls, g_1r: float, g_2r: float, g_r1: float, g_r2: float) -> "FadingSpec":
        return cls(g_1r, g_2r, g_r1, g_r2, n_samples=1, distribution=Distribution.STATIC)


@dataclass(frozen=True)
class ChannelSample:
    """Instantaneous power gains of the four links.

    The fields may also hold equally shaped arrays, in which case the object
    describes a whole batch of samples and the allocators vectorize over it.
    """

    g_1r: float
    g_2r: float
    g_r1: float
    g_r2: float

    def swapped(self) -> "ChannelSample":
        """Exchange the roles of source 1 and source 2."""
        return ChannelSample(self.g_2r, self.g_1r, self.g_r2, self.g_r1)


@dataclass(frozen=True, eq=False)
class SampleSet:
    spec: FadingSpec
    gains: np.ndarray = field(repr=False)  # shape (n, 4), columns in LINKS order

    def __post_init__(self):
        gains = np.array(self.gains, dtype=float, copy=True)
        if gains.ndim != 2 or gains.shape[1] != 4:
            raise ValueError("gains must have shape (n, 4)")
        if not np.all(gains > 0):
            raise ValueError("all gains must be strictly positive")
        gains.setflags(write=False)
        object.__setattr__(self, "gains", gains)

    def __len__(self) -> int:
        return self.gains.shape[0]

    def __iter__(self) -> Iterator[ChannelSample]:
        for row in self.gains:
            yield ChannelSample(*(float(v) for v in row))

    def __getitem__(self, i: int) -> ChannelSample:
        return ChannelSample(*(float(v) for v in self.gains[i]))

    @property
    def columns(self) -> ChannelSample:
        """All samples at once, one read-only array per link."""
        return ChannelSample(*(self.gains[:, k] for k in range(4)))

    def swapped(self) -> "SampleSet":
        """Same draws with source 1 and source 2 exchanged (seed-paired)."""
        s = self.spec
        spec = FadingSpec(s.mean_gain_2r, s.mean_gain_1r, s.mean_gain_r2, s.mean_gain_r1,
                          s.n_samples, s.seed, s.distribution)
        return SampleSet(spec, self.gains[:, [1, 0, 3, 2]])

    def permuted(self, order) -> "SampleSet":
        return SampleSet(self.spec, self.gains[np.asarray(order)])


def sample_channels(spec: FadingSpec) -> SampleSet:
    """Draw ``spec.n_samples`` independent channel realizations.

    Rayleigh amplitude fading gives exponentially distributed power gains with
    the configured means. Draws that underflow to zero are redrawn.
    """
    spec.validate()
    means = np.array(spec.means, dtype=float)
    if spec.distribution is Distribution.STATIC:
        return SampleSet(spec, means[None, :])

    rng = np.random.default_rng(spec.seed)
    unit = rng.standard_exponential((spec.n_samples, 4))
    bad = unit <= 0
    while bad.any():
        unit[bad] = rng.standard_exponential(int(bad.sum()))
        bad = unit <= 0
    gains = unit * means
    # a tiny mean can still underflow after scaling
    bad = gains <= 0
    while bad.any():
        rows, cols = np.nonzero(bad)
        gains[rows, cols] = rng.standard_exponential(rows.size) * means[cols]
        bad = gains <= 0
    return SampleSet(spec, gains)


def expect(samples: SampleSet, fn: Callable, vectorized: bool = True) -> float:
    """Sample average of ``fn`` over ``samples``.

    With ``vectorized`` the function receives :attr:`SampleSet.columns` and
    must return one value per sample (or a scalar); otherwise it is called
    once per :class:`ChannelSample`. The reduction uses exactly rounded
    summation, so the result does not depend on sample order.
    """
    n = len(samples)
    if vectorized:
        values = np.broadcast_to(np.asarray(fn(samples.columns), dtype=float), (n,))
    else:
        values = np.fromiter((fn(s) for s in samples), dtype=float, count=n)
    finite = np.isfinite(values)
    if not finite.all():
        i = int(np.argmin(finite))
        raise NumericalError(f"non-finite value {values[i]!r} at sample {i}", samples[i])
    return math.fsum(values.tolist()) / n
