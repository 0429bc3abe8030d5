"""BPSK over AWGN: noise conventions, LLR generation, fine discretization."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

DEFAULT_BIN_COUNT = 2000
DEFAULT_CLIP_LLR = 24.0


def ebn0_to_sigma(ebn0_db: float, rate: float) -> float:
    if not rate > 0 or rate > 1:
        raise ValueError(f"rate must lie in (0, 1], got {rate}")
    return float(1.0 / np.sqrt(2.0 * rate * 10.0 ** (ebn0_db / 10.0)))


@dataclass(frozen=True)
class NoiseConfig:
    ebn0_db: float
    rate: float

    @property
    def sigma(self) -> float:
        return ebn0_to_sigma(self.ebn0_db, self.rate)

    @property
    def mean_llr(self) -> float:
        """Mean channel LLR given x = 0, i.e. 2 / sigma^2."""
        return 2.0 / self.sigma**2


def transmit(x: np.ndarray, noise: NoiseConfig | float, rng: np.random.Generator) -> np.ndarray:
    """Map bits to +-1, add N(0, sigma^2) noise, return LLRs ``2y/sigma^2``."""
    sigma = noise.sigma if isinstance(noise, NoiseConfig) else float(noise)
    s = 1.0 - 2.0 * np.asarray(x, dtype=np.float64)
    y = s + sigma * rng.standard_normal(s.shape)
    return (2.0 / sigma**2) * y


@dataclass(frozen=True)
class FineChannel:
    """Discretized BI-AWGN channel on uniform LLR bins.

    ``joint[x, i]`` is the probability of sending ``x`` and observing an LLR in
    bin ``i``; bin ``i`` mirrors bin ``bin_count - 1 - i``.
    """

    support: np.ndarray
    joint: np.ndarray
    clip_range: float

    @property
    def bin_count(self) -> int:
        return self.support.size

    @property
    def bin_width(self) -> float:
        return 2.0 * self.clip_range / self.bin_count


def discretize_channel(noise: NoiseConfig | float, bin_count: int = DEFAULT_BIN_COUNT,
                       clip_llr: float = DEFAULT_CLIP_LLR) -> FineChannel:
    """Bin the conditional LLR density; tails fold into the edge bins.

    ``noise`` may be a NoiseConfig or a bare sigma.
    """
    if bin_count < 64 or bin_count % 2:
        raise ValueError("bin_count must be an even number >= 64")
    if not clip_llr > 0:
        raise ValueError("clip_llr must be positive")
    sigma = noise.sigma if isinstance(noise, NoiseConfig) else float(noise)
    mu = 2.0 / sigma**2
    sd = 2.0 / sigma
    h = 2.0 * clip_llr / bin_count
    half = bin_count // 2
    # built from the positive half so that support[i] == -support[-1 - i] exactly
    pos_edges = h * np.arange(half + 1)
    edges = np.concatenate([-pos_edges[:0:-1], pos_edges])
    pos_centers = h * (np.arange(half) + 0.5)
    support = np.concatenate([-pos_centers[::-1], pos_centers])
    z = (edges - mu) / sd
    cdf = ndtr(z)
    sf = ndtr(-z)
    cdf[0], cdf[-1] = 0.0, 1.0
    sf[0], sf[-1] = 1.0, 0.0
    # upper-tail differences taken on the survival function to keep precision
    p0 = np.where(z[:-1] > 0, sf[:-1] - sf[1:], cdf[1:] - cdf[:-1])
    joint = 0.5 * np.stack([p0, p0[::-1]]) / p0.sum()
    return FineChannel(support=support, joint=joint, clip_range=float(clip_llr))
