"""BPSK over AWGN: Eb/N0 conversion, modulation, sampling and channel LLRs."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Global LLR saturation magnitude. tanh(LLR_SAT / 2) rounds to exactly 1.0 in
# double precision, so a saturated message behaves like the +/-infinity
# decimation value without producing NaN in sums or products.
LLR_SAT = 60.0

# Guard for atanh arguments inside check node updates.
ATANH_EPS = 1e-12


@dataclass(frozen=True)
class ChannelObservation:
    """One frame's channel outputs and the matching LLRs (2y / sigma^2)."""

    y: np.ndarray
    sigma: float
    llr: np.ndarray


def ebn0_to_sigma(ebn0_db: float, rate: float) -> float:
    """Noise std for unit-energy BPSK at the given Eb/N0 and code rate."""
    if rate <= 0 or rate > 1:
        raise ValueError(f"rate must be in (0, 1], got {rate}")
    return float(np.sqrt(1.0 / (2.0 * rate * 10.0 ** (ebn0_db / 10.0))))


def modulate(bits) -> np.ndarray:
    """Map bit 0 -> +1 and bit 1 -> -1, so positive LLR favors bit 0."""
    bits = np.asarray(bits)
    if not np.isin(bits, (0, 1)).all():
        raise ValueError("bits must be 0/1")
    return 1.0 - 2.0 * bits.astype(np.float64)


def channel_llr(y, sigma: float) -> np.ndarray:
    """Elementwise 2y / sigma^2, saturated to +/-LLR_SAT."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    return np.clip(2.0 * np.asarray(y, dtype=np.float64) / sigma**2, -LLR_SAT, LLR_SAT)


def transmit(symbols, sigma: float, rng_seed) -> ChannelObservation:
    """Add white Gaussian noise from a seeded generator and compute LLRs.

    `rng_seed` may be anything accepted by numpy's SeedSequence (an int or a
    tuple such as `(master_seed, frame_index)`), giving each frame its own
    reproducible substream.
    """
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    symbols = np.asarray(symbols, dtype=np.float64)
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(rng_seed)))
    y = symbols + sigma * rng.standard_normal(symbols.shape)
    return ChannelObservation(y=y, sigma=float(sigma), llr=channel_llr(y, sigma))


def frame_rng(master_seed: int, point_key: int, frame_index: int) -> np.random.Generator:
    """Independent per-frame substream for parallel Monte Carlo.

    Built on the counter-based Philox generator: one keyed stream per
    simulation point, jumped ahead per frame, so frames can be generated in
    any order with identical results.
    """
    base = np.random.Philox(key=np.random.SeedSequence((master_seed, point_key)).generate_state(4, np.uint64))
    return np.random.Generator(base.jumped(frame_index))
