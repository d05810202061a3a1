"""Channel models, SNR conversions and reproducible random-number streams.

The BI-AWGN channel maps bit x to the real symbol 1-2x and adds N(0, sigma^2)
noise; the receiver LLR is 2y/sigma^2.  QPSK is realised as two Gray-labelled
BPSK dimensions, so per-bit LLRs are identical to BPSK at the same Es/N0 and
only the SNR-axis bookkeeping differs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import L_SAT, as_bits


def ebno_db_to_sigma(ebno_db: float, rate: float) -> float:
    """Noise std for rate-R BPSK signalling: sigma^2 = 1 / (2 R 10^(EbN0/10))."""
    if rate <= 0:
        raise ValueError("rate must be positive")
    return math.sqrt(1.0 / (2.0 * rate * 10.0 ** (ebno_db / 10.0)))


def snr_db_to_sigma(snr_db: float, rate: float, axis: str = "ebno",
                    modulation: str = "bpsk") -> float:
    """Convert a dB SNR under the chosen axis convention to the noise std.

    axis="ebno": energy per information bit.  axis="esno": energy per
    modulation symbol (one real dimension for BPSK, two for QPSK).
    """
    lin = 10.0 ** (snr_db / 10.0)
    if axis == "ebno":
        return ebno_db_to_sigma(snr_db, rate)
    if axis != "esno":
        raise ValueError(f"unknown SNR axis {axis!r}")
    if modulation == "qpsk":
        return math.sqrt(1.0 / lin)
    return math.sqrt(1.0 / (2.0 * lin))


def sigma_to_rho(sigma: float) -> float:
    """Per-dimension SNR rho = Es/sigma^2 with unit-energy BPSK symbols."""
    return 1.0 / (sigma * sigma)


@dataclass(frozen=True)
class ChannelModel:
    """kind is one of 'biawgn' (param = noise std), 'bec' (erasure prob),
    'bsc' (crossover prob)."""

    kind: str
    param: float
    modulation: str = "bpsk"

    def __post_init__(self):
        if self.kind == "biawgn":
            if self.param <= 0:
                raise ValueError("noise std must be positive")
        elif self.kind == "bec":
            if not 0.0 <= self.param <= 1.0:
                raise ValueError("erasure probability must be in [0,1]")
        elif self.kind == "bsc":
            if not 0.0 <= self.param <= 0.5:
                raise ValueError("crossover probability must be in [0,1/2]")
        else:
            raise ValueError(f"unknown channel kind {self.kind!r}")
        if self.modulation not in ("bpsk", "qpsk"):
            raise ValueError(f"unknown modulation {self.modulation!r}")


def _mix64(x: int) -> int:
    """splitmix64 finalizer; bijective 64-bit mixing."""
    x = (x + 0x9E3779B97F4A7C15) & 0xFFFFFFFFFFFFFFFF
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & 0xFFFFFFFFFFFFFFFF
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & 0xFFFFFFFFFFFFFFFF
    return x ^ (x >> 31)


class RngStream:
    """Counter-based random stream keyed by (master seed, stream id).

    Distinct stream ids give statistically independent Philox substreams;
    identical (seed, id) pairs reproduce identical output bit for bit.
    """

    def __init__(self, seed: int, stream_id: int = 0):
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self.stream_id = int(stream_id)
        key = [self.seed, _mix64(self.stream_id ^ _mix64(self.seed))]
        self._gen = np.random.Generator(np.random.Philox(key=key))

    def substream(self, stream_id: int) -> "RngStream":
        return RngStream(self.seed, stream_id)

    @property
    def generator(self) -> np.random.Generator:
        return self._gen

    def bits(self, n: int) -> np.ndarray:
        return self._gen.integers(0, 2, size=n, dtype=np.uint8)

    def normal(self, scale: float, size) -> np.ndarray:
        return self._gen.normal(0.0, scale, size=size)

    def uniform(self, size) -> np.ndarray:
        return self._gen.random(size=size)


def transmit(code, ch: ChannelModel, rng: RngStream) -> np.ndarray:
    """Send a bit word through the channel; return the receiver LLR word."""
    x = as_bits(code)
    if ch.kind == "biawgn":
        sigma = ch.param
        y = (1.0 - 2.0 * x) + rng.normal(sigma, x.size)
        return 2.0 * y / (sigma * sigma)
    if ch.kind == "bec":
        erased = rng.uniform(x.size) < ch.param
        llr = np.where(x == 0, L_SAT, -L_SAT)
        llr[erased] = 0.0
        return llr
    # BSC: y = x xor e, LLR = (1-2y) log((1-p)/p)
    p = ch.param
    flip = rng.uniform(x.size) < p
    y = x ^ flip.astype(np.uint8)
    if p == 0.0:
        return np.where(y == 0, L_SAT, -L_SAT).astype(np.float64)
    mag = math.log((1.0 - p) / p)
    return (1.0 - 2.0 * y) * mag
