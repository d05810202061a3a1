"""CRC codecs and the compiled-in generator polynomials.

Generators are stored MSB-first as coefficient words of length degree+1,
so ``taps[0]`` is the coefficient of D^degree and ``taps[-1]`` of D^0.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import as_bits


@dataclass(frozen=True)
class CrcSpec:
    name: str
    degree: int
    taps: np.ndarray = field(repr=False)

    def __post_init__(self):
        taps = np.asarray(self.taps, dtype=np.uint8)
        if taps.size != self.degree + 1:
            raise ValueError("generator length must be degree + 1")
        if taps[0] != 1:
            raise ValueError("generator must be monic")
        object.__setattr__(self, "taps", taps)


def _spec(name, degree, exponents):
    taps = np.zeros(degree + 1, dtype=np.uint8)
    for e in exponents:
        taps[degree - e] = 1
    return CrcSpec(name, degree, taps)


# 5G polar codes use the 6-, 11- and 24C-bit CRCs; the LDPC transport chain
# uses the 16-, 24A- and 24B-bit CRCs.
crc6 = _spec("crc6", 6, (6, 5, 0))
crc11 = _spec("crc11", 11, (11, 10, 9, 5, 0))
crc16 = _spec("crc16", 16, (16, 12, 5, 0))
crc24a = _spec("crc24a", 24, (24, 23, 18, 17, 14, 11, 10, 7, 6, 5, 4, 3, 1, 0))
crc24b = _spec("crc24b", 24, (24, 23, 6, 5, 1, 0))
crc24c = _spec("crc24c", 24,
               (24, 23, 21, 20, 17, 15, 13, 12, 8, 4, 2, 1, 0))

CRC_BY_NAME = {c.name: c for c in
               (crc6, crc11, crc16, crc24a, crc24b, crc24c)}


def _remainder(bits: np.ndarray, spec: CrcSpec) -> np.ndarray:
    """Remainder of bits(x) divided by the generator, MSB-first long division."""
    buf = bits.astype(np.uint8).copy()
    d = spec.degree
    for i in range(buf.size - d):
        if buf[i]:
            buf[i:i + d + 1] ^= spec.taps
    return buf[-d:]


def crc_attach(msg, spec: CrcSpec) -> np.ndarray:
    """Append the ``degree`` parity bits of msg(x) * x^degree mod generator(x)."""
    msg = as_bits(msg)
    padded = np.concatenate([msg, np.zeros(spec.degree, dtype=np.uint8)])
    return np.concatenate([msg, _remainder(padded, spec)])


def crc_check(word, spec: CrcSpec) -> bool:
    """True iff word(x) is divisible by the generator polynomial."""
    word = np.asarray(word, dtype=np.uint8)
    if word.ndim != 1 or word.size <= spec.degree:
        raise ValueError("word must be longer than the CRC degree")
    return not _remainder(word, spec).any()
