"""Shared primitives: bit/LLR conventions, the Jacobian logarithm, GF(2) linear algebra.

Conventions used by every module in this package:

* Bit words are 1-D ``numpy`` arrays with values in {0, 1} (dtype ``uint8``).
* LLRs are natural-log ratios ``log P(bit=0) / P(bit=1)``; a positive value
  favours bit 0.  Infinite confidence is represented by the saturating
  magnitude ``L_SAT`` so that arithmetic clamps instead of producing NaN.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

# Saturating LLR magnitude standing in for +/- infinity.
L_SAT = 1e30


@dataclass
class DecodeResult:
    """Outcome of a decoder run: hard bit estimates plus bookkeeping."""

    bits: np.ndarray
    iterations: int = 1
    converged: bool = True
    metric: float | None = None
    extra: dict = field(default_factory=dict)


def as_bits(seq) -> np.ndarray:
    """Validate and convert a sequence of {0,1} values to a uint8 array."""
    bits = np.asarray(seq)
    if bits.ndim != 1 or bits.size == 0:
        raise ValueError("bit word must be a non-empty 1-D sequence")
    if not np.isin(bits, (0, 1)).all():
        raise ValueError("bit word may only contain 0 and 1")
    return bits.astype(np.uint8)


def as_llrs(seq) -> np.ndarray:
    """Validate and convert to a float LLR array, clamping to +/- L_SAT."""
    llr = np.asarray(seq, dtype=np.float64)
    if llr.ndim != 1 or llr.size == 0:
        raise ValueError("LLR word must be a non-empty 1-D sequence")
    if np.isnan(llr).any():
        raise ValueError("LLR word may not contain NaN")
    return np.clip(llr, -L_SAT, L_SAT)


def hard_decision(llr) -> np.ndarray:
    """Map LLRs to bits; a nonnegative LLR decides bit 0."""
    return (np.asarray(llr) < 0).astype(np.uint8)


def max_star(x: float, y: float) -> float:
    """Exact Jacobian logarithm ln(e^x + e^y) = max(x,y) + ln(1 + e^-|x-y|)."""
    if x == y:
        return x + math.log(2.0)
    m = x if x > y else y
    d = abs(x - y)
    if d > 745.0:  # exp underflows; correction is zero at double precision
        return m
    return m + math.log1p(math.exp(-d))


def max_star_arr(values) -> float:
    """Jacobian logarithm folded over an array (log-sum-exp of the entries)."""
    acc = -math.inf
    for v in np.asarray(values, dtype=np.float64):
        acc = max_star(acc, float(v))
    return acc


def boxplus(a: float, b: float) -> float:
    """Exact LLR-domain box-plus: the LLR of the XOR of two bits.

    Stable form ln((1+e^{a+b})/(e^a+e^b)) = max*(0, a+b) - max*(a, b).
    """
    return max_star(0.0, a + b) - max_star(a, b)


class Gf2SingularError(ValueError):
    """Raised when a GF(2) matrix that must be inverted is singular."""


def gf2_matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Matrix product over GF(2)."""
    return (np.asarray(a, dtype=np.uint8).astype(np.int64)
            @ np.asarray(b, dtype=np.uint8).astype(np.int64)) % 2


def gf2_row_reduce(m: np.ndarray):
    """Row-reduce a copy of ``m`` over GF(2).

    Returns (reduced matrix, pivot column list, row permutation applied).
    """
    a = np.array(m, dtype=np.uint8) % 2
    rows, cols = a.shape
    pivots = []
    r = 0
    for c in range(cols):
        if r == rows:
            break
        hit = np.nonzero(a[r:, c])[0]
        if hit.size == 0:
            continue
        p = r + hit[0]
        if p != r:
            a[[r, p]] = a[[p, r]]
        below = np.nonzero(a[:, c])[0]
        for i in below:
            if i != r:
                a[i] ^= a[r]
        pivots.append(c)
        r += 1
    return a, pivots


def gf2_invert(m: np.ndarray) -> np.ndarray:
    """Inverse of a square matrix over GF(2).

    Raises Gf2SingularError when no inverse exists.
    """
    a = np.array(m, dtype=np.uint8) % 2
    n, ncols = a.shape
    if n != ncols:
        raise ValueError("matrix must be square")
    aug = np.concatenate([a, np.eye(n, dtype=np.uint8)], axis=1)
    r = 0
    for c in range(n):
        hit = np.nonzero(aug[r:, c])[0]
        if hit.size == 0:
            raise Gf2SingularError(f"matrix is singular (no pivot in column {c})")
        p = r + hit[0]
        if p != r:
            aug[[r, p]] = aug[[p, r]]
        for i in np.nonzero(aug[:, c])[0]:
            if i != r:
                aug[i] ^= aug[r]
        r += 1
    return aug[:, n:]


def gf2_solve(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve ``a x = b`` over GF(2) for square invertible ``a``."""
    return gf2_matmul(gf2_invert(a), b.reshape(-1, 1)).ravel().astype(np.uint8)


def gf2_rank(m: np.ndarray) -> int:
    _, pivots = gf2_row_reduce(m)
    return len(pivots)


def parse_octal_poly(octal: int | str, memory: int | None = None) -> np.ndarray:
    """Expand an octal-coded binary polynomial into its coefficient word.

    The most significant digit carries the lowest-degree taps: octal 15
    (binary 1101) is 1 + D + D^3, octal 13 (binary 1011) is 1 + D^2 + D^3,
    and octal 133 (binary 1011011) is 1 + D^2 + D^3 + D^5 + D^6.  Returned
    array index j holds the coefficient of D^j; its length is ``memory + 1``
    when given, otherwise the written width of the number.
    """
    value = int(str(octal), 8)
    if value <= 0:
        raise ValueError("polynomial must be a positive octal integer")
    nbits = value.bit_length()
    width = nbits if memory is None else memory + 1
    if nbits > width:
        raise ValueError(
            f"polynomial {octal} has degree {nbits - 1} > memory {memory}")
    return np.array([(value >> (width - 1 - j)) & 1 for j in range(width)],
                    dtype=np.uint8)
