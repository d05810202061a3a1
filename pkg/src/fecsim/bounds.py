"""Normal-approximation benchmark for the real-AWGN and BI-AWGN channels.

For blocklength n, rate R = k/n and SNR rho, the achievable rate is

    R ~ C(rho) - sqrt(V(rho)/n) Qinv(eps) + log2(n) / (2n)

and the corresponding BLER estimate is obtained by rearranging for eps:

    eps ~ Q( (n (C - R) + log2(n)/2) / sqrt(n V) ).

C and V are the capacity and dispersion of the selected channel; the real
channel uses C = 0.5 log2(1+rho) with V = (log2 e)^2 rho(rho+2)/(2(rho+1)^2),
the binary-input channel computes both moments of the information density
1 - log2(1 + exp(-2 rho + 2 z sqrt(rho))), z ~ N(0,1), by quadrature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import special

LOG2E = math.log2(math.e)

# Gauss-Hermite rule for integrals of f(z) against the standard normal pdf.
_GH_NODES = 127
_gh_x, _gh_w = np.polynomial.hermite.hermgauss(_GH_NODES)
_gh_z = _gh_x * math.sqrt(2.0)
_gh_w = _gh_w / math.sqrt(math.pi)


@dataclass(frozen=True)
class NaQuery:
    n: int
    k: int
    rho: float
    channel: str = "biawgn"

    def __post_init__(self):
        if self.n < 1 or not 1 <= self.k <= self.n:
            raise ValueError("need n >= 1 and 1 <= k <= n")
        if self.rho <= 0:
            raise ValueError("rho must be positive")
        if self.channel not in ("awgn", "biawgn"):
            raise ValueError(f"unknown channel {self.channel!r}")


def q_func(x) -> float | np.ndarray:
    """Gaussian tail probability via the complementary error function."""
    return 0.5 * special.erfc(np.asarray(x, dtype=np.float64) / math.sqrt(2.0))


def q_inv(p: float) -> float:
    """Inverse of q_func on (0, 1)."""
    if not 0.0 < p < 1.0:
        raise ValueError("probability must be in (0,1)")
    return math.sqrt(2.0) * special.erfcinv(2.0 * p)


def awgn_capacity_dispersion(rho: float) -> tuple[float, float]:
    """Capacity (bits/use) and dispersion (bits^2/use) of the real-AWGN channel."""
    if rho <= 0:
        raise ValueError("rho must be positive")
    cap = 0.5 * math.log2(1.0 + rho)
    disp = LOG2E ** 2 * rho * (rho + 2.0) / (2.0 * (rho + 1.0) ** 2)
    return cap, disp


def _info_density(rho: float, z: np.ndarray) -> np.ndarray:
    # 1 - log2(1 + exp(-2 rho + 2 z sqrt(rho))), computed without overflow
    a = -2.0 * rho + 2.0 * z * math.sqrt(rho)
    return 1.0 - np.logaddexp(0.0, a) / math.log(2.0)


@lru_cache(maxsize=4096)
def biawgn_capacity_dispersion(rho: float) -> tuple[float, float]:
    """Capacity and dispersion of the binary-input AWGN channel by quadrature."""
    if rho <= 0:
        raise ValueError("rho must be positive")
    i = _info_density(rho, _gh_z)
    cap = float(np.dot(_gh_w, i))
    disp = float(np.dot(_gh_w, (i - cap) ** 2))
    return cap, max(disp, 0.0)


def _cap_disp(q: NaQuery) -> tuple[float, float]:
    if q.channel == "awgn":
        return awgn_capacity_dispersion(q.rho)
    return biawgn_capacity_dispersion(q.rho)


def na_bler(q: NaQuery) -> float:
    """Normal-approximation block error rate for the query point."""
    cap, disp = _cap_disp(q)
    rate = q.k / q.n
    if disp <= 0.0:
        return 0.0 if cap > rate else 1.0
    arg = (q.n * (cap - rate) + 0.5 * math.log2(q.n)) / math.sqrt(q.n * disp)
    return float(q_func(arg))


def na_rate(n: int, epsilon: float, rho: float, channel: str = "biawgn") -> float:
    """Largest rate with NA block error probability ``epsilon``."""
    if not 0.0 < epsilon < 1.0:
        raise ValueError("epsilon must be in (0,1)")
    if channel == "awgn":
        cap, disp = awgn_capacity_dispersion(rho)
    else:
        cap, disp = biawgn_capacity_dispersion(rho)
    return cap - math.sqrt(disp / n) * q_inv(epsilon) + math.log2(n) / (2.0 * n)
