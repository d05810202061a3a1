"""Rate-1/3 parallel concatenated encoder, QPP/ARP interleavers, periodic
puncturing, and the iterative extrinsic-exchange decoder.

The codeword layout is [systematic, upper parity, lower parity]; zero-tail
components additionally append their termination sections uncoded at the end.
Puncturing keeps the surviving bits of each stream in order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .core import DecodeResult, as_bits, as_llrs
from .crc import CrcSpec, crc_check
from .convolutional import ConvSpec, build_trellis, bcjr, zero_term_tail_inputs


def qpp_map(i: int, f1: int, f2: int, k: int) -> int:
    """Quadratic permutation polynomial (f1*i + f2*i^2) mod K."""
    return (f1 * i + f2 * i * i) % k


def arp_map(i: int, p: int, q: int, shifts, k: int) -> int:
    """Almost regular permutation (P*i + S[i mod Q]) mod K."""
    if k % q:
        raise ValueError("Q must divide K")
    if math.gcd(p, k) != 1:
        raise ValueError("P and K must be coprime")
    return (p * i + int(shifts[i % q])) % k


@dataclass(frozen=True)
class Interleaver:
    kind: str
    k: int
    table: np.ndarray = field(repr=False)
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        table = np.asarray(self.table, dtype=np.int64)
        if table.size != self.k or np.sort(table).tolist() != list(range(self.k)):
            raise ValueError("interleaver mapping is not a bijection on [0,K)")
        object.__setattr__(self, "table", table)
        object.__setattr__(self, "inverse", np.argsort(table))

    @classmethod
    def qpp(cls, k: int, f1: int, f2: int) -> "Interleaver":
        table = np.array([qpp_map(i, f1, f2, k) for i in range(k)])
        return cls("qpp", k, table, {"f1": f1, "f2": f2})

    @classmethod
    def arp(cls, k: int, p: int, q: int, shifts) -> "Interleaver":
        table = np.array([arp_map(i, p, q, shifts, k) for i in range(k)])
        return cls("arp", k, table,
                   {"P": p, "Q": q, "S": tuple(int(s) for s in shifts)})

    @classmethod
    def explicit(cls, table) -> "Interleaver":
        table = np.asarray(table, dtype=np.int64)
        return cls("table", table.size, table)

    def apply(self, x: np.ndarray) -> np.ndarray:
        """Interleaved sequence: out[i] = x[pi(i)]."""
        return np.asarray(x)[self.table]

    def invert(self, x: np.ndarray) -> np.ndarray:
        out = np.empty_like(np.asarray(x))
        out[self.table] = np.asarray(x)
        return out

    def to_text(self) -> str:
        if self.kind == "qpp":
            return f"type=qpp K={self.k} f1={self.params['f1']} f2={self.params['f2']}"
        if self.kind == "arp":
            s = ",".join(str(v) for v in self.params["S"])
            return f"type=arp K={self.k} P={self.params['P']} Q={self.params['Q']} S={s}"
        return f"type=table K={self.k} perm=" + ",".join(map(str, self.table))

    @classmethod
    def from_text(cls, text: str) -> "Interleaver":
        kv = dict(item.split("=", 1) for item in text.split())
        kind = kv["type"]
        k = int(kv["K"])
        if kind == "qpp":
            return cls.qpp(k, int(kv["f1"]), int(kv["f2"]))
        if kind == "arp":
            shifts = [int(v) for v in kv["S"].split(",")]
            return cls.arp(k, int(kv["P"]), int(kv["Q"]), shifts)
        if kind == "table":
            return cls.explicit([int(v) for v in kv["perm"].split(",")])
        raise ValueError(f"unknown interleaver type {kind!r}")


def find_qpp(k: int, limit: int = 200):
    """First (f1, f2) whose quadratic polynomial permutes [0,K); small search
    used when no standard table entry is at hand."""
    for f2 in range(1, limit):
        for f1 in range(1, limit):
            if math.gcd(f1, k) != 1:
                continue
            seen = np.zeros(k, dtype=bool)
            ok = True
            for i in range(k):
                j = qpp_map(i, f1, f2, k)
                if seen[j]:
                    ok = False
                    break
                seen[j] = True
            if ok:
                return f1, f2
    raise ValueError(f"no QPP found for K={k} within the search limit")


@dataclass(frozen=True)
class PunctureMask:
    """Periodic keep/drop masks for the systematic, upper and lower parity
    streams; 1 keeps the bit, 0 drops it."""

    sys: np.ndarray
    upper: np.ndarray
    lower: np.ndarray

    def __post_init__(self):
        for name in ("sys", "upper", "lower"):
            m = np.asarray(getattr(self, name), dtype=np.uint8)
            if m.ndim != 1 or m.size == 0 or not np.isin(m, (0, 1)).all():
                raise ValueError(f"{name} mask must be a non-empty 0/1 sequence")
            if not m.any():
                raise ValueError(f"{name} mask must keep at least one bit")
            object.__setattr__(self, name, m)

    @classmethod
    def unpunctured(cls) -> "PunctureMask":
        one = np.ones(1, dtype=np.uint8)
        return cls(one, one.copy(), one.copy())

    def keep_flags(self, k: int):
        flags = []
        for m in (self.sys, self.upper, self.lower):
            if k % m.size:
                raise ValueError("mask period must divide the block length")
            flags.append(np.tile(m, k // m.size).astype(bool))
        return flags

    def to_text(self) -> str:
        def s(m):
            return "".join(str(int(b)) for b in m)
        return f"s={s(self.sys)} up={s(self.upper)} lp={s(self.lower)}"

    @classmethod
    def from_text(cls, text: str) -> "PunctureMask":
        kv = dict(item.split("=", 1) for item in text.split())
        return cls(np.array([int(c) for c in kv["s"]], dtype=np.uint8),
                   np.array([int(c) for c in kv["up"]], dtype=np.uint8),
                   np.array([int(c) for c in kv["lp"]], dtype=np.uint8))


def punctured_rate(mask: PunctureMask) -> Fraction:
    """Code rate after periodic puncturing of the rate-1/3 mother code."""
    if not mask.sys.any():
        raise ValueError("systematic mask keeps no bits")
    total = (Fraction(int(mask.sys.sum()), mask.sys.size)
             + Fraction(int(mask.upper.sum()), mask.upper.size)
             + Fraction(int(mask.lower.sum()), mask.lower.size))
    return 1 / total


def enhanced_scale_schedule(max_iters: int) -> tuple:
    """Extrinsic scaling schedule: 0.6 first, 1.0 last, 0.7 in between."""
    if max_iters == 1:
        return (1.0,)
    return (0.6,) + (0.7,) * (max_iters - 2) + (1.0,)


@dataclass(frozen=True)
class TurboSpec:
    k: int
    interleaver: Interleaver
    component: ConvSpec = ConvSpec(2, 3, (13, 15), feedback=13,
                                   termination="tail-biting")
    mask: PunctureMask = None
    crc: CrcSpec | None = None
    scale_schedule: tuple | None = None

    def __post_init__(self):
        if self.mask is None:
            object.__setattr__(self, "mask", PunctureMask.unpunctured())
        if self.interleaver.k != self.k:
            raise ValueError("interleaver length must equal K")
        if self.component.n_out != 2 or self.component.feedback is None:
            raise ValueError("component must be a rate-1/2 recursive "
                             "systematic code")
        self.mask.keep_flags(self.k)  # validates period divisibility

    @property
    def n_tx(self) -> int:
        flags = self.mask.keep_flags(self.k)
        n = sum(int(f.sum()) for f in flags)
        if self.component.termination == "zero-tail":
            n += 4 * self.component.memory
        return n

    @property
    def rate(self) -> Fraction:
        return Fraction(self.k, self.n_tx)


def _split_streams(spec: TurboSpec, coded: np.ndarray, k: int):
    """Separate one component codeword into (systematic, parity) streams."""
    trellis = build_trellis(spec.component)
    sys_idx = trellis.systematic_idx
    par_idx = 1 - sys_idx
    sec = coded.reshape(-1, 2)
    return sec[:, sys_idx], sec[:, par_idx]


def turbo_encode(spec: TurboSpec, msg) -> np.ndarray:
    """Encode msg of length K; returns the punctured codeword."""
    msg = as_bits(msg)
    if msg.size != spec.k:
        raise ValueError(f"message length must be K={spec.k}")
    comp = spec.component
    from .convolutional import encode as conv_encode
    upper = conv_encode(comp, msg)
    lower = conv_encode(comp, spec.interleaver.apply(msg))

    if comp.termination == "zero-tail":
        m = comp.memory
        body_u, tail_u = upper[:2 * spec.k], upper[2 * spec.k:]
        body_l, tail_l = lower[:2 * spec.k], lower[2 * spec.k:]
    else:
        body_u, tail_u = upper, np.empty(0, dtype=np.uint8)
        body_l, tail_l = lower, np.empty(0, dtype=np.uint8)

    sys_u, par_u = _split_streams(spec, body_u, spec.k)
    _, par_l = _split_streams(spec, body_l, spec.k)

    fs, fu, fl = spec.mask.keep_flags(spec.k)
    parts = [sys_u[fs], par_u[fu], par_l[fl], tail_u, tail_l]
    return np.concatenate([p for p in parts if p.size]).astype(np.uint8)


def depuncture(spec: TurboSpec, llr) -> tuple:
    """Inverse of the puncturing map: zero LLRs at punctured positions.

    Returns (sys, upper parity, lower parity, upper tail, lower tail) LLRs.
    """
    llr = as_llrs(llr)
    if llr.size != spec.n_tx:
        raise ValueError(f"LLR length must be {spec.n_tx}")
    k = spec.k
    fs, fu, fl = spec.mask.keep_flags(k)
    pos = 0
    out = []
    for flags in (fs, fu, fl):
        kept = int(flags.sum())
        stream = np.zeros(k)
        stream[flags] = llr[pos:pos + kept]
        out.append(stream)
        pos += kept
    m = spec.component.memory
    if spec.component.termination == "zero-tail":
        tail_u = llr[pos:pos + 2 * m]
        tail_l = llr[pos + 2 * m:pos + 4 * m]
    else:
        tail_u = np.empty(0)
        tail_l = np.empty(0)
    return out[0], out[1], out[2], tail_u, tail_l


def _component_chan(spec: TurboSpec, sys_llr, par_llr, tail_llr):
    """Assemble per-section channel LLRs for one component decoder."""
    comp = spec.component
    trellis = build_trellis(comp)
    k = spec.k
    m = comp.memory
    extra = m if comp.termination == "zero-tail" else 0
    chan = np.zeros((k + extra, 2))
    chan[:k, trellis.systematic_idx] = sys_llr
    chan[:k, 1 - trellis.systematic_idx] = par_llr
    if extra:
        tail = tail_llr.reshape(m, 2)
        chan[k:, trellis.systematic_idx] = tail[:, 0]
        chan[k:, 1 - trellis.systematic_idx] = tail[:, 1]
    return trellis, chan.ravel()


def turbo_decode(spec: TurboSpec, llr, max_iters: int = 8,
                 mode: str = "max-log-map") -> DecodeResult:
    """Iterative decoding with extrinsic exchange through the interleaver.

    The extrinsic output of the lower decoder from the previous iteration is
    the a-priori input of the upper decoder.  With a CRC configured, stops as
    soon as the hard decision passes the check.
    """
    sys_llr, par_u, par_l, tail_u, tail_l = depuncture(spec, llr)
    k = spec.k
    pi = spec.interleaver
    comp = spec.component
    extra = comp.memory if comp.termination == "zero-tail" else 0

    if spec.scale_schedule is not None:
        schedule = spec.scale_schedule
    elif mode == "max-log-map":
        schedule = enhanced_scale_schedule(max_iters)
    else:
        schedule = (1.0,) * max_iters

    trellis_u, chan_u = _component_chan(spec, sys_llr, par_u, tail_u)
    trellis_l, chan_l = _component_chan(spec, pi.apply(sys_llr), par_l, tail_l)

    ext_l_deint = np.zeros(k)
    ext_u = np.zeros(k)
    iterations = 0
    converged = False
    hard = np.zeros(k, dtype=np.uint8)
    for it in range(max_iters):
        iterations = it + 1
        scale = schedule[min(it, len(schedule) - 1)]
        apriori_u = np.zeros(k + extra)
        apriori_u[:k] = ext_l_deint
        _, ext = bcjr(trellis_u, chan_u, apriori_u, mode=mode, scale=scale)
        ext_u = ext[:k]

        apriori_l = np.zeros(k + extra)
        apriori_l[:k] = pi.apply(ext_u)
        _, ext = bcjr(trellis_l, chan_l, apriori_l, mode=mode, scale=scale)
        ext_l_deint = pi.invert(ext[:k])

        app = sys_llr + ext_u + ext_l_deint
        hard = (app < 0).astype(np.uint8)
        if spec.crc is not None and crc_check(hard, spec.crc):
            converged = True
            break
    if spec.crc is None:
        converged = True
    return DecodeResult(bits=hard, iterations=iterations, converged=converged)
