"""Convolutional codes: trellis construction, termination, BCJR and WAVA.

Rate-1/n feedforward and recursive systematic encoders in controller
canonical form.  The state integer packs the shift register with the newest
cell as the most significant bit, which is what makes the bundled circular
state table for the [1,15/13] code come out right.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from numba import njit

from .core import DecodeResult, Gf2SingularError, as_bits, as_llrs, gf2_invert, \
    gf2_matmul, parse_octal_poly

NEG = -1e300


@dataclass(frozen=True)
class ConvSpec:
    """Rate 1/n_out convolutional code described by octal polynomials.

    ``gens`` lists the numerator polynomial of each output; with ``feedback``
    set, output j realises gens[j](D)/feedback(D), and a gens entry equal to
    the feedback polynomial is a systematic pass-through.
    """

    n_out: int
    memory: int
    gens: tuple
    feedback: int | None = None
    termination: str = "zero-tail"

    def __post_init__(self):
        if len(self.gens) != self.n_out:
            raise ValueError("need one generator per output")
        if self.termination not in ("truncate", "zero-tail", "tail-biting"):
            raise ValueError(f"unknown termination {self.termination!r}")
        for g in self.gens:
            parse_octal_poly(g, self.memory)  # raises if degree > memory
        if self.feedback is not None:
            fb = parse_octal_poly(self.feedback, self.memory)
            if fb[0] != 1:
                raise ValueError("feedback polynomial must be monic")

    def to_text(self) -> str:
        parts = [f"rate=1/{self.n_out}", f"m={self.memory}",
                 "gens=[" + ",".join(str(g) for g in self.gens) + "]"]
        if self.feedback is not None:
            parts.append(f"feedback={self.feedback}")
        parts.append(f"term={self.termination.replace('-', '')}")
        return " ".join(parts)

    @classmethod
    def from_text(cls, text: str) -> "ConvSpec":
        kv = dict(item.split("=", 1) for item in text.split())
        n_out = int(kv["rate"].split("/")[1])
        gens = tuple(int(g) for g in kv["gens"].strip("[]").split(","))
        term = {"truncate": "truncate", "zerotail": "zero-tail",
                "tailbiting": "tail-biting"}[kv.get("term", "zerotail")]
        fb = int(kv["feedback"]) if "feedback" in kv else None
        return cls(n_out, int(kv["m"]), gens, fb, term)


@dataclass
class Trellis:
    """Time-invariant trellis: 2^memory states, two branches per state."""

    spec: ConvSpec
    next_state: np.ndarray      # [S, 2] int32
    out_bits: np.ndarray        # [S, 2, n_out] uint8
    systematic_idx: int | None  # output index that reproduces the input
    update_matrix: np.ndarray = field(repr=False)  # state-update A over GF(2)

    @property
    def num_states(self) -> int:
        return self.next_state.shape[0]


@lru_cache(maxsize=None)
def build_trellis(spec: ConvSpec) -> Trellis:
    """Trellis of ``spec``; cached, so treat the returned arrays as read-only."""
    m, n = spec.memory, spec.n_out
    nstates = 1 << m
    fb = parse_octal_poly(spec.feedback, m) if spec.feedback is not None \
        else np.zeros(m + 1, dtype=np.uint8)
    fb[0] = 1
    gens = [parse_octal_poly(g, m) for g in spec.gens]

    next_state = np.zeros((nstates, 2), dtype=np.int32)
    out_bits = np.zeros((nstates, 2, n), dtype=np.uint8)
    for s in range(nstates):
        regs = [(s >> (m - i)) & 1 for i in range(1, m + 1)]
        fb_sum = 0
        for i in range(1, m + 1):
            fb_sum ^= fb[i] & regs[i - 1]
        for u in (0, 1):
            w = u ^ fb_sum
            for j, g in enumerate(gens):
                y = g[0] & w
                for i in range(1, m + 1):
                    y ^= g[i] & regs[i - 1]
                out_bits[s, u, j] = y
            next_state[s, u] = (w << (m - 1)) | (s >> 1) if m > 0 else 0

    sys_idx = None
    if spec.feedback is not None:
        for j, g in enumerate(spec.gens):
            if g == spec.feedback:
                sys_idx = j
                break

    # State update s' = A s + b u over GF(2) with s = (r1..rm), r1 newest.
    a = np.zeros((m, m), dtype=np.uint8)
    a[0, :] = fb[1:]
    for i in range(1, m):
        a[i, i - 1] = 1
    return Trellis(spec, next_state, out_bits, sys_idx, a)


def _run_encoder(trellis: Trellis, msg: np.ndarray, start_state: int):
    """Clock the encoder over msg; returns (coded bits, final state)."""
    s = start_state
    out = np.empty(msg.size * trellis.spec.n_out, dtype=np.uint8)
    n = trellis.spec.n_out
    for t, u in enumerate(msg):
        out[t * n:(t + 1) * n] = trellis.out_bits[s, u]
        s = trellis.next_state[s, u]
    return out, s


def _termination_input(trellis: Trellis, state: int) -> int:
    """Input that drives a zero into the register (feedback value)."""
    spec = trellis.spec
    if spec.feedback is None:
        return 0
    m = spec.memory
    fb = parse_octal_poly(spec.feedback, m)
    regs = [(state >> (m - i)) & 1 for i in range(1, m + 1)]
    val = 0
    for i in range(1, m + 1):
        val ^= fb[i] & regs[i - 1]
    return val


def encode_zero_term(spec: ConvSpec, msg) -> np.ndarray:
    """Encode and append m termination sections forcing the zero state."""
    msg = as_bits(msg)
    trellis = build_trellis(spec)
    out, s = _run_encoder(trellis, msg, 0)
    tail = []
    n = spec.n_out
    for _ in range(spec.memory):
        u = _termination_input(trellis, s)
        tail.append(trellis.out_bits[s, u])
        s = trellis.next_state[s, u]
    if s != 0:
        raise AssertionError("termination failed to reach the zero state")
    if tail:
        out = np.concatenate([out] + tail)
    return out


def zero_term_tail_inputs(spec: ConvSpec, msg) -> np.ndarray:
    """The m tail input bits implied by zero termination of msg."""
    msg = as_bits(msg)
    trellis = build_trellis(spec)
    _, s = _run_encoder(trellis, msg, 0)
    tail = np.empty(spec.memory, dtype=np.uint8)
    for i in range(spec.memory):
        u = _termination_input(trellis, s)
        tail[i] = u
        s = trellis.next_state[s, u]
    return tail


class CirculationError(ValueError):
    """No tail-biting circulation state exists for this (code, K)."""


@dataclass
class CirculationTable:
    """Maps (K mod period, zero-start final state) to the circulation state."""

    memory: int
    period: int
    table: dict

    def lookup(self, k: int, final_state: int) -> int:
        key = (k % self.period, final_state)
        if key not in self.table:
            raise CirculationError(
                f"no circulation for K={k} (K mod {self.period} = {k % self.period})")
        return self.table[key]


def _matrix_order(a: np.ndarray, limit: int = 1 << 16) -> int:
    ident = np.eye(a.shape[0], dtype=np.uint8)
    p = a.copy()
    for order in range(1, limit + 1):
        if (p == ident).all():
            return order
        p = gf2_matmul(p, a).astype(np.uint8)
    raise ValueError("state-update matrix order exceeds search limit")


def _state_to_vec(s: int, m: int) -> np.ndarray:
    return np.array([(s >> (m - i)) & 1 for i in range(1, m + 1)], dtype=np.uint8)


def _vec_to_state(v: np.ndarray) -> int:
    m = v.size
    return int(sum(int(v[i - 1]) << (m - i) for i in range(1, m + 1)))


@lru_cache(maxsize=None)
def compute_circulation_table(spec: ConvSpec, k: int) -> CirculationTable:
    """Solve S_C = A^K S_C + S over GF(2) for every zero-start final state S."""
    if spec.termination != "tail-biting":
        raise ValueError("circulation tables apply to tail-biting codes")
    trellis = build_trellis(spec)
    a = trellis.update_matrix
    m = spec.memory
    period = _matrix_order(a)
    ak = np.eye(m, dtype=np.uint8)
    for _ in range(k % period):
        ak = gf2_matmul(ak, a).astype(np.uint8)
    try:
        inv = gf2_invert((np.eye(m, dtype=np.uint8) ^ ak))
    except Gf2SingularError as e:
        raise CirculationError(
            f"no circulation for this K (K mod {period} = {k % period})") from e
    table = {}
    for s in range(1 << m):
        sc = gf2_matmul(inv, _state_to_vec(s, m).reshape(-1, 1)).ravel()
        table[(k % period, s)] = _vec_to_state(sc.astype(np.uint8))
    return CirculationTable(m, period, table)


def encode_tail_biting(spec: ConvSpec, msg) -> np.ndarray:
    """Two-pass tail-biting encoding; start state equals end state."""
    msg = as_bits(msg)
    trellis = build_trellis(spec)
    _, s_final = _run_encoder(trellis, msg, 0)
    table = compute_circulation_table(spec, msg.size)
    s_c = table.lookup(msg.size, s_final)
    out, s_end = _run_encoder(trellis, msg, s_c)
    if s_end != s_c:
        raise AssertionError("tail-biting encoding did not circulate")
    return out


def encode(spec: ConvSpec, msg) -> np.ndarray:
    if spec.termination == "zero-tail":
        return encode_zero_term(spec, msg)
    if spec.termination == "tail-biting":
        return encode_tail_biting(spec, msg)
    msg = as_bits(msg)
    return _run_encoder(build_trellis(spec), msg, 0)[0]


@njit(cache=True)
def _bcjr_pass(ns, outb, chan, apriori, max_log, tb_init_alpha, tb_init_beta):
    """Forward-backward metrics; returns APP LLRs for the input bits.

    chan is [T, n] channel LLRs, apriori is [T].  Branch metric is
    -(u * La + sum_j c_j * l_j), exact log-domain up to per-section constants.
    """
    nstates, _ = ns.shape
    t_len = chan.shape[0]
    n = chan.shape[1]

    gamma = np.empty((t_len, nstates, 2))
    for t in range(t_len):
        for s in range(nstates):
            for u in range(2):
                acc = -u * apriori[t]
                for j in range(n):
                    if outb[s, u, j] == 1:
                        acc -= chan[t, j]
                gamma[t, s, u] = acc

    alpha = np.empty((t_len + 1, nstates))
    beta = np.empty((t_len + 1, nstates))
    alpha[0, :] = tb_init_alpha
    beta[t_len, :] = tb_init_beta

    for t in range(t_len):
        for s in range(nstates):
            alpha[t + 1, s] = NEG
        for s in range(nstates):
            if alpha[t, s] <= NEG:
                continue
            for u in range(2):
                sn = ns[s, u]
                cand = alpha[t, s] + gamma[t, s, u]
                cur = alpha[t + 1, sn]
                if max_log:
                    if cand > cur:
                        alpha[t + 1, sn] = cand
                else:
                    if cur <= NEG:
                        alpha[t + 1, sn] = cand
                    else:
                        m = cur if cur > cand else cand
                        d = abs(cur - cand)
                        alpha[t + 1, sn] = m + math.log1p(math.exp(-d))
        # normalise to keep metrics bounded
        mx = alpha[t + 1, 0]
        for s in range(1, nstates):
            if alpha[t + 1, s] > mx:
                mx = alpha[t + 1, s]
        for s in range(nstates):
            if alpha[t + 1, s] > NEG:
                alpha[t + 1, s] -= mx

    for t in range(t_len - 1, -1, -1):
        for s in range(nstates):
            acc = NEG
            for u in range(2):
                sn = ns[s, u]
                if beta[t + 1, sn] <= NEG:
                    continue
                cand = beta[t + 1, sn] + gamma[t, s, u]
                if max_log:
                    if cand > acc:
                        acc = cand
                else:
                    if acc <= NEG:
                        acc = cand
                    else:
                        m = acc if acc > cand else cand
                        d = abs(acc - cand)
                        acc = m + math.log1p(math.exp(-d))
            beta[t, s] = acc
        mx = beta[t, 0]
        for s in range(1, nstates):
            if beta[t, s] > mx:
                mx = beta[t, s]
        for s in range(nstates):
            if beta[t, s] > NEG:
                beta[t, s] -= mx

    app = np.empty(t_len)
    for t in range(t_len):
        num = NEG
        den = NEG
        for s in range(nstates):
            if alpha[t, s] <= NEG:
                continue
            for u in range(2):
                sn = ns[s, u]
                if beta[t + 1, sn] <= NEG:
                    continue
                cand = alpha[t, s] + gamma[t, s, u] + beta[t + 1, sn]
                if u == 0:
                    if max_log:
                        num = cand if cand > num else num
                    elif num <= NEG:
                        num = cand
                    else:
                        m = num if num > cand else cand
                        num = m + math.log1p(math.exp(-abs(num - cand)))
                else:
                    if max_log:
                        den = cand if cand > den else den
                    elif den <= NEG:
                        den = cand
                    else:
                        m = den if den > cand else cand
                        den = m + math.log1p(math.exp(-abs(den - cand)))
        app[t] = num - den
    return app


@njit(cache=True)
def _warmup_alpha(ns, outb, chan, apriori, max_log):
    """One wrap of the forward recursion from uniform start (tail-biting)."""
    nstates = ns.shape[0]
    t_len = chan.shape[0]
    n = chan.shape[1]
    cur = np.zeros(nstates)
    nxt = np.empty(nstates)
    for t in range(t_len):
        for s in range(nstates):
            nxt[s] = NEG
        for s in range(nstates):
            for u in range(2):
                acc = -u * apriori[t]
                for j in range(n):
                    if outb[s, u, j] == 1:
                        acc -= chan[t, j]
                sn = ns[s, u]
                cand = cur[s] + acc
                if max_log:
                    if cand > nxt[sn]:
                        nxt[sn] = cand
                else:
                    if nxt[sn] <= NEG:
                        nxt[sn] = cand
                    else:
                        m = nxt[sn] if nxt[sn] > cand else cand
                        nxt[sn] = m + math.log1p(math.exp(-abs(nxt[sn] - cand)))
        mx = nxt[0]
        for s in range(1, nstates):
            if nxt[s] > mx:
                mx = nxt[s]
        for s in range(nstates):
            nxt[s] -= mx
        cur, nxt = nxt, cur
    return cur


@njit(cache=True)
def _warmup_beta(ns, outb, chan, apriori, max_log):
    nstates = ns.shape[0]
    t_len = chan.shape[0]
    n = chan.shape[1]
    cur = np.zeros(nstates)
    nxt = np.empty(nstates)
    for t in range(t_len - 1, -1, -1):
        for s in range(nstates):
            acc = NEG
            for u in range(2):
                g = -u * apriori[t]
                for j in range(n):
                    if outb[s, u, j] == 1:
                        g -= chan[t, j]
                cand = cur[ns[s, u]] + g
                if max_log:
                    if cand > acc:
                        acc = cand
                else:
                    if acc <= NEG:
                        acc = cand
                    else:
                        m = acc if acc > cand else cand
                        acc = m + math.log1p(math.exp(-abs(acc - cand)))
            nxt[s] = acc
        mx = nxt[0]
        for s in range(1, nstates):
            if nxt[s] > mx:
                mx = nxt[s]
        for s in range(nstates):
            nxt[s] -= mx
        cur, nxt = nxt, cur
    return cur


def bcjr(trellis: Trellis, chan_llr, apriori=None, mode: str = "log-map",
         scale: float = 1.0):
    """Bit-wise MAP decoding of one trellis block.

    chan_llr holds n_out LLRs per section.  Returns (app, ext), where
    app = apriori + systematic channel LLR + ext.  Zero-terminated trellises
    pin both ends to state 0; tail-biting blocks start uniform and take one
    wrap of warm-up on each recursion.  In max-log mode the extrinsic part is
    multiplied by ``scale``.
    """
    if mode not in ("log-map", "max-log-map"):
        raise ValueError(f"unknown BCJR mode {mode!r}")
    chan = as_llrs(chan_llr)
    n = trellis.spec.n_out
    if chan.size % n:
        raise ValueError("channel LLR length must be a multiple of n_out")
    t_len = chan.size // n
    chan = chan.reshape(t_len, n)
    if apriori is None:
        apriori_arr = np.zeros(t_len)
    else:
        apriori_arr = as_llrs(apriori)
        if apriori_arr.size != t_len:
            raise ValueError("a-priori length must equal the section count")
    max_log = mode == "max-log-map"

    nstates = trellis.num_states
    if trellis.spec.termination == "tail-biting":
        init_a = _warmup_alpha(trellis.next_state, trellis.out_bits, chan,
                               apriori_arr, max_log)
        init_b = _warmup_beta(trellis.next_state, trellis.out_bits, chan,
                              apriori_arr, max_log)
    else:
        init_a = np.full(nstates, NEG)
        init_b = np.full(nstates, NEG)
        init_a[0] = 0.0
        init_b[0] = 0.0

    app = _bcjr_pass(trellis.next_state, trellis.out_bits, chan, apriori_arr,
                     max_log, init_a, init_b)
    sys_llr = chan[:, trellis.systematic_idx] if trellis.systematic_idx is not None \
        else np.zeros(t_len)
    ext = app - apriori_arr - sys_llr
    if max_log and scale != 1.0:
        ext = scale * ext
        app = apriori_arr + sys_llr + ext
    return app, ext


@njit(cache=True)
def _wava_rounds(ns, outb, chan, max_rounds):
    """Wrap-around Viterbi; returns (message bits, metric, tb flag, rounds)."""
    nstates = ns.shape[0]
    t_len = chan.shape[0]
    n = chan.shape[1]

    bm = np.empty((t_len, nstates, 2))
    for t in range(t_len):
        for s in range(nstates):
            for u in range(2):
                acc = 0.0
                for j in range(n):
                    acc += (1.0 - 2.0 * outb[s, u, j]) * chan[t, j]
                bm[t, s, u] = acc

    metric = np.zeros(nstates)
    best_bits = np.zeros(t_len, dtype=np.uint8)
    best_metric = NEG
    best_found = False
    rounds_used = 0

    prev_state = np.empty((t_len, nstates), dtype=np.int32)
    prev_bit = np.empty((t_len, nstates), dtype=np.uint8)
    start_of = np.empty(nstates, dtype=np.int32)
    start_nxt = np.empty(nstates, dtype=np.int32)

    for rnd in range(max_rounds):
        rounds_used = rnd + 1
        for s in range(nstates):
            start_of[s] = s
        for t in range(t_len):
            nxt = np.full(nstates, NEG)
            for s in range(nstates):
                for u in range(2):
                    sn = ns[s, u]
                    cand = metric[s] + bm[t, s, u]
                    if cand > nxt[sn]:
                        nxt[sn] = cand
                        prev_state[t, sn] = s
                        prev_bit[t, sn] = u
            for s in range(nstates):
                start_nxt[s] = start_of[prev_state[t, s]]
            for s in range(nstates):
                start_of[s] = start_nxt[s]
                metric[s] = nxt[s]

        # best tail-biting survivor of this round, scored by its exact
        # one-block correlation so rounds stay comparable
        round_state = -1
        round_best = NEG
        for s in range(nstates):
            if start_of[s] != s:
                continue
            corr = 0.0
            sp = s
            for t in range(t_len - 1, -1, -1):
                corr += bm[t, prev_state[t, sp], prev_bit[t, sp]]
                sp = prev_state[t, sp]
            if corr > round_best:
                round_best = corr
                round_state = s
        if round_state >= 0 and round_best > best_metric:
            best_metric = round_best
            best_found = True
            s = round_state
            for t in range(t_len - 1, -1, -1):
                best_bits[t] = prev_bit[t, s]
                s = prev_state[t, s]

        # stop when the overall best survivor is itself tail-biting
        overall = 0
        for s in range(1, nstates):
            if metric[s] > metric[overall]:
                overall = s
        if start_of[overall] == overall:
            break
        # keep metrics (wrap-around), normalise
        mx = metric[0]
        for s in range(1, nstates):
            if metric[s] > mx:
                mx = metric[s]
        for s in range(nstates):
            metric[s] -= mx

    if not best_found:
        # fall back to the best non-circular survivor
        overall = 0
        for s in range(1, nstates):
            if metric[s] > metric[overall]:
                overall = s
        best_metric = metric[overall]
        s = overall
        for t in range(t_len - 1, -1, -1):
            best_bits[t] = prev_bit[t, s]
            s = prev_state[t, s]
    return best_bits, best_metric, best_found, rounds_used


def wava(trellis: Trellis, chan_llr, max_rounds: int = 4) -> DecodeResult:
    """Wrap-around Viterbi decoding of a tail-biting block."""
    if trellis.spec.termination != "tail-biting":
        raise ValueError("WAVA applies to tail-biting codes")
    chan = as_llrs(chan_llr)
    n = trellis.spec.n_out
    if chan.size % n:
        raise ValueError("channel LLR length must be a multiple of n_out")
    chan = chan.reshape(-1, n)
    bits, metric, found, rounds = _wava_rounds(
        trellis.next_state, trellis.out_bits, chan, max_rounds)
    return DecodeResult(bits=bits.astype(np.uint8), iterations=rounds,
                        converged=bool(found), metric=float(metric))
