"""Element vectors: tagged bundles moved through circuits as units.

An element is a fixed schema of metadata bits (key bits, realness, colors,
...) plus at most one opaque payload wire.  Moving an element through a
2-to-1 switch costs one boolean mux gate per metadata bit and one selector
for the payload; switches can be recorded into a Block so the routing can
later be reversed with reverse-selector gates sharing the same flags.
"""
from __future__ import annotations

import numpy as np

from .circuit import (Builder, Rec, I32, BOOL, make_table, T_MUX, T_RMUX,
                      T_ANDN, T_AND, T_EQ, T_OR, T_SWAP, T_CMP2)

T_GTCOMB = make_table(lambda gh, eh, gl: gh | (eh & gl), 3, 1)


class EV:
    """A vector of same-schema elements: bits (n, nb) and optional payload (n,)."""

    __slots__ = ("bits", "pay")

    def __init__(self, bits, pay=None):
        self.bits = np.asarray(bits, I32)
        if self.bits.ndim == 1:
            self.bits = self.bits.reshape(len(self.bits), 0 if self.bits.size == 0 else 1)
        self.pay = None if pay is None else np.asarray(pay, I32)

    def __len__(self):
        return len(self.bits)

    @property
    def nbits(self):
        return self.bits.shape[1]

    def take(self, idx):
        return EV(self.bits[idx], None if self.pay is None else self.pay[idx])

    def put(self, idx, other):
        self.bits[idx] = other.bits
        if self.pay is not None:
            self.pay[idx] = other.pay

    def copy(self):
        return EV(self.bits.copy(), None if self.pay is None else self.pay.copy())

    def cat(self, other):
        pay = None
        if self.pay is not None:
            pay = np.concatenate([self.pay, other.pay])
        return EV(np.vstack([self.bits, other.bits]), pay)

    def slice(self, lo, hi):
        return EV(self.bits[lo:hi], None if self.pay is None else self.pay[lo:hi])


def ev_empty(n, nbits, with_pay):
    return EV(np.zeros((n, nbits), I32), np.zeros(n, I32) if with_pay else None)


def ev_filler(bld: Builder, n, nbits, shape=None):
    """Constant all-zero elements (fillers)."""
    cols = [bld.const_bools(np.zeros(n, np.uint8)) for _ in range(nbits)]
    bits = np.stack(cols, axis=1) if nbits else np.zeros((n, 0), I32)
    pay = bld.const_pays(n, shape) if shape is not None else None
    return EV(bits, pay)


class Block:
    """Recorder for reversible element routing."""

    def __init__(self):
        self.events = []  # ("mux", flags, a, b, o) | ("swap", flags, a, b, lo, hi)

    def rows(self):
        return sum(len(e[1]) for e in self.events)


def _keys(ev: EV):
    return ev.pay if ev.pay is not None else ev.bits[:, 0]


def mux_ev(bld: Builder, flags, a: EV, b: EV, block: Block | None = None) -> EV:
    """out = b where flag else a, element-wise over rows."""
    flags = np.asarray(flags, I32)
    rows, nb = a.bits.shape
    uses = nb + (1 if a.pay is not None else 0)
    fl = bld.spread(flags, uses) if uses > 1 else flags.reshape(-1, 1)
    obits = np.zeros((rows, nb), I32)
    if nb:
        ins = np.stack([fl[:, :nb].reshape(-1),
                        a.bits.reshape(-1), b.bits.reshape(-1)], axis=1)
        obits = bld.bools(T_MUX, ins).reshape(rows, nb)
    opay = None
    if a.pay is not None:
        opay = bld.sel(fl[:, -1], a.pay, b.pay)
    out = EV(obits, opay)
    if block is not None:
        block.events.append(("mux", flags, a, b, out))
    return out


def swap_ev(bld: Builder, flags, a: EV, b: EV, block: Block | None = None):
    """Conditional exchange: returns (a, b) when flag=0 and (b, a) when flag=1.

    One 3-in/2-out gate per metadata bit (both outputs from a single gate), so
    a compare-exchange consumes each wire twice, not three times.
    """
    flags = np.asarray(flags, I32)
    rows, nb = a.bits.shape
    uses = nb + (2 if a.pay is not None else 0)
    fl = bld.spread(flags, uses) if uses > 1 else flags.reshape(-1, 1)
    lo_bits = np.zeros((rows, nb), I32)
    hi_bits = np.zeros((rows, nb), I32)
    if nb:
        ins = np.stack([fl[:, :nb].reshape(-1),
                        a.bits.reshape(-1), b.bits.reshape(-1)], axis=1)
        outs = bld.bools(T_SWAP, ins, nout=2)
        lo_bits = outs[:, 0].reshape(rows, nb)
        hi_bits = outs[:, 1].reshape(rows, nb)
    lo_pay = hi_pay = None
    if a.pay is not None:
        lo_pay = bld.sel(fl[:, -2], a.pay, b.pay)
        hi_pay = bld.sel(fl[:, -1], b.pay, a.pay)
    lo, hi = EV(lo_bits, lo_pay), EV(hi_bits, hi_pay)
    if block is not None:
        block.events.append(("swap", flags, a, b, lo, hi))
    return lo, hi


def rmux_ev(bld: Builder, flags, o: EV):
    """Reverse switch: route o back to side flag (other side gets fillers)."""
    flags = np.asarray(flags, I32)
    rows, nb = o.bits.shape
    uses = nb + (1 if o.pay is not None else 0)
    fl = bld.spread(flags, uses) if uses > 1 else flags.reshape(-1, 1)
    a_bits = np.zeros((rows, nb), I32)
    b_bits = np.zeros((rows, nb), I32)
    if nb:
        ins = np.stack([fl[:, :nb].reshape(-1), o.bits.reshape(-1)], axis=1)
        outs = bld.bools(T_RMUX, ins, nout=2)
        a_bits = outs[:, 0].reshape(rows, nb)
        b_bits = outs[:, 1].reshape(rows, nb)
    a_pay = b_pay = None
    if o.pay is not None:
        a_pay, b_pay = bld.rsel(fl[:, -1], o.pay)
    return EV(a_bits, a_pay), EV(b_bits, b_pay)


def reverse_block(bld: Builder, blk: Block, fwd_out: EV, bwd_out: EV, fwd_in: EV) -> EV:
    """Mirror a recorded block, routing `bwd_out` back to the block's inputs.

    `bwd_out[i]` travels backwards from the position of forward output
    element `fwd_out[i]`.  Returns the backward elements that arrive at the
    positions of `fwd_in`; positions nothing arrives at hold fillers (all
    bits zero), so callers should carry a validity bit in the schema.
    """
    nb = bwd_out.nbits
    with_pay = bwd_out.pay is not None
    shape = None
    if with_pay:
        shape = bld.shapes[bld.wshape[bwd_out.pay[0]]]
    total = 1 + len(bwd_out) + 2 * blk.rows() + len(fwd_in)
    pool_bits = np.zeros((total, nb), I32)
    pool_pay = np.zeros(total, I32) if with_pay else None
    filler = ev_filler(bld, 1, nb, shape)
    pool_bits[0] = filler.bits[0]
    if with_pay:
        pool_pay[0] = filler.pay[0]
    nxt = 1
    amap = np.zeros(bld._nwires + 1, I32)  # forward key wire -> pool row (0 = filler)

    def put(ev):
        nonlocal nxt
        r = len(ev)
        pool_bits[nxt:nxt + r] = ev.bits
        if with_pay:
            pool_pay[nxt:nxt + r] = ev.pay
        rows = np.arange(nxt, nxt + r, dtype=I32)
        nxt += r
        return rows

    def grab(keys):
        rows = amap[keys]
        return EV(pool_bits[rows], pool_pay[rows] if with_pay else None)

    amap[_keys(fwd_out)] = put(bwd_out)
    for ev in reversed(blk.events):
        if ev[0] == "swap":
            _, flags, a, b, lo, hi = ev
            bl = grab(_keys(lo))
            bh = grab(_keys(hi))
            ra, rb = swap_ev(bld, flags, bl, bh)
        else:
            _, flags, a, b, o = ev
            ra, rb = rmux_ev(bld, flags, grab(_keys(o)))
        amap[_keys(a)] = put(ra)
        amap[_keys(b)] = put(rb)
    return grab(_keys(fwd_in))


# ---------------------------------------------------------------------------
# comparators and compare-exchange layers


def compare_gt_eq(bld: Builder, a_bits, b_bits):
    """Bulk unsigned comparison on (rows, k) LSB-first key bits.

    Returns (gt, eq) flag wire arrays; O(k) gates, O(log k) depth.
    """
    a = np.atleast_2d(np.asarray(a_bits, I32))
    b = np.atleast_2d(np.asarray(b_bits, I32))
    k = a.shape[1]
    ge = bld.bools(T_CMP2, np.stack([a.reshape(-1), b.reshape(-1)], axis=1), nout=2)
    gt = ge[:, 0].reshape(-1, k)
    eq = ge[:, 1].reshape(-1, k)
    while gt.shape[1] > 1:
        m = gt.shape[1]
        half = m // 2
        lo_g, hi_g = gt[:, 0:2 * half:2], gt[:, 1:2 * half:2]
        lo_e, hi_e = eq[:, 0:2 * half:2], eq[:, 1:2 * half:2]
        ng = bld.bools(T_GTCOMB, np.stack(
            [hi_g.reshape(-1), hi_e.reshape(-1), lo_g.reshape(-1)], axis=1)).reshape(-1, half)
        ne = bld.bools(T_AND, np.stack(
            [hi_e.reshape(-1), lo_e.reshape(-1)], axis=1)).reshape(-1, half)
        if m % 2:
            ng = np.hstack([ng, gt[:, -1:]])
            ne = np.hstack([ne, eq[:, -1:]])
        gt, eq = ng, ne
    return gt[:, 0], eq[:, 0]


def compare_gt(bld: Builder, a_bits, b_bits):
    """Bulk unsigned a > b; single flag per row (cheap path for 1-bit keys)."""
    a = np.atleast_2d(np.asarray(a_bits, I32))
    if a.shape[1] == 1:
        b = np.atleast_2d(np.asarray(b_bits, I32))
        return bld.bools(T_ANDN, np.stack([a.reshape(-1), b.reshape(-1)], axis=1))
    return compare_gt_eq(bld, a_bits, b_bits)[0]


def compare_ordering(bld: Builder, a_bits, b_bits):
    """(lt, eq) flags for unsigned comparison of LSB-first keys."""
    gt, eq = compare_gt_eq(bld, a_bits, b_bits)
    lt = bld.bools(make_table(lambda g, e: (1 - g) & (1 - e), 2, 1),
                   np.stack([np.atleast_1d(gt), np.atleast_1d(eq)], axis=1))
    return np.atleast_1d(lt), np.atleast_1d(eq)


def compare_exchange(bld: Builder, ev: EV, i_idx, j_idx, key_cols,
                     block: Block | None = None):
    """Sort element pairs (i, j) by the key bits in-place (min lands at i)."""
    i_idx = np.asarray(i_idx, I32)
    j_idx = np.asarray(j_idx, I32)
    a = ev.take(i_idx)
    b = ev.take(j_idx)
    f = compare_gt(bld, a.bits[:, key_cols], b.bits[:, key_cols])
    lo, hi = swap_ev(bld, f, a, b, block)
    ev.put(i_idx, lo)
    ev.put(j_idx, hi)


# ---------------------------------------------------------------------------
# Batcher odd-even mergesort pair schedule (any n), grouped into layers

_NET_CACHE: dict[int, list] = {}


def _oem_pairs(n):
    def merge(idx):
        if len(idx) == 2:
            yield idx[0], idx[1]
        elif len(idx) > 2:
            yield from merge(idx[0::2])
            yield from merge(idx[1::2])
            for x, y in zip(idx[1::2], idx[2::2]):
                yield x, y

    def sort(idx):
        if len(idx) <= 1:
            return
        if len(idx) == 2:
            yield idx[0], idx[1]
            return
        mid = len(idx) // 2
        yield from sort(idx[:mid])
        yield from sort(idx[mid:])
        yield from merge(idx)

    p = 1
    while p < n:
        p *= 2
    fill = p - n
    virt = [None] * (fill // 2) + list(range(n)) + [None] * ((fill + 1) // 2)
    return [(a, b) for a, b in sort(virt) if a is not None and b is not None]


def sorting_network(n):
    """Layers of disjoint comparator pairs realizing a full sort of n lines."""
    if n not in _NET_CACHE:
        pairs = _oem_pairs(n)
        last = np.zeros(n, np.int64)
        layers: list[list] = []
        for a, b in pairs:
            lv = max(last[a], last[b])
            if lv == len(layers):
                layers.append([])
            layers[lv].append((a, b))
            last[a] = last[b] = lv + 1
        _NET_CACHE[n] = [np.asarray(p, I32) for p in layers]
    return _NET_CACHE[n]


def apply_network(bld: Builder, ev: EV, key_cols, block: Block | None = None,
                  offsets=None, n=None):
    """Run a full sorting network over ev (optionally one per chunk offset)."""
    size = n if n is not None else len(ev)
    for layer in sorting_network(size):
        i, j = layer[:, 0], layer[:, 1]
        if offsets is not None:
            i = (offsets[:, None] + i[None, :]).reshape(-1)
            j = (offsets[:, None] + j[None, :]).reshape(-1)
        compare_exchange(bld, ev, i, j, key_cols, block)
