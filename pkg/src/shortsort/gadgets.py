"""Low-depth arithmetic gadgets: delayed-carry numbers, counting, prefix
sums, and generalized binary-to-unary conversion.

A delayed-carry number (DC) stores a value as the sum of two binary rows, so
two DCs can be added in constant depth with two rounds of per-position
3-bit carry-save sums.  A final parallel-prefix (Kogge-Stone) addition
resolves a DC to plain binary in O(log w) depth.

All gadgets are bulk: the leading `rows` dimension runs that many
independent instances in parallel (one per chunk, segment, ...).
All bit columns are LSB-first.
"""
from __future__ import annotations

import numpy as np

from .circuit import (Builder, I32, make_table, T_AND, T_OR, T_XOR, T_NOT,
                      T_FULLADD)
from .elements import compare_gt_eq, compare_ordering

T_HALFADD = make_table(lambda a, b: (a ^ b, a & b), 2, 2)
T_GP = make_table(lambda a, b: (a & b, a ^ b), 2, 2)       # (generate, propagate)
T_ANDOR = make_table(lambda g, p, g2: g | (p & g2), 3, 1)  # carry combine
# label push-down: (parent_decided, x) tables
T_DEC_L = make_table(lambda pd, ge: pd | ge, 2, 1)
T_DEC_R = make_table(lambda pd, ge: pd | (1 - ge), 2, 1)
T_VAL_L = make_table(lambda pd, pv: pv if pd else 1, 2, 1)
T_VAL_R = make_table(lambda pd, pv: pv if pd else 0, 2, 1)


class DC:
    """Delayed-carry numbers: value = int(x) + int(y), bulk over rows.

    x, y are (rows, w) wire arrays; a column equal to -1 is a structural
    zero (no wires, no gates).
    """

    __slots__ = ("x", "y")

    def __init__(self, x, y=None):
        self.x = np.asarray(x, I32)
        if self.x.ndim == 1:
            self.x = self.x.reshape(-1, 1)
        if y is None:
            y = np.full_like(self.x, -1)
        self.y = np.asarray(y, I32)
        if self.y.ndim == 1:
            self.y = self.y.reshape(-1, 1)

    @property
    def rows(self):
        return self.x.shape[0]

    @property
    def width(self):
        return self.x.shape[1]

    def padded(self, w):
        if self.width >= w:
            return self
        pad = np.full((self.rows, w - self.width), -1, I32)
        return DC(np.hstack([self.x, pad]), np.hstack([self.y, pad]))

    def trunc(self, w):
        return DC(self.x[:, :w], self.y[:, :w])

    def take(self, idx):
        return DC(self.x[idx], self.y[idx])


def _live(col):
    return col[0] >= 0


def _zeros(rows, w):
    return np.full((rows, w), -1, I32)


def _norm(bld: Builder, mat):
    """Columns mixing structural zeros with live wires get const-0 fills,
    so liveness is uniform per column."""
    dead = mat < 0
    col_dead = dead.any(axis=0)
    col_live = (~dead).any(axis=0)
    mixed = col_dead & col_live
    if not mixed.any():
        return mat
    out = mat.copy()
    for j in np.nonzero(mixed)[0]:
        d = dead[:, j]
        out[d, j] = bld.const_bools(np.zeros(int(d.sum()), np.uint8))
    return out


def _csa(bld: Builder, a, b, c):
    """Per-column a+b+c -> (sum, carry<<1); inputs (rows, w), carry (rows, w+1).

    Columns that are structural zeros get cheaper gates.
    """
    a, b, c = _norm(bld, a), _norm(bld, b), _norm(bld, c)
    rows, w = a.shape
    s = _zeros(rows, w)
    carry = _zeros(rows, w + 1)
    # group columns by liveness pattern, emit one record per pattern
    pats = {}
    for j in range(w):
        live = tuple(_live(col[:, j]) for col in (a, b, c))
        pats.setdefault(live, []).append(j)
    for live, cols in pats.items():
        cnt = sum(live)
        srcs = [x for x, lv in zip((a, b, c), live) if lv]
        if cnt == 0:
            continue
        if cnt == 1:
            for j in cols:
                s[:, j] = srcs[0][:, j]
            continue
        jj = np.asarray(cols, I32)
        ins = np.stack([src[:, jj].reshape(-1) for src in srcs], axis=1)
        outs = bld.bools(T_FULLADD if cnt == 3 else T_HALFADD, ins, nout=2)
        s[:, jj] = outs[:, 0].reshape(rows, len(cols))
        carry[:, jj + 1] = outs[:, 1].reshape(rows, len(cols))
    return s, carry


def shallow_add(bld: Builder, a: DC, b: DC, width=None) -> DC:
    """Constant-depth DC addition; result width defaults to max+1."""
    w = max(a.width, b.width) + 1 if width is None else width
    a = a.padded(w).trunc(w)
    b = b.padded(w).trunc(w)
    s1, c1 = _csa(bld, a.x, a.y, b.x)
    s2, c2 = _csa(bld, s1, c1[:, :w], b.y)
    return DC(s2, c2[:, :w])


def dc_not(bld: Builder, col, rows):
    """Bitwise NOT of a column matrix; structural zeros become const ones."""
    col = _norm(bld, col)
    out = col.copy()
    livecols = [j for j in range(col.shape[1]) if _live(col[:, j])]
    if livecols:
        jj = np.asarray(livecols, I32)
        outs = bld.bools(T_NOT, col[:, jj].reshape(-1, 1))
        out[:, jj] = outs.reshape(rows, len(livecols))
    for j in range(col.shape[1]):
        if not _live(col[:, j]):
            out[:, j] = bld.const_bools(np.ones(rows, np.uint8))
    return out


def subtract(bld: Builder, a: DC, b: DC) -> DC:
    """a - b (mod 2^w), valid when a >= b; callers mask garbage otherwise."""
    w = max(a.width, b.width)
    a = a.padded(w)
    b = b.padded(w)
    nbx = dc_not(bld, b.x, b.rows)
    nby = dc_not(bld, b.y, b.rows)
    s1, c1 = _csa(bld, a.x, a.y, nbx)
    s2, c2 = _csa(bld, s1, c1[:, :w], nby)
    # add the +2 correction (constant bit at position 1)
    two = _zeros(a.rows, w)
    if w > 1:
        two[:, 1] = bld.const_bools(np.ones(a.rows, np.uint8))
    s3, c3 = _csa(bld, s2, c2[:, :w], two)
    return DC(s3, c3[:, :w])


def resolve(bld: Builder, a: DC):
    """DC -> binary bits (rows, w) with a Kogge-Stone parallel-prefix adder."""
    a = DC(_norm(bld, a.x), _norm(bld, a.y))
    rows, w = a.x.shape
    g = _zeros(rows, w)
    p = _zeros(rows, w)
    for j in range(w):
        xl, yl = _live(a.x[:, j]), _live(a.y[:, j])
        if xl and yl:
            outs = bld.bools(T_GP, np.stack([a.x[:, j], a.y[:, j]], axis=1), nout=2)
            g[:, j] = outs[:, 0]
            p[:, j] = outs[:, 1]
        elif xl:
            p[:, j] = a.x[:, j]
        elif yl:
            p[:, j] = a.y[:, j]
    p0 = p.copy()
    d = 1
    while d < w:
        ng, np_ = g.copy(), p.copy()
        for j in range(d, w):
            gl, pl = g[:, j - d], p[:, j - d]
            here_p = p[:, j]
            if not _live(here_p):
                # propagate is 0: carry stops; g unchanged
                continue
            if _live(gl):
                if _live(g[:, j]):
                    ng[:, j] = bld.bools(T_ANDOR, np.stack([g[:, j], here_p, gl], axis=1))
                else:
                    ng[:, j] = bld.bools(T_AND, np.stack([here_p, gl], axis=1))
            if _live(pl):
                np_[:, j] = bld.bools(T_AND, np.stack([here_p, pl], axis=1))
            else:
                np_[:, j] = np.full(rows, -1, I32)
        g, p = ng, np_
        d *= 2
    out = _zeros(rows, w)
    out[:, 0] = p0[:, 0] if _live(p0[:, 0]) else bld.const_bools(np.zeros(rows, np.uint8))
    for j in range(1, w):
        cin = g[:, j - 1]
        pj = p0[:, j]
        if _live(pj) and _live(cin):
            out[:, j] = bld.bools(T_XOR, np.stack([pj, cin], axis=1))
        elif _live(pj):
            out[:, j] = pj
        elif _live(cin):
            out[:, j] = cin
        else:
            out[:, j] = bld.const_bools(np.zeros(rows, np.uint8))
    return out


def const_bits(bld: Builder, value, width, rows):
    """(rows, width) constant bit columns for an integer value."""
    out = np.empty((rows, width), I32)
    for j in range(width):
        bit = (int(value) >> j) & 1
        out[:, j] = bld.const_bools(np.full(rows, bit, np.uint8))
    return out


def dc_const(bld: Builder, value, width, rows) -> DC:
    x = _zeros(rows, width)
    for j in range(width):
        if (int(value) >> j) & 1:
            x[:, j] = bld.const_bools(np.ones(rows, np.uint8))
    return DC(x)


def count_ones(bld: Builder, bits, width=None):
    """Population count per row: (rows, n) -> binary (rows, ceil(log2(n+1))).

    A tree of shallow adders in delayed-carry form, one final resolution.
    """
    dc = count_ones_dc(bld, bits, width)
    return resolve(bld, dc)


def count_ones_dc(bld: Builder, bits, width=None) -> DC:
    bits = np.asarray(bits, I32)
    if bits.ndim == 1:
        bits = bits.reshape(1, -1)
    rows, n = bits.shape
    wfin = width or max(1, int(np.ceil(np.log2(n + 1))))
    items = DC(bits.reshape(rows * n, 1))  # (rows*n) one-bit numbers, row-major
    cnt = n
    while cnt > 1:
        half = cnt // 2
        cur = items
        a = _pick(cur, rows, cnt, np.arange(0, 2 * half, 2))
        b = _pick(cur, rows, cnt, np.arange(1, 2 * half, 2))
        s = shallow_add(bld, a, b, width=min(cur.width + 1, wfin))
        if cnt % 2:
            tail = _pick(cur, rows, cnt, np.asarray([cnt - 1]))
            items = _stack(s, rows, half, tail.padded(s.width))
            cnt = half + 1
        else:
            items = s
            cnt = half
    return DC(items.x.reshape(rows, -1), items.y.reshape(rows, -1)).trunc(wfin)


def _pick(dc: DC, rows, cnt, idx):
    x = dc.x.reshape(rows, cnt, -1)[:, idx].reshape(rows * len(idx), -1)
    y = dc.y.reshape(rows, cnt, -1)[:, idx].reshape(rows * len(idx), -1)
    return DC(x, y)


def _stack(a: DC, rows, cnt_a, b: DC) -> DC:
    w = a.width
    ax = a.x.reshape(rows, cnt_a, w)
    bx = b.x.reshape(rows, -1, w)
    x = np.concatenate([ax, bx], axis=1).reshape(-1, w)
    ay = a.y.reshape(rows, cnt_a, w)
    by = b.y.reshape(rows, -1, w)
    y = np.concatenate([ay, by], axis=1).reshape(-1, w)
    return DC(x, y)


def all_prefix_sums(bld: Builder, vals: DC, rows, n, width) -> DC:
    """Inclusive prefix sums of n per-row values; (rows*n) DCs in, same out.

    Recursive pairing in delayed-carry form; O(n * width) gates, O(log n)
    depth before resolution.  n must be a power of two (callers pad).
    """
    if n == 1:
        return vals.padded(width)
    a = _pick(vals, rows, n, np.arange(0, n, 2)).padded(width)
    b = _pick(vals, rows, n, np.arange(1, n, 2)).padded(width)
    pair = shallow_add(bld, a, b, width=width)
    sub = all_prefix_sums(bld, pair, rows, n // 2, width)
    # odd outputs come straight from the sub-scan; even output 2i is
    # sub[i-1] + vals[2i] (with sub[-1] = 0)
    out_x = np.empty((rows, n, width), I32)
    out_y = np.empty((rows, n, width), I32)
    sx = sub.x.reshape(rows, n // 2, width)
    sy = sub.y.reshape(rows, n // 2, width)
    out_x[:, 1::2] = sx
    out_y[:, 1::2] = sy
    ev_idx = np.arange(2, n, 2)
    if len(ev_idx):
        prev = DC(sx[:, :-1].reshape(-1, width), sy[:, :-1].reshape(-1, width))
        cur = _pick(vals, rows, n, ev_idx).padded(width)
        filled = shallow_add(bld, prev, cur, width=width)
        out_x[:, ev_idx] = filled.x.reshape(rows, -1, width)
        out_y[:, ev_idx] = filled.y.reshape(rows, -1, width)
    first = _pick(vals, rows, n, np.asarray([0])).padded(width)
    out_x[:, 0] = first.x.reshape(rows, width)
    out_y[:, 0] = first.y.reshape(rows, width)
    return DC(out_x.reshape(-1, width), out_y.reshape(-1, width))


def binary_ge(bld: Builder, a_bits, b_bits):
    """a >= b on resolved binary columns; returns flag wires (rows,)."""
    gt, eq = compare_gt_eq(bld, a_bits, b_bits)
    return bld.bools(T_OR, np.stack([np.atleast_1d(gt), np.atleast_1d(eq)], axis=1))


def _or_cols(bld: Builder, acc, cols):
    """OR a flag column with every column of a matrix (structural zeros skipped)."""
    out = acc
    for j in range(cols.shape[1]):
        if _live(cols[:, j]):
            out = bld.bools(T_OR, np.stack([out, cols[:, j]], axis=1))
    return out


def _carry_into(bld: Builder, x, y, pos):
    """Carry into bit `pos` of the sum of two binary column matrices."""
    rows = x.shape[0]
    g = _zeros(rows, pos)
    p = _zeros(rows, pos)
    for j in range(pos):
        xl, yl = _live(x[:, j]), _live(y[:, j])
        if xl and yl:
            outs = bld.bools(T_GP, np.stack([x[:, j], y[:, j]], axis=1), nout=2)
            g[:, j] = outs[:, 0]
            p[:, j] = outs[:, 1]
        elif xl:
            p[:, j] = x[:, j]
        elif yl:
            p[:, j] = y[:, j]
    # tree-reduce (g, p) pairs, high combines low
    while g.shape[1] > 1:
        m = g.shape[1]
        half = m // 2
        lo_g, hi_g = g[:, 0:2 * half:2], g[:, 1:2 * half:2]
        lo_p, hi_p = p[:, 0:2 * half:2], p[:, 1:2 * half:2]
        ng = _zeros(rows, half)
        np_ = _zeros(rows, half)
        for jj in range(half):
            hg, hp, lg, lp = hi_g[:, jj], hi_p[:, jj], lo_g[:, jj], lo_p[:, jj]
            if _live(hg) and _live(hp) and _live(lg):
                ng[:, jj] = bld.bools(T_ANDOR, np.stack([hg, hp, lg], axis=1))
            elif _live(hg):
                ng[:, jj] = hg
            elif _live(hp) and _live(lg):
                ng[:, jj] = bld.bools(T_AND, np.stack([hp, lg], axis=1))
            if _live(hp) and _live(lp):
                np_[:, jj] = bld.bools(T_AND, np.stack([hp, lp], axis=1))
        if m % 2:
            # combine the leftover top column into the last slot
            hg, hp = g[:, -1], p[:, -1]
            lg, lp = ng[:, -1], np_[:, -1]
            out_g = _zeros(rows, 1)
            out_p = _zeros(rows, 1)
            if _live(hg) and _live(hp) and _live(lg):
                out_g[:, 0] = bld.bools(T_ANDOR, np.stack([hg, hp, lg], axis=1))
            elif _live(hg):
                out_g[:, 0] = hg
            elif _live(hp) and _live(lg):
                out_g[:, 0] = bld.bools(T_AND, np.stack([hp, lg], axis=1))
            if _live(hp) and _live(lp):
                out_p[:, 0] = bld.bools(T_AND, np.stack([hp, lp], axis=1))
            ng[:, -1:] = out_g
            np_[:, -1:] = out_p
        g, p = ng, np_
    if _live(g[:, 0]):
        return g[:, 0]
    return bld.const_bools(np.zeros(rows, np.uint8))


def dc_ge(bld: Builder, a: DC, b: DC):
    """a >= b for delayed-carry numbers via one subtraction's sign bit."""
    w = max(a.width, b.width) + 2
    d = subtract(bld, a.padded(w), b.padded(w))
    x, y = _norm(bld, d.x), _norm(bld, d.y)
    cin = _carry_into(bld, x, y, w - 1)
    top_in = [c for c in (x[:, w - 1], y[:, w - 1]) if _live(c)]
    rows = x.shape[0]
    if not top_in:
        top = cin
    elif len(top_in) == 1:
        top = bld.bools(T_XOR, np.stack([top_in[0], cin], axis=1))
    else:
        s = bld.bools(T_XOR, np.stack(top_in, axis=1))
        top = bld.bools(T_XOR, np.stack([s, cin], axis=1))
    return bld.bools(T_NOT, np.atleast_1d(top).reshape(-1, 1))


def binary_to_unary(bld: Builder, marks, ell: DC):
    """First-ell-marked-receivers-get-1 conversion.

    marks: (rows, n) indicator bits; ell: per-row counts in delayed-carry
    form.  Output (rows, n): among positions with mark=1, exactly the first
    min(ell, #marked) get 1 and the rest get 0; unmarked positions output
    their mark bit (0).  O(n) gates, O(log n) depth via a tree that passes
    remaining budgets down with constant-depth subtractions and pipelined
    comparisons.
    """
    marks = np.asarray(marks, I32)
    if marks.ndim == 1:
        marks = marks.reshape(1, -1)
    rows, n0 = marks.shape
    n = 1
    while n < n0:
        n *= 2
    if n != n0:
        pad = np.stack([bld.const_bools(np.zeros(rows, np.uint8))
                        for _ in range(n - n0)], axis=1)
        marks2 = np.hstack([marks.copy(), pad])
        marks = marks2
    # marks enter both the counting tree and the leaf logic
    m2 = bld.spread(marks.reshape(-1), 2)
    marks_cnt = m2[:, 0].reshape(rows, n)
    marks_leaf = m2[:, 1].reshape(rows, n)
    # bottom-up subtree counts per level: level j has n/2^j nodes
    levels = [DC(marks_cnt.reshape(rows * n, 1))]
    cnt = n
    while cnt > 1:
        cur = levels[-1]
        a = _pick(cur, rows, cnt, np.arange(0, cnt, 2))
        b = _pick(cur, rows, cnt, np.arange(1, cnt, 2))
        levels.append(shallow_add(bld, a, b))
        cnt //= 2
    # Top-down: budgets R per node; the root receives ell.  A valid budget
    # at a level-j node fits in j+2 bits (oversized budgets only reach
    # subtrees that are already decided, where they are never read), so
    # budgets are truncated as they descend and all arithmetic stays local.
    depth = len(levels) - 1
    wmax = max(levels[-1].width + 1, ell.width)
    R = ell.padded(wmax)  # (rows, wmax) single node
    decided = bld.const_bools(np.zeros(rows, np.uint8))
    value = bld.const_bools(np.zeros(rows, np.uint8))
    # `hi` marks budgets whose true value overflowed the node's width; such
    # a budget exceeds the subtree size, so everything marked below gets 1.
    hi = bld.const_bools(np.zeros(rows, np.uint8))
    for lev in range(depth, 0, -1):
        nodes = n >> lev          # nodes at this level feed 2*nodes children
        child_cnt = levels[lev - 1]
        lc = _pick(child_cnt, rows, nodes * 2, np.arange(0, nodes * 2, 2))
        # Budgets may be non-canonical pairs (valid modulo their width), so
        # the comparison resolves both sides to binary first; the resolution
        # runs off the critical descent path (pipelined comparisons).
        w = max(R.width, lc.width)
        r_bits = resolve(bld, R.padded(w))
        l_bits = resolve(bld, lc.padded(w))
        ge0 = np.asarray(binary_ge(bld, r_bits, l_bits), I32).reshape(rows * nodes)
        hi3 = bld.spread(hi, 3)
        ge = bld.bools(T_OR, np.stack([hi3[:, 0], ge0], axis=1))
        # budgets: left gets R, right gets R - S(lc); children keep lev+1 bits
        wc = lev + 1
        Rr = subtract(bld, R, lc)
        rr_bits = resolve(bld, Rr)
        hi_l = _or_cols(bld, hi3[:, 1], r_bits[:, wc:])
        hi_r = _or_cols(bld, hi3[:, 2], rr_bits[:, wc:])
        # labels
        pd = decided.reshape(-1)
        pv = value.reshape(-1)
        pd3 = bld.spread(pd, 4)
        pv2 = bld.spread(pv, 2)
        ge2 = bld.spread(ge, 2)
        d_l = bld.bools(T_DEC_L, np.stack([pd3[:, 0], ge2[:, 0]], axis=1))
        d_r = bld.bools(T_DEC_R, np.stack([pd3[:, 1], ge2[:, 1]], axis=1))
        v_l = bld.bools(T_VAL_L, np.stack([pd3[:, 2], pv2[:, 0]], axis=1))
        v_r = bld.bools(T_VAL_R, np.stack([pd3[:, 3], pv2[:, 1]], axis=1))
        # interleave children
        decided = np.stack([d_l, d_r], axis=1).reshape(rows * nodes * 2)
        value = np.stack([v_l, v_r], axis=1).reshape(rows * nodes * 2)
        hi = np.stack([hi_l, hi_r], axis=1).reshape(rows * nodes * 2)
        Rt = R.padded(wc)
        Rrt = Rr.padded(wc)
        Rx = np.stack([Rt.x[:, :wc], Rrt.x[:, :wc]], axis=1).reshape(rows * nodes * 2, wc)
        Ry = np.stack([Rt.y[:, :wc], Rrt.y[:, :wc]], axis=1).reshape(rows * nodes * 2, wc)
        R = DC(_norm(bld, Rx), _norm(bld, Ry))
    # leaves: decided -> value; else budget >= 1 (or known-overflowing)
    leaf_bits = resolve(bld, R)
    any_budget = hi
    for j in range(leaf_bits.shape[1]):
        any_budget = bld.bools(T_OR, np.stack([any_budget, leaf_bits[:, j]], axis=1))
    raw = bld.bools(make_table(lambda pd, pv, bud: pv if pd else bud, 3, 1),
                    np.stack([decided, value, any_budget], axis=1))
    # unmarked receivers output 0 (their mark bit)
    out = bld.bools(T_AND, np.stack([marks_leaf.reshape(-1), raw], axis=1))
    return out.reshape(rows, n)[:, :n0]
