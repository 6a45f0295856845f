"""Bipartite expander families and spectral estimation.

Two families drive the compaction constructions:

* a constant-degree family used by the basic loose compactor and the
  swappers (degree a small multiple of 8);
* the square-lattice 5-regular family (left vertex (x, y) connects to
  (x, y), (x, x+y), (x, x+y+1), (x+y, y), (x+y+1, y) mod t), raised to odd
  powers gamma for polylogarithmic degree or for a target spectral gap.

Spectral expansion (the second singular value of the normalized
biadjacency) is measured numerically by power iteration with deflation
against the top eigenvector.
"""
from __future__ import annotations

import numpy as np
from scipy import sparse

from .config import DEFAULT, Config


class BipartiteExpander:
    """d-regular bipartite multigraph with measured spectral expansion.

    `nbrs` holds, per left vertex, the d right endpoints of its edges
    (repeats encode multiplicity); `rnbrs` is the same from the right side.
    """

    def __init__(self, m, nbrs, gamma=1, cfg: Config = DEFAULT):
        self.m = int(m)
        self.nbrs = np.asarray(nbrs)
        self.d = self.nbrs.shape[1]
        self.gamma = gamma
        self.cfg = cfg
        self._lam = None
        # right-side incidence: for each right vertex its d incident edge slots
        order = np.argsort(self.nbrs.reshape(-1), kind="stable")
        self.redges = order.astype(np.int64)          # edge ids sorted by right vertex
        self.rnbrs = (order // self.d).reshape(self.m, self.d)
        counts = np.bincount(self.nbrs.reshape(-1), minlength=self.m)
        if not (counts == self.d).all():
            raise ValueError("graph is not right-regular")

    @property
    def lambda2(self):
        if self._lam is None:
            self._lam = measure_lambda2(self, self.cfg)
        return self._lam

    def biadjacency(self):
        m, d = self.m, self.d
        rows = np.repeat(np.arange(m), d)
        return sparse.csr_matrix(
            (np.ones(m * d), (rows, self.nbrs.reshape(-1))), shape=(m, m))

    def edge_count(self, S, T):
        """Number of edges (with multiplicity) between left set S and right set T."""
        mask = np.zeros(self.m, bool)
        mask[np.asarray(list(T), dtype=np.int64)] = True
        S = np.asarray(list(S), dtype=np.int64)
        if len(S) == 0:
            return 0
        return int(mask[self.nbrs[S]].sum())

    def export_edges(self, path):
        """Edge list text: `u v multiplicity` per line."""
        with open(path, "w") as fh:
            for u in range(self.m):
                vs, cnt = np.unique(self.nbrs[u], return_counts=True)
                for v, c in zip(vs.tolist(), cnt.tolist()):
                    fh.write(f"{u} {v} {c}\n")


def _lattice_maps(t):
    """The five neighbor bijections on [t] x [t], as index permutations."""
    xs, ys = np.meshgrid(np.arange(t), np.arange(t), indexing="ij")
    x, y = xs.reshape(-1), ys.reshape(-1)

    def enc(a, b):
        return (a % t) * t + (b % t)

    fwd = np.stack([
        enc(x, y),
        enc(x, x + y),
        enc(x, x + y + 1),
        enc(x + y, y),
        enc(x + y + 1, y),
    ], axis=1)
    return fwd


def _lattice_maps_rev(t):
    xs, ys = np.meshgrid(np.arange(t), np.arange(t), indexing="ij")
    a, b = xs.reshape(-1), ys.reshape(-1)

    def enc(u, v):
        return (u % t) * t + (v % t)

    rev = np.stack([
        enc(a, b),
        enc(a, b - a),
        enc(a, b - a - 1),
        enc(a - b, b),
        enc(a - b - 1, b),
    ], axis=1)
    return rev


def margulis(t, cfg: Config = DEFAULT) -> BipartiteExpander:
    """The 5-regular square-lattice bipartite expander on m = t^2 vertices."""
    if t < 2:
        raise ValueError("t must be at least 2")
    return BipartiteExpander(t * t, _lattice_maps(t), cfg=cfg)


def graph_power(G: BipartiteExpander, gamma, cfg: Config = DEFAULT) -> BipartiteExpander:
    """Graph whose edges are the length-gamma paths; degree d^gamma.

    gamma must be odd so left still connects to right.
    """
    if gamma % 2 == 0:
        raise ValueError("gamma must be odd")
    t = int(round(np.sqrt(G.m)))
    fwd = _lattice_maps(t)
    rev = _lattice_maps_rev(t)
    cur = fwd
    for step in range(1, gamma):
        hop = rev if step % 2 else fwd
        cur = hop[cur].reshape(G.m, -1)
    return BipartiteExpander(G.m, cur, gamma=gamma, cfg=cfg)


def pick_gamma(m, target_eps, cfg: Config = DEFAULT):
    """Smallest odd gamma with lambda2(H_m)^gamma <= target_eps (measured)."""
    t = int(round(np.sqrt(m)))
    lam = margulis(t, cfg).lambda2
    g = 1
    while lam ** g > target_eps:
        g += 2
    return g


def measure_lambda2(G: BipartiteExpander, cfg: Config = DEFAULT):
    """Second singular value of the normalized biadjacency via power iteration.

    Iterates B^T B / d^2 on the right side, deflating the all-ones top
    vector; equivalently the square of the bipartite double cover's second
    eigenvalue.
    """
    B = G.biadjacency() / G.d
    m = G.m
    rng = np.random.default_rng(cfg.seed + 12345)
    x = rng.standard_normal(m)
    ones = np.full(m, 1.0 / np.sqrt(m))
    x -= (x @ ones) * ones
    x /= np.linalg.norm(x)
    lam_sq = 0.0
    for _ in range(cfg.power_iters):
        y = B.T @ (B @ x)
        y -= (y @ ones) * ones
        nrm = np.linalg.norm(y)
        if nrm == 0:
            return 0.0
        y /= nrm
        new = float(y @ (B.T @ (B @ y)))
        if abs(new - lam_sq) < cfg.power_tol:
            lam_sq = new
            break
        lam_sq = new
        x = y
    return float(np.sqrt(max(lam_sq, 0.0)))


def mixing_check(G: BipartiteExpander, S, T, tol=1e-9):
    """Expander mixing bound |e(S,T) - d|S||T|/m| <= lambda2 * d * sqrt(|S||T|)."""
    e = G.edge_count(S, T)
    s, t = len(S), len(T)
    lhs = abs(e - G.d * s * t / G.m)
    rhs = G.lambda2 * G.d * np.sqrt(s * t)
    return lhs <= rhs + tol


# ---------------------------------------------------------------------------
# constant-degree family for the basic loose compactor


def circulant_family(m, d, cfg: Config = DEFAULT) -> BipartiteExpander:
    """Fixed-offset circulant bipartite multigraph on any m; degree d.

    Offsets are drawn deterministically from the config seed; expansion is
    measured, not proven, and the protocol bounds that rely on it are
    checked empirically by the test suite.
    """
    if d % 8:
        raise ValueError("degree must be a multiple of 8")
    rng = np.random.default_rng(cfg.seed + 777)
    if m <= d:
        offs = rng.integers(0, m, size=d)
    else:
        offs = rng.choice(m, size=d, replace=False)
    offs[0] = 0
    left = np.arange(m).reshape(-1, 1)
    return BipartiteExpander(m, (left + offs.reshape(1, -1)) % m, cfg=cfg)


def polylog_family(n_super, cfg: Config = DEFAULT):
    """(m, degree, graph) for the sparse compactor on n_super super-elements.

    Picks the largest lattice-power family whose m * floor(d/2) chunks fit
    n_super, then rounds m up to the next perfect square; degree is
    approximately log(m)^degree_exp.
    """
    def deg_for(m):
        target = max(5.0, np.log2(max(m, 4)) ** cfg.degree_exp)
        g = 1
        while 5 ** g < target:
            g += 2
        return g, 5 ** g

    t = 2
    best = None
    while True:
        m = t * t
        g, d = deg_for(m)
        if m * (d // 2) <= n_super:
            best = (t, g, d)
            t += 1
        else:
            break
    if best is None:
        t, g, d = 2, deg_for(4)[0], deg_for(4)[1]
    else:
        t, g, d = best
        # round up so the padded array is covered
        while (t * t) * (d // 2) < n_super:
            t += 1
    m = t * t
    G = graph_power(margulis(t, cfg), g, cfg) if g > 1 else margulis(t, cfg)
    return G


# ---------------------------------------------------------------------------
# matchings between array positions, for the swappers


def position_matchings(n, rounds, cfg: Config = DEFAULT):
    """`rounds` perfect matchings on [n] (arrays of partner indices).

    Each matching pairs positions along cycles of a permutation composed
    from the lattice maps (seeded fallback off the square part).  Matchings
    are involutions; odd leftovers map to themselves.
    """
    rng = np.random.default_rng(cfg.seed + 999)
    t = max(2, int(np.sqrt(n)))
    maps = _lattice_maps(t)
    out = []
    for r in range(rounds):
        perm = np.arange(n, dtype=np.int64)
        sq = t * t
        if sq > n:
            t2 = int(np.sqrt(n))
            sq = t2 * t2
            maps_r = _lattice_maps(max(t2, 2))
        else:
            maps_r = maps
        base = maps_r[:, r % 5].copy()
        for _ in range(r // 5):
            base = base[maps_r[:, (r + 1) % 5]]
        lim = min(sq, n)
        perm[:lim] = base[:lim]
        # out-of-range targets and the tail get a seeded shuffle
        bad = perm >= n
        tail = np.nonzero(bad)[0]
        if len(tail):
            tgt = tail.copy()
            rng.shuffle(tgt)
            perm[tail] = tgt
        partner = _pair_cycles(perm)
        out.append(partner)
    return out


def _pair_cycles(perm):
    n = len(perm)
    partner = np.arange(n, dtype=np.int64)
    seen = np.zeros(n, bool)
    for s in range(n):
        if seen[s]:
            continue
        cyc = []
        u = s
        while not seen[u]:
            seen[u] = True
            cyc.append(u)
            u = int(perm[u])
        for i in range(0, len(cyc) - 1, 2):
            partner[cyc[i]] = cyc[i + 1]
            partner[cyc[i + 1]] = cyc[i]
    return partner


# ---------------------------------------------------------------------------
# huge-power operator form (for protocol statistics at scale)


class PowerOperator:
    """Normalized adjacency of H_m^gamma as alternating sparse mat-vecs.

    Works for gammas far beyond anything an explicit edge list could store;
    values are fractions of the (astronomical) degree, in float64.
    """

    def __init__(self, t, gamma):
        self.t = t
        self.m = t * t
        self.gamma = gamma
        fwd = _lattice_maps(t)
        rev = _lattice_maps_rev(t)
        rows = np.repeat(np.arange(self.m), 5)
        self.F = sparse.csr_matrix((np.full(self.m * 5, 0.2), (rows, fwd.reshape(-1))),
                                   shape=(self.m, self.m))
        self.R = sparse.csr_matrix((np.full(self.m * 5, 0.2), (rows, rev.reshape(-1))),
                                   shape=(self.m, self.m))

    def left_to_right(self, x):
        """x: loads on left vertices -> normalized loads arriving on the right."""
        cur = np.asarray(x, float)
        for step in range(self.gamma):
            hop = self.F if step % 2 == 0 else self.R
            cur = hop.T @ cur
        return cur

    def right_to_left(self, y):
        cur = np.asarray(y, float)
        for step in range(self.gamma):
            hop = self.R if (self.gamma - 1 - step) % 2 else self.F
            cur = hop @ cur
        return cur
