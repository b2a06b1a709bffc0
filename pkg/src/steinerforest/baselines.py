"""Reference solvers: primal-dual 2-approximation and exhaustive oracles."""

from __future__ import annotations

from fractions import Fraction

import numpy as np

from .instance import Forest, InfeasibleError, UnionFind, check_demands_connected

BRUTE_MAX_EDGES = 24
CONFORMING_MAX_EDGES = 18
_CHUNK_BITS = 16


class GuardError(RuntimeError):
    """Input too large for an exhaustive oracle."""


def two_approx_primal_dual(inst):
    """Forest-growing primal-dual with reverse delete; cost at most 2*OPT."""
    check_demands_connected(inst)
    n = inst.vertex_count
    uf = UnionFind(n)
    load = [Fraction(0)] * len(inst.edges)
    added = []

    def active_roots():
        act = set()
        for s, t in inst.demands:
            rs, rt = uf.find(s), uf.find(t)
            if rs != rt:
                act.add(rs)
                act.add(rt)
        return act

    act = active_roots()
    while act:
        best = None
        for i, (u, v, w) in enumerate(inst.edges):
            ru, rv = uf.find(u), uf.find(v)
            if ru == rv:
                continue
            rate = (ru in act) + (rv in act)
            if rate == 0:
                continue
            dt = (w - load[i]) / rate
            if best is None or dt < best[0]:
                best = (dt, i)
        dt, pick = best
        for i, (u, v, w) in enumerate(inst.edges):
            ru, rv = uf.find(u), uf.find(v)
            if ru != rv:
                load[i] += dt * ((ru in act) + (rv in act))
        u, v, _ = inst.edges[pick]
        uf.union(u, v)
        added.append(pick)
        act = active_roots()

    keep = list(added)
    for e in reversed(added):
        trial = [x for x in keep if x != e]
        t_uf = UnionFind(n)
        for x in trial:
            t_uf.union(inst.edges[x][0], inst.edges[x][1])
        if all(t_uf.find(s) == t_uf.find(t) for s, t in inst.demands):
            keep = trial
    return Forest(keep)


def _subset_labels(inst, lo, hi):
    """Component labels for edge subsets lo..hi-1 (bit i = edge i)."""
    masks = np.arange(lo, hi, dtype=np.int64)
    labels = np.tile(np.arange(inst.vertex_count, dtype=np.int16), (len(masks), 1))
    for i, (u, v, _) in enumerate(inst.edges):
        rows = np.nonzero((masks >> i) & 1)[0]
        if len(rows) == 0:
            continue
        sub = labels[rows]
        lu = sub[:, u][:, None]
        lv = sub[:, v][:, None]
        keep, drop = np.minimum(lu, lv), np.maximum(lu, lv)
        labels[rows] = np.where(sub == drop, keep, sub)
    costs = np.zeros(len(masks), dtype=np.int64)
    for i, (_, _, w) in enumerate(inst.edges):
        costs += ((masks >> i) & 1) * w
    return masks, labels, costs


def _mask_edges(mask):
    return tuple(i for i in range(mask.bit_length()) if mask >> i & 1)


def _exhaustive(inst, accept, limit):
    m = len(inst.edges)
    if m > limit:
        raise GuardError(f"exhaustive search limited to {limit} edges, got {m}")
    best_cost = None
    best_sets = []
    total = 1 << m
    step = 1 << _CHUNK_BITS
    for lo in range(0, total, step):
        hi = min(total, lo + step)
        masks, labels, costs = _subset_labels(inst, lo, hi)
        ok = np.ones(len(masks), dtype=bool)
        for s, t in inst.demands:
            ok &= labels[:, s] == labels[:, t]
        if accept is not None:
            ok &= accept(labels)
        if not ok.any():
            continue
        c = costs[ok].min()
        if best_cost is None or c < best_cost:
            best_cost, best_sets = int(c), []
        if c == best_cost:
            best_sets.extend(int(x) for x in masks[ok & (costs == c)])
    if best_cost is None:
        return None
    edges = min(_mask_edges(x) for x in best_sets)
    return best_cost, Forest(edges)


def brute_force_opt(inst):
    """Exact optimum over all edge subsets (m <= 24)."""
    res = _exhaustive(inst, None, BRUTE_MAX_EDGES)
    if res is None:
        raise InfeasibleError("no feasible edge subset")
    return res


def brute_force_separated(inst, a, b):
    """Exact optimum among subsets that keep vertices a and b in different
    components; None when there is none."""
    return _exhaustive(inst, lambda labels: labels[:, a] != labels[:, b], BRUTE_MAX_EDGES)


def brute_force_conforming(inst, td, fam):
    """Exact optimum among subsets whose active-terminal partition matches
    some member of the family at every bag; None when there is none."""
    from .decomposition import all_bag_contexts

    ctx = all_bag_contexts(inst, td)
    checks = []
    for node, c in ctx.items():
        if not c.active:
            continue
        act = sorted(c.active)
        parts = fam.get(node)
        checks.append((act, [p.block_index(act) for p in parts]))

    def accept(labels):
        ok = np.ones(labels.shape[0], dtype=bool)
        for act, parts in checks:
            sub = labels[:, act]
            any_ok = np.zeros(labels.shape[0], dtype=bool)
            for blk in parts:
                match = np.ones(labels.shape[0], dtype=bool)
                for a in range(len(act)):
                    for b in range(a + 1, len(act)):
                        same = sub[:, a] == sub[:, b]
                        match &= same if blk[a] == blk[b] else ~same
                any_ok |= match
            ok &= any_ok
        return ok

    return _exhaustive(inst, accept, CONFORMING_MAX_EDGES)
