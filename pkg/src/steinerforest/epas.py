"""Approximation scheme parameterised by treewidth.

Pipeline: shrink the aspect ratio, build a nice decomposition of
logarithmic height with terminals in leaves, refine each bag's active
terminals into a partition zeta_B that any near-optimal solution respects,
enumerate a family of candidate partitions per bag from zeta_B, and run the
conforming DP.

The module also carries a simulator for the two merge rules that define the
near-optimal reference solutions; tests use it as an oracle for the
refinement and conformity properties.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from fractions import Fraction

from .conforming import Partition, PartitionFamily, solve_conforming
from .decomposition import (
    TreeDecomposition,
    all_bag_contexts,
    heuristic_td,
    push_terminals_to_leaves,
    rebalance,
    validate_td,
)
from .instance import (
    Forest,
    InstanceError,
    UnionFind,
    as_fraction,
    check_demands_connected,
    dijkstra,
    lift_solution,
    reduce_aspect_ratio,
)

DEFAULT_MAX_SEQ = 10**7
# |zeta_B| <= C_ZETA * (k^4 h^2 / eps^2) * log2(max(2, D/d)) + (k+1)
C_ZETA = 64


class EnumerationCapError(RuntimeError):
    def __init__(self, node, count):
        self.node = node
        self.count = count
        super().__init__(f"partition enumeration at node {node} exceeded the cap ({count} transitions)")


@dataclass(frozen=True)
class EpasParams:
    eps_target: Fraction
    eps_internal: Fraction
    k: int
    h: int
    n_orig: int
    wmin: int


def internal_eps(eps_target, bits=20):
    """Largest multiple of 2**-bits with (1+e)^2 + e <= 1 + eps_target."""
    eps_target = as_fraction(eps_target)
    scale = 1 << bits
    lo, hi = 0, scale * max(1, math.ceil(eps_target))
    while lo < hi:
        mid = (lo + hi + 1) // 2
        e = Fraction(mid, scale)
        if (1 + e) ** 2 + e <= 1 + eps_target:
            lo = mid
        else:
            hi = mid - 1
    if lo == 0:
        raise ValueError("eps too small for the internal resolution")
    return Fraction(lo, scale)


def pow2_floor(x, unit=1):
    """Largest unit*2^q (q >= 0) not exceeding x; x >= unit."""
    if x < unit:
        raise ValueError("argument below the unit")
    q = int(x // unit).bit_length() - 1
    return unit << q


def delta_domain(n_orig, eps, wmin=1):
    eps = as_fraction(eps)
    out = []
    q = 0
    while (1 << q) * eps <= 2 * n_orig * n_orig:
        out.append(wmin << q)
        q += 1
    return out


# ----------------------------------------------------------------------------
# distances

class Metric:
    """Shortest-path distances, one Dijkstra per source, cached."""

    def __init__(self, inst):
        self.inst = inst
        self.adj = inst.adjacency()
        self.rows = {}

    def row(self, s):
        if s not in self.rows:
            self.rows[s] = dijkstra(self.inst, [s], self.adj)[0]
        return self.rows[s]

    def __call__(self, a, b):
        return self.row(a)[b]

    def to_set(self, v, targets):
        r = self.row(v)
        return min(r[x] for x in targets if r[x] is not None)


def greedy_delta_net(points, dist, delta):
    """Scan points ascending; keep one iff it is farther than delta from
    every point kept so far."""
    net = []
    for p in sorted(points):
        if all(dist(p, q) > delta for q in net):
            net.append(p)
    return net


# ----------------------------------------------------------------------------
# zeta partitions

@dataclass(frozen=True)
class ZetaBlock:
    members: tuple
    anchor_bag_vertex: int | None
    annulus: int | None
    net_point: int | None   # None for bag singletons and whole-annulus blocks
    whole: bool = False


@dataclass(frozen=True)
class ZetaPartition:
    node: int
    blocks: tuple
    d: int | None = None
    D: int | None = None

    @property
    def partition(self):
        return Partition([b.members for b in self.blocks])


def net_threshold(k, h, eps):
    return Fraction(8 * k * k * (k + 1) * h * h) / (eps * eps)


def zeta_partition(inst, td, node, params, metric=None, ctx=None):
    if metric is None:
        metric = Metric(inst)
    if ctx is None:
        ctx = all_bag_contexts(inst, td)[node]
    bag = sorted(td.bags[node])
    act = ctx.active
    blocks = [ZetaBlock((t,), t, None, None) for t in sorted(act & set(bag))]
    rest = sorted(act - set(bag))
    if not rest:
        return ZetaPartition(node, tuple(blocks))
    if not bag:
        raise ValueError(f"node {node} has active terminals but an empty bag")
    eps, k, h = params.eps_internal, params.k, params.h
    near = {}
    for t in rest:
        r = metric.row(t)
        near[t] = min((r[b], b) for b in bag if r[b] is not None)
    d = min(near[t][0] for t in rest)
    D = max(near[t][0] for t in rest)
    assert d > 0
    annuli = {}
    for t in rest:
        dist, b = near[t]
        j = (dist // d).bit_length() - 1
        annuli.setdefault((b, j), []).append(t)
    thr = net_threshold(k, h, eps)
    for (b, j), pts in sorted(annuli.items()):
        radius = eps / (k * h) * (d << j)
        net = greedy_delta_net(pts, metric, radius)
        if len(net) >= thr:
            blocks.append(ZetaBlock(tuple(pts), b, j, None, True))
            continue
        owned = {p: [] for p in net}
        for t in pts:
            owner = min(net, key=lambda p: (metric(t, p), p))
            owned[owner].append(t)
        for p in net:
            blocks.append(ZetaBlock(tuple(owned[p]), b, j, p))
    return ZetaPartition(node, tuple(blocks), d, D)


def zeta_size_bound(k, h, eps, d, D):
    ratio = max(Fraction(2), Fraction(D, d)) if d else Fraction(2)
    return C_ZETA * Fraction(k**4 * h * h) / (eps * eps) * math.log2(ratio) + (k + 1)


# ----------------------------------------------------------------------------
# candidate partitions

def _subsets(z, smax):
    """Non-empty subsets of range(z) with at most smax elements, as bitmasks."""
    out = []
    for mask in range(1, 1 << z):
        if bin(mask).count("1") <= smax:
            out.append(mask)
    return out


def enumerate_partitions(inst, zeta, params, metric, cap=None, node=None):
    """All partitions of the active terminals obtainable from a sequence of
    at most k+1 (block subset, scale) pairs and a grouping of the pairs.

    Runs forward over the pair index; a state records, per group, the
    terminals placed through U_j and those placed by the distance rule.
    """
    if cap is None:
        cap = int(os.environ.get("SF_MAX_SEQ", DEFAULT_MAX_SEQ))
    blocks = [b.members for b in zeta.blocks]
    terms = sorted(t for b in blocks for t in b)
    if not terms:
        return []
    index = {t: i for i, t in enumerate(terms)}
    full = (1 << len(terms)) - 1
    eps, k = params.eps_internal, params.k
    smax = int(4 * k / eps)
    deltas = delta_domain(params.n_orig, eps, params.wmin)
    bmask = []
    for b in blocks:
        m = 0
        for t in b:
            m |= 1 << index[t]
        bmask.append(m)

    pre = sum(math.comb(len(blocks), s) for s in range(1, min(smax, len(blocks)) + 1)) * len(deltas)
    if pre > cap:
        raise EnumerationCapError(node, pre)
    moves = set()
    for sub in _subsets(len(blocks), smax):
        U = 0
        for i in range(len(blocks)):
            if sub >> i & 1:
                U |= bmask[i]
        uts = [terms[i] for i in range(len(terms)) if U >> i & 1]
        far = {}
        for t in terms:
            r = metric.row(t)
            far[t] = min(r[u] for u in uts)
        for delta in deltas:
            ball = 0
            lim = eps * delta / k
            for t in terms:
                if far[t] <= lim:
                    ball |= 1 << index[t]
            moves.add((U, ball))
    moves = sorted(moves)

    count = 0
    frontier = {((), ())}
    results = set()
    for _ in range(params.k + 1):
        nxt = set()
        for uc, bc in frontier:
            taken_u = 0
            for m in uc:
                taken_u |= m
            taken_b = 0
            for m in bc:
                taken_b |= m
            ncls = len(uc)
            for U, ball in moves:
                for c in range(ncls + 1):
                    count += 1
                    if count > cap:
                        raise EnumerationCapError(node, count)
                    own = uc[c] if c < ncls else 0
                    if U & (taken_u & ~own):
                        continue
                    newb = ball & ~taken_b
                    if c < ncls:
                        nuc = uc[:c] + (uc[c] | U,) + uc[c + 1:]
                        nbc = bc[:c] + (bc[c] | newb,) + bc[c + 1:]
                    else:
                        nuc = uc + (U,)
                        nbc = bc + (newb,)
                    nxt.add((nuc, nbc))
        for uc, bc in nxt:
            allu = 0
            for m in uc:
                allu |= m
            allb = 0
            for m in bc:
                allb |= m
            if (allu | allb) != full:
                continue
            parts = []
            for m, b in zip(uc, bc):
                y = m | (b & ~allu)
                parts.append([terms[i] for i in range(len(terms)) if y >> i & 1])
            results.add(Partition(parts))
        frontier = nxt
    return sorted(results)


def enumerate_partition_family(inst, td, zetas, params, cap=None, metric=None):
    if metric is None:
        metric = Metric(inst)
    out = {}
    for node in sorted(zetas):
        z = zetas[node]
        if z.blocks:
            out[node] = enumerate_partitions(inst, z, params, metric, cap, node)
    return PartitionFamily(out)


# ----------------------------------------------------------------------------
# pipeline

def _vertex_map(rec):
    """Old vertex -> new vertex for one aspect-ratio reduction step."""
    src = rec.payload["source"]
    n = src.vertex_count
    if rec.kind == "contraction":
        a, b, _ = src.edges[rec.payload["edge"]]
        keep = [v for v in range(n) if v != b]
        new = {v: i for i, v in enumerate(keep)}
        return {v: new[a if v == b else v] for v in range(n)}
    return {v: v for v in range(n)}


def map_decomposition(td, trace):
    for rec in trace:
        vm = _vertex_map(rec)
        td = TreeDecomposition({x: {vm[v] for v in b} for x, b in td.bags.items()}, td.parent)
    return td


def prepare_epas(inst, eps_target, td=None):
    """Reduce the instance and build the decomposition the scheme runs on.

    Returns (reduced instance, trace, decomposition, params).
    """
    eps_target = as_fraction(eps_target)
    eps = internal_eps(eps_target)
    check_demands_connected(inst)
    red, trace = reduce_aspect_ratio(inst, eps)
    if td is not None:
        ok, bad = validate_td(inst, td)
        if not ok:
            raise InstanceError("invalid decomposition: " + "; ".join(bad[:3]))
        base = map_decomposition(td, trace)
    else:
        base = heuristic_td(red)
    final = push_terminals_to_leaves(red, rebalance(base))
    wmin = min((w for _, _, w in red.edges), default=1)
    params = EpasParams(eps_target, eps, max(final.width, 1), final.height, inst.vertex_count, wmin)
    return red, trace, final, params


def solve_epas(inst, td=None, eps_target=Fraction(1), cap=None, zeta_out=None, family_out=None):
    """Feasible forest of cost at most (1 + eps_target) * OPT."""
    if not inst.demands:
        return Forest()
    red, trace, tdf, params = prepare_epas(inst, eps_target, td)
    if not red.demands:
        return lift_solution(Forest(), trace)
    metric = Metric(red)
    ctx = all_bag_contexts(red, tdf)
    zetas = {x: zeta_partition(red, tdf, x, params, metric, ctx[x]) for x in tdf.nodes if ctx[x].active}
    fam = enumerate_partition_family(red, tdf, zetas, params, cap, metric)
    if zeta_out is not None:
        zeta_out.update(zetas)
    if family_out is not None:
        family_out.append(fam)
    f = solve_conforming(red, tdf, fam)
    if f is None:
        raise RuntimeError("no conforming solution; the partition family is missing a case")
    return lift_solution(f, trace)


# ----------------------------------------------------------------------------
# merge-rule simulator (test oracle)

def forest_components(inst, edges):
    """Components spanned by an edge set: list of (vertex set, edge set),
    ordered by smallest vertex."""
    uf = UnionFind(inst.vertex_count)
    for e in edges:
        uf.union(inst.edges[e][0], inst.edges[e][1])
    comps = {}
    for e in edges:
        r = uf.find(inst.edges[e][0])
        vs, es = comps.setdefault(r, (set(), set()))
        vs.update(inst.edges[e][:2])
        es.add(e)
    return sorted(((frozenset(v), frozenset(e)) for v, e in comps.values()), key=lambda c: min(c[0]))


def _spanning(inst, edges):
    uf = UnionFind(inst.vertex_count)
    keep = set()
    for e in sorted(edges, key=lambda e: (inst.edges[e][2], e)):
        if uf.union(inst.edges[e][0], inst.edges[e][1]):
            keep.add(e)
    return keep


def _connect(inst, adj, edges, src, dst):
    """Add a shortest path from vertex set src to vertex set dst."""
    dist, pred = dijkstra(inst, src, adj)
    target = min((dist[v], v) for v in dst if dist[v] is not None)[1]
    v = target
    while v not in src:
        e = pred[v]
        edges.add(e)
        a, b, _ = inst.edges[e]
        v = a if b == v else b


def _set_dist(metric, a, b):
    return min(metric.to_set(v, b) for v in a)


def simulate_merge_rules(inst, td, f_star, eps, k=None, h=None):
    """Apply the first merge rule to ``f_star`` (giving f_eps) and the second
    to f_eps (giving f_tilde). Both results are reduced to spanning forests
    of their components."""
    eps = as_fraction(eps)
    k = max(td.width, 1) if k is None else k
    h = td.height if h is None else h
    metric = Metric(inst)
    adj = metric.adj
    depth = td.depths()
    ctx = all_bag_contexts(inst, td)
    order = sorted(td.bags, key=lambda x: (depth[x], x))

    star = forest_components(inst, f_star.edges)
    cand = []
    for x in order:
        bag, vb = td.bags[x], ctx[x].subtree_vertices
        share = [i for i, (vs, _) in enumerate(star) if vs & bag]
        for i in share:
            down = sum(inst.edges[e][2] for e in star[i][1]
                       if inst.edges[e][0] in vb and inst.edges[e][1] in vb
                       and not (inst.edges[e][0] in bag and inst.edges[e][1] in bag))
            for j in share:
                if j != i and _set_dist(metric, star[i][0], star[j][0]) * k * h <= eps * down:
                    cand.append((i, j))
    f_eps = set(f_star.edges)
    for i, j in cand:
        uf = UnionFind(inst.vertex_count)
        for e in f_eps:
            uf.union(inst.edges[e][0], inst.edges[e][1])
        if uf.find(min(star[i][0])) != uf.find(min(star[j][0])):
            _connect(inst, adj, f_eps, star[i][0], star[j][0])
    f_eps = _spanning(inst, f_eps)

    wmin = min((w for _, _, w in inst.edges), default=1)
    comps = forest_components(inst, f_eps)
    where = {}
    for x, b in td.bags.items():
        for v in b:
            where.setdefault(v, set()).add(x)
    nodes_of = [set().union(*(where[v] for v in vs)) for vs, _ in comps]
    top = [min(depth[x] for x in ns) for ns in nodes_of]
    cand = []
    for i, (vs, es) in enumerate(comps):
        c = sum(inst.edges[e][2] for e in es)
        lim = eps * pow2_floor(c, wmin) / k
        for j in range(len(comps)):
            if j == i or not (nodes_of[i] & nodes_of[j]) or top[i] < top[j]:
                continue
            if _set_dist(metric, vs, comps[j][0]) <= lim:
                cand.append((-top[i], min(vs), min(comps[j][0]), i, j))
    f_tilde = set(f_eps)
    for *_, i, j in sorted(cand):
        uf = UnionFind(inst.vertex_count)
        for e in f_tilde:
            uf.union(inst.edges[e][0], inst.edges[e][1])
        if uf.find(min(comps[i][0])) != uf.find(min(comps[j][0])):
            _connect(inst, adj, f_tilde, comps[i][0], comps[j][0])
    f_tilde = _spanning(inst, f_tilde)
    return Forest(f_eps), Forest(f_tilde)


def active_partition(inst, td, f, node, ctx=None):
    """Partition of A_B induced by the components of forest f."""
    if ctx is None:
        ctx = all_bag_contexts(inst, td)[node]
    uf = UnionFind(inst.vertex_count)
    for e in f.edges:
        uf.union(inst.edges[e][0], inst.edges[e][1])
    groups = {}
    for t in sorted(ctx.active):
        groups.setdefault(uf.find(t), []).append(t)
    return Partition(groups.values())


def write_zeta(zetas):
    """Text dump: one NODE line per bag, one BLOCK line per block (1-based ids).

    BLOCK <anchor> <annulus> <kind> : <members>, kind is bag, net:<point> or whole.
    """
    out = ["ZETA 1"]
    for x in sorted(zetas):
        z = zetas[x]
        out.append(f"NODE {x} d={z.d if z.d is not None else '-'} D={z.D if z.D is not None else '-'}")
        for b in z.blocks:
            if b.annulus is None:
                kind, ann = "bag", "-"
            else:
                kind = "whole" if b.whole else f"net:{b.net_point + 1}"
                ann = b.annulus
            out.append(f"BLOCK {b.anchor_bag_vertex + 1} {ann} {kind} : " + " ".join(str(t + 1) for t in b.members))
    return "\n".join(out) + "\n"
