"""Exact solver parameterised by the feedback edge set number.

After removing degree-1 vertices the graph is a subdivision of a small
multigraph: special vertices (degree >= 3 or touching a feedback edge)
joined by topological edges (paths through degree-2 vertices). We guess
which topological edges the solution uses completely. Every other
topological edge contributes a prefix, a suffix and some middle runs, and
the guess together with the demands pins down almost everything; what is
left splits into independent two-pole problems solved by a minimum cut.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

from .baselines import two_approx_primal_dual
from .instance import (
    Forest,
    InstanceError,
    UnionFind,
    apply_rule3,
    check_demands_connected,
    evaluate_solution,
    lift_solution,
)


@dataclass(frozen=True)
class TopoEdge:
    """Path ``vertices[0] .. vertices[-1]``; ``edges[i]`` joins vertices i and i+1."""

    vertices: tuple
    edges: tuple
    weights: tuple

    @property
    def ends(self):
        return self.vertices[0], self.vertices[-1]

    @property
    def weight(self):
        return sum(self.weights)

    @property
    def length(self):
        return len(self.edges)


@dataclass(frozen=True)
class TopologySkeleton:
    special: frozenset
    topo_edges: tuple
    feedback: frozenset

    @property
    def k(self):
        return len(self.feedback)

    def high_degree(self, inst):
        deg = inst.degrees()
        return frozenset(v for v in range(inst.vertex_count) if deg[v] >= 3)


def feedback_edge_set(inst):
    """Edges outside a minimum spanning forest (Kruskal, ties by edge id)."""
    uf = UnionFind(inst.vertex_count)
    out = set()
    for i in sorted(range(len(inst.edges)), key=lambda i: (inst.edges[i][2], i)):
        u, v, _ = inst.edges[i]
        if not uf.union(u, v):
            out.add(i)
    return frozenset(out)


def build_skeleton(inst):
    deg = inst.degrees()
    if any(d == 1 for d in deg):
        raise ValueError("skeleton needs minimum degree 2; run apply_rule3 first")
    H = feedback_edge_set(inst)
    special = {v for v in range(inst.vertex_count) if deg[v] >= 3}
    for i in H:
        special |= set(inst.edges[i][:2])
    adj = inst.adjacency()
    used = set()
    topo = []
    for s in sorted(special):
        for nb, eid in adj[s]:
            if eid in used:
                continue
            verts, eids, ws = [s], [], []
            cur, e = nb, eid
            while True:
                used.add(e)
                verts.append(cur)
                eids.append(e)
                ws.append(inst.edges[e][2])
                if cur in special:
                    break
                nxt = [(x, f) for x, f in adj[cur] if f != e]
                cur, e = nxt[0]
            topo.append(TopoEdge(tuple(verts), tuple(eids), tuple(ws)))
    return TopologySkeleton(frozenset(special), tuple(topo), H)


def write_skeleton(inst, sk):
    lines = [f"SKELETON k={sk.k}", "SPECIAL " + " ".join(inst.label(v) for v in sorted(sk.special))]
    lines.append("FEEDBACK " + " ".join(f"{inst.label(inst.edges[i][0])}-{inst.label(inst.edges[i][1])}" for i in sorted(sk.feedback)))
    for t in sk.topo_edges:
        lines.append(f"TOPO w={t.weight} : " + " ".join(inst.label(v) for v in t.vertices))
    return "\n".join(lines) + "\n"


# ----------------------------------------------------------------------------
# minimum cut

def _max_flow(n, arcs_from, s, t):
    """Dinic on an arc list; ``arcs_from`` is a list of [to, cap, rev] lists
    per node. Returns the flow value and mutates residual capacities."""
    flow = 0
    while True:
        level = [-1] * n
        level[s] = 0
        q = deque([s])
        while q:
            x = q.popleft()
            for to, cap, _ in arcs_from[x]:
                if cap > 0 and level[to] < 0:
                    level[to] = level[x] + 1
                    q.append(to)
        if level[t] < 0:
            return flow
        it = [0] * n

        def push(x, f):
            if x == t:
                return f
            while it[x] < len(arcs_from[x]):
                arc = arcs_from[x][it[x]]
                to, cap, rev = arc
                if cap > 0 and level[to] == level[x] + 1:
                    got = push(to, min(f, cap))
                    if got:
                        arc[1] -= got
                        arcs_from[to][rev][1] += got
                        return got
                it[x] += 1
            return 0

        while True:
            f = push(s, float("inf"))
            if not f:
                break
            flow += f


def min_cut(edges, s, t, n=None):
    """Minimum s-t cut of an undirected multigraph.

    ``edges`` is a sequence of (u, v, capacity) over nodes 0..n-1. Returns
    (value, cut edge indices); the cut is read off as the edges leaving the
    set of nodes reachable from s in the residual network.
    """
    if s == t:
        raise ValueError("source equals sink")
    if n is None:
        n = 1 + max([s, t] + [max(u, v) for u, v, _ in edges])
    arcs = [[] for _ in range(n)]
    for u, v, c in edges:
        if c < 0:
            raise ValueError("negative capacity")
        arcs[u].append([v, c, len(arcs[v])])
        arcs[v].append([u, c, len(arcs[u]) - 1])
    value = _max_flow(n, arcs, s, t)
    seen = {s}
    q = deque([s])
    while q:
        x = q.popleft()
        for to, cap, _ in arcs[x]:
            if cap > 0 and to not in seen:
                seen.add(to)
                q.append(to)
    cut = frozenset(i for i, (u, v, _) in enumerate(edges) if (u in seen) != (v in seen))
    return value, cut


def _cut_paths(paths, demands):
    """Core of the two-pole problem.

    ``paths`` is a list of gap-weight lists: path j runs pole 0, unit, ...,
    unit, pole 1 with ``len(gaps)-1`` units; units are named (j, i) for the
    i-th unit of path j. ``demands`` pairs units on different paths. Returns
    the chosen cut gap index per path.
    """
    node = {}
    for j, gaps in enumerate(paths):
        for i in range(len(gaps) - 1):
            node[(j, i)] = 2 + len(node)
    n = 2 + len(node)
    N = sum(sum(g) for g in paths)
    big = n * n * N
    edges, where = [], []
    for j, gaps in enumerate(paths):
        chain = [0] + [node[(j, i)] for i in range(len(gaps) - 1)] + [1]
        for i, g in enumerate(gaps):
            edges.append((chain[i], chain[i + 1], N - g))
            where.append((j, i))
    for a, b in sorted(set(demands)):
        edges.append((node[a], node[b], big))
        where.append(None)
    _, cut = min_cut(edges, 0, 1, n)
    choice = {}
    for e in sorted(cut):
        if where[e] is None:
            raise RuntimeError("minimum cut separated a demand")
        j, i = where[e]
        if j in choice:
            raise RuntimeError("minimum cut crossed a path twice")
        choice[j] = i
    return [choice[j] for j in range(len(paths))]


def _walk_paths(g2, c1, c2):
    adj = g2.adjacency()
    paths = []
    for nb, eid in adj[c1]:
        verts, eids = [c1], []
        cur, e = nb, eid
        while True:
            verts.append(cur)
            eids.append(e)
            if cur in (c1, c2):
                break
            nxt = [(x, f) for x, f in adj[cur] if f != e]
            if len(nxt) != 1:
                raise InstanceError("two-pole graph is not a union of pole-to-pole paths")
            cur, e = nxt[0]
        if verts[-1] != c2:
            raise InstanceError("path returns to its starting pole")
        paths.append((verts, eids))
    covered = {e for _, es in paths for e in es}
    if len(covered) != len(g2.edges):
        raise InstanceError("two-pole graph has edges off the pole-to-pole paths")
    return paths


def solve_two_pole(g2, c1, c2):
    """Cheapest forest of ``g2`` that satisfies every demand and keeps the
    poles apart. ``g2`` is a union of internally disjoint c1-c2 paths and
    every demand joins internal vertices of two different paths."""
    if c1 == c2:
        raise ValueError("poles coincide")
    paths = _walk_paths(g2, c1, c2)
    on_path = {}
    for j, (verts, _) in enumerate(paths):
        for v in verts[1:-1]:
            on_path[v] = j
    for s, t in g2.demands:
        if s not in on_path or t not in on_path or on_path[s] == on_path[t]:
            raise InstanceError("demands must join internal vertices of distinct paths")
    terms = g2.terminals
    specs, unit_of, edge_gaps = [], {}, []
    for j, (verts, eids) in enumerate(paths):
        units = [p for p in range(1, len(verts) - 1) if verts[p] in terms]
        if not units:
            continue
        bounds = [0] + units + [len(verts) - 1]
        gaps = [eids[bounds[i]:bounds[i + 1]] for i in range(len(bounds) - 1)]
        for i, p in enumerate(units):
            unit_of[verts[p]] = (len(specs), i)
        specs.append([sum(g2.edges[e][2] for e in g) for g in gaps])
        edge_gaps.append(gaps)
    if not specs:
        return Forest()
    choice = _cut_paths(specs, [(unit_of[s], unit_of[t]) for s, t in g2.demands])
    out = set()
    for gaps, c in zip(edge_gaps, choice):
        for i, g in enumerate(gaps):
            if i != c:
                out |= set(g)
    return Forest(out)


# ----------------------------------------------------------------------------
# guess evaluation

class _Reject(Exception):
    pass


def _interval_edges(lo, hi):
    """Edge positions (1-based) between vertex positions lo < hi."""
    return range(lo + 1, hi + 1)


def _merge_intervals(segs):
    out = []
    for lo, hi in sorted(segs):
        if out and lo <= out[-1][1]:
            out[-1][1] = max(out[-1][1], hi)
        else:
            out.append([lo, hi])
    return out


class _Evaluator:
    def __init__(self, inst, sk):
        self.inst = inst
        self.sk = sk
        self.where = {}
        for t, te in enumerate(sk.topo_edges):
            for p in range(1, te.length):
                self.where[te.vertices[p]] = (t, p)

    def run(self, full):
        try:
            return self._run(full)
        except _Reject:
            return None

    def _run(self, full):
        inst, sk, where = self.inst, self.sk, self.where
        topo = sk.topo_edges
        uf = UnionFind(inst.vertex_count)
        for t in full:
            a, b = topo[t].ends
            uf.union(a, b)

        def cls(v):
            w = where.get(v)
            if w is None:
                return uf.find(v)
            if w[0] in full:
                return uf.find(topo[w[0]].vertices[0])
            return None

        end_cls = [(uf.find(te.vertices[0]), uf.find(te.vertices[-1])) for te in topo]
        a_type = {t for t in range(len(topo)) if t not in full and end_cls[t][0] == end_cls[t][1]}
        attach = {t: set() for t in a_type}
        a_pairs = {t: [] for t in a_type}
        fa = {t: 0 for t in range(len(topo)) if t not in full and t not in a_type}
        fb = {t: topo[t].length for t in fa}
        segs = {t: [] for t in fa}
        deferred = []

        def force(v, c):
            t, p = where[v]
            ca, cb = end_cls[t]
            if c == ca:
                fa[t] = max(fa[t], p)
            elif c == cb:
                fb[t] = min(fb[t], p)
            else:
                raise _Reject

        work = list(inst.demands)
        while work:
            x, y = work.pop()
            cx, cy = cls(x), cls(y)
            if cx is not None and cy is not None:
                if cx != cy:
                    raise _Reject
                continue
            done = False
            for u, o in ((x, y), (y, x)):
                wu = where.get(u)
                if cls(u) is None and wu[0] in a_type:
                    t, p = wu
                    wo = where.get(o)
                    if wo is not None and wo[0] == t:
                        a_pairs[t].append(tuple(sorted((p, wo[1]))))
                    else:
                        attach[t].add(p)
                        work.append((o, topo[t].vertices[0]))
                    done = True
                    break
            if done:
                continue
            if cx is not None:
                force(y, cx)
                continue
            if cy is not None:
                force(x, cy)
                continue
            (t1, p1), (t2, p2) = where[x], where[y]
            if t1 == t2:
                segs[t1].append((min(p1, p2), max(p1, p2)))
                continue
            common = set(end_cls[t1]) & set(end_cls[t2])
            if not common:
                raise _Reject
            if len(common) == 1:
                c = common.pop()
                force(x, c)
                force(y, c)
            else:
                deferred.append((x, y))

        # propagate forced sides through middle runs and deferred demands
        merged = {}
        changed = True
        while changed:
            changed = False
            for t in fa:
                ivs = _merge_intervals(segs[t])
                for lo, hi in ivs:
                    if lo <= fa[t] < hi:
                        fa[t] = hi
                        changed = True
                    if lo < fb[t] <= hi:
                        fb[t] = lo
                        changed = True
                if fa[t] >= fb[t]:
                    raise _Reject
                merged[t] = ivs
            for x, y in deferred:
                sx, sy = self._side(x, fa, fb, end_cls), self._side(y, fa, fb, end_cls)
                if sx is not None and sy is not None:
                    if sx != sy:
                        raise _Reject
                elif sx is not None:
                    force(y, sx)
                    changed = True
                elif sy is not None:
                    force(x, sy)
                    changed = True

        chosen = set()
        for t in full:
            chosen.update(topo[t].edges)
        for t in a_type:
            if attach[t] or a_pairs[t]:
                pos = _best_a_type_pos(topo[t], attach[t], a_pairs[t])
                chosen.update(topo[t].edges[i - 1] for i in pos)

        # B-type paths: forced parts, then one two-pole problem per class pair
        needy = {}
        for x, y in deferred:
            for v in (x, y):
                t, p = where[v]
                needy.setdefault(t, set()).add(p)
        pair_paths = {}
        for t in fa:
            te = topo[t]
            chosen.update(te.edges[i - 1] for i in _interval_edges(0, fa[t]))
            chosen.update(te.edges[i - 1] for i in _interval_edges(fb[t], te.length))
            units = []
            singles = {p for p in needy.get(t, ()) if fa[t] < p < fb[t]}
            for lo, hi in merged.get(t, []):
                if lo > fa[t] and hi < fb[t]:
                    chosen.update(te.edges[i - 1] for i in _interval_edges(lo, hi))
                    inside = {p for p in singles if lo <= p <= hi}
                    singles -= inside
                    units.append((lo, hi, bool(inside)))
            units += [(p, p, True) for p in singles]
            units.sort()
            attach_units = [(lo, hi) for lo, hi, need in units if need]
            if not attach_units:
                continue
            skip = set()
            for lo, hi, need in units:
                if not need:
                    skip.update(_interval_edges(lo, hi))
            bounds = [(fa[t], fa[t])] + attach_units + [(fb[t], fb[t])]
            gaps = []
            for i in range(len(bounds) - 1):
                g = [te.edges[q - 1] for q in _interval_edges(bounds[i][1], bounds[i + 1][0]) if q not in skip]
                gaps.append(g)
            ca, cb = end_cls[t]
            key = (min(ca, cb), max(ca, cb))
            if ca != key[0]:
                gaps.reverse()
                attach_units.reverse()
            pair_paths.setdefault(key, []).append((t, attach_units, gaps))

        for key in sorted(pair_paths):
            plist = pair_paths[key]
            unit_id = {}
            specs = []
            for j, (t, aus, gaps) in enumerate(plist):
                for i, (lo, hi) in enumerate(aus):
                    for p in range(lo, hi + 1):
                        unit_id[(t, p)] = (j, i)
                specs.append([sum(inst.edges[e][2] for e in g) for g in gaps])
            dem = []
            for x, y in deferred:
                ux, uy = unit_id.get(where[x]), unit_id.get(where[y])
                if ux is not None and uy is not None:
                    dem.append((ux, uy))
            choice = _cut_paths(specs, dem)
            for (t, aus, gaps), c in zip(plist, choice):
                for i, g in enumerate(gaps):
                    if i != c:
                        chosen.update(g)
        return chosen

    def _side(self, v, fa, fb, end_cls):
        t, p = self.where[v]
        if p <= fa[t]:
            return end_cls[t][0]
        if p >= fb[t]:
            return end_cls[t][1]
        return None


def _best_a_type_pos(te, attach, pairs):
    """Cheapest forced edge positions on a path whose ends share a class,
    over the choice of one missing edge (ties: lowest position)."""
    r = te.length
    best = None
    for i in range(1, r + 1):
        need = set()
        left = [p for p in attach if p <= i - 1]
        right = [p for p in attach if p >= i]
        if left:
            need.update(_interval_edges(0, max(left)))
        if right:
            need.update(_interval_edges(min(right), r))
        for p, q in pairs:
            if q <= i - 1 or p >= i:
                need.update(_interval_edges(p, q))
            else:
                need.update(_interval_edges(0, p))
                need.update(_interval_edges(q, r))
        cost = sum(te.weights[q - 1] for q in need)
        if best is None or cost < best[0]:
            best = (cost, need)
    return best[1]


# ----------------------------------------------------------------------------
# driver

def solve_fes(inst, skeleton_out=None):
    """Exact optimum. ``skeleton_out``, if a list, receives the reduced
    instance and its skeleton for inspection."""
    check_demands_connected(inst)
    red, _, trace = apply_rule3(inst)
    if not red.edges or not red.demands:
        return lift_solution(Forest(), trace)
    sk = build_skeleton(red)
    if skeleton_out is not None:
        skeleton_out.extend([red, sk])
    ev = _Evaluator(red, sk)
    seed = two_approx_primal_dual(red)
    best = [seed.cost(red), set(seed.edges)]
    topo = sk.topo_edges
    order = sorted(range(len(topo)), key=lambda t: (-topo[t].weight, t))

    def visit(i, full, cost, uf_pairs):
        if i == len(order):
            chosen = ev.run(full)
            if chosen is not None:
                c = sum(red.edges[e][2] for e in chosen)
                if c < best[0]:
                    best[0], best[1] = c, chosen
            return
        t = order[i]
        a, b = topo[t].ends
        w = topo[t].weight
        # fully used: must not close a cycle among special vertices
        uf = UnionFind(red.vertex_count)
        for x, y in uf_pairs:
            uf.union(x, y)
        if uf.find(a) != uf.find(b) and cost + w < best[0]:
            visit(i + 1, full | {t}, cost + w, uf_pairs + ((a, b),))
        visit(i + 1, full, cost, uf_pairs)

    visit(0, frozenset(), 0, ())
    f = Forest(best[1])
    _, ok, _ = evaluate_solution(red, f)
    if not ok:
        raise RuntimeError("assembled forest misses a demand")
    return lift_solution(f, trace)
