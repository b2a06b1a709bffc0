"""Problem model: instances, forests, demand groups, leaf reduction,
aspect-ratio reduction and the SFP exchange format."""

from __future__ import annotations

import heapq
import warnings
from dataclasses import dataclass, field
from fractions import Fraction

WEIGHT_CAP = 2**32


class InstanceError(ValueError):
    """Malformed instance text or model; carries an optional line number."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class InfeasibleError(Exception):
    """Some demand cannot be connected in the input graph."""


class UnionFind:
    def __init__(self, n):
        self.parent = list(range(n))

    def find(self, x):
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        if rb < ra:
            ra, rb = rb, ra
        self.parent[rb] = ra
        return True


def _pair(a, b):
    return (a, b) if a < b else (b, a)


@dataclass(frozen=True)
class Instance:
    """Weighted undirected simple graph on vertices 0..n-1 plus demand pairs.

    Each edge is stored as (u, v, w) with u < v and the edge list is kept
    sorted, so an edge id (its position) orders edges by endpoints. Demands
    are normalised, deduplicated and sorted.
    """

    vertex_count: int
    edges: tuple
    demands: tuple = ()
    labels: tuple | None = None

    def __post_init__(self):
        n = self.vertex_count
        if n < 0:
            raise InstanceError("negative vertex count")
        edges = []
        seen = set()
        for u, v, w in self.edges:
            if u == v:
                raise InstanceError(f"self-loop at vertex {u}")
            if not (0 <= u < n and 0 <= v < n):
                raise InstanceError(f"edge ({u},{v}) out of range")
            if w < 0:
                raise InstanceError("negative weight")
            key = _pair(u, v)
            if key in seen:
                raise InstanceError(f"duplicate edge {key}")
            seen.add(key)
            edges.append((key[0], key[1], int(w)))
        demands = set()
        for s, t in self.demands:
            if s == t:
                raise InstanceError(f"trivial demand at vertex {s}")
            if not (0 <= s < n and 0 <= t < n):
                raise InstanceError(f"dangling demand ({s},{t})")
            demands.add(_pair(s, t))
        object.__setattr__(self, "edges", tuple(sorted(edges)))
        object.__setattr__(self, "demands", tuple(sorted(demands)))
        if self.labels is not None:
            if len(self.labels) != n:
                raise InstanceError("label count differs from vertex count")
            object.__setattr__(self, "labels", tuple(str(x) for x in self.labels))

    @property
    def terminals(self):
        return frozenset(x for d in self.demands for x in d)

    @property
    def edge_count(self):
        return len(self.edges)

    def adjacency(self):
        """List of (neighbour, edge id) lists, neighbours ascending."""
        adj = [[] for _ in range(self.vertex_count)]
        for i, (u, v, _) in enumerate(self.edges):
            adj[u].append((v, i))
            adj[v].append((u, i))
        for row in adj:
            row.sort()
        return adj

    def degrees(self):
        deg = [0] * self.vertex_count
        for u, v, _ in self.edges:
            deg[u] += 1
            deg[v] += 1
        return deg

    def edge_index(self):
        return {(u, v): i for i, (u, v, _) in enumerate(self.edges)}

    def total_weight(self):
        return sum(w for _, _, w in self.edges)

    def label(self, v):
        return self.labels[v] if self.labels is not None else str(v + 1)


@dataclass(frozen=True)
class Forest:
    """A set of edge ids of some instance."""

    edges: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        object.__setattr__(self, "edges", frozenset(self.edges))

    def cost(self, inst):
        return sum(inst.edges[i][2] for i in self.edges)

    def sorted_edges(self):
        return tuple(sorted(self.edges))


def components(n, edge_pairs):
    uf = UnionFind(n)
    for u, v in edge_pairs:
        uf.union(u, v)
    return uf


def evaluate_solution(inst, f):
    """Return (cost, feasible, violations) for forest ``f``.

    Warns when ``f`` contains a cycle; cycles do not affect feasibility.
    """
    m = len(inst.edges)
    uf = UnionFind(inst.vertex_count)
    cyclic = False
    cost = 0
    for i in f.edges:
        if not 0 <= i < m:
            raise InstanceError(f"edge id {i} out of range")
        u, v, w = inst.edges[i]
        cost += w
        if not uf.union(u, v):
            cyclic = True
    if cyclic:
        warnings.warn("solution contains a cycle", stacklevel=2)
    violations = [d for d in inst.demands if uf.find(d[0]) != uf.find(d[1])]
    return cost, not violations, violations


def demand_groups(inst):
    """Partition of the terminals by connectivity in the demand graph."""
    uf = UnionFind(inst.vertex_count)
    for s, t in inst.demands:
        uf.union(s, t)
    groups = {}
    for t in sorted(inst.terminals):
        groups.setdefault(uf.find(t), []).append(t)
    return sorted(tuple(g) for g in groups.values())


def check_demands_connected(inst):
    uf = components(inst.vertex_count, ((u, v) for u, v, _ in inst.edges))
    for s, t in inst.demands:
        if uf.find(s) != uf.find(t):
            raise InfeasibleError(f"demand ({s},{t}) spans two components")


# ----------------------------------------------------------------------------
# reductions and their traces

@dataclass(frozen=True)
class ReductionTrace:
    """One reduction step.

    ``payload`` always holds ``source`` (the instance before the step) and
    ``edge_map`` (edge id after the step -> edge id in ``source``), plus a
    kind-specific entry: ``vertex``/``edge`` for rule3-deletion, ``edge`` for
    contraction and edge-removal.
    """

    kind: str
    payload: dict

    KINDS = ("rule3-deletion", "contraction", "edge-removal", "scaling")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown trace kind {self.kind}")


def _rebuild(inst, keep_vertices, vertex_of, edges, demands):
    """New instance over ``keep_vertices`` (old ids, ascending).

    ``vertex_of`` maps old vertex -> old representative; ``edges`` is a list
    of (old u, old v, w, old edge id). Parallel edges keep the lightest, ties
    to the lowest old id. Returns (instance, edge_map).
    """
    new_id = {v: i for i, v in enumerate(keep_vertices)}
    best = {}
    for u, v, w, eid in edges:
        a, b = new_id[vertex_of(u)], new_id[vertex_of(v)]
        if a == b:
            continue
        key = _pair(a, b)
        cur = best.get(key)
        if cur is None or (w, eid) < cur:
            best[key] = (w, eid)
    keys = sorted(best)
    new_edges = [(a, b, best[(a, b)][0]) for a, b in keys]
    edge_map = tuple(best[k][1] for k in keys)
    new_dem = set()
    for s, t in demands:
        a, b = new_id[vertex_of(s)], new_id[vertex_of(t)]
        if a != b:
            new_dem.add(_pair(a, b))
    labels = None
    if inst.labels is not None:
        labels = tuple(inst.labels[v] for v in keep_vertices)
    out = Instance(len(keep_vertices), tuple(new_edges), tuple(new_dem), labels)
    return out, edge_map


def _delete_vertex(inst, u, forced_to=None):
    """Drop vertex u; if ``forced_to`` is given, u's demands move there."""
    keep = [v for v in range(inst.vertex_count) if v != u]
    edges = [(a, b, w, i) for i, (a, b, w) in enumerate(inst.edges) if u not in (a, b)]
    dem = []
    for s, t in inst.demands:
        if u in (s, t):
            if forced_to is None:
                raise ValueError("deleting a terminal without a forced edge")
            other = t if s == u else s
            if other != forced_to:
                dem.append((forced_to, other))
        else:
            dem.append((s, t))
    return _rebuild(inst, keep, lambda v: v, edges, dem)


def apply_rule3(inst):
    """Exhaustively remove degree-1 vertices.

    A degree-1 Steiner vertex is deleted. A degree-1 terminal u with neighbour
    v forces the edge uv: its weight is added to ``spent`` and every demand
    {u, x} becomes {v, x}. Returns (reduced instance, spent, trace).
    """
    trace = []
    spent = 0
    cur = inst
    while True:
        deg = cur.degrees()
        leaf = next((v for v in range(cur.vertex_count) if deg[v] == 1), None)
        if leaf is None:
            break
        term = leaf in cur.terminals
        if term:
            eid, (a, b, w) = next((i, e) for i, e in enumerate(cur.edges) if leaf in e[:2])
            other = b if a == leaf else a
            spent += w
            nxt, emap = _delete_vertex(cur, leaf, other)
            payload = {"source": cur, "edge_map": emap, "vertex": leaf, "edge": eid}
        else:
            nxt, emap = _delete_vertex(cur, leaf)
            payload = {"source": cur, "edge_map": emap, "vertex": leaf, "edge": None}
        trace.append(ReductionTrace("rule3-deletion", payload))
        cur = nxt
    return cur, spent, trace


def _contract(inst, eid):
    a, b, _ = inst.edges[eid]
    keep = [v for v in range(inst.vertex_count) if v != b]
    edges = [(u, v, w, i) for i, (u, v, w) in enumerate(inst.edges)]
    return _rebuild(inst, keep, lambda v: a if v == b else v, edges, inst.demands)


def _remove_edge(inst, eid):
    edges = [(u, v, w, i) for i, (u, v, w) in enumerate(inst.edges) if i != eid]
    return _rebuild(inst, list(range(inst.vertex_count)), lambda v: v, edges, inst.demands)


def as_fraction(eps):
    if isinstance(eps, tuple):
        eps = Fraction(eps[0], eps[1])
    eps = Fraction(eps)
    if eps <= 0:
        raise ValueError("eps must be positive")
    return eps


def reduce_aspect_ratio(inst, eps, approx=None):
    """Bound the heaviest/lightest edge ratio by 2n/eps.

    Edges heavier than a 2-approximate solution are removed, edges lighter
    than eps/(2n) times its cost are contracted (n is the input vertex
    count). Returns (reduced instance, trace).
    """
    from .baselines import two_approx_primal_dual

    eps = as_fraction(eps)
    check_demands_connected(inst)
    n = inst.vertex_count
    f2 = approx if approx is not None else two_approx_primal_dual(inst)
    c2 = f2.cost(inst)
    trace = []
    cur = inst
    while True:
        heavy = [i for i, e in enumerate(cur.edges) if e[2] > c2]
        if not heavy:
            break
        nxt, emap = _remove_edge(cur, heavy[0])
        trace.append(ReductionTrace("edge-removal", {"source": cur, "edge_map": emap, "edge": heavy[0]}))
        cur = nxt
    # w < eps*c2/(2n)  <=>  w * 2n * den < num * c2
    num, den = eps.numerator, eps.denominator
    while True:
        light = [i for i, e in enumerate(cur.edges) if e[2] * 2 * n * den < num * c2]
        if not light:
            break
        eid = min(light, key=lambda i: (cur.edges[i][0], cur.edges[i][1]))
        nxt, emap = _contract(cur, eid)
        trace.append(ReductionTrace("contraction", {"source": cur, "edge_map": emap, "edge": eid}))
        cur = nxt
    return cur, trace


def lift_solution(f, trace):
    """Replay ``trace`` backwards, turning a reduced solution into one for the
    instance the trace started from."""
    edges = set(f.edges)
    for rec in reversed(trace):
        src = rec.payload["source"]
        emap = rec.payload["edge_map"]
        if any(not 0 <= i < len(emap) for i in edges):
            raise InstanceError("forest does not match the trace")
        edges = {emap[i] for i in edges}
        if rec.kind == "rule3-deletion":
            if rec.payload["edge"] is not None:
                edges.add(rec.payload["edge"])
        elif rec.kind == "contraction":
            _, ok, _ = evaluate_solution(src, Forest(edges))
            if not ok:
                edges.add(rec.payload["edge"])
    return Forest(edges)


# ----------------------------------------------------------------------------
# shortest paths (shared by several solvers)

def dijkstra(inst, sources, adj=None):
    """Distances and predecessor edges from a vertex set.

    Ties prefer the lower predecessor vertex id, so paths are deterministic.
    """
    if adj is None:
        adj = inst.adjacency()
    dist = [None] * inst.vertex_count
    pred = [None] * inst.vertex_count
    heap = [(0, -1, s) for s in sorted(set(sources))]
    heapq.heapify(heap)
    while heap:
        d, via, v = heapq.heappop(heap)
        if dist[v] is not None:
            continue
        dist[v] = d
        pred[v] = None if via < 0 else via
        for x, eid in adj[v]:
            if dist[x] is None:
                heapq.heappush(heap, (d + inst.edges[eid][2], v, x))
    # predecessor as an edge id
    eidx = inst.edge_index()
    pred_edge = [None] * inst.vertex_count
    for v, p in enumerate(pred):
        if p is not None:
            pred_edge[v] = eidx[_pair(v, p)]
    return dist, pred_edge


# ----------------------------------------------------------------------------
# SFP text format

def parse_instance(text):
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    n = None
    edges = []
    demands = []
    labels = {}
    seen = {}
    header = False
    ended = False
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tok = line.split()
        key = tok[0].upper()
        if ended:
            raise InstanceError("content after END", lineno)
        if not header:
            if key != "SFP" or tok[1:] != ["1"]:
                raise InstanceError("expected header 'SFP 1'", lineno)
            header = True
            continue
        try:
            if key == "NODES":
                if n is not None:
                    raise InstanceError("NODES given twice", lineno)
                n = int(tok[1])
                if n < 0 or len(tok) != 2:
                    raise ValueError
            elif key == "LABEL":
                v = int(tok[1])
                if n is None or not 1 <= v <= n or len(tok) != 3:
                    raise InstanceError("bad LABEL line", lineno)
                labels[v - 1] = tok[2]
            elif key == "EDGE":
                if n is None:
                    raise InstanceError("EDGE before NODES", lineno)
                if len(tok) != 4:
                    raise ValueError
                u, v, w = int(tok[1]), int(tok[2]), int(tok[3])
                if not (1 <= u <= n and 1 <= v <= n):
                    raise InstanceError("edge endpoint out of range", lineno)
                if u == v:
                    raise InstanceError("self-loop", lineno)
                if w <= 0:
                    raise InstanceError("non-positive weight", lineno)
                if w > WEIGHT_CAP:
                    raise InstanceError("weight exceeds 2^32", lineno)
                key2 = _pair(u, v)
                if key2 in seen:
                    raise InstanceError(f"duplicate edge {u} {v}", lineno)
                seen[key2] = lineno
                edges.append((u - 1, v - 1, w))
            elif key == "DEMAND":
                if n is None:
                    raise InstanceError("DEMAND before NODES", lineno)
                if len(tok) != 3:
                    raise ValueError
                s, t = int(tok[1]), int(tok[2])
                if not (1 <= s <= n and 1 <= t <= n):
                    raise InstanceError("dangling demand id", lineno)
                if s == t:
                    raise InstanceError("demand with equal endpoints", lineno)
                demands.append((s - 1, t - 1))
            elif key == "END":
                ended = True
            else:
                raise InstanceError(f"unknown keyword {tok[0]}", lineno)
        except (ValueError, IndexError) as exc:
            if isinstance(exc, InstanceError):
                raise
            raise InstanceError(f"syntax error: {raw.strip()!r}", lineno) from None
    if not header:
        raise InstanceError("empty input")
    if n is None:
        raise InstanceError("missing NODES line")
    if not ended:
        raise InstanceError("missing END")
    lab = None
    if labels:
        lab = tuple(labels.get(v, str(v + 1)) for v in range(n))
    return Instance(n, tuple(edges), tuple(demands), lab)


def write_instance(inst):
    out = ["SFP 1", f"NODES {inst.vertex_count}"]
    if inst.labels is not None:
        for v, name in enumerate(inst.labels):
            out.append(f"LABEL {v + 1} {name}")
    for u, v, w in sorted(inst.edges):
        out.append(f"EDGE {u + 1} {v + 1} {w}")
    for s, t in inst.demands:
        out.append(f"DEMAND {s + 1} {t + 1}")
    out.append("END")
    return ("\n".join(out) + "\n").encode("utf-8")
