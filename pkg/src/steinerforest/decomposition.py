"""Rooted tree decompositions: validation, construction, nice form,
height rebalancing, terminal placement and active-terminal contexts."""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

NICE_KINDS = ("leaf", "join", "introduce", "forget")
KINDS = NICE_KINDS + ("plain",)

# rebalance guarantees width <= C_W*(k+1)-1 and height <= C_H*(k+1)*(1+log2 n)
C_W = 4
C_H = 8


def width_bound(k):
    return C_W * (k + 1) - 1


def height_bound(k, n):
    return C_H * (k + 1) * (1 + math.log2(max(n, 1)))


class TreeDecomposition:
    """Rooted tree of bags.

    ``bags`` maps node id -> vertex set, ``parent`` maps node id -> parent id
    (None at the root). Width and height are derived; height counts nodes on
    the longest root-to-leaf path.
    """

    def __init__(self, bags, parent, kinds=None, nice=False):
        self.bags = {x: frozenset(b) for x, b in bags.items()}
        self.parent = dict(parent)
        if set(self.bags) != set(self.parent):
            raise ValueError("bags and parent links disagree on node ids")
        roots = [x for x, p in self.parent.items() if p is None]
        if len(roots) != 1:
            raise ValueError(f"expected one root, found {len(roots)}")
        self.root = roots[0]
        kids = {x: [] for x in self.bags}
        for x, p in self.parent.items():
            if p is not None:
                if p not in kids:
                    raise ValueError(f"node {x} has unknown parent {p}")
                kids[p].append(x)
        self.children = {x: tuple(sorted(c, key=self._order_key)) for x, c in kids.items()}
        order = self.preorder()
        if len(order) != len(self.bags):
            raise ValueError("parent links do not form a tree")
        if kinds is None:
            kinds = {x: "plain" for x in self.bags}
        for k in kinds.values():
            if k not in KINDS:
                raise ValueError(f"unknown node kind {k}")
        self.kinds = dict(kinds)
        self.nice = nice

    def _order_key(self, x):
        b = self.bags[x]
        return (min(b) if b else -1, x)

    def preorder(self):
        out, stack, seen = [], [self.root], set()
        while stack:
            x = stack.pop()
            if x in seen:
                break
            seen.add(x)
            out.append(x)
            stack.extend(reversed(self.children[x]))
        return out

    @property
    def nodes(self):
        return sorted(self.bags)

    @property
    def width(self):
        return max((len(b) for b in self.bags.values()), default=0) - 1

    @property
    def height(self):
        depth = self.depths()
        return max(depth.values()) + 1

    def depths(self):
        depth = {self.root: 0}
        for x in self.preorder():
            for c in self.children[x]:
                depth[c] = depth[x] + 1
        return depth

    def vertices(self):
        out = set()
        for b in self.bags.values():
            out |= b
        return out

    def __repr__(self):
        return f"TreeDecomposition(nodes={len(self.bags)}, width={self.width}, height={self.height}, nice={self.nice})"


def _edge_label(inst, u, v):
    return f"edge {inst.label(u)}-{inst.label(v)} uncovered"


def validate_td(inst, td):
    """Check coverage, edge coverage, connectivity and (if flagged) the
    node-kind rules. Returns (ok, violations)."""
    out = []
    n = inst.vertex_count
    where = {}
    for x, b in td.bags.items():
        for v in b:
            if not 0 <= v < n:
                out.append(f"node {x}: vertex {v} out of range")
            else:
                where.setdefault(v, set()).add(x)
    for v in range(n):
        if v not in where:
            out.append(f"vertex {inst.label(v)} in no bag")
    for u, v, _ in inst.edges:
        if not (where.get(u, set()) & where.get(v, set())):
            out.append(_edge_label(inst, u, v))
    for v, nodes in sorted(where.items()):
        tops = [x for x in nodes if td.parent[x] not in nodes]
        if len(tops) > 1:
            out.append(f"vertex {inst.label(v)} occupies a disconnected node set")
    if td.nice:
        out.extend(_nice_violations(td))
    return not out, out


def _nice_violations(td):
    out = []
    for x in td.nodes:
        kind = td.kinds.get(x)
        kids = td.children[x]
        b = td.bags[x]
        if kind == "leaf":
            ok = not kids
        elif kind == "join":
            ok = len(kids) == 2 and all(td.bags[c] == b for c in kids)
        elif kind == "introduce":
            ok = len(kids) == 1 and td.bags[kids[0]] < b and len(b - td.bags[kids[0]]) == 1
        elif kind == "forget":
            ok = len(kids) == 1 and b < td.bags[kids[0]] and len(td.bags[kids[0]] - b) == 1
        else:
            ok = False
        if not ok:
            out.append(f"node {x} violates the {kind} rule")
    return out


def kind_of(bag, child_bags):
    if not child_bags:
        return "leaf"
    if len(child_bags) == 2 and all(c == bag for c in child_bags):
        return "join"
    if len(child_bags) == 1:
        c = child_bags[0]
        if c < bag and len(bag - c) == 1:
            return "introduce"
        if bag < c and len(c - bag) == 1:
            return "forget"
    return "plain"


def heuristic_td(inst):
    """Decomposition from a min-degree elimination ordering (ties: fewest
    fill edges, then lowest id)."""
    n = inst.vertex_count
    if n == 0:
        return TreeDecomposition({0: ()}, {0: None})
    nbr = [set() for _ in range(n)]
    for u, v, _ in inst.edges:
        nbr[u].add(v)
        nbr[v].add(u)
    alive = set(range(n))
    order = []
    bag_of = {}
    while alive:
        def score(v):
            ns = list(nbr[v])
            fill = sum(1 for i in range(len(ns)) for j in range(i + 1, len(ns)) if ns[j] not in nbr[ns[i]])
            return (len(ns), fill, v)

        v = min(alive, key=score)
        ns = nbr[v]
        bag_of[v] = frozenset(ns | {v})
        for a in ns:
            nbr[a] |= ns - {a}
            nbr[a].discard(v)
        nbr[v] = set()
        alive.discard(v)
        order.append(v)
    pos = {v: i for i, v in enumerate(order)}
    parent = {}
    for v in order:
        rest = bag_of[v] - {v}
        parent[pos[v]] = pos[min(rest, key=lambda a: pos[a])] if rest else None
    # stitch component roots into one tree
    roots = [x for x, p in parent.items() if p is None]
    top = roots[-1]
    for r in roots[:-1]:
        parent[r] = top
    bags = {pos[v]: bag_of[v] for v in order}
    return TreeDecomposition(bags, parent)


# ----------------------------------------------------------------------------
# nice form

class _Builder:
    def __init__(self):
        self.bag = []
        self.kids = []

    def new(self, bag, kids=()):
        self.bag.append(frozenset(bag))
        self.kids.append(list(kids))
        return len(self.bag) - 1

    def chain(self, top_bag, child):
        """Node with ``top_bag`` whose descendants walk down to ``child`` one
        vertex at a time (forget steps nearest the child)."""
        cur = child
        b = self.bag[child]
        for x in sorted(b - top_bag):
            b = b - {x}
            cur = self.new(b, [cur])
        for y in sorted(top_bag - b):
            b = b | {y}
            cur = self.new(b, [cur])
        return cur

    def to_td(self, root):
        bags, parent, kinds = {}, {}, {}
        stack = [(root, None)]
        nid = 0
        while stack:
            x, p = stack.pop()
            me = nid
            nid += 1
            bags[me] = self.bag[x]
            parent[me] = p
            kinds[me] = kind_of(self.bag[x], [self.bag[c] for c in self.kids[x]])
            for c in reversed(self.kids[x]):
                stack.append((c, me))
        return TreeDecomposition(bags, parent, kinds, nice=all(k in NICE_KINDS for k in kinds.values()))


def nice_from_lists(bags, kids, root):
    """Nice decomposition from a rooted tree given as parallel lists
    (``bags[i]``, ``kids[i]``)."""
    weight = {}
    post = []
    stack = [root]
    while stack:
        x = stack.pop()
        post.append(x)
        stack.extend(kids[x])
    for x in reversed(post):
        weight[x] = 1 + sum(weight[c] for c in kids[x])

    bld = _Builder()
    built = {}
    for x in reversed(post):
        b = frozenset(bags[x])
        ch = [built[c] for c in kids[x]]
        # collapse chains of equal bags
        if len(ch) == 1 and bld.bag[ch[0]] == b:
            built[x] = ch[0]
            continue
        if not ch:
            built[x] = bld.new(b)
        elif len(ch) == 1:
            built[x] = bld.chain(b, ch[0])
        else:
            items = []
            for i, (c, orig) in enumerate(zip(ch, kids[x])):
                top = c if bld.bag[c] == b else bld.chain(b, c)
                items.append((weight[orig], i, top))
            heapq.heapify(items)
            tick = len(items)
            while len(items) > 2:
                w1, _, a = heapq.heappop(items)
                w2, _, c = heapq.heappop(items)
                j = bld.new(b, [a, c])
                heapq.heappush(items, (w1 + w2, tick, j))
                tick += 1
            (_, _, a), (_, _, c) = sorted(items)
            built[x] = bld.new(b, [a, c])
    return bld.to_td(built[root])


def make_nice(td):
    """Equivalent nice decomposition of the same width."""
    ids = td.preorder()
    index = {x: i for i, x in enumerate(ids)}
    bags = [td.bags[x] for x in ids]
    kids = [[index[c] for c in td.children[x]] for x in ids]
    return nice_from_lists(bags, kids, 0)


# ----------------------------------------------------------------------------
# rebalancing

def _compact(td):
    """Merge nodes whose bag is contained in a neighbour's bag."""
    adj = {x: set() for x in td.bags}
    for x, p in td.parent.items():
        if p is not None:
            adj[x].add(p)
            adj[p].add(x)
    bags = dict(td.bags)
    changed = True
    while changed and len(bags) > 1:
        changed = False
        for x in sorted(bags):
            for y in sorted(adj[x]):
                if bags[x] <= bags[y]:
                    for z in adj[x]:
                        if z != y:
                            adj[z].discard(x)
                            adj[z].add(y)
                            adj[y].add(z)
                    adj[y].discard(x)
                    del adj[x], bags[x]
                    changed = True
                    break
    ids = sorted(bags)
    index = {x: i for i, x in enumerate(ids)}
    return [bags[x] for x in ids], [sorted(index[y] for y in adj[x]) for x in ids]


def _pieces(nodes, adj, removed):
    seen, out = set(), []
    for s in sorted(nodes):
        if s in removed or s in seen:
            continue
        comp, stack = [], [s]
        seen.add(s)
        while stack:
            x = stack.pop()
            comp.append(x)
            for y in adj[x]:
                if y in nodes and y not in removed and y not in seen:
                    seen.add(y)
                    stack.append(y)
        out.append(frozenset(comp))
    return out


def _centroid(nodes, adj):
    start = min(nodes)
    order, parent = [start], {start: None}
    for x in order:
        for y in adj[x]:
            if y in nodes and y not in parent:
                parent[y] = x
                order.append(y)
    size = {}
    for x in reversed(order):
        size[x] = 1 + sum(size[y] for y in adj[x] if y in nodes and parent.get(y) == x)
    total = len(nodes)
    best = None
    for x in order:
        worst = total - size[x]
        for y in adj[x]:
            if y in nodes and parent.get(y) == x:
                worst = max(worst, size[y])
        if best is None or (worst, x) < best:
            best = (worst, x)
    return best[1]


def _path(nodes, adj, a, b):
    parent = {a: None}
    queue = [a]
    for x in queue:
        for y in adj[x]:
            if y in nodes and y not in parent:
                parent[y] = x
                queue.append(y)
    out = [b]
    while out[-1] != a:
        out.append(parent[out[-1]])
    return out


def _median(nodes, adj, pts):
    a, b, c = pts
    common = set(_path(nodes, adj, a, b)) & set(_path(nodes, adj, a, c)) & set(_path(nodes, adj, b, c))
    return min(common)


def rebalance(td):
    """Nice decomposition of logarithmic height.

    Inputs whose nice form already meets the height bound are returned in
    nice form unchanged. Otherwise the tree is rebuilt by recursive
    separation: each piece keeps at most two boundary edges, is split at its
    centroid (plus a median node when a sub-piece would get three boundary
    edges), and its new bag is the separator bags plus the piece interface.
    """
    nice = make_nice(td)
    k = td.width
    n = len(td.vertices())
    if nice.height <= height_bound(k, n):
        return nice
    bags, adj = _compact(td)
    out_bags, out_kids = [], []

    def interface(boundary):
        s = set()
        for x, y in boundary:
            s |= bags[x] & bags[y]
        return s

    # explicit stack of (piece, boundary edges, parent slot)
    root_piece = frozenset(range(len(bags)))
    stack = [(root_piece, [], None)]
    while stack:
        piece, boundary, slot = stack.pop()
        c = _centroid(piece, adj)
        seps = {c}
        parts = _pieces(piece, adj, seps)
        for q in parts:
            inner = [x for x, y in boundary if x in q] + [y for y in adj[c] if y in q]
            if len(inner) >= 3:
                seps.add(_median(q, adj, inner[:3]))
                break
        if len(seps) > 1:
            parts = _pieces(piece, adj, seps)
        bag = set(interface(boundary))
        for s in seps:
            bag |= bags[s]
        me = len(out_bags)
        out_bags.append(frozenset(bag))
        out_kids.append([])
        if slot is not None:
            out_kids[slot].append(me)
        for q in parts:
            qb = [(x, y) for x, y in boundary if x in q]
            for s in sorted(seps):
                qb += [(y, s) for y in adj[s] if y in q]
            stack.append((q, qb, me))
    return nice_from_lists(out_bags, out_kids, 0)


# ----------------------------------------------------------------------------
# terminals and active sets

def push_terminals_to_leaves(inst, td):
    """Ensure every terminal sits in some leaf bag by hanging a copy of a
    bag below a new join node where needed."""
    leaves = [x for x in td.bags if not td.children[x]]
    covered = set()
    for x in leaves:
        covered |= td.bags[x]
    todo = sorted(t for t in inst.terminals if t not in covered)
    if not todo:
        return td
    bags = dict(td.bags)
    parent = dict(td.parent)
    kinds = dict(td.kinds)
    nid = max(bags) + 1
    for t in todo:
        if t in covered:
            continue
        x = next(y for y in td.preorder() if t in td.bags[y])
        join, leaf = nid, nid + 1
        nid += 2
        b = bags[x]
        bags[join], bags[leaf] = b, b
        parent[join] = parent[x]
        parent[x] = join
        parent[leaf] = join
        kinds[join], kinds[leaf] = "join", "leaf"
        covered |= b
    return TreeDecomposition(bags, parent, kinds, nice=td.nice)


@dataclass(frozen=True)
class BagContext:
    node: int
    subtree_vertices: frozenset
    active: frozenset
    bag: frozenset


def all_bag_contexts(inst, td):
    """BagContext for every node in one bottom-up pass."""
    partners = {}
    for s, t in inst.demands:
        partners.setdefault(s, set()).add(t)
        partners.setdefault(t, set()).add(s)
    below = {}
    out = {}
    for x in reversed(td.preorder()):
        vb = set(td.bags[x])
        for c in td.children[x]:
            vb |= below[c]
        vb = frozenset(vb)
        below[x] = vb
        act = frozenset(t for t in vb if t in partners and not partners[t] <= vb)
        out[x] = BagContext(x, vb, act, td.bags[x])
    return out


def bag_context(inst, td, node):
    return all_bag_contexts(inst, td)[node]


# ----------------------------------------------------------------------------
# text formats

def write_td(td):
    lines = ["TD 1"]
    for x in td.preorder():
        p = td.parent[x]
        verts = " ".join(str(v + 1) for v in sorted(td.bags[x]))
        lines.append(f"NODE {x} {'-' if p is None else p} {td.kinds[x]} : {verts}".rstrip())
    return "\n".join(lines) + "\n"


def read_td(text):
    """Read the TD text format, or the bags-plus-edges competition format
    (rooted at node 1)."""
    lines = [l.split("#", 1)[0].strip() for l in text.splitlines()]
    lines = [l for l in lines if l and not l.startswith("c ") and l != "c"]
    if not lines:
        raise ValueError("empty decomposition")
    if lines[0].startswith("s td"):
        return _read_pace(lines)
    if lines[0] != "TD 1":
        raise ValueError("expected header 'TD 1'")
    bags, parent, kinds = {}, {}, {}
    for l in lines[1:]:
        head, _, rest = l.partition(":")
        tok = head.split()
        if len(tok) != 4 or tok[0] != "NODE":
            raise ValueError(f"bad line {l!r}")
        x = int(tok[1])
        parent[x] = None if tok[2] == "-" else int(tok[2])
        kinds[x] = tok[3]
        bags[x] = frozenset(int(v) - 1 for v in rest.split())
    nice = all(k in NICE_KINDS for k in kinds.values())
    return TreeDecomposition(bags, parent, kinds, nice=nice)


def _read_pace(lines):
    bags, adj = {}, {}
    for l in lines[1:]:
        tok = l.split()
        if tok[0] == "b":
            x = int(tok[1])
            bags[x] = frozenset(int(v) - 1 for v in tok[2:])
            adj.setdefault(x, set())
        else:
            a, b = int(tok[0]), int(tok[1])
            adj.setdefault(a, set()).add(b)
            adj.setdefault(b, set()).add(a)
    root = 1 if 1 in bags else min(bags)
    parent = {root: None}
    queue = [root]
    for x in queue:
        for y in sorted(adj[x]):
            if y not in parent:
                parent[y] = x
                queue.append(y)
    return TreeDecomposition(bags, parent)
