"""Minimum-cost Steiner forest conforming to per-bag partition families.

The dynamic program walks a nice decomposition bottom-up. A state at node X
records, for the partial solution inside the subtree:

* ``comp``  - the partition of the bag into partial components (as a
  restricted-growth string over the sorted bag);
* ``grp``   - which of those components are promised to end up connected
  ("groups"), again as a restricted-growth string over components;
* ``forb``  - pairs of groups that must never be connected;
* ``tmap``  - the group of every active terminal of X.

Groups come from demands whose endpoints both lie below X and from the
blocks of the chosen partition at each bag; blocks that differ become
forbidden pairs. A component may only disappear from the bag (be forgotten)
when its group has nothing left to connect to.
"""

from __future__ import annotations

from .decomposition import all_bag_contexts, validate_td
from .instance import Forest, demand_groups


class ConformingError(ValueError):
    """Precondition of the conforming DP violated."""


class Partition:
    """A partition of a set of terminals, stored canonically."""

    __slots__ = ("blocks",)

    def __init__(self, blocks):
        bl = [tuple(sorted(set(b))) for b in blocks]
        if any(not b for b in bl):
            raise ValueError("empty block")
        seen = set()
        for b in bl:
            if seen & set(b):
                raise ValueError("blocks overlap")
            seen |= set(b)
        self.blocks = tuple(sorted(bl))

    @property
    def ground(self):
        return frozenset(x for b in self.blocks for x in b)

    def block_index(self, order):
        where = {x: i for i, b in enumerate(self.blocks) for x in b}
        return [where[x] for x in order]

    def __eq__(self, other):
        return isinstance(other, Partition) and self.blocks == other.blocks

    def __hash__(self):
        return hash(self.blocks)

    def __lt__(self, other):
        return self.blocks < other.blocks

    def __repr__(self):
        return "Partition(" + "|".join(",".join(map(str, b)) for b in self.blocks) + ")"

    @classmethod
    def from_labels(cls, order, labels):
        out = {}
        for x, l in zip(order, labels):
            out.setdefault(l, []).append(x)
        return cls(out.values())


class PartitionFamily:
    """node id -> list of Partitions of that node's active terminals."""

    def __init__(self, entries=None):
        self.entries = {}
        for node, parts in (entries or {}).items():
            self.entries[node] = sorted(set(parts))

    def get(self, node):
        return self.entries.get(node, [])

    def nodes(self):
        return sorted(self.entries)

    @property
    def p(self):
        return sum(len(v) for v in self.entries.values())

    def __repr__(self):
        return f"PartitionFamily(nodes={len(self.entries)}, p={self.p})"


def family_trivial(inst, td):
    """At each node with active terminals, the partition of A_B by demand group."""
    gid = {t: i for i, g in enumerate(demand_groups(inst)) for t in g}
    out = {}
    for x, c in all_bag_contexts(inst, td).items():
        if c.active:
            act = sorted(c.active)
            out[x] = [Partition.from_labels(act, [gid[t] for t in act])]
    return PartitionFamily(out)


def write_family(fam):
    lines = ["PF 1"]
    for node in fam.nodes():
        lines.append(f"NODE {node}")
        for p in fam.get(node):
            lines.append("PART " + "|".join(",".join(str(v + 1) for v in b) for b in p.blocks))
    return "\n".join(lines) + "\n"


def read_family(text):
    lines = [l.split("#", 1)[0].strip() for l in text.splitlines()]
    lines = [l for l in lines if l]
    if not lines or lines[0] != "PF 1":
        raise ValueError("expected header 'PF 1'")
    out = {}
    node = None
    for l in lines[1:]:
        tok = l.split(None, 1)
        if tok[0] == "NODE":
            node = int(tok[1])
            out.setdefault(node, [])
        elif tok[0] == "PART":
            if node is None:
                raise ValueError("PART before NODE")
            body = tok[1] if len(tok) > 1 else ""
            blocks = [[int(v) - 1 for v in b.split(",")] for b in body.split("|") if b]
            out[node].append(Partition(blocks))
        else:
            raise ValueError(f"bad line {l!r}")
    return PartitionFamily(out)


# ----------------------------------------------------------------------------
# DP state

class _Work:
    """Mutable expansion of a state; component and group ids are arbitrary
    ints until ``key`` canonicalises them."""

    __slots__ = ("comp", "grp", "forb", "tmap")

    def __init__(self, comp, grp, forb, tmap):
        self.comp = comp
        self.grp = grp
        self.forb = forb
        self.tmap = tmap

    def copy(self):
        return _Work(dict(self.comp), dict(self.grp), set(self.forb), dict(self.tmap))

    def fresh(self):
        return max(list(self.grp) + list(self.grp.values()) + [-1]) + 1

    def merge_groups(self, a, b):
        if a == b:
            return True
        if a > b:
            a, b = b, a
        if (a, b) in self.forb:
            return False
        for c, g in self.grp.items():
            if g == b:
                self.grp[c] = a
        for t, g in self.tmap.items():
            if g == b:
                self.tmap[t] = a
        new = set()
        for p, q in self.forb:
            p = a if p == b else p
            q = a if q == b else q
            new.add((min(p, q), max(p, q)))
        self.forb = new
        return True

    def merge_comps(self, c1, c2):
        if c1 == c2:
            return True
        if not self.merge_groups(self.grp[c1], self.grp[c2]):
            return False
        for v, c in self.comp.items():
            if c == c2:
                self.comp[v] = c1
        del self.grp[c2]
        return True

    def introduce(self, v):
        c = self.fresh()
        self.comp[v] = c
        self.grp[c] = c

    def forget(self, v):
        c = self.comp.pop(v)
        if c in self.comp.values():
            return True
        g = self.grp.pop(c)
        if g in self.grp.values() or g in self.tmap.values():
            return False
        self.forb = {p for p in self.forb if g not in p}
        return True

    def group_of(self, t):
        if t in self.comp:
            return self.grp[self.comp[t]]
        return self.tmap[t]

    def key(self, bag, act):
        cmap, gmap = {}, {}
        comp = []
        for v in bag:
            c = self.comp[v]
            if c not in cmap:
                cmap[c] = len(cmap)
            comp.append(cmap[c])
        grp = []
        for c in sorted(cmap, key=cmap.get):
            g = self.grp[c]
            if g not in gmap:
                gmap[g] = len(gmap)
            grp.append(gmap[g])
        forb = tuple(sorted(tuple(sorted((gmap[p], gmap[q]))) for p, q in self.forb))
        tmap = tuple(gmap[self.group_of(t)] for t in act)
        return (tuple(comp), tuple(grp), forb, tmap)


def _decode(key, bag, act):
    comp, grp, forb, tmap = key
    return _Work(
        {v: c for v, c in zip(bag, comp)},
        {c: g for c, g in enumerate(grp)},
        set(forb),
        {t: g for t, g in zip(act, tmap)},
    )


def _better(a, b):
    if b is None or a[0] < b[0]:
        return True
    return a[0] == b[0] and tuple(sorted(a[1])) < tuple(sorted(b[1]))


def _put(table, key, val):
    if _better(val, table.get(key)):
        table[key] = val


# ----------------------------------------------------------------------------
# solver

def _check_pre(inst, td, fam, ctx):
    if not td.nice:
        raise ConformingError("decomposition is not nice")
    ok, bad = validate_td(inst, td)
    if not ok:
        raise ConformingError("invalid decomposition: " + "; ".join(bad[:3]))
    in_leaf = set()
    for x in td.bags:
        if not td.children[x]:
            in_leaf |= td.bags[x]
    missing = sorted(inst.terminals - in_leaf)
    if missing:
        raise ConformingError(f"terminal {inst.label(missing[0])} is in no leaf bag")
    for node in fam.nodes():
        if node not in ctx:
            raise ConformingError(f"family names unknown node {node}")
        for p in fam.get(node):
            if p.ground != ctx[node].active:
                raise ConformingError(f"partition at node {node} does not cover its active terminals")


def _edge_tops(inst, td):
    depth = td.depths()
    where = {}
    for x, b in td.bags.items():
        for v in b:
            where.setdefault(v, set()).add(x)
    tops = {x: [] for x in td.bags}
    for i, (u, v, _) in enumerate(inst.edges):
        top = min(where[u] & where[v], key=lambda x: (depth[x], x))
        tops[top].append(i)
    return tops


def _new_demands(inst, td, ctx):
    out = {x: [] for x in td.bags}
    for x in td.bags:
        vx = ctx[x].subtree_vertices
        kids = [ctx[c].subtree_vertices for c in td.children[x]]
        for s, t in inst.demands:
            if s in vx and t in vx and not any(s in k and t in k for k in kids):
                out[x].append((s, t))
    return out


def solve_conforming(inst, td, fam):
    """Cheapest feasible forest conforming to ``fam``; None when no such
    forest exists."""
    ctx = all_bag_contexts(inst, td)
    _check_pre(inst, td, fam, ctx)
    tops = _edge_tops(inst, td)
    dem = _new_demands(inst, td, ctx)
    bag_of = {x: tuple(sorted(td.bags[x])) for x in td.bags}
    act_of = {x: tuple(sorted(ctx[x].active)) for x in td.bags}
    tables = {}

    for x in reversed(td.preorder()):
        bag, kids = bag_of[x], td.children[x]
        # states over the bag, still carrying the children's active terminals
        work = []
        if not kids:
            w = _Work({}, {}, set(), {})
            for v in bag:
                w.introduce(v)
            work.append((w, (0, frozenset())))
        elif len(kids) == 1:
            c = kids[0]
            gone = [v for v in bag_of[c] if v not in td.bags[x]]
            new = [v for v in bag if v not in td.bags[c]]
            for key, val in tables.pop(c).items():
                w = _decode(key, bag_of[c], act_of[c])
                if all(w.forget(v) for v in gone):
                    for v in new:
                        w.introduce(v)
                    work.append((w, val))
        else:
            a, b = kids
            ta, tb = tables.pop(a), tables.pop(b)
            for ka, va in ta.items():
                for kb, vb in tb.items():
                    w = _join(_decode(ka, bag, act_of[a]), _decode(kb, bag, act_of[b]), bag)
                    if w is not None:
                        work.append((w, (va[0] + vb[0], va[1] | vb[1])))

        for eid in tops[x]:
            u, v, wt = inst.edges[eid]
            nxt = []
            for w, val in work:
                nxt.append((w, val))
                if w.comp[u] != w.comp[v]:
                    w2 = w.copy()
                    if w2.merge_comps(w2.comp[u], w2.comp[v]):
                        nxt.append((w2, (val[0] + wt, val[1] | {eid})))
            work = _dedup(nxt, bag)

        if dem[x]:
            nxt = []
            for w, val in work:
                if all(w.merge_groups(w.group_of(s), w.group_of(t)) for s, t in dem[x]):
                    nxt.append((w, val))
            work = nxt

        act = act_of[x]
        for w, _ in work:
            w.tmap = {t: w.group_of(t) for t in act}
        if act:
            parts = fam.get(x)
            nxt = []
            for w, val in work:
                for p in parts:
                    w2 = w.copy()
                    if _apply_partition(w2, p):
                        nxt.append((w2, val))
            work = nxt

        table = {}
        for w, val in work:
            _put(table, w.key(bag, act), val)
        tables[x] = table

    best = None
    for key, val in tables[td.root].items():
        comp, grp, _, _ = key
        # every group must have become a single component
        if len(set(grp)) == len(grp) and _better(val, best):
            best = val
    if best is None:
        return None
    return Forest(best[1])


def _dedup(items, bag):
    """Drop dominated copies of the same state between edge steps."""
    table = {}
    keep = {}
    for w, val in items:
        k = w.key(bag, tuple(sorted(w.tmap)))
        if _better(val, table.get(k)):
            table[k] = val
            keep[k] = w
    return [(keep[k], table[k]) for k in table]


def _join(wa, wb, bag):
    off = wa.fresh()
    w = wa
    for c, g in wb.grp.items():
        w.grp[c + off] = g + off
    # the second child's components ride along under placeholder keys
    for v in bag:
        w.comp[("b", v)] = wb.comp[v] + off
    w.forb |= {(p + off, q + off) for p, q in wb.forb}
    # terminals tracked on both sides sit in the bag and merge with their components
    for t, g in wb.tmap.items():
        if t not in w.tmap:
            w.tmap[t] = g + off
    for v in bag:
        if not w.merge_comps(w.comp[v], w.comp[("b", v)]):
            return None
    for v in bag:
        del w.comp[("b", v)]
    return w


def _apply_partition(w, p):
    gs = []
    for blk in p.blocks:
        g = w.tmap[blk[0]]
        for t in blk[1:]:
            if not w.merge_groups(g, w.tmap[t]):
                return False
            g = w.tmap[blk[0]]
        gs.append(blk[0])
    heads = [w.tmap[t] for t in gs]
    if len(set(heads)) != len(heads):
        return False
    for i in range(len(heads)):
        for j in range(i + 1, len(heads)):
            a, b = heads[i], heads[j]
            w.forb.add((min(a, b), max(a, b)))
    return True
