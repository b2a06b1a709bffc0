"""Exact solver parameterised by the size of a vertex cover."""

from __future__ import annotations

from dataclasses import dataclass

from .conforming import Partition, PartitionFamily, solve_conforming
from .decomposition import all_bag_contexts, nice_from_lists
from .instance import Forest, Instance, InstanceError, check_demands_connected, demand_groups


@dataclass(frozen=True)
class CoverCertificate:
    cover: frozenset

    def __post_init__(self):
        object.__setattr__(self, "cover", frozenset(self.cover))

    @property
    def k(self):
        return len(self.cover)

    def check(self, inst):
        bad = [(u, v) for u, v, _ in inst.edges if u not in self.cover and v not in self.cover]
        if bad:
            u, v = bad[0]
            raise InstanceError(f"invalid cover: edge {inst.label(u)}-{inst.label(v)} uncovered")
        if any(not 0 <= v < inst.vertex_count for v in self.cover):
            raise InstanceError("invalid cover: vertex out of range")


@dataclass(frozen=True)
class CoverTrace:
    """Maps edges of the preprocessed instance back; helper edges map to None."""

    source: Instance
    edge_map: tuple

    def lift(self, f):
        return Forest(self.edge_map[i] for i in f.edges if self.edge_map[i] is not None)


def matching_cover(inst):
    """Both endpoints of a greedy maximal matching (at most twice optimal)."""
    used = set()
    for u, v, _ in inst.edges:
        if u not in used and v not in used:
            used |= {u, v}
    return CoverCertificate(used)


def cover_preprocess(inst, cert):
    """Move every terminal out of the cover: terminal t in S hands its demands
    to a new pendant vertex joined to t by a weight-0 edge."""
    cert.check(inst)
    moved = sorted(t for t in inst.terminals if t in cert.cover)
    n = inst.vertex_count
    proxy = {t: n + i for i, t in enumerate(moved)}
    edges = list(inst.edges) + [(t, proxy[t], 0) for t in moved]
    dem = [(proxy.get(s, s), proxy.get(t, t)) for s, t in inst.demands]
    labels = None
    if inst.labels is not None:
        labels = tuple(inst.labels) + tuple(f"{inst.labels[t]}'" for t in moved)
    out = Instance(n + len(moved), tuple(edges), tuple(dem), labels)
    orig = inst.edge_index()
    emap = tuple(orig.get((u, v)) if v < n else None for u, v, _ in out.edges)
    return out, cert, CoverTrace(inst, emap)


def build_vc_decomposition(inst, cert):
    """Nice decomposition with the cover in every bag: one leaf per vertex
    outside the cover, grouped by demand group (Steiner vertices form one
    extra group), joined group by group. Returns (td, family)."""
    cover = frozenset(cert.cover)
    if inst.terminals & cover:
        raise InstanceError("terminal inside the cover; run cover_preprocess first")
    groups = [list(g) for g in demand_groups(inst)]
    steiner = [v for v in range(inst.vertex_count) if v not in cover and v not in inst.terminals]
    if steiner:
        groups.append(steiner)
    bags, kids = [cover], [[]]
    for g in groups:
        top = len(bags)
        bags.append(cover)
        kids.append([])
        kids[0].append(top)
        for v in g:
            kids[top].append(len(bags))
            bags.append(cover | {v})
            kids.append([])
    td = nice_from_lists(bags, kids, 0)
    fam = {}
    for x, c in all_bag_contexts(inst, td).items():
        if c.active:
            fam[x] = [Partition([sorted(c.active)])]
    return td, PartitionFamily(fam)


def solve_vc(inst, cert=None):
    check_demands_connected(inst)
    if cert is None:
        cert = matching_cover(inst)
    work, cert2, trace = cover_preprocess(inst, cert)
    td, fam = build_vc_decomposition(work, cert2)
    f = solve_conforming(work, td, fam)
    if f is None:
        raise RuntimeError("conforming DP found no solution on a feasible instance")
    return trace.lift(f)
