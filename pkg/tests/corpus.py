"""Shared fixtures data: the frozen oracle corpus and small builders."""

import json
import random
from functools import lru_cache
from itertools import combinations
from pathlib import Path

from steinerforest.conforming import Partition, PartitionFamily
from steinerforest.decomposition import all_bag_contexts, heuristic_td, make_nice, push_terminals_to_leaves
from steinerforest.instance import Instance, parse_instance

DATA = Path(__file__).with_name("data")


@lru_cache(maxsize=None)
def oracle_corpus():
    """(seed, instance, frozen brute-force optimum) triples."""
    rows = json.loads((DATA / "oracle_corpus.json").read_text())["instances"]
    return tuple((r["seed"], parse_instance(r["sfp"]), r["opt"]) for r in rows)


def triangle():
    # edges 1-2 (1), 2-3 (1), 1-3 (3); demand {1,3}
    return Instance(3, ((0, 1, 1), (1, 2, 1), (0, 2, 3)), ((0, 2),))


def four_cycle():
    # weights 2, demands {1,2} and {3,4}
    return Instance(4, ((0, 1, 2), (1, 2, 2), (2, 3, 2), (0, 3, 2)), ((0, 1), (2, 3)))


def path_instance(n, w=1, demands=()):
    return Instance(n, tuple((i, i + 1, w) for i in range(n - 1)), tuple(demands))


def cycle_instance(n, w=1, demands=()):
    return Instance(n, tuple((i, (i + 1) % n, w) for i in range(n)), tuple(demands))


def dp_ready_td(inst):
    """Nice decomposition with terminals in leaves."""
    return push_terminals_to_leaves(inst, make_nice(heuristic_td(inst)))


def all_partitions(items):
    items = list(items)
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for p in all_partitions(rest):
        for i in range(len(p)):
            yield p[:i] + [[first] + p[i]] + p[i + 1:]
        yield [[first]] + p


def random_family(inst, td, rng, max_parts=3, empty_rate=0.03):
    """Up to max_parts random partitions of A_B per active node."""
    out = {}
    for x, c in all_bag_contexts(inst, td).items():
        if not c.active:
            continue
        act = sorted(c.active)
        if rng.random() < empty_rate:
            out[x] = []
            continue
        parts = set()
        for _ in range(rng.randint(1, max_parts)):
            labels = [rng.randrange(len(act)) for _ in act]
            parts.add(Partition.from_labels(act, labels))
        out[x] = list(parts)
    return PartitionFamily(out)


def parallel_paths(seed):
    """Union of 2..4 internally disjoint pole-to-pole paths (poles 0 and 1),
    at most 12 edges, with demands between internal vertices of distinct paths."""
    rng = random.Random(seed)
    while True:
        k = rng.randint(2, 4)
        lengths = [rng.randint(1, 4) for _ in range(k)]
        if sum(lengths) <= 12:
            break
    edges, internal, v = [], [], 2
    for j, ln in enumerate(lengths):
        verts = [0] + list(range(v, v + ln - 1)) + [1]
        v += ln - 1
        internal.append(verts[1:-1])
        for a, b in zip(verts, verts[1:]):
            edges.append((a, b, rng.randint(1, 6)))
    if lengths.count(1) > 1:
        # at most one direct pole edge keeps the graph simple
        return parallel_paths(seed + 1000)
    pairs = [(a, b) for i, j in combinations(range(k), 2) for a in internal[i] for b in internal[j]]
    dem = rng.sample(pairs, min(len(pairs), rng.randint(0, 4)))
    return Instance(v, tuple(edges), tuple(dem))
