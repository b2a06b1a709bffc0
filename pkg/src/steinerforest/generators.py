"""Instance generators: seeded random families with a planted parameter bound,
and the 3-SAT to Steiner Forest gadget reduction."""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field

from .instance import Forest, Instance, InstanceError


# ----------------------------------------------------------------------------
# CNF

@dataclass(frozen=True)
class Cnf3:
    """3-CNF over variables 1..variable_count; literals are signed ints."""

    variable_count: int
    clauses: tuple
    partition: tuple | None = None   # three tuples of variables

    def __post_init__(self):
        cl = tuple(tuple(c) for c in self.clauses)
        object.__setattr__(self, "clauses", cl)
        for c in cl:
            if len(c) > 3:
                raise InstanceError(f"clause {c} has more than 3 literals")
            for lit in c:
                if lit == 0 or abs(lit) > self.variable_count:
                    raise InstanceError(f"literal {lit} out of range")
        if self.partition is not None:
            parts = tuple(tuple(sorted(p)) for p in self.partition)
            object.__setattr__(self, "partition", parts)
            if len(parts) != 3 or len({len(p) for p in parts}) != 1:
                raise InstanceError("partition must have three sets of equal size")
            owner = {}
            for i, p in enumerate(parts):
                for v in p:
                    if v in owner:
                        raise InstanceError(f"variable {v} in two partition sets")
                    owner[v] = i
            if len(owner) != self.variable_count:
                raise InstanceError("partition does not cover every variable")
            for c in cl:
                sets = [owner[abs(lit)] for lit in c]
                if len(set(sets)) != len(sets):
                    raise InstanceError(f"clause {c} has two variables from one set")

    def satisfied_by(self, assignment):
        """assignment maps variable -> bool (missing variables are False)."""
        return all(any(assignment.get(abs(l), False) == (l > 0) for l in c) for c in self.clauses)


def read_dimacs(text):
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    nvars = nclauses = None
    clauses, cur = [], []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("c"):
            continue
        if line.startswith("%"):
            break
        if line.startswith("p"):
            tok = line.split()
            if nvars is not None or len(tok) != 4 or tok[1] != "cnf":
                raise InstanceError("bad problem line", lineno)
            try:
                nvars, nclauses = int(tok[2]), int(tok[3])
            except ValueError:
                raise InstanceError("bad problem line", lineno) from None
            continue
        if nvars is None:
            raise InstanceError("clause before problem line", lineno)
        for tok in line.split():
            try:
                lit = int(tok)
            except ValueError:
                raise InstanceError(f"bad literal {tok!r}", lineno) from None
            if lit == 0:
                clauses.append(tuple(cur))
                cur = []
            elif abs(lit) > nvars:
                raise InstanceError(f"literal {lit} out of range", lineno)
            else:
                cur.append(lit)
        if len(cur) > 3:
            raise InstanceError("clause has more than 3 literals", lineno)
    if nvars is None:
        raise InstanceError("missing problem line")
    if cur:
        clauses.append(tuple(cur))
    if len(clauses) != nclauses:
        raise InstanceError(f"expected {nclauses} clauses, found {len(clauses)}")
    return Cnf3(nvars, tuple(clauses))


def write_dimacs(cnf):
    out = [f"p cnf {cnf.variable_count} {len(cnf.clauses)}"]
    out += [" ".join(map(str, c + (0,))) for c in cnf.clauses]
    return "\n".join(out) + "\n"


def tsat3_transform(cnf):
    """Triplicate every variable (x, x' = x+n, x'' = x+2n), tie the copies by
    the cycle x -> x' -> x'' -> x, and let the literal at position p of each
    clause use copy p."""
    n = cnf.variable_count
    out = []
    for c in cnf.clauses:
        out.append(tuple((abs(l) + p * n) * (1 if l > 0 else -1) for p, l in enumerate(c)))
    for x in range(1, n + 1):
        out += [(-x, x + n), (-(x + n), x + 2 * n), (-(x + 2 * n), x)]
    parts = tuple(tuple(range(1 + s * n, 1 + (s + 1) * n)) for s in range(3))
    return Cnf3(3 * n, tuple(out), parts)


# ----------------------------------------------------------------------------
# gadget reduction

@dataclass
class GadgetLayout:
    n: int              # padded per-set variable count, a power of 4
    L: int
    log_n: int
    left: list          # left[i][j] vertex ids
    right: list
    middle: list
    clause_vertices: list   # (c1, c2) per clause
    budget: int
    var_index: dict     # variable -> (gadget i, block j, bit alpha)
    clauses: tuple
    edge_ids: dict = field(default_factory=dict, repr=False)

    @property
    def gadget_count(self):
        return len(self.left)

    def cover(self):
        """Vertex cover: every gadget vertex."""
        out = set()
        for i in range(self.gadget_count):
            out.update(self.left[i], self.right[i], self.middle[i])
        return frozenset(out)


def _pad_to_power_of_4(k):
    n = 4
    while n < k:
        n *= 4
    return n


def _split(items, parts):
    q, r = divmod(len(items), parts)
    out, at = [], 0
    for g in range(parts):
        size = q + (g < r)
        out.append(items[at:at + size])
        at += size
    return out


def sat_to_steiner_forest(cnf):
    if cnf.partition is None:
        raise InstanceError("formula has no variable partition; run tsat3_transform first")
    n = _pad_to_power_of_4(len(cnf.partition[0]))
    log_n = n.bit_length() - 1
    half = log_n // 2
    root = math.isqrt(n)
    L = -(-n // (log_n * log_n))

    # dummy variables extend each set to n
    nxt = cnf.variable_count + 1
    sets = []
    for p in cnf.partition:
        extra = list(range(nxt, nxt + n - len(p)))
        nxt += len(extra)
        sets.append(sorted(p) + extra)
    var_index = {}
    for s, vars_ in enumerate(sets):
        for g, grp in enumerate(_split(vars_, log_n)):
            i = s * log_n + g
            for pos, x in enumerate(grp):
                var_index[x] = (i, pos // half, pos % half)

    labels, v = [], 0
    left, right, middle = [], [], []

    def block(count, fmt):
        nonlocal v
        ids = list(range(v, v + count))
        labels.extend(fmt.format(j) for j in range(count))
        v += count
        return ids

    for i in range(3 * log_n):
        left.append(block(2 * L, f"l{i}_{{}}"))
        right.append(block(2 * L, f"r{i}_{{}}"))
        middle.append(block(root, f"m{i}_{{}}"))
    edges, demands = set(), []
    for i in range(3 * log_n):
        for j in range(2 * L):
            for mid in middle[i]:
                edges.add((left[i][j], mid))
                edges.add((right[i][j], mid))
            demands.append((left[i][j], right[i][j]))
    clause_vertices = []
    for ci, c in enumerate(cnf.clauses):
        c1, c2 = v, v + 1
        labels += [f"c{ci}_1", f"c{ci}_2"]
        v += 2
        clause_vertices.append((c1, c2))
        demands.append((c1, c2))
        for lit in c:
            i, j, a = var_index[abs(lit)]
            edges.add((left[i][j], c1))
            want = 1 if lit > 0 else 0
            for jp, mid in enumerate(middle[i]):
                if (jp >> a) & 1 == want:
                    edges.add((mid, c2))
    inst = Instance(v, tuple((a, b, 1) for a, b in sorted(edges)), tuple(demands), tuple(labels))
    layout = GadgetLayout(n, L, log_n, left, right, middle, clause_vertices,
                          2 * len(cnf.clauses) + 12 * L * log_n, var_index, cnf.clauses,
                          inst.edge_index())
    return inst, layout


def assignment_to_solution(layout, assignment):
    """Intended forest for an assignment (variable -> bool; padding and
    missing variables read as False). Returns (forest, unrouted clause indices)."""
    eid = layout.edge_ids

    def e(a, b):
        return eid[(min(a, b), max(a, b))]

    code = {}
    for x, (i, j, a) in layout.var_index.items():
        if assignment.get(x, False):
            code[(i, j)] = code.get((i, j), 0) | (1 << a)
    chosen = set()
    for i in range(layout.gadget_count):
        for j in range(2 * layout.L):
            mid = layout.middle[i][code.get((i, j), 0)]
            chosen.add(e(layout.left[i][j], mid))
            chosen.add(e(layout.right[i][j], mid))
    unrouted = []
    for ci, c in enumerate(layout.clauses):
        c1, c2 = layout.clause_vertices[ci]
        for lit in c:
            if assignment.get(abs(lit), False) == (lit > 0):
                i, j, _ = layout.var_index[abs(lit)]
                mid = layout.middle[i][code.get((i, j), 0)]
                chosen.add(e(c1, layout.left[i][j]))
                chosen.add(e(mid, c2))
                break
        else:
            unrouted.append(ci)
    return Forest(chosen), unrouted


def write_layout(layout):
    """Text sidecar; vertex ids are 1-based like the SFP file."""
    out = ["LAYOUT 1", f"N {layout.n}", f"L {layout.L}", f"LOGN {layout.log_n}",
           f"BUDGET {layout.budget}", f"CLAUSES {len(layout.clauses)}"]
    for i in range(layout.gadget_count):
        for name, ids in (("LEFT", layout.left[i]), ("RIGHT", layout.right[i]), ("MIDDLE", layout.middle[i])):
            out.append(f"GADGET {i} {name} " + " ".join(str(v + 1) for v in ids))
    for x in sorted(layout.var_index):
        i, j, a = layout.var_index[x]
        out.append(f"VAR {x} {i} {j} {a}")
    for ci, (c1, c2) in enumerate(layout.clause_vertices):
        out.append(f"CLAUSE {ci} {c1 + 1} {c2 + 1} " + " ".join(map(str, layout.clauses[ci])))
    out.append("END")
    return "\n".join(out) + "\n"


# ----------------------------------------------------------------------------
# random families

@dataclass(frozen=True)
class Profile:
    n: int
    m: int | None = None
    demand_count: int = 3
    weight_max: int = 8
    target: str = "none"    # none | fes | vc
    k: int = 0


def _weights(rng, count, wmax):
    return [rng.randint(1, wmax) for _ in range(count)]


def gen_random_with_witness(seed, profile):
    """Instance plus the planted witness: the extra (non-tree) edge ids for
    ``fes``, the cover for ``vc``, None otherwise."""
    p = profile
    rng = random.Random(seed)
    n = p.n
    if n < 1 or p.weight_max < 1:
        raise InstanceError("profile needs n >= 1 and weight_max >= 1")
    if p.target not in ("none", "fes", "vc"):
        raise InstanceError(f"unknown target parameter {p.target!r}")
    perm = list(range(n))
    rng.shuffle(perm)
    pairs = []
    if p.target == "vc":
        k = p.k
        if not 1 <= k <= n:
            raise InstanceError("vc bound must lie in 1..n")
        cover = perm[:k]
        for i in range(1, k):
            pairs.append((cover[rng.randrange(i)], cover[i]))
        for v in perm[k:]:
            pairs.append((cover[rng.randrange(k)], v))
        pool = [(a, b) for i, a in enumerate(cover) for b in cover[i + 1:]] + [(a, b) for a in cover for b in perm[k:]]
        limit = len(pool)
        witness = frozenset(cover)
    else:
        for i in range(1, n):
            pairs.append((perm[rng.randrange(i)], perm[i]))
        pool = [(a, b) for a in range(n) for b in range(a + 1, n)]
        limit = len(pool)
        if p.target == "fes":
            limit = min(limit, n - 1 + p.k)
        witness = None
    m = p.m if p.m is not None else (n - 1 + p.k if p.target == "fes" else len(pairs))
    if m < len(pairs) or m > limit:
        raise InstanceError(f"cannot place {m} edges under this profile (range {len(pairs)}..{limit})")
    have = {(min(a, b), max(a, b)) for a, b in pairs}
    spare = sorted({(min(a, b), max(a, b)) for a, b in pool} - have)
    rng.shuffle(spare)
    extra = spare[:m - len(have)]
    all_pairs = sorted(have | set(extra))
    w = _weights(rng, len(all_pairs), p.weight_max)
    all_pairs_w = tuple((a, b, x) for (a, b), x in zip(all_pairs, w))
    possible = n * (n - 1) // 2
    if p.demand_count > possible:
        raise InstanceError("more demands than vertex pairs")
    dem = set()
    while len(dem) < p.demand_count:
        a, b = rng.sample(range(n), 2)
        dem.add((min(a, b), max(a, b)))
    inst = Instance(n, all_pairs_w, tuple(sorted(dem)))
    if p.target == "fes":
        idx = inst.edge_index()
        witness = frozenset(idx[e] for e in extra)
    return inst, witness


def gen_random_bounded(seed, profile):
    return gen_random_with_witness(seed, profile)[0]
