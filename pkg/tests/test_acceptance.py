"""Acceptance criteria, one test each; every test prints a PASS/FAIL line."""

import math
import random
import time
from fractions import Fraction
from itertools import combinations, product

import pytest

from corpus import cycle_instance, dp_ready_td, oracle_corpus, parallel_paths, path_instance, random_family
from steinerforest.baselines import brute_force_conforming, brute_force_opt, brute_force_separated, two_approx_primal_dual
from steinerforest.conforming import solve_conforming
from steinerforest.decomposition import C_H, C_W, TreeDecomposition, heuristic_td, rebalance, validate_td, all_bag_contexts
from steinerforest.epas import (
    Metric,
    active_partition,
    enumerate_partitions,
    forest_components,
    greedy_delta_net,
    prepare_epas,
    simulate_merge_rules,
    solve_epas,
    zeta_partition,
)
from steinerforest.fes import build_skeleton, solve_fes, solve_two_pole
from steinerforest.generators import Cnf3, assignment_to_solution, sat_to_steiner_forest, tsat3_transform
from steinerforest.instance import Forest, Instance, InstanceError, UnionFind, apply_rule3, evaluate_solution, lift_solution, reduce_aspect_ratio
from steinerforest.vc import CoverCertificate, solve_vc

EPS_ALL = (Fraction(1), Fraction(1, 2), Fraction(1, 4))


@pytest.fixture
def report(capsys):
    def emit(num, title, ok, detail):
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {num}: {title} ({detail})")
    return emit


def _cost(inst, f):
    cost, ok, _ = evaluate_solution(inst, f)
    return cost if ok else None


def _min_cover(inst):
    for size in range(inst.vertex_count + 1):
        for cand in combinations(range(inst.vertex_count), size):
            s = set(cand)
            if all(u in s or v in s for u, v, _ in inst.edges):
                return CoverCertificate(s)


def _low_width():
    return [(s, i, o) for s, i, o in oracle_corpus() if heuristic_td(i).width <= 2]


def test_criterion_01_fes_oracle(report):
    corpus = oracle_corpus()
    start = time.perf_counter()
    bad = [s for s, inst, opt in corpus if _cost(inst, solve_fes(inst)) != opt]
    took = time.perf_counter() - start
    ok = len(corpus) >= 300 and not bad and took < 60
    report(1, "FES oracle equivalence", ok, f"{len(corpus) - len(bad)}/{len(corpus)} exact, {took:.1f}s")
    assert ok, bad[:5]


def test_criterion_02_vc_oracle(report):
    cases = [(s, inst, opt, _min_cover(inst)) for s, inst, opt in oracle_corpus()]
    cases = [c for c in cases if c[3].k <= 6]
    start = time.perf_counter()
    bad = [s for s, inst, opt, cert in cases if _cost(inst, solve_vc(inst, cert)) != opt]
    took = time.perf_counter() - start
    ok = len(cases) > 0 and not bad and took < 60
    report(2, "VC oracle equivalence", ok, f"{len(cases) - len(bad)}/{len(cases)} exact, {took:.1f}s")
    assert ok, bad[:5]


def test_criterion_03_conforming_oracle(report):
    rng = random.Random(2024)
    pairs, bad = 0, []
    for s, inst, _ in oracle_corpus():
        if len(inst.edges) > 14:
            continue
        td = dp_ready_td(inst)
        fam = random_family(inst, td, rng)
        want = brute_force_conforming(inst, td, fam)
        got = solve_conforming(inst, td, fam)
        if (want is None) != (got is None) or (got is not None and _cost(inst, got) != want[0]):
            bad.append(s)
        pairs += 1
    ok = pairs >= 200 and not bad
    report(3, "conforming DP equivalence", ok, f"{pairs - len(bad)}/{pairs} pairs agree")
    assert ok, bad[:5]


def test_criterion_04_epas_guarantee(report):
    cases = _low_width()
    start = time.perf_counter()
    bad = []
    for eps in EPS_ALL:
        for s, inst, opt in cases:
            c = _cost(inst, solve_epas(inst, eps_target=eps))
            if c is None or c > (1 + eps) * opt:
                bad.append((s, eps))
    took = time.perf_counter() - start
    runs = len(cases) * len(EPS_ALL)
    ok = len(cases) > 0 and not bad and took < 600
    report(4, "EPAS within (1+eps')OPT", ok, f"{runs - len(bad)}/{runs} runs, {took:.1f}s")
    assert ok, bad[:5]


def _simulated(inst, eps_target):
    red, _, td, p = prepare_epas(inst, eps_target)
    if not red.demands:
        return None
    opt, f_star = brute_force_opt(red)
    f_eps, f_tilde = simulate_merge_rules(red, td, f_star, p.eps_internal, p.k, p.h)
    return red, td, p, opt, f_eps, f_tilde


def test_criterion_05_merge_rule_costs(report):
    runs, bad = 0, []
    for s, inst, _ in oracle_corpus():
        for eps in (Fraction(1), Fraction(1, 2)):
            sim = _simulated(inst, eps)
            if sim is None:
                continue
            red, _, p, opt, f_eps, f_tilde = sim
            ce, ct = _cost(red, f_eps), _cost(red, f_tilde)
            runs += 1
            if ce is None or ct is None or ce > (1 + p.eps_internal) * opt or ct > (1 + p.eps_internal) * ce:
                bad.append((s, eps))
    ok = runs > 0 and not bad
    report(5, "merge-rule cost bounds", ok, f"{runs - len(bad)}/{runs} runs")
    assert ok, bad[:5]


def test_criterion_06_refinement_and_conformity(report):
    runs, bad = 0, []
    for s, inst, _ in _low_width():
        for eps in (Fraction(1), Fraction(1, 2)):
            sim = _simulated(inst, eps)
            if sim is None:
                continue
            red, td, p, _, f_eps, f_tilde = sim
            m = Metric(red)
            ctx = all_bag_contexts(red, td)
            good = True
            for x in td.nodes:
                if not ctx[x].active:
                    continue
                z = zeta_partition(red, td, x, p, m, ctx[x])
                comps = active_partition(red, td, f_eps, x, ctx[x]).blocks
                if not all(any(set(b.members) <= set(c) for c in comps) for b in z.blocks):
                    good = False
                if active_partition(red, td, f_tilde, x, ctx[x]) not in enumerate_partitions(red, z, p, m, node=x):
                    good = False
            runs += 1
            if not good:
                bad.append((s, eps))
    ok = runs > 0 and not bad
    report(6, "zeta refinement and conformity", ok, f"{runs - len(bad)}/{runs} runs")
    assert ok, bad[:5]


def _random_metric(rng):
    n = rng.randint(1, 64)
    if rng.random() < 0.5:
        pts = [tuple(rng.randint(0, 50) for _ in range(2)) for _ in range(n)]
        return list(range(n)), (lambda a, b: abs(pts[a][0] - pts[b][0]) + abs(pts[a][1] - pts[b][1]))
    edges = {(rng.randrange(v), v) for v in range(1, n)}
    edges |= {tuple(sorted(rng.sample(range(n), 2))) for _ in range(n // 2)} if n > 1 else set()
    g = Instance(n, tuple((a, b, rng.randint(1, 9)) for a, b in edges))
    return list(range(n)), Metric(g)


def test_criterion_07_structural_bounds(report):
    skel_bad = []
    for s, inst, _ in oracle_corpus():
        red, _, _ = apply_rule3(inst)
        if not red.edges:
            continue
        sk = build_skeleton(red)
        if len(sk.high_degree(red)) > 2 * sk.k or len(sk.topo_edges) > 5 * sk.k:
            skel_bad.append(s)

    rng = random.Random(77)
    net_bad = 0
    for _ in range(1000):
        pts, dist = _random_metric(rng)
        delta = rng.choice([0, 1, 2, 3, 5, 8, 13, 21])
        net = greedy_delta_net(pts, dist, delta)
        packing = all(dist(a, b) > delta for a, b in combinations(net, 2))
        covering = all(any(dist(p, q) <= delta for q in net) for p in pts)
        net_bad += not (packing and covering)

    comp_bad, comps_seen = [], 0
    for s, inst, _ in _low_width():
        for eps in (Fraction(1), Fraction(1, 2)):
            sim = _simulated(inst, eps)
            if sim is None:
                continue
            red, td, p, _, f_eps, _ = sim
            lim = int(4 * p.k / p.eps_internal)
            m = Metric(red)
            ctx = all_bag_contexts(red, td)
            comps = forest_components(red, f_eps.edges)
            for x in td.nodes:
                if not ctx[x].active:
                    continue
                z = zeta_partition(red, td, x, p, m, ctx[x])
                for vs, _ in comps:
                    cnt = sum(1 for b in z.blocks if b.annulus is not None and set(b.members) <= vs)
                    comps_seen += 1
                    if cnt > lim:
                        comp_bad.append((s, eps, x))
    ok = not skel_bad and not net_bad and not comp_bad
    report(7, "structural bounds", ok,
           f"skeleton violations {len(skel_bad)}, net failures {net_bad}/1000, component net violations {len(comp_bad)}/{comps_seen}")
    assert ok


def _connected(inst, f, a, b):
    uf = UnionFind(inst.vertex_count)
    for e in f.edges:
        uf.union(*inst.edges[e][:2])
    return uf.find(a) == uf.find(b)


def test_criterion_08_two_pole(report):
    bad = []
    for seed in range(100):
        g2 = parallel_paths(seed)
        f = solve_two_pole(g2, 0, 1)
        want = brute_force_separated(g2, 0, 1)
        c = _cost(g2, f)
        if want is None or c != want[0] or _connected(g2, f, 0, 1):
            bad.append(seed)
    ok = not bad
    report(8, "two-pole min cut", ok, f"{100 - len(bad)}/100 exact")
    assert ok, bad[:5]


def _path_td(n):
    return TreeDecomposition({i: {i, i + 1} for i in range(n - 1)}, {i: (i - 1 if i else None) for i in range(n - 1)})


def _cycle_td(n):
    return TreeDecomposition({i: {0, i, i + 1} for i in range(1, n - 1)}, {i: (i - 1 if i > 1 else None) for i in range(1, n - 1)})


def _random_tree_like(rng, n):
    edges = {(rng.randrange(v), v) for v in range(1, n)}
    edges |= {tuple(sorted(rng.sample(range(n), 2))) for _ in range(rng.randint(0, n // 4))}
    return Instance(n, tuple((a, b, 1) for a, b in edges))


def test_criterion_09_rebalance(report):
    cases = []
    for n in (64, 256, 1024):
        cases.append((f"path{n}", path_instance(n), _path_td(n)))
        cases.append((f"cycle{n}", cycle_instance(n), _cycle_td(n)))
    rng = random.Random(9)
    for n in (50, 200, 1024):
        g = _random_tree_like(rng, n)
        cases.append((f"random{n}", g, heuristic_td(g)))
    bad = []
    for name, inst, td in cases:
        k = td.width
        out = rebalance(td)
        n = inst.vertex_count
        if not (validate_td(inst, out)[0] and out.nice and out.width <= C_W * (k + 1) - 1
                and out.height <= C_H * (k + 1) * (1 + math.log2(n))):
            bad.append(name)
    ok = not bad
    report(9, "rebalance contracts", ok, f"{len(cases) - len(bad)}/{len(cases)} decompositions, C_w={C_W}, C_h={C_H}")
    assert ok, bad


def test_criterion_10_two_approx(report):
    corpus = oracle_corpus()
    bad = []
    for s, inst, opt in corpus:
        c = _cost(inst, two_approx_primal_dual(inst))
        if c is None or c > 2 * opt:
            bad.append(s)
    ok = not bad
    report(10, "two-approximation within 2*OPT", ok, f"{len(corpus) - len(bad)}/{len(corpus)}")
    assert ok, bad[:5]


def test_criterion_11_sat_gadget(report):
    rng = random.Random(11)
    checked, bad = 0, []
    while checked < 40:
        n = rng.randint(1, 8)
        clauses = []
        for _ in range(rng.randint(1, 10)):
            vs = rng.sample(range(1, n + 1), rng.randint(1, min(3, n)))
            clauses.append(tuple(v if rng.random() < 0.5 else -v for v in vs))
        cnf = Cnf3(n, tuple(clauses))
        sol = None
        for bits in product((False, True), repeat=n):
            a = {i + 1: b for i, b in enumerate(bits)}
            if cnf.satisfied_by(a):
                sol = a
                break
        if sol is None:
            continue
        t = tsat3_transform(cnf)
        inst, layout = sat_to_steiner_forest(t)
        f, unrouted = assignment_to_solution(layout, {x + p * n: v for x, v in sol.items() for p in range(3)})
        cost, feasible, _ = evaluate_solution(inst, f)
        budget = 2 * len(t.clauses) + 12 * layout.L * layout.log_n
        clause_vs = {v for pair in layout.clause_vertices for v in pair}
        independent = not any(u in clause_vs and v in clause_vs for u, v, _ in inst.edges)
        try:
            CoverCertificate(layout.cover()).check(inst)
            cover_ok = True
        except InstanceError:
            cover_ok = False
        if unrouted or not feasible or cost != budget or layout.budget != budget or not independent or not cover_ok:
            bad.append(checked)
        checked += 1
    ok = not bad
    report(11, "SAT gadget constructive direction", ok, f"{checked - len(bad)}/{checked} satisfiable formulas")
    assert ok, bad


def test_criterion_12_aspect_ratio(report):
    runs, bad = 0, []
    for s, inst, opt in oracle_corpus():
        for eps in EPS_ALL:
            red, trace = reduce_aspect_ratio(inst, eps)
            ratio_ok = True
            if red.edges:
                ws = [w for *_, w in red.edges]
                ratio_ok = Fraction(max(ws), min(ws)) <= 2 * inst.vertex_count / eps
            f = brute_force_opt(red)[1] if red.demands else Forest()
            c = _cost(inst, lift_solution(f, trace))
            runs += 1
            if not ratio_ok or c is None or c > (1 + eps) * opt:
                bad.append((s, eps))
    ok = not bad
    report(12, "aspect-ratio reduction", ok, f"{runs - len(bad)}/{runs} runs")
    assert ok, bad[:5]
