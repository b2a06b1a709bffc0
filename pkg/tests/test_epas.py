import math
from fractions import Fraction

import pytest

from corpus import oracle_corpus, path_instance, triangle
from steinerforest.baselines import brute_force_opt
from steinerforest.decomposition import TreeDecomposition, all_bag_contexts, heuristic_td, validate_td
from steinerforest.epas import (
    EnumerationCapError,
    EpasParams,
    Metric,
    active_partition,
    delta_domain,
    enumerate_partitions,
    greedy_delta_net,
    internal_eps,
    net_threshold,
    pow2_floor,
    prepare_epas,
    simulate_merge_rules,
    solve_epas,
    write_zeta,
    zeta_partition,
    zeta_size_bound,
)
from steinerforest.instance import Forest, InfeasibleError, Instance, InstanceError, evaluate_solution


def _cost(inst, f):
    cost, ok, _ = evaluate_solution(inst, f)
    assert ok
    return cost


def _line_dist(a, b):
    return abs(a - b)


def test_greedy_net_examples():
    assert greedy_delta_net([5, 2, 1, 0], _line_dist, 1) == [0, 2, 5]
    assert greedy_delta_net([0, 1, 2, 5], _line_dist, 0) == [0, 1, 2, 5]
    assert greedy_delta_net([0, 1, 2, 5], _line_dist, 5) == [0]
    assert greedy_delta_net([], _line_dist, 1) == []


def test_pow2_floor():
    assert [pow2_floor(x) for x in (5, 8, 1, Fraction(7, 2))] == [4, 8, 1, 2]
    assert pow2_floor(13, 3) == 12
    with pytest.raises(ValueError):
        pow2_floor(Fraction(1, 2))


def test_delta_domain():
    assert delta_domain(4, 1) == [1, 2, 4, 8, 16, 32]
    assert delta_domain(4, 1, wmin=3) == [3, 6, 12, 24, 48, 96]
    assert len(delta_domain(4, Fraction(1, 2))) == 7


@pytest.mark.parametrize("target", [Fraction(1), Fraction(1, 2), Fraction(1, 4), Fraction(1, 10)])
def test_internal_eps_is_largest_grid_point(target):
    e = internal_eps(target)
    assert (1 + e) ** 2 + e <= 1 + target
    nxt = e + Fraction(1, 2**20)
    assert (1 + nxt) ** 2 + nxt > 1 + target
    assert e.denominator & (e.denominator - 1) == 0


def test_internal_eps_too_small():
    with pytest.raises(ValueError):
        internal_eps(Fraction(1, 2**30))


def test_metric_distances():
    m = Metric(path_instance(5, w=2))
    assert m(0, 4) == 8 and m(3, 1) == 4
    assert m.to_set(0, [3, 4]) == 6


def _star_with_hub(leaves):
    hub = leaves + 1
    edges = tuple((0, i, 1) for i in range(1, leaves + 1)) + ((0, hub, 1),)
    dem = tuple((i, hub) for i in range(1, leaves + 1))
    bags = {0: {0, hub}, 1: {0}}
    parent = {0: None, 1: 0}
    for i in range(1, leaves + 1):
        bags[i + 1] = {0, i}
        parent[i + 1] = 1
    return Instance(hub + 1, edges, dem), TreeDecomposition(bags, parent)


def test_whole_annulus_block_on_large_star():
    inst, td = _star_with_hub(200)
    params = EpasParams(Fraction(1), Fraction(1), 1, 3, inst.vertex_count, 1)
    assert net_threshold(1, 3, Fraction(1)) == 144
    z = zeta_partition(inst, td, 1, params)
    assert len(z.blocks) == 1 and z.blocks[0].whole
    assert z.blocks[0].members == tuple(range(1, 201)) and (z.d, z.D) == (1, 1)


def test_small_star_uses_net_blocks():
    inst, td = _star_with_hub(20)
    params = EpasParams(Fraction(1), Fraction(1), 1, 3, inst.vertex_count, 1)
    z = zeta_partition(inst, td, 1, params)
    assert len(z.blocks) == 20 and not any(b.whole for b in z.blocks)
    assert all(b.net_point == b.members[0] for b in z.blocks)


def test_bag_terminals_are_singletons():
    inst = triangle()
    td = TreeDecomposition({0: {0, 1}, 1: {1, 2}}, {0: None, 1: 0})
    params = EpasParams(Fraction(1), Fraction(1), 1, 2, 3, 1)
    z = zeta_partition(inst, td, 1, params)
    assert [b.members for b in z.blocks] == [(2,)] and z.blocks[0].annulus is None


def test_zeta_refines_active_set_and_respects_bound():
    for _, inst, _ in oracle_corpus()[:150]:
        red, _, td, params = prepare_epas(inst, Fraction(1))
        if not red.demands:
            continue
        ctx = all_bag_contexts(red, td)
        m = Metric(red)
        for x in td.nodes:
            if not ctx[x].active:
                continue
            z = zeta_partition(red, td, x, params, m, ctx[x])
            assert z.partition.ground == ctx[x].active
            if z.d is not None:
                assert len(z.blocks) <= zeta_size_bound(params.k, params.h, params.eps_internal, z.d, z.D)


def test_write_zeta_format():
    inst, td = _star_with_hub(3)
    params = EpasParams(Fraction(1), Fraction(1), 1, 3, inst.vertex_count, 1)
    text = write_zeta({1: zeta_partition(inst, td, 1, params)})
    lines = text.splitlines()
    assert lines[0] == "ZETA 1" and lines[1] == "NODE 1 d=1 D=1"
    assert sum(l.startswith("BLOCK ") for l in lines) == 3


def test_prepare_rejects_invalid_decomposition():
    inst = path_instance(3, demands=[(0, 2)])
    with pytest.raises(InstanceError, match="invalid decomposition"):
        prepare_epas(inst, 1, TreeDecomposition({0: {0, 1}}, {0: None}))


def test_prepare_maps_user_decomposition():
    inst = Instance(3, ((0, 1, 1), (1, 2, 10**6)), ((0, 2),))
    td = TreeDecomposition({0: {0, 1}, 1: {1, 2}}, {0: None, 1: 0})
    red, trace, tdf, params = prepare_epas(inst, 1, td)
    assert red.vertex_count == 2 and trace
    assert validate_td(red, tdf)[0] and params.k == 1


def test_triangle_and_trivial_cases():
    inst = triangle()
    assert _cost(inst, solve_epas(inst, eps_target=1)) <= 4
    assert solve_epas(path_instance(3)) == Forest()
    with pytest.raises(InfeasibleError):
        solve_epas(Instance(4, ((0, 1, 1), (2, 3, 1)), ((0, 3),)))


def test_cap_error():
    inst, _ = _star_with_hub(6)
    with pytest.raises(EnumerationCapError) as info:
        solve_epas(inst, eps_target=1, cap=5)
    assert info.value.count > 5


def test_cap_from_environment(monkeypatch):
    monkeypatch.setenv("SF_MAX_SEQ", "5")
    inst, _ = _star_with_hub(6)
    with pytest.raises(EnumerationCapError):
        solve_epas(inst, eps_target=1)


def test_family_and_zeta_outputs():
    inst = path_instance(4, demands=[(0, 3), (1, 2)])
    zs, fams = {}, []
    f = solve_epas(inst, eps_target=1, zeta_out=zs, family_out=fams)
    assert _cost(inst, f) == 3
    assert len(fams) == 1 and set(fams[0].nodes()) == set(zs)


@pytest.mark.parametrize("eps", [Fraction(1), Fraction(1, 2)])
def test_within_factor_on_corpus(eps):
    done = 0
    for _, inst, opt in oracle_corpus():
        if heuristic_td(inst).width > 2:
            continue
        assert _cost(inst, solve_epas(inst, eps_target=eps)) <= (1 + eps) * opt
        done += 1
        if done == 60:
            break


def test_single_group_is_exact():
    done = 0
    for _, inst, opt in oracle_corpus():
        if len(inst.demands) != 1 or heuristic_td(inst).width > 2:
            continue
        assert _cost(inst, solve_epas(inst, eps_target=1)) == opt
        done += 1
    assert done > 0


def test_simulator_single_component_unchanged():
    inst = path_instance(4, w=3, demands=[(0, 3)])
    td = TreeDecomposition({0: {0, 1}, 1: {1, 2}, 2: {2, 3}}, {0: None, 1: 0, 2: 1})
    f = Forest({0, 1, 2})
    assert simulate_merge_rules(inst, td, f, Fraction(1)) == (f, f)


def test_simulator_merges_close_components():
    # 0 -5- 1 -1- 2 -5- 3, demands {0,1} and {2,3}; the gap is far below either component's cost
    inst = Instance(4, ((0, 1, 5), (1, 2, 1), (2, 3, 5)), ((0, 1), (2, 3)))
    td = TreeDecomposition({0: {1, 2}, 1: {0, 1}, 2: {2, 3}}, {0: None, 1: 0, 2: 0})
    f_eps, f_tilde = simulate_merge_rules(inst, td, Forest({0, 2}), Fraction(1))
    assert f_tilde == Forest({0, 1, 2})
    assert f_eps.edges <= f_tilde.edges


def test_simulator_keeps_distant_components():
    inst = Instance(4, ((0, 1, 1), (1, 2, 100), (2, 3, 1)), ((0, 1), (2, 3)))
    td = TreeDecomposition({0: {1, 2}, 1: {0, 1}, 2: {2, 3}}, {0: None, 1: 0, 2: 0})
    f = Forest({0, 2})
    assert simulate_merge_rules(inst, td, f, Fraction(1)) == (f, f)


def test_simulator_cost_and_conformity():
    done = 0
    for _, inst, _ in oracle_corpus():
        if heuristic_td(inst).width > 2:
            continue
        red, _, td, p = prepare_epas(inst, Fraction(1))
        if not red.demands:
            continue
        opt, f_star = brute_force_opt(red)
        f_eps, f_tilde = simulate_merge_rules(red, td, f_star, p.eps_internal, p.k, p.h)
        assert _cost(red, f_eps) <= (1 + p.eps_internal) * opt
        assert _cost(red, f_tilde) <= (1 + p.eps_internal) ** 2 * opt
        m = Metric(red)
        ctx = all_bag_contexts(red, td)
        for x in td.nodes:
            if not ctx[x].active:
                continue
            z = zeta_partition(red, td, x, p, m, ctx[x])
            comps = active_partition(red, td, f_eps, x, ctx[x]).blocks
            for b in z.blocks:
                assert any(set(b.members) <= set(c) for c in comps)
            assert active_partition(red, td, f_tilde, x, ctx[x]) in enumerate_partitions(red, z, p, m, node=x)
        done += 1
        if done == 40:
            break


def test_zeta_size_bound_formula():
    b = zeta_size_bound(1, 2, Fraction(1), 1, 8)
    assert b == 64 * 4 * math.log2(8) + 2
    assert zeta_size_bound(1, 2, Fraction(1), 4, 4) == 64 * 4 * 1 + 2
