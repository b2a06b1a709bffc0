# %% [markdown]
# # Inside the approximation scheme
#
# Walk one instance through each stage: weight reduction, the balanced
# decomposition, the per-bag refinement partitions, the enumerated
# candidate family and the final conforming solve.

# %%
from fractions import Fraction

import numpy as np

from steinerforest import brute_force_opt, evaluate_solution
from steinerforest.conforming import solve_conforming
from steinerforest.decomposition import all_bag_contexts
from steinerforest.epas import (
    Metric,
    enumerate_partition_family,
    prepare_epas,
    simulate_merge_rules,
    write_zeta,
    zeta_partition,
)
from steinerforest.generators import Profile, gen_random_bounded
from steinerforest.instance import lift_solution

# %%
inst = gen_random_bounded(12, Profile(n=9, m=11, demand_count=4, weight_max=8))
eps_target = Fraction(1, 2)
red, trace, td, params = prepare_epas(inst, eps_target)
print("internal eps", params.eps_internal, "| width", td.width, "| height", td.height)
print("reduction steps:", [r.kind for r in trace] or "none")

# %% [markdown]
# Bags with active terminals get a refinement partition. Terminals inside
# the bag stay singletons; the rest are grouped by distance annulus and
# net point.

# %%
metric = Metric(red)
ctx = all_bag_contexts(red, td)
zetas = {x: zeta_partition(red, td, x, params, metric, ctx[x]) for x in td.nodes if ctx[x].active}
sizes = np.array([len(z.blocks) for z in zetas.values()])
print(len(zetas), "active bags, blocks per bag: mean", sizes.mean().round(2), "max", sizes.max())
print(write_zeta(dict(list(zetas.items())[:2])))

# %%
family = enumerate_partition_family(red, td, zetas, params, metric=metric)
print("family size p =", family.p)
forest = lift_solution(solve_conforming(red, td, family), trace)
cost, feasible, _ = evaluate_solution(inst, forest)
opt = brute_force_opt(inst)[0]
print(f"cost {cost}, optimum {opt}, bound {(1 + eps_target) * opt}, feasible={feasible}")

# %% [markdown]
# The merge-rule simulator starts from the optimum and applies the two
# merging rules; its output is what the family is built to contain.

# %%
opt_red, f_star = brute_force_opt(red)
f_eps, f_tilde = simulate_merge_rules(red, td, f_star, params.eps_internal, params.k, params.h)
print("f* cost", opt_red, "| after rule one", f_eps.cost(red), "| after rule two", f_tilde.cost(red))
