# %% [markdown]
# # Quickstart
#
# Build a small Steiner Forest instance, solve it with every solver in the
# package and compare the costs against the exhaustive oracle.
# Run with `python3 notebooks/01_quickstart.py`.

# %%
from fractions import Fraction

from steinerforest import (
    Instance,
    brute_force_opt,
    evaluate_solution,
    parse_instance,
    solve_epas,
    solve_fes,
    solve_vc,
    two_approx_primal_dual,
    write_instance,
)
from steinerforest.vc import matching_cover

# %% [markdown]
# A ladder graph with two demand pairs. Vertices are 0-based in code and
# 1-based in the text format.

# %%
text = """SFP 1
NODES 6
EDGE 1 2 3
EDGE 2 3 3
EDGE 4 5 3
EDGE 5 6 3
EDGE 1 4 1
EDGE 2 5 1
EDGE 3 6 1
DEMAND 1 3
DEMAND 4 6
END
"""
inst = parse_instance(text)
print(inst.vertex_count, "vertices,", len(inst.edges), "edges,", len(inst.demands), "demands")

# %% [markdown]
# The oracle enumerates every edge subset, so it is only usable up to a
# couple of dozen edges.

# %%
opt, best = brute_force_opt(inst)
print("optimum", opt, "edges", sorted(best.edges))

# %%
runs = {
    "fes": solve_fes(inst),
    "vc": solve_vc(inst, matching_cover(inst)),
    "epas eps'=1/2": solve_epas(inst, eps_target=Fraction(1, 2)),
    "two-approx": two_approx_primal_dual(inst),
}
for name, forest in runs.items():
    cost, feasible, _ = evaluate_solution(inst, forest)
    print(f"{name:>14}: cost {cost} feasible={feasible} ratio={Fraction(cost, opt)}")

# %% [markdown]
# Instances are immutable values; writing them back gives a canonical text
# form, which is what the benchmark harness hashes.

# %%
print(write_instance(Instance(3, ((2, 0, 4), (0, 1, 1)), ((2, 1),))).decode())
