# %% [markdown]
# # From 3-SAT to Steiner Forest
#
# Turn a small formula into a Steiner Forest instance with a bounded vertex
# cover, then map a satisfying assignment to a forest that meets the budget.

# %%
from itertools import product

from steinerforest.generators import Cnf3, assignment_to_solution, sat_to_steiner_forest, tsat3_transform
from steinerforest.instance import evaluate_solution
from steinerforest.vc import CoverCertificate

# %%
cnf = Cnf3(4, ((1, -2, 3), (-1, 4), (2, -3, -4), (-2,)))
t = tsat3_transform(cnf)
print("variables", cnf.variable_count, "->", t.variable_count, "| clauses", len(cnf.clauses), "->", len(t.clauses))

# %%
inst, layout = sat_to_steiner_forest(t)
print(f"{inst.vertex_count} vertices, {len(inst.edges)} edges, {len(inst.demands)} demands")
print(f"padded set size {layout.n}, L={layout.L}, {layout.gadget_count} gadgets, budget {layout.budget}")
CoverCertificate(layout.cover()).check(inst)
print("vertex cover of size", len(layout.cover()), "verified")

# %% [markdown]
# Copy a satisfying assignment of the original formula onto all three
# variable copies and build the intended forest.

# %%
for bits in product((False, True), repeat=cnf.variable_count):
    assignment = {i + 1: b for i, b in enumerate(bits)}
    if cnf.satisfied_by(assignment):
        break
n = cnf.variable_count
lifted = {x + p * n: v for x, v in assignment.items() for p in range(3)}
forest, unrouted = assignment_to_solution(layout, lifted)
cost, feasible, _ = evaluate_solution(inst, forest)
print("assignment", assignment, "-> cost", cost, "feasible", feasible, "unrouted", unrouted)

# %% [markdown]
# A falsifying assignment leaves at least one clause pair unrouted.

# %%
bad = next({i + 1: b for i, b in enumerate(bits)} for bits in product((False, True), repeat=n)
           if not cnf.satisfied_by({i + 1: b for i, b in enumerate(bits)}))
forest, unrouted = assignment_to_solution(layout, {x + p * n: v for x, v in bad.items() for p in range(3)})
print("assignment", bad, "leaves clauses", unrouted, "unrouted; feasible:", evaluate_solution(inst, forest)[1])
