"""Exact and approximate Steiner Forest solvers on graphs of bounded
feedback edge set, vertex cover or treewidth."""

__version__ = "0.1.0"

from .instance import (  # noqa: E402
    Forest,
    InfeasibleError,
    Instance,
    InstanceError,
    evaluate_solution,
    parse_instance,
    reduce_aspect_ratio,
    lift_solution,
    write_instance,
)
from .baselines import brute_force_opt, brute_force_conforming, brute_force_separated, two_approx_primal_dual  # noqa: E402
from .decomposition import TreeDecomposition, heuristic_td, rebalance, validate_td  # noqa: E402
from .conforming import Partition, PartitionFamily, solve_conforming  # noqa: E402
from .vc import CoverCertificate, solve_vc  # noqa: E402
from .fes import solve_fes, solve_two_pole  # noqa: E402
from .epas import solve_epas, simulate_merge_rules  # noqa: E402
from .generators import Cnf3, Profile, gen_random_bounded, sat_to_steiner_forest, tsat3_transform  # noqa: E402

__all__ = [
    "Forest", "InfeasibleError", "Instance", "InstanceError", "evaluate_solution",
    "parse_instance", "reduce_aspect_ratio", "lift_solution", "write_instance",
    "brute_force_opt", "brute_force_conforming", "brute_force_separated", "two_approx_primal_dual",
    "TreeDecomposition", "heuristic_td", "rebalance", "validate_td",
    "Partition", "PartitionFamily", "solve_conforming",
    "CoverCertificate", "solve_vc", "solve_fes", "solve_two_pole",
    "solve_epas", "simulate_merge_rules",
    "Cnf3", "Profile", "gen_random_bounded", "sat_to_steiner_forest", "tsat3_transform",
]
