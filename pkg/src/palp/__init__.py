"""Factored-MDP planning by linear programming over partitioned constraints."""

from .basis import (
    BasisFunction,
    backproject,
    basis_preset,
    constant_basis,
    evaluate_vw,
    relevance_weight,
    relevance_weights,
    singleton_basis,
    singleton_pairwise_basis,
)
from .bench import DynamicsParams, Topology, arrow_list, generate, grid, ring, ring_of_rings
from .costnet import CostNetwork, build_cost_network, elimination_order, induced_width
from .factors import Assignment, Factor, Variable
from .lp import LinearProgram, LpSolution, export_lp_text, parse_lp_text, solve_lp
from .mdp import (
    Cpd,
    FactoredMdp,
    ModelError,
    RewardFactor,
    full_reward,
    load_model,
    save_model,
    transition_prob,
    validate,
)
from .oracle import (
    ViolationReport,
    alp_constraint_min,
    exhaustive_min,
    min_constraint_ve,
    palp_space_min,
    partition_penalty,
)
from .partition import (
    PartitionMatrix,
    build_spaces,
    heuristic_partition,
    load_partition,
    save_partition,
    single_space_partition,
    validate_partition,
)
from .policy import (
    EvalReport,
    GreedyPolicy,
    exact_policy_value,
    greedy_action,
    rollout_eval,
    server_heuristic_policy,
)
from .solvers import (
    SolveConfig,
    SolveResult,
    ValueTable,
    error_bound_report,
    solve_alp,
    solve_palp,
    solve_sampled_alp,
    value_iteration,
)

__version__ = "0.1.0"
