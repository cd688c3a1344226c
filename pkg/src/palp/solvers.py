"""Planning drivers: cutting-plane solvers, constraint sampling, exact DP.

The full and partitioned linear programs are solved with the same loop: solve
a relaxed program, ask each constraint space's separation oracle for its most
violated (state, action) pair, add every violated cut, and re-solve until no
oracle reports a violation.  The sampled baseline replaces the oracle loop by
one program over randomly drawn constraints.  Flat-state value iteration and
policy-independent diagnostics exist to verify everything at small scale.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .basis import backproject_all, relevance_weights, validate_basis_set
from .costnet import F_TERM, CostNetwork, build_cost_network, elimination_order
from .lp import OPTIMAL, LinearProgram, solve_lp
from .mdp import FactoredMdp
from .oracle import (
    VIOLATION_TOL,
    alp_constraint_min,
    palp_space_min,
    partition_penalty,
)
from .partition import PartitionMatrix, build_spaces

VALUE_ITERATION_GUARD = 2 ** 20


class SolveError(RuntimeError):
    """Raised when a relaxed program cannot be solved to optimality."""

    def __init__(self, status: str, message: str | None = None):
        super().__init__(message or f"linear program solve ended with status {status!r}")
        self.status = status


@dataclass(frozen=True)
class SolveConfig:
    max_iterations: int = 10_000
    violation_tol: float = VIOLATION_TOL
    weight_bound: float = 1e6
    oracle: str = "ve"              # "ve" or "exhaustive"
    elimination: str = "min-degree"
    lp_pivot_tol: float = 1e-10
    lp_max_iterations: int = 10 ** 6

    def to_dict(self) -> dict:
        return {
            "max_iterations": self.max_iterations,
            "violation_tol": self.violation_tol,
            "weight_bound": self.weight_bound,
            "oracle": self.oracle,
            "elimination": self.elimination,
            "lp_pivot_tol": self.lp_pivot_tol,
            "lp_max_iterations": self.lp_max_iterations,
        }


@dataclass(frozen=True)
class SolveResult:
    method: str
    weights: np.ndarray
    space_constants: np.ndarray | None
    objective: float
    iterations: int
    cuts_per_space: tuple[int, ...]
    duplicate_cuts: int
    termination: str
    wall_time: float
    config: dict
    seed: int | None = None

    @property
    def total_cuts(self) -> int:
        return int(sum(self.cuts_per_space))

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "weights": self.weights.tolist(),
            "space_constants": (None if self.space_constants is None
                                else self.space_constants.tolist()),
            "objective": self.objective,
            "iterations": self.iterations,
            "cuts_per_space": list(self.cuts_per_space),
            "duplicate_cuts": self.duplicate_cuts,
            "termination": self.termination,
            "wall_time_seconds": self.wall_time,
            "config": self.config,
            "seed": self.seed,
        }


@dataclass(frozen=True)
class Prepared:
    """Everything the drivers reuse across cut iterations."""

    bases: tuple
    backprojections: tuple
    network: CostNetwork
    alphas: np.ndarray


def prepare(mdp: FactoredMdp, bases) -> Prepared:
    problems = validate_basis_set(bases)
    if problems:
        raise ValueError("invalid basis set: " + "; ".join(problems))
    backprojections = tuple(backproject_all(mdp, bases))
    network = build_cost_network(mdp, backprojections)
    alphas = relevance_weights(bases).weights
    return Prepared(tuple(bases), backprojections, network, alphas)


def _solved(lp: LinearProgram, config: SolveConfig):
    sol = solve_lp(lp, config.lp_pivot_tol, config.lp_max_iterations)
    if sol.status != OPTIMAL:
        raise SolveError(sol.status)
    return sol


def _cut_from_report(terms_with_coeffs, assignment: dict, action: int,
                     num_bases: int):
    """LP row (weight coefficients, reward bound) for one violated point.

    The constant basis is absent from the terms; callers attach its (1-gamma)
    coefficient to whichever variable carries the constant in their program.
    """
    coeffs = np.zeros(num_bases)
    rhs = 0.0
    for term, d in terms_with_coeffs:
        val = term.evaluate_at(assignment, action)
        if term.kind == F_TERM:
            coeffs[term.index] += d * val
        else:
            rhs -= d * val  # term factors hold the negated reward
    return coeffs, rhs


def solve_alp(mdp: FactoredMdp, bases, config: SolveConfig | None = None,
              prepared: Prepared | None = None) -> SolveResult:
    """Cutting-plane solve of the full constraint program."""
    config = config or SolveConfig()
    prep = prepared or prepare(mdp, bases)
    network = prep.network
    num_bases = len(prep.bases)
    gamma = mdp.gamma

    lp = LinearProgram()
    for b in prep.bases:
        lp.add_variable(f"w_{b.id}", objective=float(prep.alphas[b.id]),
                        lower=-config.weight_bound, upper=config.weight_bound)
    order = None
    if config.oracle == "ve":
        order = elimination_order(network.terms, config.elimination)

    start = time.perf_counter()
    cut_keys = set()
    cuts = 0
    duplicates = 0
    termination = "iteration-limit"
    iterations = 0
    sol = None
    while iterations < config.max_iterations:
        sol = _solved(lp, config)
        iterations += 1
        report = alp_constraint_min(network, sol.values, gamma, mdp.num_actions,
                                    method=config.oracle, order=order,
                                    violation_tol=config.violation_tol)
        if not report.violated:
            termination = "optimal"
            break
        key = (report.assignment.values, report.action)
        if key in cut_keys:
            duplicates += 1
            termination = "stalled"
            break
        cut_keys.add(key)
        coeffs, rhs = _cut_from_report(
            [(t, 1.0) for t in network.terms], report.assignment.as_dict(),
            report.action, num_bases)
        coeffs[0] = 1.0 - gamma
        idx = [i for i in range(num_bases) if coeffs[i] != 0.0]
        lp.add_row(idx, coeffs[idx], rhs)
        cuts += 1

    weights = sol.values.copy()
    return SolveResult(
        method="alp", weights=weights, space_constants=None,
        objective=float(np.dot(prep.alphas, weights)), iterations=iterations,
        cuts_per_space=(cuts,), duplicate_cuts=duplicates,
        termination=termination, wall_time=time.perf_counter() - start,
        config=config.to_dict())


def solve_palp(mdp: FactoredMdp, bases, matrix: PartitionMatrix,
               config: SolveConfig | None = None,
               prepared: Prepared | None = None) -> SolveResult:
    """Cutting-plane solve of the partitioned program.

    Every iteration queries all constraint spaces, adds each violated cut,
    and re-solves once.  The per-space constant weights are tied to the
    global constant weight by an equality row.
    """
    config = config or SolveConfig()
    prep = prepared or prepare(mdp, bases)
    network = prep.network
    spaces = build_spaces(matrix, network)
    num_bases = len(prep.bases)
    num_spaces = len(spaces)
    gamma = mdp.gamma

    lp = LinearProgram()
    for b in prep.bases:
        lp.add_variable(f"w_{b.id}", objective=float(prep.alphas[b.id]),
                        lower=-config.weight_bound, upper=config.weight_bound)
    w0k_index = []
    for space in spaces:
        w0k_index.append(lp.add_variable(
            f"w0_space{space.index}", objective=0.0,
            lower=-config.weight_bound, upper=config.weight_bound))
    lp.add_equality([0] + w0k_index, [-1.0] + [1.0] * num_spaces, 0.0)

    orders = [None] * num_spaces
    if config.oracle == "ve":
        orders = [elimination_order(s.terms, config.elimination) for s in spaces]

    start = time.perf_counter()
    cut_keys = set()
    cuts_per_space = [0] * num_spaces
    duplicates = 0
    termination = "iteration-limit"
    iterations = 0
    sol = None
    while iterations < config.max_iterations:
        sol = _solved(lp, config)
        iterations += 1
        w = sol.values[:num_bases]
        w0k = sol.values[num_bases:]
        violated = 0
        added = 0
        for k, space in enumerate(spaces):
            report = palp_space_min(space, w, w0k[k], gamma, mdp.num_actions,
                                    method=config.oracle, order=orders[k],
                                    violation_tol=config.violation_tol)
            if not report.violated:
                continue
            violated += 1
            key = (k, report.assignment.values, report.action)
            if key in cut_keys:
                duplicates += 1
                continue
            cut_keys.add(key)
            coeffs, rhs = _cut_from_report(
                space.weighted_terms, report.assignment.as_dict(),
                report.action, num_bases)
            idx = [i for i in range(num_bases) if coeffs[i] != 0.0]
            lp.add_row(idx + [w0k_index[k]],
                       list(coeffs[idx]) + [1.0 - gamma], rhs)
            cuts_per_space[k] += 1
            added += 1
        if violated == 0:
            termination = "optimal"
            break
        if added == 0:
            termination = "stalled"
            break

    weights = sol.values[:num_bases].copy()
    constants = sol.values[num_bases:].copy()
    return SolveResult(
        method="palp", weights=weights, space_constants=constants,
        objective=float(np.dot(prep.alphas, weights)), iterations=iterations,
        cuts_per_space=tuple(cuts_per_space), duplicate_cuts=duplicates,
        termination=termination, wall_time=time.perf_counter() - start,
        config=config.to_dict())


def solve_sampled_alp(mdp: FactoredMdp, bases, sample_count: int, seed: int,
                      config: SolveConfig | None = None,
                      prepared: Prepared | None = None) -> SolveResult:
    """Constraint-sampling baseline: one program over random (x, a) rows.

    Rows are drawn i.i.d. uniformly over states and actions; the result can
    violate unsampled constraints, so it under-approximates the exact
    program from outside.
    """
    if sample_count < 1:
        raise ValueError("sample_count must be at least 1")
    config = config or SolveConfig()
    prep = prepared or prepare(mdp, bases)
    network = prep.network
    num_bases = len(prep.bases)
    gamma = mdp.gamma

    rng = np.random.default_rng(seed)
    states = rng.integers(0, mdp.card, size=(sample_count, mdp.num_vars))
    actions = rng.integers(0, mdp.num_actions, size=sample_count)

    lp = LinearProgram()
    for b in prep.bases:
        lp.add_variable(f"w_{b.id}", objective=float(prep.alphas[b.id]),
                        lower=-config.weight_bound, upper=config.weight_bound)
    start = time.perf_counter()
    members = [(t, 1.0) for t in network.terms]
    for s in range(sample_count):
        assignment = {v: int(states[s, v]) for v in range(mdp.num_vars)}
        coeffs, rhs = _cut_from_report(members, assignment, int(actions[s]),
                                       num_bases)
        coeffs[0] = 1.0 - gamma
        idx = [i for i in range(num_bases) if coeffs[i] != 0.0]
        lp.add_row(idx, coeffs[idx], rhs)

    sol = _solved(lp, config)
    weights = sol.values.copy()
    return SolveResult(
        method="sampled-alp", weights=weights, space_constants=None,
        objective=float(np.dot(prep.alphas, weights)), iterations=1,
        cuts_per_space=(sample_count,), duplicate_cuts=0,
        termination="optimal", wall_time=time.perf_counter() - start,
        config=config.to_dict(), seed=seed)


# --- exact dynamic programming ----------------------------------------------

@dataclass(frozen=True)
class ValueTable:
    """Flat optimal-value estimates over all joint states."""

    values: np.ndarray
    residual: float

    def __post_init__(self):
        v = np.ascontiguousarray(self.values, dtype=np.float64)
        v.flags.writeable = False
        object.__setattr__(self, "values", v)


def _check_enumerable(mdp: FactoredMdp, guard: int = VALUE_ITERATION_GUARD):
    if mdp.num_states > guard:
        raise ValueError(f"model has {mdp.num_states} joint states, over the "
                         f"{guard} enumeration guard")


def expected_next_values(mdp: FactoredMdp, values_nd: np.ndarray,
                         action: int) -> np.ndarray:
    """E[V(x') | x, a] for every state, contracted one variable at a time.

    `values_nd` has one axis per variable (next-state); the result has one
    axis per variable (current-state).  Intermediate tensors stay small
    because each contraction only introduces the parents of one variable.
    """
    n = mdp.num_vars
    work = values_nd
    labels = list(range(n))  # label v = next value of variable v
    for v in range(n):
        cpd = mdp.cpds[v]
        table = cpd.tables[action].reshape(cpd.parent_card
                                           + (mdp.variables[v].domain_size,))
        cpd_labels = [n + p for p in cpd.parents] + [v]
        out = sorted((set(labels) | set(cpd_labels)) - {v})
        work = np.einsum(work, labels, table, cpd_labels, out)
        labels = out
    # Broadcast over variables that influence nothing.
    shape = [1] * n
    for lab in labels:
        shape[lab - n] = mdp.variables[lab - n].domain_size
    work = work.reshape(shape)
    return np.broadcast_to(work, mdp.card)


def _dense_rewards(mdp: FactoredMdp) -> list[np.ndarray]:
    states = mdp.all_states()
    out = []
    for a in range(mdp.num_actions):
        acc = np.zeros(mdp.num_states)
        for j in range(len(mdp.rewards)):
            acc += mdp.reward_factor(j, a).evaluate(states)
        out.append(acc.reshape(mdp.card))
    return out


def value_iteration(mdp: FactoredMdp, tolerance: float,
                    max_sweeps: int = 1_000_000) -> ValueTable:
    """Iterate the Bellman update until its sup-norm residual is in tolerance."""
    _check_enumerable(mdp)
    rewards = _dense_rewards(mdp)
    v = np.zeros(mdp.card)
    for _ in range(max_sweeps):
        tv = rewards[0] + mdp.gamma * expected_next_values(mdp, v, 0)
        for a in range(1, mdp.num_actions):
            np.maximum(tv, rewards[a] + mdp.gamma * expected_next_values(mdp, v, a),
                       out=tv)
        residual = float(np.max(np.abs(tv - v)))
        if residual <= tolerance:
            return ValueTable(v.reshape(-1), residual)
        v = tv
    raise RuntimeError(f"value iteration did not reach residual {tolerance} "
                       f"in {max_sweeps} sweeps")


# --- partition-quality diagnostic -------------------------------------------

@dataclass(frozen=True)
class ErrorBoundReport:
    """Numeric check of the weighted-L1 error bound for partitioned solves."""

    lhs: float
    rhs: float
    max_norm_fit_error: float
    penalty: float
    num_spaces: int
    satisfied: bool
    fit_weights: np.ndarray
    shifted_weights: np.ndarray
    palp: SolveResult

    def to_dict(self) -> dict:
        return {
            "lhs_weighted_l1_error": self.lhs,
            "rhs_bound": self.rhs,
            "max_norm_fit_error": self.max_norm_fit_error,
            "penalty": self.penalty,
            "num_spaces": self.num_spaces,
            "satisfied": self.satisfied,
        }


def chebyshev_fit(mdp: FactoredMdp, bases, optimal_values: np.ndarray,
                  config: SolveConfig | None = None):
    """Best max-norm fit of the basis combination to a flat value table.

    Solved as a linear program over (weights, error): every state contributes
    two rows bounding the absolute deviation by the error variable.
    """
    from .basis import basis_matrix

    config = config or SolveConfig()
    phi = basis_matrix(mdp, bases)
    num_bases = len(bases)
    lp = LinearProgram()
    for b in bases:
        lp.add_variable(f"w_{b.id}", objective=0.0,
                        lower=-config.weight_bound, upper=config.weight_bound)
    eps = lp.add_variable("max_error", objective=1.0, lower=0.0,
                          upper=config.weight_bound)
    idx = list(range(num_bases)) + [eps]
    for s in range(phi.shape[0]):
        row = phi[s]
        lp.add_row(idx, list(row) + [1.0], float(optimal_values[s]))
        lp.add_row(idx, list(-row) + [1.0], -float(optimal_values[s]))
    sol = solve_lp(lp, config.lp_pivot_tol, config.lp_max_iterations)
    if sol.status != OPTIMAL:
        raise SolveError(sol.status)
    return sol.values[:num_bases].copy(), float(sol.objective)


def error_bound_report(mdp: FactoredMdp, bases, matrix: PartitionMatrix,
                       config: SolveConfig | None = None,
                       prepared: Prepared | None = None) -> ErrorBoundReport:
    """Compare the partitioned solve's weighted-L1 error to its upper bound.

    The bound combines the best achievable max-norm fit with a penalty for
    forcing a feasible full-program solution into the partitioned form.
    """
    from .basis import basis_matrix

    config = config or SolveConfig()
    _check_enumerable(mdp)
    prep = prepared or prepare(mdp, bases)
    gamma = mdp.gamma

    v_star = value_iteration(mdp, 1e-9).values
    fit_weights, fit_error = chebyshev_fit(mdp, bases, v_star, config)

    shifted = fit_weights.copy()
    shifted[0] += (1.0 + gamma) / (1.0 - gamma) * fit_error
    penalty = partition_penalty(matrix, prep.network, shifted, gamma,
                                mdp.num_actions, method="exhaustive")

    palp = solve_palp(mdp, bases, matrix, config, prepared=prep)
    phi = basis_matrix(mdp, bases)
    approx = phi @ palp.weights
    lhs = float(np.mean(np.abs(v_star - approx)))
    k = matrix.num_spaces
    rhs = 2.0 / (1.0 - gamma) * fit_error + k * penalty / (1.0 - gamma)
    return ErrorBoundReport(
        lhs=lhs, rhs=rhs, max_norm_fit_error=fit_error, penalty=penalty,
        num_spaces=k, satisfied=lhs <= rhs, fit_weights=fit_weights,
        shifted_weights=shifted, palp=palp)
