"""Separation oracles: locate the most violated planning constraint.

Both oracles minimize a weighted sum of local terms plus a constant offset
over all (state, action) pairs of a constraint space.  The elimination oracle
runs min-sum message passing with argmin back-pointers along a supplied
variable order; the exhaustive oracle enumerates the space and exists so the
elimination route can be checked against an independent implementation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .costnet import F_TERM
from .factors import Assignment, row_major_strides, union_scope
from .mdp import FactoredMdp
from .partition import ConstraintSpace, PartitionMatrix, build_spaces

VIOLATION_TOL = 1e-9
EXHAUSTIVE_GUARD = 2 ** 20


class OracleError(ValueError):
    """Raised for order mismatches, empty spaces, or oversized enumerations."""


@dataclass(frozen=True)
class ViolationReport:
    """Minimizer of one constraint space's left-hand side.

    `value` is the constraint LHS re-evaluated directly at the returned
    point, so it is exact regardless of how the minimizer was found.
    """

    assignment: Assignment
    action: int
    value: float
    violated: bool


def _aligned_nd(scope, card, table, target_scope, target_card):
    """Broadcast a flat table onto a superset scope without Factor overhead."""
    pos = {v: i for i, v in enumerate(target_scope)}
    order = sorted(range(len(scope)), key=lambda i: pos[scope[i]])
    nd = table.reshape(card).transpose(order)
    own = set(scope)
    shape = tuple(target_card[i] if target_scope[i] in own else 1
                  for i in range(len(target_scope)))
    return np.broadcast_to(nd.reshape(shape), target_card)


def _aligned_stack(scope, card, stack, target_scope, target_card):
    """Like _aligned_nd but with a leading action axis on `stack`."""
    acts = stack.shape[0]
    pos = {v: i for i, v in enumerate(target_scope)}
    order = sorted(range(len(scope)), key=lambda i: pos[scope[i]])
    nd = stack.reshape((acts,) + card).transpose([0] + [o + 1 for o in order])
    own = set(scope)
    shape = (acts,) + tuple(target_card[i] if target_scope[i] in own else 1
                            for i in range(len(target_scope)))
    return np.broadcast_to(nd.reshape(shape), (acts,) + tuple(target_card))


def _stacked_members(members, num_actions):
    """Scaled (scope, card, table stack) triples plus per-action constants.

    Every constraint term already stores one aligned factor per action, so
    all actions can be eliminated in a single pass with a leading action
    axis.
    """
    funcs = []
    const = np.zeros(num_actions)
    for term, coeff in members:
        stack = coeff * np.stack([f.table for f in term.factors])
        if not term.scope:
            const += stack[:, 0]
        else:
            funcs.append((term.scope, term.card, stack))
    return funcs, const


def _evaluate_members(members, assignment: dict[int, int], action: int) -> float:
    total = 0.0
    for term, coeff in members:
        total += coeff * term.evaluate_at(assignment, action)
    return total


def _ve_minimum(funcs, const, order, num_actions):
    """Min-sum elimination with a leading action axis.

    `funcs` holds (scope, card, stack) triples whose stacks carry one table
    per action; all actions are eliminated simultaneously.  Returns the
    per-action minima, the best action (ties to the lowest id), and that
    action's argmin as a var -> value dict.
    """
    active = list(funcs)
    const = const.copy()
    records = []
    for v in order:
        group = [f for f in active if v in f[0]]
        active = [f for f in active if v not in f[0]]
        if not group:
            records.append((v, None, None, None))
            continue
        sizes: dict[int, int] = {}
        for f_scope, f_card, _ in group:
            for u, c in zip(f_scope, f_card):
                sizes[u] = c
        scope = tuple(sorted(sizes))
        card = tuple(sizes[u] for u in scope)
        combined = np.zeros((num_actions,) + card)
        for f_scope, f_card, f_stack in group:
            combined += _aligned_stack(f_scope, f_card, f_stack, scope, card)
        axis = scope.index(v) + 1
        msg = combined.min(axis=axis)
        arg = combined.argmin(axis=axis)
        rest = tuple(u for u in scope if u != v)
        rest_card = tuple(c for u, c in zip(scope, card) if u != v)
        records.append((v, rest, rest_card, arg.reshape(num_actions, -1)))
        if rest:
            active.append((rest, rest_card, msg.reshape(num_actions, -1)))
        else:
            const += msg.reshape(num_actions)
    for _, _, stack in active:  # leftovers can only be empty-scope constants
        const += stack[:, 0]

    best_action = int(np.argmin(const))  # ties: lowest action id
    assignment: dict[int, int] = {}
    for v, rest, rest_card, arg in reversed(records):
        if rest is None:
            assignment[v] = 0
            continue
        idx = 0
        if rest:
            idx = int(np.dot([assignment[u] for u in rest], row_major_strides(rest_card)))
        assignment[v] = int(arg[best_action, idx])
    return const, best_action, assignment


def min_constraint_ve(members, offset: float, num_actions: int, order,
                      violation_tol: float = VIOLATION_TOL) -> ViolationReport:
    """Most violated constraint via elimination along `order`.

    `members` pairs each constraint term with its concrete coefficient;
    `offset` is the constant contribution (typically from constant-basis
    weights).  Ties prefer the lower variable value at each back-pointer and
    the lower action id.
    """
    members = list(members)
    if not members:
        raise OracleError("constraint space has no terms")
    scope_union = set()
    for term, _ in members:
        scope_union.update(term.scope)
    if sorted(order) != sorted(scope_union):
        raise OracleError(f"elimination order {tuple(order)} is not a permutation "
                          f"of the space scope {tuple(sorted(scope_union))}")

    funcs, const = _stacked_members(members, num_actions)
    _, best_action, best_assignment = _ve_minimum(funcs, const, order, num_actions)

    scope = tuple(sorted(scope_union))
    assignment = Assignment(scope, tuple(best_assignment[v] for v in scope))
    exact = _evaluate_members(members, assignment.as_dict(), best_action) + offset
    return ViolationReport(assignment, best_action, exact, exact < -violation_tol)


def exhaustive_min(members, offset: float, num_actions: int,
                   violation_tol: float = VIOLATION_TOL,
                   guard: int = EXHAUSTIVE_GUARD) -> ViolationReport:
    """Reference oracle: brute-force minimum over the whole space.

    Ties break to the lexicographically smallest assignment, then the lowest
    action id.
    """
    members = list(members)
    if not members:
        raise OracleError("constraint space has no terms")
    scope, card = union_scope([t.factors[0] for t, _ in members])
    size = int(np.prod(card)) if card else 1
    if size > guard:
        raise OracleError(f"space has {size} assignments, over the "
                          f"{guard} enumeration guard")

    funcs, const = _stacked_members(members, num_actions)
    table = np.broadcast_to(const[:, None], (num_actions, size)).copy()
    for f_scope, f_card, f_stack in funcs:
        table += _aligned_stack(f_scope, f_card, f_stack, scope, card).reshape(
            num_actions, size)
    # State-major argmin: ties resolve to the smallest assignment first, then
    # the lowest action id.
    flat = int(np.argmin(table.T))
    best_flat, best_action = divmod(flat, num_actions)
    values = np.unravel_index(best_flat, card) if card else ()
    assignment = Assignment(scope, tuple(int(u) for u in values))
    exact = _evaluate_members(members, assignment.as_dict(), best_action) + offset
    return ViolationReport(assignment, best_action, exact, exact < -violation_tol)


# --- wrappers over networks and spaces --------------------------------------

def _space_members(space: ConstraintSpace, weights):
    members = []
    for term, d in space.weighted_terms:
        coeff = d * float(weights[term.index]) if term.kind == F_TERM else d
        members.append((term, coeff))
    return members


def alp_constraint_min(network, weights, gamma: float, num_actions: int,
                       method: str = "ve", order=None,
                       violation_tol: float = VIOLATION_TOL) -> ViolationReport:
    """Most violated constraint of the full (unpartitioned) program.

    `weights` is indexed by basis id; index 0 contributes the constant offset
    (1 - gamma) * w_0.
    """
    members = [(t, float(weights[t.index]) if t.kind == F_TERM else 1.0)
               for t in network.terms]
    offset = (1.0 - gamma) * float(weights[0])
    return _dispatch(members, offset, num_actions, method, order, violation_tol)


def palp_space_min(space: ConstraintSpace, weights, space_constant: float,
                   gamma: float, num_actions: int, method: str = "ve",
                   order=None, violation_tol: float = VIOLATION_TOL) -> ViolationReport:
    """Minimum of one partitioned constraint row.

    Basis terms are scaled by d * w_i, reward terms by d, and the space's
    constant weight contributes the offset (1 - gamma) * w0_k.
    """
    members = _space_members(space, weights)
    offset = (1.0 - gamma) * float(space_constant)
    return _dispatch(members, offset, num_actions, method, order, violation_tol)


def _dispatch(members, offset, num_actions, method, order, violation_tol):
    if method == "exhaustive":
        return exhaustive_min(members, offset, num_actions, violation_tol)
    if method != "ve":
        raise OracleError(f"unknown oracle method {method!r}")
    if order is None:
        from .costnet import elimination_order

        order = elimination_order([t for t, _ in members])
    return min_constraint_ve(members, offset, num_actions, order, violation_tol)


def partition_penalty(matrix: PartitionMatrix, network, weights, gamma: float,
                      num_actions: int, method: str = "exhaustive") -> float:
    """Worst per-space deficit of a feasible full-program solution.

    Each row is evaluated with the constant weight split evenly across the
    spaces; the penalty is the largest amount by which any row goes negative
    (negative penalty means every row already holds).
    """
    spaces = build_spaces(matrix, network)
    even_share = float(weights[0]) / len(spaces)
    worst = -np.inf
    for space in spaces:
        report = palp_space_min(space, weights, even_share, gamma, num_actions,
                                method=method)
        worst = max(worst, -report.value)
    return float(worst)
