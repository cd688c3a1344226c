"""Constraint-term networks and variable-elimination orderings.

Each planning constraint is a sum of local terms: one weighted difference
term per non-constant basis function and one negated reward term per reward
factor.  The cost network connects two terms whenever their variable scopes
intersect; the induced variable-interaction graph drives elimination
orderings and width estimates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .factors import Factor, Scope
from .mdp import FactoredMdp

F_TERM = "basis"
R_TERM = "reward"


class NetworkError(ValueError):
    """Raised for malformed networks, orders, or term subsets."""


@dataclass(frozen=True)
class ConstraintTerm:
    """One local term of the planning constraint.

    Basis terms carry the per-action difference factors of one basis function
    and a free coefficient slot (the basis weight).  Reward terms carry the
    negated reward factors and a fixed coefficient of one.  All per-action
    factors are aligned to the term's scope (their union).
    """

    kind: str
    index: int
    scope: Scope
    card: Scope
    factors: tuple[Factor, ...]

    def evaluate_at(self, assignment: dict[int, int], action: int) -> float:
        return self.factors[action].value([assignment[v] for v in self.scope])


def _aligned_term(kind, index, per_action_factors) -> ConstraintTerm:
    from .factors import union_scope

    scope, card = union_scope(per_action_factors)
    aligned = tuple(
        Factor(scope, card, np.ascontiguousarray(f.aligned(scope, card)).reshape(-1))
        for f in per_action_factors)
    return ConstraintTerm(kind, index, scope, card, aligned)


def basis_term(backprojection) -> ConstraintTerm:
    if backprojection.basis_id == 0:
        raise NetworkError("the constant basis is handled by constant offsets, "
                           "not by a network term")
    return _aligned_term(F_TERM, backprojection.basis_id, backprojection.diff)


def reward_term(mdp: FactoredMdp, index: int) -> ConstraintTerm:
    negated = []
    for a in range(mdp.num_actions):
        f = mdp.reward_factor(index, a)
        negated.append(Factor(f.scope, f.card, -f.table))
    return _aligned_term(R_TERM, index, negated)


class CostNetwork:
    """Ordered constraint terms plus the shared-variable adjacency graph."""

    def __init__(self, terms):
        self.terms = tuple(terms)
        edges = []
        scopes = [set(t.scope) for t in self.terms]
        for i in range(len(scopes)):
            for j in range(i + 1, len(scopes)):
                if scopes[i] & scopes[j]:
                    edges.append((i, j))
        self.edges = tuple(edges)
        self._adjacency = {i: set() for i in range(len(self.terms))}
        for i, j in self.edges:
            self._adjacency[i].add(j)
            self._adjacency[j].add(i)

    def __len__(self):
        return len(self.terms)

    def neighbors(self, i: int) -> tuple[int, ...]:
        return tuple(sorted(self._adjacency[i]))

    @property
    def f_term_indices(self) -> tuple[int, ...]:
        return tuple(i for i, t in enumerate(self.terms) if t.kind == F_TERM)

    @property
    def r_term_indices(self) -> tuple[int, ...]:
        return tuple(i for i, t in enumerate(self.terms) if t.kind == R_TERM)

    def scope_union(self, indices=None) -> Scope:
        if indices is None:
            indices = range(len(self.terms))
        out = set()
        for i in indices:
            out.update(self.terms[i].scope)
        return tuple(sorted(out))

    def to_dict(self) -> dict:
        """Debug dump of nodes, scopes, and edges."""
        return {
            "terms": [{"kind": t.kind, "index": t.index, "scope": list(t.scope)}
                      for t in self.terms],
            "edges": [list(e) for e in self.edges],
        }


def build_cost_network(mdp: FactoredMdp, backprojections) -> CostNetwork:
    """Basis terms in basis-id order followed by reward terms in reward order.

    The constant basis is excluded; its contribution enters constraints as a
    constant offset.
    """
    terms = [basis_term(bp) for bp in backprojections if bp.basis_id != 0]
    terms.sort(key=lambda t: t.index)
    terms.extend(reward_term(mdp, j) for j in range(len(mdp.rewards)))
    return CostNetwork(terms)


# --- elimination orderings --------------------------------------------------

def _interaction_graph(terms) -> dict[int, set[int]]:
    adj: dict[int, set[int]] = {}
    for t in terms:
        for v in t.scope:
            adj.setdefault(v, set())
        for a in t.scope:
            for b in t.scope:
                if a != b:
                    adj[a].add(b)
    return adj


def elimination_order(terms, heuristic: str = "min-degree") -> tuple[int, ...]:
    """Greedy elimination order over the terms' variable-interaction graph.

    Ties always break toward the lowest variable id, so identical inputs give
    identical orders.
    """
    if not terms:
        raise NetworkError("cannot order an empty term subset")
    if heuristic not in ("min-degree", "min-fill"):
        raise NetworkError(f"unknown elimination heuristic {heuristic!r}")
    adj = _interaction_graph(terms)
    order = []
    while adj:
        if heuristic == "min-degree":
            v = min(adj, key=lambda u: (len(adj[u]), u))
        else:
            def fill(u):
                nbrs = list(adj[u])
                count = 0
                for i in range(len(nbrs)):
                    for j in range(i + 1, len(nbrs)):
                        if nbrs[j] not in adj[nbrs[i]]:
                            count += 1
                return count
            v = min(adj, key=lambda u: (fill(u), u))
        nbrs = adj.pop(v)
        for a in nbrs:
            adj[a].discard(v)
            for b in nbrs:
                if a != b:
                    adj[a].add(b)
        order.append(v)
    return tuple(order)


def induced_width(order, terms) -> int:
    """Largest intermediate-factor scope minus one when eliminating in order."""
    union = set()
    for t in terms:
        union.update(t.scope)
    if sorted(order) != sorted(union):
        raise NetworkError(f"order {order} is not a permutation of the scope "
                           f"union {tuple(sorted(union))}")
    scopes = [set(t.scope) for t in terms]
    width = 0
    for v in order:
        group = [s for s in scopes if v in s]
        if not group:
            continue
        cluster = set().union(*group)
        width = max(width, len(cluster) - 1)
        scopes = [s for s in scopes if v not in s]
        cluster.discard(v)
        if cluster:
            scopes.append(cluster)
    return width
