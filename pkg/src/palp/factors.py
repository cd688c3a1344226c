"""Variables, assignments, and tabular factors.

A Factor is a real-valued table over an ordered scope of finite variables,
flattened row-major in scope order (the last scope variable varies fastest).
Every table in this package (CPD rows, rewards, basis functions,
backprojections, elimination messages) uses this one layout, so the indexing
rule lives here and nowhere else.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

Scope = tuple[int, ...]


@dataclass(frozen=True)
class Variable:
    """A finite state variable taking values 0 .. domain_size-1."""

    id: int
    name: str
    domain_size: int


@dataclass(frozen=True)
class Assignment:
    """Values for an ordered subset of variables (no duplicates in scope)."""

    scope: Scope
    values: tuple[int, ...]

    def __post_init__(self):
        if len(self.scope) != len(self.values):
            raise ValueError("assignment scope and values differ in length")
        if len(set(self.scope)) != len(self.scope):
            raise ValueError("assignment scope has duplicate variables")

    def as_dict(self) -> dict[int, int]:
        return dict(zip(self.scope, self.values))


def row_major_strides(card: Scope) -> np.ndarray:
    """Strides such that flat index = values . strides for row-major tables."""
    strides = np.ones(len(card), dtype=np.int64)
    for i in range(len(card) - 2, -1, -1):
        strides[i] = strides[i + 1] * card[i + 1]
    return strides


def enumerate_states(card) -> np.ndarray:
    """All joint assignments of the given domain sizes, one per row.

    Rows are in row-major (lexicographic) order, matching flat table indices.
    """
    card = tuple(int(c) for c in card)
    if not card:
        return np.zeros((1, 0), dtype=np.int64)
    return np.indices(card).reshape(len(card), -1).T.astype(np.int64)


class Factor:
    """A table over an ordered variable scope.

    `card` gives the domain size of each scope variable; `table` is the flat
    row-major table of length prod(card).
    """

    __slots__ = ("scope", "card", "table")

    def __init__(self, scope, card, table):
        scope = tuple(int(v) for v in scope)
        card = tuple(int(c) for c in card)
        if len(scope) != len(card):
            raise ValueError("scope and card differ in length")
        if len(set(scope)) != len(scope):
            raise ValueError(f"factor scope has duplicate variables: {scope}")
        table = np.ascontiguousarray(table, dtype=np.float64).reshape(-1)
        expected = int(np.prod(card)) if card else 1
        if table.size != expected:
            raise ValueError(
                f"table has {table.size} entries, scope {scope} needs {expected}"
            )
        if not np.all(np.isfinite(table)):
            raise ValueError("factor table contains non-finite entries")
        table.flags.writeable = False
        object.__setattr__(self, "scope", scope)
        object.__setattr__(self, "card", card)
        object.__setattr__(self, "table", table)

    def __setattr__(self, name, value):  # immutable after construction
        raise AttributeError("Factor is immutable")

    def __repr__(self):
        return f"Factor(scope={self.scope}, card={self.card})"

    @property
    def size(self) -> int:
        return self.table.size

    def value(self, values) -> float:
        """Table entry for one assignment of the factor's own scope."""
        if not self.scope:
            return float(self.table[0])
        idx = int(np.dot(np.asarray(values, dtype=np.int64),
                         row_major_strides(self.card)))
        return float(self.table[idx])

    def value_at(self, assignment: dict[int, int]) -> float:
        """Table entry for an assignment given as a var -> value mapping."""
        return self.value([assignment[v] for v in self.scope])

    def evaluate(self, states: np.ndarray) -> np.ndarray:
        """Vectorized lookup; `states` has one column per variable id."""
        if not self.scope:
            return np.full(states.shape[0], self.table[0])
        idx = states[:, list(self.scope)] @ row_major_strides(self.card)
        return self.table[idx]

    def aligned(self, scope: Scope, card: Scope) -> np.ndarray:
        """Broadcast the table to a superset scope; returns a read-only view
        shaped `card` (axes in `scope` order)."""
        missing = set(self.scope) - set(scope)
        if missing:
            raise ValueError(f"target scope is missing variables {missing}")
        if scope == self.scope:
            return self.table.reshape(card if card else ())
        pos = {v: i for i, v in enumerate(scope)}
        order = sorted(range(len(self.scope)), key=lambda i: pos[self.scope[i]])
        nd = self.table.reshape(self.card if self.card else ()).transpose(order)
        own = set(self.scope)
        shape = tuple(card[i] if scope[i] in own else 1 for i in range(len(scope)))
        return np.broadcast_to(nd.reshape(shape), card)


def union_scope(factors) -> tuple[Scope, Scope]:
    """Sorted union of factor scopes with consistent domain sizes."""
    sizes: dict[int, int] = {}
    for f in factors:
        for v, c in zip(f.scope, f.card):
            if sizes.setdefault(v, c) != c:
                raise ValueError(f"variable {v} has conflicting domain sizes")
    scope = tuple(sorted(sizes))
    return scope, tuple(sizes[v] for v in scope)


def dense_sum(factors, scope: Scope, card: Scope, coefficients=None) -> np.ndarray:
    """Sum of (optionally scaled) factors broadcast over a common scope."""
    acc = np.zeros(card if card else (), dtype=np.float64)
    if coefficients is None:
        coefficients = [1.0] * len(factors)
    for f, c in zip(factors, coefficients):
        acc += c * f.aligned(scope, card)
    return acc


def dense_product(factors, scope: Scope, card: Scope) -> np.ndarray:
    """Pointwise product of factors broadcast over a common scope."""
    acc = np.ones(card if card else (), dtype=np.float64)
    for f in factors:
        acc = acc * f.aligned(scope, card)
    return acc
