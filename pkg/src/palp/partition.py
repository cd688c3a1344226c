"""Partitioning matrices: splitting the planning constraint into spaces.

A partition distributes the constraint terms over K constraint spaces via a
non-negative K x T matrix with unit column sums.  Each row then yields one
low-dimensional constraint; summing the rows recovers the original
constraint, which makes the partitioned program an inner approximation of
the full one.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .costnet import F_TERM, ConstraintTerm, CostNetwork
from .factors import Scope

COLUMN_SUM_TOL = 1e-12


class PartitionError(ValueError):
    """Raised for invalid partition matrices or partition files."""


@dataclass(frozen=True)
class PartitionMatrix:
    """Sparse rows of (term index, coefficient); zeros are omitted."""

    num_spaces: int
    term_count: int
    rows: tuple[tuple[tuple[int, float], ...], ...]

    def to_dense(self) -> np.ndarray:
        dense = np.zeros((self.num_spaces, self.term_count))
        for k, row in enumerate(self.rows):
            for i, d in row:
                dense[k, i] = d
        return dense


@dataclass(frozen=True)
class ConstraintSpace:
    """One partitioned constraint: member terms, coefficients, and scope."""

    index: int
    members: tuple[tuple[int, float], ...]
    terms: tuple[ConstraintTerm, ...]
    scope: Scope
    card: Scope

    @property
    def weighted_terms(self):
        return tuple((t, d) for (_, d), t in zip(self.members, self.terms))


def validate_partition(matrix: PartitionMatrix, network: CostNetwork) -> list[str]:
    """Check positivity, unit column sums, and full term coverage."""
    out = []
    t = len(network.terms)
    if matrix.term_count != t:
        out.append(f"matrix is over {matrix.term_count} terms, network has {t}")
    if matrix.num_spaces != len(matrix.rows) or matrix.num_spaces < 1:
        out.append(f"matrix declares {matrix.num_spaces} spaces "
                   f"but has {len(matrix.rows)} rows")
    sums = np.zeros(t)
    for k, row in enumerate(matrix.rows):
        seen = set()
        for i, d in row:
            if not 0 <= i < t:
                out.append(f"row {k}: term index {i} out of range")
                continue
            if i in seen:
                out.append(f"row {k}: duplicate entry for term {i}")
            seen.add(i)
            if not d > 0:
                out.append(f"row {k}: coefficient {d!r} for term {i} is not positive")
            sums[i] += d
    for i in range(t):
        if sums[i] == 0.0:
            out.append(f"term {i} appears in no constraint space")
        elif abs(sums[i] - 1.0) > COLUMN_SUM_TOL:
            out.append(f"term {i}: column sums to {sums[i]!r}, expected 1")
    return out


def single_space_partition(network: CostNetwork) -> PartitionMatrix:
    """The trivial partition: one space containing every term with weight 1."""
    row = tuple((i, 1.0) for i in range(len(network.terms)))
    return PartitionMatrix(1, len(network.terms), (row,))


def heuristic_partition(network: CostNetwork) -> PartitionMatrix:
    """One candidate space per basis term: the term plus its network neighbors.

    Candidates whose term sets are contained in another candidate are dropped
    (ties keep the candidate anchored at the lower basis-term index).  Each
    surviving column is split evenly across the spaces that contain it.
    """
    anchors = network.f_term_indices
    if not anchors:
        raise PartitionError("network has no basis terms to anchor spaces on")
    candidates = [frozenset((a,) + network.neighbors(a)) for a in anchors]

    keep = []
    for i, cand in enumerate(candidates):
        subsumed = False
        for j, other in enumerate(candidates):
            if i == j:
                continue
            if cand < other or (cand == other and j < i):
                subsumed = True
                break
        if not subsumed:
            keep.append(cand)

    counts = np.zeros(len(network.terms))
    for cand in keep:
        for i in cand:
            counts[i] += 1
    uncovered = [i for i in range(len(network.terms)) if counts[i] == 0]
    if uncovered:
        raise PartitionError(
            f"terms {uncovered} share no variable with any basis term; "
            "no heuristic space covers them")

    rows = tuple(tuple((i, 1.0 / counts[i]) for i in sorted(cand)) for cand in keep)
    return PartitionMatrix(len(keep), len(network.terms), rows)


def build_spaces(matrix: PartitionMatrix, network: CostNetwork) -> list[ConstraintSpace]:
    """Resolve matrix rows into constraint spaces with concrete terms."""
    problems = validate_partition(matrix, network)
    if problems:
        raise PartitionError("invalid partition: " + "; ".join(problems))
    spaces = []
    for k, row in enumerate(matrix.rows):
        members = tuple(sorted(row))
        terms = tuple(network.terms[i] for i, _ in members)
        sizes: dict[int, int] = {}
        for t in terms:
            for v, c in zip(t.scope, t.card):
                sizes[v] = c
        scope = tuple(sorted(sizes))
        card = tuple(sizes[v] for v in scope)
        spaces.append(ConstraintSpace(k, members, terms, scope, card))
    return spaces


# --- partition files --------------------------------------------------------

def save_partition(matrix: PartitionMatrix, path) -> None:
    doc = {"spaces": [[[i, d] for i, d in row] for row in matrix.rows]}
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def load_partition(path, network: CostNetwork) -> PartitionMatrix:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise PartitionError(f"{path}: line {exc.lineno}: {exc.msg}") from exc
    if not isinstance(doc, dict) or "spaces" not in doc:
        raise PartitionError(f"{path}: expected an object with a 'spaces' field")
    rows = []
    for k, raw in enumerate(doc["spaces"]):
        if not isinstance(raw, list):
            raise PartitionError(f"{path}: spaces[{k}] is not a list")
        row = []
        for entry in raw:
            if (not isinstance(entry, list) or len(entry) != 2
                    or not isinstance(entry[0], int)):
                raise PartitionError(
                    f"{path}: spaces[{k}] entries must be [term_index, coefficient]")
            row.append((entry[0], float(entry[1])))
        rows.append(tuple(row))
    matrix = PartitionMatrix(len(rows), len(network.terms), tuple(rows))
    problems = validate_partition(matrix, network)
    if problems:
        raise PartitionError(f"{path}: invalid partition: " + "; ".join(problems))
    return matrix
