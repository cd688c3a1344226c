"""Factored MDP model: DBN transition model, additive rewards, persistence.

The transition model stores one conditional probability table per state
variable and action; the reward is a sum of small-scope factors.  Models are
immutable after construction and serialize to a JSON document whose layout is
documented in the repository README.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .factors import (
    Assignment,
    Factor,
    Scope,
    Variable,
    enumerate_states,
    row_major_strides,
)

CPD_ROW_TOL = 1e-12


class ModelError(ValueError):
    """Raised for malformed model files or invalid models."""


@dataclass(frozen=True)
class Cpd:
    """P(child' | parents, action), one row per parent assignment.

    `tables` has shape (num_actions, num_parent_assignments, child_domain);
    parent assignments are indexed row-major in `parents` order with the
    per-parent domain sizes given by `parent_card`.
    """

    child: int
    parents: Scope
    parent_card: Scope
    tables: np.ndarray

    def __post_init__(self):
        tables = np.ascontiguousarray(self.tables, dtype=np.float64)
        tables.flags.writeable = False
        object.__setattr__(self, "tables", tables)
        object.__setattr__(self, "parents", tuple(int(p) for p in self.parents))
        object.__setattr__(self, "parent_card", tuple(int(c) for c in self.parent_card))

    def row(self, action: int, parent_values) -> np.ndarray:
        if not self.parents:
            return self.tables[action, 0]
        idx = int(np.dot(np.asarray(parent_values, dtype=np.int64),
                         row_major_strides(self.parent_card)))
        return self.tables[action, idx]

    def factor_for_action(self, action: int, child_axis: int, child_card: int) -> Factor:
        """The CPD as a factor over parents + a (possibly relabeled) child axis."""
        scope = self.parents + (child_axis,)
        card = self.parent_card + (child_card,)
        return Factor(scope, card, self.tables[action].reshape(-1))


@dataclass(frozen=True)
class RewardFactor:
    """One additive reward term; `tables` has shape (num_actions, table_size)."""

    scope: Scope
    tables: np.ndarray

    def __post_init__(self):
        tables = np.ascontiguousarray(self.tables, dtype=np.float64)
        tables.flags.writeable = False
        object.__setattr__(self, "tables", tables)
        object.__setattr__(self, "scope", tuple(int(v) for v in self.scope))

    def factor_for_action(self, action: int, card: Scope) -> Factor:
        return Factor(self.scope, card, self.tables[action])


@dataclass(frozen=True)
class FactoredMdp:
    variables: tuple[Variable, ...]
    actions: tuple[str, ...]
    cpds: tuple[Cpd, ...]
    rewards: tuple[RewardFactor, ...]
    gamma: float

    def __post_init__(self):
        object.__setattr__(self, "variables", tuple(self.variables))
        object.__setattr__(self, "actions", tuple(self.actions))
        object.__setattr__(self, "cpds", tuple(self.cpds))
        object.__setattr__(self, "rewards", tuple(self.rewards))

    @property
    def num_vars(self) -> int:
        return len(self.variables)

    @property
    def num_actions(self) -> int:
        return len(self.actions)

    @property
    def card(self) -> tuple[int, ...]:
        return tuple(v.domain_size for v in self.variables)

    @property
    def num_states(self) -> int:
        return int(np.prod(self.card)) if self.variables else 1

    def scope_card(self, scope: Scope) -> tuple[int, ...]:
        return tuple(self.variables[v].domain_size for v in scope)

    def action_index(self, action) -> int:
        if isinstance(action, str):
            try:
                return self.actions.index(action)
            except ValueError:
                raise ModelError(f"unknown action {action!r}") from None
        a = int(action)
        if not 0 <= a < self.num_actions:
            raise ModelError(f"action index {a} out of range")
        return a

    def cpd_factor(self, var: int, action: int, child_axis: int | None = None) -> Factor:
        """CPD of `var` as a factor; the child axis defaults to num_vars + var,
        which keeps next-state variables distinct from current-state ones."""
        if child_axis is None:
            child_axis = self.num_vars + var
        return self.cpds[var].factor_for_action(
            self.action_index(action), child_axis, self.variables[var].domain_size)

    def reward_factor(self, index: int, action) -> Factor:
        rf = self.rewards[index]
        return rf.factor_for_action(self.action_index(action), self.scope_card(rf.scope))

    def all_states(self) -> np.ndarray:
        return enumerate_states(self.card)


def _full_values(mdp: FactoredMdp, x) -> np.ndarray:
    """Coerce a complete state to a value vector indexed by variable id."""
    if isinstance(x, Assignment):
        if sorted(x.scope) != list(range(mdp.num_vars)):
            raise ModelError("assignment does not cover every variable exactly once")
        values = np.empty(mdp.num_vars, dtype=np.int64)
        for v, val in zip(x.scope, x.values):
            values[v] = val
    else:
        values = np.asarray(x, dtype=np.int64)
        if values.shape != (mdp.num_vars,):
            raise ModelError(f"expected {mdp.num_vars} values, got shape {values.shape}")
    for v, val in enumerate(values):
        if not 0 <= val < mdp.variables[v].domain_size:
            raise ModelError(f"value {val} out of range for variable {v}")
    return values


def full_reward(mdp: FactoredMdp, x, action) -> float:
    """Total immediate reward: the sum of all local reward terms."""
    values = _full_values(mdp, x)
    a = mdp.action_index(action)
    total = 0.0
    for j in range(len(mdp.rewards)):
        f = mdp.reward_factor(j, a)
        total += f.value(values[list(f.scope)])
    return total


def transition_prob(mdp: FactoredMdp, x, action, x_next) -> float:
    """Probability of moving from x to x_next: the product of per-variable CPDs."""
    values = _full_values(mdp, x)
    next_values = _full_values(mdp, x_next)
    a = mdp.action_index(action)
    prob = 1.0
    for v, cpd in enumerate(mdp.cpds):
        row = cpd.row(a, values[list(cpd.parents)])
        prob *= float(row[next_values[v]])
    return prob


def validate(mdp: FactoredMdp) -> list[str]:
    """Check every model invariant; returns one message per violation."""
    out: list[str] = []
    n = mdp.num_vars
    for i, var in enumerate(mdp.variables):
        if var.id != i:
            out.append(f"variables[{i}]: id {var.id} is not dense (expected {i})")
        if var.domain_size < 2:
            out.append(f"variable {var.name!r}: domain_size {var.domain_size} < 2")
    if not mdp.actions:
        out.append("model has no actions")
    if len(set(mdp.actions)) != len(mdp.actions):
        out.append("action names are not unique")
    if not (0.0 <= mdp.gamma < 1.0):
        out.append(f"gamma {mdp.gamma} outside [0, 1)")

    if len(mdp.cpds) != n:
        out.append(f"model has {len(mdp.cpds)} CPDs for {n} variables")
    seen_children = set()
    for cpd in mdp.cpds:
        name = f"cpd for variable {cpd.child}"
        if cpd.child in seen_children:
            out.append(f"{name}: duplicate child")
        seen_children.add(cpd.child)
        if not 0 <= cpd.child < n:
            out.append(f"{name}: child out of range")
            continue
        if len(set(cpd.parents)) != len(cpd.parents):
            out.append(f"{name}: duplicate parents")
        bad_parent = [p for p in cpd.parents if not 0 <= p < n]
        if bad_parent:
            out.append(f"{name}: parent ids {bad_parent} out of range")
            continue
        if cpd.parent_card != mdp.scope_card(cpd.parents):
            out.append(f"{name}: parent_card {cpd.parent_card} does not match "
                       f"variable domains {mdp.scope_card(cpd.parents)}")
            continue
        d = mdp.variables[cpd.child].domain_size
        rows = int(np.prod(mdp.scope_card(cpd.parents))) if cpd.parents else 1
        if cpd.tables.shape != (mdp.num_actions, rows, d):
            out.append(f"{name}: tables shape {cpd.tables.shape} != "
                       f"({mdp.num_actions}, {rows}, {d})")
            continue
        if not np.all(np.isfinite(cpd.tables)):
            out.append(f"{name}: non-finite entries")
            continue
        if np.any(cpd.tables < 0):
            a, r = np.argwhere(cpd.tables < 0)[0][:2]
            out.append(f"{name}: negative probability in action {mdp.actions[a]} row {r}")
        sums = cpd.tables.sum(axis=2)
        bad = np.argwhere(np.abs(sums - 1.0) > CPD_ROW_TOL)
        if bad.size:
            a, r = bad[0]
            out.append(f"{name}: action {mdp.actions[a]} row {r} sums to {sums[a, r]!r}")
    missing = set(range(n)) - seen_children
    if missing:
        out.append(f"variables {sorted(missing)} have no CPD")

    for j, rf in enumerate(mdp.rewards):
        name = f"reward factor {j}"
        if len(set(rf.scope)) != len(rf.scope):
            out.append(f"{name}: duplicate scope variables")
        bad_scope = [v for v in rf.scope if not 0 <= v < n]
        if bad_scope:
            out.append(f"{name}: scope ids {bad_scope} out of range")
            continue
        size = int(np.prod(mdp.scope_card(rf.scope))) if rf.scope else 1
        if rf.tables.shape != (mdp.num_actions, size):
            out.append(f"{name}: tables shape {rf.tables.shape} != "
                       f"({mdp.num_actions}, {size})")
            continue
        if not np.all(np.isfinite(rf.tables)):
            out.append(f"{name}: non-finite entries")
    return out


# --- persistence ----------------------------------------------------------

MODEL_SCHEMA_VERSION = 1


def save_model(mdp: FactoredMdp, path) -> None:
    doc = {
        "schema_version": MODEL_SCHEMA_VERSION,
        "variables": [{"name": v.name, "domain_size": v.domain_size}
                      for v in mdp.variables],
        "actions": list(mdp.actions),
        "cpds": [{"child": c.child,
                  "parents": list(c.parents),
                  "tables_per_action": [t.reshape(-1).tolist() for t in c.tables]}
                 for c in mdp.cpds],
        "rewards": [{"scope": list(r.scope),
                     "tables_per_action": [t.tolist() for t in r.tables]}
                    for r in mdp.rewards],
        "gamma": mdp.gamma,
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def _require(doc, key, kind, where):
    if key not in doc:
        raise ModelError(f"{where}: missing field {key!r}")
    value = doc[key]
    if kind is float:
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            raise ModelError(f"{where}.{key}: expected a number, got {type(value).__name__}")
        return float(value)
    if not isinstance(value, kind):
        raise ModelError(f"{where}.{key}: expected {kind.__name__}, got {type(value).__name__}")
    return value


def load_model(path) -> FactoredMdp:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ModelError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    if not isinstance(doc, dict):
        raise ModelError(f"{path}: top level must be an object")

    where = str(path)
    raw_vars = _require(doc, "variables", list, where)
    variables = []
    for i, entry in enumerate(raw_vars):
        w = f"{where}: variables[{i}]"
        variables.append(Variable(
            id=i,
            name=_require(entry, "name", str, w),
            domain_size=int(_require(entry, "domain_size", int, w)),
        ))
    actions = tuple(_require(doc, "actions", list, where))
    num_actions = len(actions)

    def table_block(entry, rows, cols, w):
        raw = _require(entry, "tables_per_action", list, w)
        if len(raw) != num_actions:
            raise ModelError(f"{w}.tables_per_action: {len(raw)} tables for "
                             f"{num_actions} actions")
        out = np.empty((num_actions, rows * cols), dtype=np.float64)
        for a, tab in enumerate(raw):
            if not isinstance(tab, list) or len(tab) != rows * cols:
                got = len(tab) if isinstance(tab, list) else type(tab).__name__
                raise ModelError(f"{w}.tables_per_action[{a}]: expected "
                                 f"{rows * cols} numbers, got {got}")
            out[a] = tab
        return out

    card = [v.domain_size for v in variables]
    cpds = []
    for i, entry in enumerate(_require(doc, "cpds", list, where)):
        w = f"{where}: cpds[{i}]"
        child = int(_require(entry, "child", int, w))
        parents = tuple(int(p) for p in _require(entry, "parents", list, w))
        if not 0 <= child < len(variables):
            raise ModelError(f"{w}: child {child} out of range")
        for p in parents:
            if not 0 <= p < len(variables):
                raise ModelError(f"{w}: parent {p} out of range")
        parent_card = tuple(card[p] for p in parents)
        rows = int(np.prod(parent_card)) if parents else 1
        tables = table_block(entry, rows, card[child], w)
        cpds.append(Cpd(child, parents, parent_card,
                        tables.reshape(num_actions, rows, card[child])))

    rewards = []
    for j, entry in enumerate(_require(doc, "rewards", list, where)):
        w = f"{where}: rewards[{j}]"
        scope = tuple(int(v) for v in _require(entry, "scope", list, w))
        for v in scope:
            if not 0 <= v < len(variables):
                raise ModelError(f"{w}: scope variable {v} out of range")
        size = int(np.prod([card[v] for v in scope])) if scope else 1
        rewards.append(RewardFactor(scope, table_block(entry, 1, size, w)))

    mdp = FactoredMdp(
        variables=tuple(variables),
        actions=actions,
        cpds=tuple(sorted(cpds, key=lambda c: c.child)),
        rewards=tuple(rewards),
        gamma=_require(doc, "gamma", float, where),
    )
    problems = validate(mdp)
    if problems:
        raise ModelError(f"{path}: invalid model: " + "; ".join(problems))
    return mdp


def models_equal(a: FactoredMdp, b: FactoredMdp) -> bool:
    """Exact (bit-level) equality of two models."""
    if (a.variables != b.variables or a.actions != b.actions
            or a.gamma != b.gamma or len(a.rewards) != len(b.rewards)):
        return False
    for ca, cb in zip(a.cpds, b.cpds):
        if ca.child != cb.child or ca.parents != cb.parents:
            return False
        if not np.array_equal(ca.tables, cb.tables):
            return False
    for ra, rb in zip(a.rewards, b.rewards):
        if ra.scope != rb.scope or not np.array_equal(ra.tables, rb.tables):
            return False
    return True
