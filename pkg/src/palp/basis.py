"""Basis functions, their backprojections, and relevance weights.

The value function is approximated as a weighted sum of small-scope basis
functions.  For each basis f and action a we precompute two compact factors:

* the expected next-step value E[f(x') | x, a], defined over the union of the
  parent sets of the basis variables, and
* the one-step difference f(x) - gamma * E[f(x') | x, a], the building block
  of every planning constraint.

Basis id 0 is reserved for the constant function 1; its difference factor is
the constant 1 - gamma.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .factors import Factor, Scope, dense_product, union_scope
from .mdp import FactoredMdp


class BasisError(ValueError):
    """Raised for malformed basis sets."""


@dataclass(frozen=True)
class BasisFunction:
    id: int
    factor: Factor


def constant_basis() -> BasisFunction:
    return BasisFunction(0, Factor((), (), [1.0]))


def validate_basis_set(bases) -> list[str]:
    out = []
    ids = [b.id for b in bases]
    if ids != list(range(len(bases))):
        out.append(f"basis ids must be dense 0..{len(bases) - 1}, got {ids}")
    if not bases:
        out.append("basis set is empty")
        return out
    b0 = bases[0]
    if b0.id != 0 or b0.factor.scope != () or b0.factor.table[0] != 1.0:
        out.append("basis 0 must be the constant function 1 with empty scope")
    for b in bases[1:]:
        if not b.factor.scope:
            out.append(f"basis {b.id}: non-constant basis has empty scope")
    return out


@dataclass(frozen=True)
class BackprojectedTerm:
    """Per-action expected-next-value and difference factors for one basis."""

    basis_id: int
    expected_next: tuple[Factor, ...]
    diff: tuple[Factor, ...]


def backproject(mdp: FactoredMdp, basis: BasisFunction) -> BackprojectedTerm:
    """Compute E[f(x')|x,a] and f - gamma*E[f(x')|x,a] on their compact scopes.

    The expectation only involves the CPDs of the basis variables, so its
    scope is the union of their parent sets.
    """
    f = basis.factor
    gamma = mdp.gamma
    n = mdp.num_vars
    for v in f.scope:
        if not 0 <= v < n:
            raise BasisError(f"basis {basis.id}: scope variable {v} not in model")

    if not f.scope:
        g = Factor((), (), [float(f.table[0])])
        d = Factor((), (), [(1.0 - gamma) * float(f.table[0])])
        acts = mdp.num_actions
        return BackprojectedTerm(basis.id, (g,) * acts, (d,) * acts)

    shifted = Factor(tuple(n + v for v in f.scope), f.card, f.table)
    expected = []
    diffs = []
    for a in range(mdp.num_actions):
        cpd_factors = [mdp.cpd_factor(v, a) for v in f.scope]
        scope, card = union_scope(cpd_factors + [shifted])
        joint = dense_product(cpd_factors + [shifted], scope, card)
        next_axes = tuple(i for i, v in enumerate(scope) if v >= n)
        g_table = joint.sum(axis=next_axes) if next_axes else joint
        g_scope = tuple(v for v in scope if v < n)
        g_card = tuple(c for v, c in zip(scope, card) if v < n)
        g = Factor(g_scope, g_card, np.asarray(g_table).reshape(-1))

        d_scope, d_card = union_scope([f, g])
        d_table = f.aligned(d_scope, d_card) - gamma * g.aligned(d_scope, d_card)
        expected.append(g)
        diffs.append(Factor(d_scope, d_card, d_table.reshape(-1)))
    return BackprojectedTerm(basis.id, tuple(expected), tuple(diffs))


def backproject_all(mdp: FactoredMdp, bases) -> list[BackprojectedTerm]:
    return [backproject(mdp, b) for b in bases]


# --- relevance weights ------------------------------------------------------

@dataclass(frozen=True)
class RelevanceConfig:
    """Relevance weights of a basis set under a product state density."""

    density: str
    weights: np.ndarray

    def __post_init__(self):
        w = np.ascontiguousarray(self.weights, dtype=np.float64)
        w.flags.writeable = False
        object.__setattr__(self, "weights", w)


def relevance_weight(basis: BasisFunction) -> float:
    """Expected basis value under independent uniform variable marginals."""
    return float(basis.factor.table.mean())


def relevance_weights(bases) -> RelevanceConfig:
    return RelevanceConfig("uniform-product",
                           np.array([relevance_weight(b) for b in bases]))


def evaluate_vw(bases, weights, x) -> float:
    """The approximate value sum_i w_i f_i(x) at one complete state."""
    weights = np.asarray(weights, dtype=np.float64)
    if weights.shape != (len(bases),):
        raise BasisError(f"{len(weights)} weights for {len(bases)} basis functions")
    values = np.asarray(x, dtype=np.int64)
    total = 0.0
    for b, w in zip(bases, weights):
        total += w * b.factor.value(values[list(b.factor.scope)])
    return float(total)


def basis_matrix(mdp: FactoredMdp, bases) -> np.ndarray:
    """Dense (num_states, num_bases) evaluation of every basis function."""
    states = mdp.all_states()
    cols = [b.factor.evaluate(states) for b in bases]
    return np.stack(cols, axis=1)


# --- benchmark presets ------------------------------------------------------

def singleton_basis(mdp: FactoredMdp) -> list[BasisFunction]:
    """Constant plus one indicator-style basis x_v per variable."""
    bases = [constant_basis()]
    for v in range(mdp.num_vars):
        d = mdp.variables[v].domain_size
        bases.append(BasisFunction(len(bases), Factor((v,), (d,), np.arange(d))))
    return bases


def singleton_pairwise_basis(mdp: FactoredMdp, arrows) -> list[BasisFunction]:
    """Singleton preset plus one x_i * x_j basis per directed connection."""
    bases = singleton_basis(mdp)
    for (i, j) in arrows:
        di = mdp.variables[i].domain_size
        dj = mdp.variables[j].domain_size
        scope = (i, j) if i < j else (j, i)
        card = (di, dj) if i < j else (dj, di)
        vals = np.arange(card[0])[:, None] * np.arange(card[1])[None, :]
        bases.append(BasisFunction(len(bases), Factor(scope, card, vals.reshape(-1))))
    return bases


BASIS_PRESETS = ("singleton", "singleton-pairwise")


def basis_preset(mdp: FactoredMdp, name: str, arrows=None) -> list[BasisFunction]:
    if name == "singleton":
        return singleton_basis(mdp)
    if name == "singleton-pairwise":
        if arrows is None:
            raise BasisError("singleton-pairwise preset needs the connection list")
        return singleton_pairwise_basis(mdp, arrows)
    raise BasisError(f"unknown basis preset {name!r} (choose from {BASIS_PRESETS})")
