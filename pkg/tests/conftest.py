"""Shared fixtures: hand-built tiny models and random model generators."""

from __future__ import annotations

import numpy as np
import pytest

from palp.factors import Factor, Variable
from palp.mdp import Cpd, FactoredMdp, RewardFactor
from palp import bench


def make_two_machine_mdp(gamma=0.9):
    """Two machines in a loop with hand-written CPDs; used as a known oracle.

    Machine 0 depends on both machines, machine 1 only on itself.  Actions:
    reboot_0, noop.
    """
    variables = (Variable(0, "m0", 2), Variable(1, "m1", 2))
    actions = ("reboot_0", "noop")
    # P(m0'=1 | m0, m1): rows over (m0, m1) in row-major order.
    p0_noop = np.array([[0.9, 0.1], [0.8, 0.2], [0.7, 0.3], [0.2, 0.8]])
    p0_reboot = np.array([[0.05, 0.95]] * 4)
    cpd0 = Cpd(0, (0, 1), (2, 2), np.stack([p0_reboot, p0_noop]))
    # P(m1'=1 | m1)
    p1 = np.array([[0.6, 0.4], [0.3, 0.7]])
    cpd1 = Cpd(1, (1,), (2,), np.stack([p1, p1]))
    rewards = (
        RewardFactor((0,), np.array([[0.0, 2.0], [0.0, 2.0]])),
        RewardFactor((1,), np.array([[0.0, 1.0], [0.0, 1.0]])),
    )
    return FactoredMdp(variables, actions, (cpd0, cpd1), rewards, gamma)


def make_single_machine_mdp(gamma=0.9, reboot_up=1.0, noop_stay_up=0.8):
    """One machine, reward 1 while up; reboot brings it up with certainty."""
    variables = (Variable(0, "m0", 2),)
    actions = ("reboot_0", "noop")
    p_reboot = np.array([[1.0 - reboot_up, reboot_up]] * 2)
    p_noop = np.array([[1.0, 0.0], [1.0 - noop_stay_up, noop_stay_up]])
    cpd = Cpd(0, (0,), (2,), np.stack([p_reboot, p_noop]))
    rewards = (RewardFactor((0,), np.array([[0.0, 1.0], [0.0, 1.0]])),)
    return FactoredMdp(variables, actions, (cpd,), rewards, gamma)


def make_zero_reward_mdp(gamma=0.9):
    mdp = make_single_machine_mdp(gamma)
    rewards = (RewardFactor((0,), np.zeros((2, 2))),)
    return FactoredMdp(mdp.variables, mdp.actions, mdp.cpds, rewards, gamma)


def random_mdp(rng, num_vars=3, max_domain=3, max_parents=2, num_actions=2,
               num_rewards=2, gamma=None):
    """Random small factored MDP with normalized CPDs."""
    domains = rng.integers(2, max_domain + 1, size=num_vars)
    variables = tuple(Variable(i, f"x{i}", int(domains[i])) for i in range(num_vars))
    actions = tuple(f"a{k}" for k in range(num_actions))
    cpds = []
    for v in range(num_vars):
        others = [u for u in range(num_vars) if u != v]
        extra = rng.choice(others, size=min(len(others), int(rng.integers(0, max_parents))),
                           replace=False) if others else []
        parents = tuple(sorted({v, *map(int, extra)}))
        parent_card = tuple(int(domains[p]) for p in parents)
        rows = int(np.prod(parent_card))
        raw = rng.uniform(0.05, 1.0, size=(num_actions, rows, int(domains[v])))
        cpds.append(Cpd(v, parents, parent_card, raw / raw.sum(axis=2, keepdims=True)))
    rewards = []
    for _ in range(num_rewards):
        k = int(rng.integers(1, min(2, num_vars) + 1))
        scope = tuple(sorted(map(int, rng.choice(num_vars, size=k, replace=False))))
        size = int(np.prod([domains[v] for v in scope]))
        rewards.append(RewardFactor(scope, rng.uniform(-2, 2, size=(num_actions, size))))
    g = gamma if gamma is not None else float(rng.uniform(0.7, 0.97))
    return FactoredMdp(variables, actions, tuple(cpds), tuple(rewards), g)


@pytest.fixture(scope="session")
def ring6():
    return bench.generate(bench.ring(6))


@pytest.fixture(scope="session")
def ring4():
    return bench.generate(bench.ring(4))


@pytest.fixture(scope="session")
def grid33():
    return bench.generate(bench.grid(3, 3))


def brute_force_min_constraint(members, offset, num_actions):
    """Independent minimizer: pure-python scan over all assignments/actions."""
    import itertools

    sizes = {}
    for term, _ in members:
        for v, c in zip(term.scope, term.card):
            sizes[v] = c
    scope = tuple(sorted(sizes))
    best = None
    for values in itertools.product(*(range(sizes[v]) for v in scope)):
        assignment = dict(zip(scope, values))
        for a in range(num_actions):
            total = offset
            for term, coeff in members:
                total += coeff * term.evaluate_at(assignment, a)
            if best is None or total < best[0]:
                best = (total, values, a)
    return best
