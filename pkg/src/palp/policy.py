"""Greedy policies and Monte Carlo policy evaluation.

A greedy policy picks argmax_a [R(x,a) + gamma * sum_i w_i E[f_i(x')|x,a]]
from the cached compact backprojections, so action selection never touches
the joint state space.  Rollout evaluation simulates whole batches of
trajectories at once; every rollout index owns a deterministic substream of
the seed, which makes reports reproducible and lets different policies be
compared on identical random draws.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .basis import backproject_all
from .factors import row_major_strides
from .mdp import FactoredMdp


class PolicyError(ValueError):
    """Raised for models missing what a policy needs."""


class GreedyPolicy:
    """One-step lookahead policy for a weight vector over a basis set."""

    def __init__(self, mdp: FactoredMdp, bases, weights, backprojections=None):
        weights = np.asarray(weights, dtype=np.float64)
        if weights.shape != (len(bases),):
            raise PolicyError(f"{weights.shape[0]} weights for {len(bases)} bases")
        self.mdp = mdp
        self.bases = tuple(bases)
        self.weights = weights
        self.backprojections = tuple(backprojections or backproject_all(mdp, bases))

    def q_values(self, states: np.ndarray) -> np.ndarray:
        """Action values for a batch of states, shape (len(states), |A|)."""
        mdp = self.mdp
        q = np.zeros((states.shape[0], mdp.num_actions))
        for a in range(mdp.num_actions):
            acc = np.zeros(states.shape[0])
            for j in range(len(mdp.rewards)):
                acc += mdp.reward_factor(j, a).evaluate(states)
            future = np.zeros(states.shape[0])
            for bp, w in zip(self.backprojections, self.weights):
                if w != 0.0:
                    future += w * bp.expected_next[a].evaluate(states)
            q[:, a] = acc + mdp.gamma * future
        return q

    def batch_actions(self, states: np.ndarray) -> np.ndarray:
        return np.argmax(self.q_values(states), axis=1)  # ties: lowest action id

    def action(self, x) -> int:
        states = np.asarray(x, dtype=np.int64).reshape(1, -1)
        return int(self.batch_actions(states)[0])


class ConstantPolicy:
    """Always plays one fixed action."""

    def __init__(self, mdp: FactoredMdp, action_index: int):
        self.mdp = mdp
        self.action_index = int(action_index)

    def batch_actions(self, states: np.ndarray) -> np.ndarray:
        return np.full(states.shape[0], self.action_index, dtype=np.int64)

    def action(self, x) -> int:
        return self.action_index


def greedy_action(policy, x) -> int:
    """Action of the policy at one complete state; ties pick the lowest id."""
    return policy.action(x)


def server_heuristic_policy(mdp: FactoredMdp, server: int | None) -> ConstantPolicy:
    """Baseline that permanently reboots the designated server machine."""
    if server is None:
        raise PolicyError("model metadata does not designate a server")
    name = f"reboot_{server}"
    if name not in mdp.actions:
        raise PolicyError(f"model has no action {name!r} for the server")
    return ConstantPolicy(mdp, mdp.actions.index(name))


@dataclass(frozen=True)
class EvalReport:
    mean: float
    stderr: float
    rollouts: int
    horizon: int
    seed: int
    initial_state_rule: str
    truncation_bias_bound: float


def max_immediate_reward(mdp: FactoredMdp) -> float:
    """Upper bound on R(x,a): the sum of per-factor maxima."""
    total = 0.0
    for rf in mdp.rewards:
        total += float(rf.tables.max()) if rf.tables.size else 0.0
    return total


def _substream_uniforms(seed: int, rollouts: int, rows: int, cols: int) -> np.ndarray:
    children = np.random.SeedSequence(seed).spawn(rollouts)
    out = np.empty((rollouts, rows, cols))
    for r, child in enumerate(children):
        out[r] = np.random.Generator(np.random.PCG64(child)).random((rows, cols))
    return out


def rollout_eval(mdp: FactoredMdp, policy, rollouts: int = 1000,
                 horizon: int = 300, seed: int = 42,
                 initial_state_rule: str = "all-up") -> EvalReport:
    """Mean discounted return over simulated trajectories.

    All rollouts advance in lockstep; transitions are sampled by inverting
    the per-variable CPD rows against each rollout's own uniform draws.
    """
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    n = mdp.num_vars
    card = np.array(mdp.card)
    uniforms = _substream_uniforms(seed, rollouts, horizon + 1, max(n, 1))

    if initial_state_rule == "all-up":
        states = np.ones((rollouts, n), dtype=np.int64)
    elif initial_state_rule == "uniform":
        states = np.minimum((uniforms[:, 0, :n] * card).astype(np.int64), card - 1)
    else:
        raise ValueError(f"unknown initial state rule {initial_state_rule!r}")

    reward_tables = [rf.tables for rf in mdp.rewards]
    reward_strides = [row_major_strides(mdp.scope_card(rf.scope))
                      for rf in mdp.rewards]
    cpd_strides = [row_major_strides(c.parent_card) for c in mdp.cpds]

    returns = np.zeros(rollouts)
    discount = 1.0
    for t in range(horizon):
        actions = policy.batch_actions(states)
        step_reward = np.zeros(rollouts)
        for j, rf in enumerate(mdp.rewards):
            idx = states[:, list(rf.scope)] @ reward_strides[j] if rf.scope else 0
            step_reward += reward_tables[j][actions, idx]
        returns += discount * step_reward
        discount *= mdp.gamma

        nxt = np.empty_like(states)
        for v, cpd in enumerate(mdp.cpds):
            if cpd.parents:
                pidx = states[:, list(cpd.parents)] @ cpd_strides[v]
            else:
                pidx = np.zeros(rollouts, dtype=np.int64)
            rows = cpd.tables[actions, pidx]
            cum = np.cumsum(rows, axis=1)
            draw = uniforms[:, t + 1, v]
            nxt[:, v] = np.minimum((cum <= draw[:, None]).sum(axis=1),
                                   card[v] - 1)
        states = nxt

    mean = float(returns.mean())
    stderr = float(returns.std(ddof=1) / np.sqrt(rollouts)) if rollouts > 1 else 0.0
    bias = (mdp.gamma ** horizon) * max_immediate_reward(mdp) / (1.0 - mdp.gamma)
    return EvalReport(mean=mean, stderr=stderr, rollouts=rollouts,
                      horizon=horizon, seed=seed,
                      initial_state_rule=initial_state_rule,
                      truncation_bias_bound=float(bias))


def exact_policy_value(mdp: FactoredMdp, policy, tolerance: float = 1e-9) -> np.ndarray:
    """Flat value table of a fixed policy, for calibrating rollout estimates."""
    from .solvers import VALUE_ITERATION_GUARD, _dense_rewards, expected_next_values

    if mdp.num_states > VALUE_ITERATION_GUARD:
        raise ValueError(f"model has {mdp.num_states} joint states, over the "
                         f"{VALUE_ITERATION_GUARD} enumeration guard")
    states = mdp.all_states()
    actions = policy.batch_actions(states)
    rewards = _dense_rewards(mdp)
    flat_rewards = np.stack([r.reshape(-1) for r in rewards])
    r_pi = flat_rewards[actions, np.arange(mdp.num_states)]

    if mdp.num_states <= 4096:
        p_rows = np.ones((mdp.num_states, 1))
        for v, cpd in enumerate(mdp.cpds):
            if cpd.parents:
                pidx = states[:, list(cpd.parents)] @ row_major_strides(cpd.parent_card)
            else:
                pidx = np.zeros(mdp.num_states, dtype=np.int64)
            rows = cpd.tables[actions, pidx]
            p_rows = (p_rows[:, :, None] * rows[:, None, :]).reshape(mdp.num_states, -1)
        system = np.eye(mdp.num_states) - mdp.gamma * p_rows
        return np.linalg.solve(system, r_pi)

    v = np.zeros(mdp.num_states)
    for _ in range(10_000_000):
        ev = np.stack([
            expected_next_values(mdp, v.reshape(mdp.card), a).reshape(-1)
            for a in range(mdp.num_actions)])
        tv = r_pi + mdp.gamma * ev[actions, np.arange(mdp.num_states)]
        if float(np.max(np.abs(tv - v))) <= tolerance:
            return tv
        v = tv
    raise RuntimeError("policy evaluation did not converge")
