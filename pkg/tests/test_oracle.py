import numpy as np
import pytest

from palp.basis import basis_preset
from palp.costnet import CostNetwork, elimination_order
from palp.oracle import (
    OracleError,
    alp_constraint_min,
    exhaustive_min,
    min_constraint_ve,
    palp_space_min,
    partition_penalty,
)
from palp.partition import build_spaces, heuristic_partition, single_space_partition
from palp.solvers import SolveConfig, prepare, solve_alp
from palp import bench

from conftest import brute_force_min_constraint
from test_costnet import synthetic_term


def zeroed(term):
    return (term, 0.0)


def test_zero_coefficients_zero_rewards():
    term = synthetic_term("basis", 1, (0, 1), num_actions=2, value=3.0)
    report = min_constraint_ve([zeroed(term)], 0.0, 2, order=(0, 1))
    assert report.value == 0.0 and not report.violated
    report = exhaustive_min([zeroed(term)], 0.0, 2)
    assert report.value == 0.0 and not report.violated


def test_ring6_w_zero_reaches_minus_max_reward(ring6):
    mdp, _ = ring6
    prep = prepare(mdp, basis_preset(mdp, "singleton"))
    w = np.zeros(7)
    for method in ("ve", "exhaustive"):
        report = alp_constraint_min(prep.network, w, mdp.gamma,
                                    mdp.num_actions, method=method)
        assert report.value == pytest.approx(-7.0, abs=1e-12)
        assert report.violated


def test_ve_matches_exhaustive_on_ring(ring6):
    mdp, meta = ring6
    prep = prepare(mdp, basis_preset(mdp, "singleton-pairwise", meta.arrows))
    order = elimination_order(prep.network.terms)
    rng = np.random.default_rng(100)
    for _ in range(25):
        w = rng.uniform(-10, 10, len(prep.bases))
        got = alp_constraint_min(prep.network, w, mdp.gamma, mdp.num_actions,
                                 method="ve", order=order)
        ref = alp_constraint_min(prep.network, w, mdp.gamma, mdp.num_actions,
                                 method="exhaustive")
        assert got.value == pytest.approx(ref.value, abs=1e-9)
        # the reported point attains the reported value
        members = [(t, w[t.index] if t.kind == "basis" else 1.0)
                   for t in prep.network.terms]
        direct = sum(c * t.evaluate_at(got.assignment.as_dict(), got.action)
                     for t, c in members) + (1 - mdp.gamma) * w[0]
        assert got.value == pytest.approx(direct, abs=1e-12)


def test_ve_matches_pure_python_scan():
    rng = np.random.default_rng(7)
    terms = [synthetic_term("basis", 1, (0, 1), num_actions=2),
             synthetic_term("basis", 2, (1, 2), num_actions=2),
             synthetic_term("reward", 0, (2,), num_actions=2)]
    # randomize tables
    randomized = []
    for t in terms:
        factors = tuple(
            type(f)(f.scope, f.card, rng.uniform(-2, 2, f.size))
            for f in t.factors)
        randomized.append(type(t)(t.kind, t.index, t.scope, t.card, factors))
    members = [(t, 1.5 if t.kind == "basis" else 1.0) for t in randomized]
    ref_value, ref_values, ref_action = brute_force_min_constraint(members, 0.25, 2)
    order = elimination_order([t for t, _ in members])
    got = min_constraint_ve(members, 0.25, 2, order)
    assert got.value == pytest.approx(ref_value, abs=1e-12)
    ex = exhaustive_min(members, 0.25, 2)
    assert ex.value == pytest.approx(ref_value, abs=1e-12)
    assert ex.assignment.values == ref_values and ex.action == ref_action


def test_offset_shifts_value_exactly():
    term = synthetic_term("basis", 1, (0, 1), num_actions=2, value=-1.0)
    base = min_constraint_ve([(term, 2.0)], 0.0, 2, order=(0, 1))
    shifted = min_constraint_ve([(term, 2.0)], 0.75, 2, order=(0, 1))
    assert shifted.value == base.value + 0.75


def test_order_validation_and_empty_space():
    term = synthetic_term("basis", 1, (0, 1))
    with pytest.raises(OracleError):
        min_constraint_ve([(term, 1.0)], 0.0, 1, order=(0,))
    with pytest.raises(OracleError):
        min_constraint_ve([], 0.0, 1, order=())


def test_exhaustive_guard():
    terms = [(synthetic_term("basis", i + 1, (i,)), 1.0) for i in range(21)]
    with pytest.raises(OracleError):
        exhaustive_min(terms, 0.0, 1)


def test_single_space_equals_full_oracle(ring6):
    mdp, _ = ring6
    prep = prepare(mdp, basis_preset(mdp, "singleton"))
    matrix = single_space_partition(prep.network)
    space = build_spaces(matrix, prep.network)[0]
    rng = np.random.default_rng(3)
    for _ in range(5):
        w = rng.uniform(-3, 3, 7)
        full = alp_constraint_min(prep.network, w, mdp.gamma, mdp.num_actions,
                                  method="exhaustive")
        per = palp_space_min(space, w, w[0], mdp.gamma, mdp.num_actions,
                             method="exhaustive")
        assert per.value == pytest.approx(full.value, abs=1e-12)
        assert per.violated == full.violated


def test_palp_space_min_matches_exhaustive_on_grid(grid33):
    mdp, _ = grid33
    prep = prepare(mdp, basis_preset(mdp, "singleton"))
    spaces = build_spaces(heuristic_partition(prep.network), prep.network)
    rng = np.random.default_rng(4)
    for _ in range(5):
        w = rng.uniform(-4, 4, len(prep.bases))
        for space in spaces[:4]:
            got = palp_space_min(space, w, 0.3, mdp.gamma, mdp.num_actions,
                                 method="ve")
            ref = palp_space_min(space, w, 0.3, mdp.gamma, mdp.num_actions,
                                 method="exhaustive")
            assert got.value == pytest.approx(ref.value, abs=1e-9)


def test_penalty_nonpositive_when_plainly_feasible(ring6):
    mdp, _ = ring6
    prep = prepare(mdp, basis_preset(mdp, "singleton"))
    matrix = heuristic_partition(prep.network)
    # Large constant weight, zero structure: every row is slack.
    w = np.zeros(7)
    w[0] = 2 * 7 / (1 - mdp.gamma)
    penalty = partition_penalty(matrix, prep.network, w, mdp.gamma,
                                mdp.num_actions)
    assert penalty <= 1e-9


def test_penalty_single_space_is_negated_constraint_minimum(ring4):
    mdp, _ = ring4
    bases = basis_preset(mdp, "singleton")
    prep = prepare(mdp, bases)
    alp = solve_alp(mdp, bases, SolveConfig(), prepared=prep)
    matrix = single_space_partition(prep.network)
    penalty = partition_penalty(matrix, prep.network, alp.weights, mdp.gamma,
                                mdp.num_actions)
    full = alp_constraint_min(prep.network, alp.weights, mdp.gamma,
                              mdp.num_actions, method="exhaustive")
    assert penalty == pytest.approx(-full.value, abs=1e-12)
    assert penalty <= 1e-9  # feasible solutions have no negative rows


def test_penalty_matches_brute_force_scan(ring4):
    mdp, _ = ring4
    bases = basis_preset(mdp, "singleton")
    prep = prepare(mdp, bases)
    alp = solve_alp(mdp, bases, SolveConfig(), prepared=prep)
    matrix = heuristic_partition(prep.network)
    spaces = build_spaces(matrix, prep.network)
    w = alp.weights
    share = w[0] / len(spaces)
    worst = -np.inf
    states = mdp.all_states()
    for space in spaces:
        for a in range(mdp.num_actions):
            rows = np.full(len(states), (1 - mdp.gamma) * share)
            for t, d in space.weighted_terms:
                coeff = d * w[t.index] if t.kind == "basis" else d
                rows += coeff * t.factors[a].evaluate(states)
            worst = max(worst, -rows.min())
    got = partition_penalty(matrix, prep.network, w, mdp.gamma, mdp.num_actions)
    assert got == pytest.approx(worst, abs=1e-9)
