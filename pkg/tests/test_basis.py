import itertools

import numpy as np
import pytest

from palp.basis import (
    BasisFunction,
    backproject,
    basis_preset,
    constant_basis,
    evaluate_vw,
    relevance_weight,
    relevance_weights,
    singleton_basis,
    singleton_pairwise_basis,
    validate_basis_set,
)
from palp.factors import Factor
from palp.mdp import transition_prob
from palp import bench

from conftest import make_two_machine_mdp, random_mdp


def brute_expected_next(mdp, basis, x, a):
    """Exhaustive next-state expectation over the full joint successor space."""
    total = 0.0
    for xn in mdp.all_states():
        p = transition_prob(mdp, x, a, xn)
        total += p * basis.factor.value(xn[list(basis.factor.scope)])
    return total


def test_constant_basis_backprojection():
    mdp = make_two_machine_mdp(gamma=0.9)
    term = backproject(mdp, constant_basis())
    for a in range(mdp.num_actions):
        assert term.expected_next[a].scope == ()
        assert term.expected_next[a].table[0] == pytest.approx(1.0)
        assert term.diff[a].table[0] == pytest.approx(0.1)


def test_backprojection_matches_exhaustive_expectation():
    mdp = make_two_machine_mdp()
    basis = BasisFunction(1, Factor((0,), (2,), [0.0, 1.0]))
    term = backproject(mdp, basis)
    for x in mdp.all_states():
        for a in range(mdp.num_actions):
            g = term.expected_next[a]
            got = g.value(x[list(g.scope)])
            assert got == pytest.approx(brute_expected_next(mdp, basis, x, a),
                                        abs=1e-12)


def test_ring_backprojection_scope_is_predecessor_and_self(ring6):
    mdp, _ = ring6
    for i in range(6):
        basis = BasisFunction(1, Factor((i,), (2,), [0.0, 1.0]))
        term = backproject(mdp, basis)
        for a in range(mdp.num_actions):
            assert term.expected_next[a].scope == tuple(sorted(((i - 1) % 6, i)))


def test_diff_matches_flat_definition_on_random_models():
    rng = np.random.default_rng(21)
    for _ in range(5):
        mdp = random_mdp(rng, num_vars=3)
        scope = (0, 2)
        card = tuple(mdp.variables[v].domain_size for v in scope)
        table = rng.uniform(-1, 1, int(np.prod(card)))
        basis = BasisFunction(1, Factor(scope, card, table))
        term = backproject(mdp, basis)
        for x in mdp.all_states():
            for a in range(mdp.num_actions):
                d = term.diff[a]
                got = d.value(x[list(d.scope)])
                expect = (basis.factor.value(x[list(scope)])
                          - mdp.gamma * brute_expected_next(mdp, basis, x, a))
                assert got == pytest.approx(expect, abs=1e-10)


def test_relevance_weights():
    assert relevance_weight(constant_basis()) == 1.0
    single = BasisFunction(1, Factor((0,), (2,), [0.0, 1.0]))
    assert relevance_weight(single) == pytest.approx(0.5)
    pair = BasisFunction(2, Factor((0, 1), (2, 2), [0.0, 0.0, 0.0, 1.0]))
    assert relevance_weight(pair) == pytest.approx(0.25)


def test_relevance_invariant_under_scope_permutation():
    rng = np.random.default_rng(3)
    table = rng.uniform(0, 1, 6).reshape(2, 3)
    a = BasisFunction(1, Factor((0, 1), (2, 3), table.reshape(-1)))
    b = BasisFunction(1, Factor((1, 0), (3, 2), table.T.reshape(-1)))
    assert relevance_weight(a) == pytest.approx(relevance_weight(b), abs=1e-12)


def test_relevance_config_kind():
    bases = singleton_basis(make_two_machine_mdp())
    config = relevance_weights(bases)
    assert config.density == "uniform-product"
    assert config.weights[0] == 1.0


def test_evaluate_vw():
    mdp = make_two_machine_mdp()
    bases = singleton_basis(mdp)
    assert evaluate_vw(bases, np.zeros(3), [1, 1]) == 0.0
    assert evaluate_vw(bases, [1.0, 0.0, 0.0], [0, 1]) == 1.0
    rng = np.random.default_rng(8)
    for _ in range(5):
        w = rng.normal(size=3)
        x = rng.integers(0, 2, size=2)
        expect = w[0] + w[1] * x[0] + w[2] * x[1]
        assert evaluate_vw(bases, w, x) == pytest.approx(expect, abs=1e-12)


def test_evaluate_vw_linearity():
    mdp = random_mdp(np.random.default_rng(4), num_vars=3)
    bases = singleton_basis(mdp)
    rng = np.random.default_rng(5)
    for _ in range(10):
        w1 = rng.normal(size=len(bases))
        w2 = rng.normal(size=len(bases))
        a, b = rng.normal(size=2)
        x = [int(rng.integers(0, v.domain_size)) for v in mdp.variables]
        left = evaluate_vw(bases, a * w1 + b * w2, x)
        right = a * evaluate_vw(bases, w1, x) + b * evaluate_vw(bases, w2, x)
        assert left == pytest.approx(right, abs=1e-10)


def test_evaluate_vw_dimension_mismatch():
    bases = singleton_basis(make_two_machine_mdp())
    with pytest.raises(ValueError):
        evaluate_vw(bases, [1.0, 2.0], [0, 0])


def test_presets(ring6):
    mdp, meta = ring6
    singles = basis_preset(mdp, "singleton")
    assert len(singles) == 7 and validate_basis_set(singles) == []
    pairs = basis_preset(mdp, "singleton-pairwise", meta.arrows)
    assert len(pairs) == 7 + len(meta.arrows)
    assert validate_basis_set(pairs) == []
    # one pairwise basis per connection
    pair_scopes = sorted(b.factor.scope for b in pairs[7:])
    assert pair_scopes == sorted(tuple(sorted(a)) for a in meta.arrows)
    with pytest.raises(ValueError):
        basis_preset(mdp, "nonsense")


def test_validate_basis_set_flags_problems():
    bases = [BasisFunction(0, Factor((), (), [2.0]))]
    assert validate_basis_set(bases)
    bases = [constant_basis(), BasisFunction(1, Factor((), (), [1.0]))]
    assert any("empty scope" in p for p in validate_basis_set(bases))
