import itertools
import math

import numpy as np
import pytest

from palp.lp import (
    INFEASIBLE,
    ITERATION_LIMIT,
    OPTIMAL,
    UNBOUNDED,
    LinearProgram,
    LpError,
    export_lp_text,
    parse_lp_text,
    solve_lp,
)


def vertex_enumeration_min(lp):
    """Independent optimum: enumerate all basic feasible vertices.

    Bounds are treated as ordinary rows.  Requires a bounded feasible region
    (unique minima at vertices); returns (status, objective).
    """
    n = lp.num_variables
    rows = []
    for indices, coeffs, bound in lp.rows:
        dense = np.zeros(n)
        dense[list(indices)] = coeffs
        rows.append((dense, bound))
    for j in range(n):
        if math.isfinite(lp.lower[j]):
            e = np.zeros(n)
            e[j] = 1.0
            rows.append((e, lp.lower[j]))
        if math.isfinite(lp.upper[j]):
            e = np.zeros(n)
            e[j] = -1.0
            rows.append((e, -lp.upper[j]))
    a = np.array([r for r, _ in rows])
    b = np.array([bd for _, bd in rows])
    best = None
    for subset in itertools.combinations(range(len(rows)), n):
        mat = a[list(subset)]
        if abs(np.linalg.det(mat)) < 1e-9:
            continue
        v = np.linalg.solve(mat, b[list(subset)])
        if np.all(a @ v >= b - 1e-9):
            value = float(np.dot(lp.objective, v))
            if best is None or value < best:
                best = value
    if best is None:
        return INFEASIBLE, math.nan
    return OPTIMAL, best


def random_bounded_lp(rng):
    n = int(rng.integers(1, 6))
    lp = LinearProgram()
    lo = rng.uniform(-6, 0, n).round(2)
    up = rng.uniform(0.5, 7, n).round(2)
    c = rng.normal(size=n).round(3)
    for j in range(n):
        lp.add_variable(f"x{j}", float(c[j]), float(lo[j]), float(up[j]))
    budget = 20 if n <= 4 else 12  # keep vertex enumeration affordable
    max_rows = max(0, min(budget - 2 * n, 12))
    # Rows pass through the neighborhood of an interior point so the LP is
    # feasible by construction (bounded by the boxes).
    interior = lo + (up - lo) * rng.uniform(0.2, 0.8, n)
    for _ in range(int(rng.integers(0, max_rows + 1))):
        k = int(rng.integers(1, n + 1))
        idx = sorted(map(int, rng.choice(n, size=k, replace=False)))
        coeffs = rng.normal(size=k).round(3)
        slack = float(rng.uniform(0.0, 2.0))
        lp.add_row(idx, coeffs, float(np.dot(coeffs, interior[idx])) - slack)
    return lp


def test_minimize_single_bound():
    lp = LinearProgram()
    lp.add_variable("v", 1.0)
    lp.add_row([0], [1.0], 3.0)
    sol = solve_lp(lp)
    assert sol.status == OPTIMAL
    assert sol.values[0] == pytest.approx(3.0, abs=1e-12)


def test_two_variable_hand_solve():
    lp = LinearProgram()
    lp.add_variable("v1", 1.0)
    lp.add_variable("v2", 1.0)
    lp.add_row([0], [1.0], 1.0)
    lp.add_row([1], [1.0], 2.0)
    lp.add_row([0, 1], [1.0, 1.0], 4.0)
    sol = solve_lp(lp)
    assert sol.objective == pytest.approx(4.0, abs=1e-12)


def test_unbounded_and_infeasible():
    lp = LinearProgram()
    lp.add_variable("v", -1.0)
    assert solve_lp(lp).status == UNBOUNDED
    lp = LinearProgram()
    lp.add_variable("v", 1.0)
    lp.add_row([0], [1.0], 3.0)
    lp.add_row([0], [-1.0], -2.0)
    assert solve_lp(lp).status == INFEASIBLE
    lp = LinearProgram()
    lp.add_variable("v", 1.0, lower=5.0, upper=1.0)
    assert solve_lp(lp).status == INFEASIBLE


def test_200_random_lps_match_vertex_enumeration():
    rng = np.random.default_rng(2024)
    for _ in range(200):
        lp = random_bounded_lp(rng)
        ref_status, ref_obj = vertex_enumeration_min(lp)
        sol = solve_lp(lp)
        assert sol.status == ref_status == OPTIMAL
        assert sol.objective == pytest.approx(ref_obj, abs=1e-7)


def test_optimal_solutions_satisfy_rows():
    rng = np.random.default_rng(77)
    for _ in range(50):
        lp = random_bounded_lp(rng)
        sol = solve_lp(lp)
        if sol.status != OPTIMAL:
            continue
        for indices, coeffs, bound in lp.rows:
            lhs = float(np.dot(coeffs, sol.values[list(indices)]))
            assert lhs >= bound - 1e-7
        assert np.all(sol.values >= np.array(lp.lower) - 1e-9)
        assert np.all(sol.values <= np.array(lp.upper) + 1e-9)
        assert sol.objective == pytest.approx(
            float(np.dot(lp.objective, sol.values)), abs=1e-9)


def test_duplicate_rows_do_not_change_objective():
    rng = np.random.default_rng(5)
    for _ in range(20):
        lp = random_bounded_lp(rng)
        base = solve_lp(lp)
        if lp.rows:
            lp.rows.extend(lp.rows[:2])
        again = solve_lp(lp)
        assert base.status == again.status
        if base.status == OPTIMAL:
            assert base.objective == pytest.approx(again.objective, abs=1e-9)


def test_determinism():
    rng = np.random.default_rng(9)
    for _ in range(10):
        lp = random_bounded_lp(rng)
        a = solve_lp(lp)
        b = solve_lp(lp)
        assert a.status == b.status
        if a.status == OPTIMAL:
            assert np.array_equal(a.values, b.values)
            assert a.objective == b.objective


def test_free_variable_with_equality():
    lp = LinearProgram()
    lp.add_variable("f", 1.0)  # free
    lp.add_variable("g", 0.0, 0.0, 10.0)
    lp.add_equality([0, 1], [1.0, 1.0], 4.0)
    sol = solve_lp(lp)
    assert sol.status == OPTIMAL
    assert sol.objective == pytest.approx(-6.0, abs=1e-9)  # f = 4 - 10


def test_iteration_limit_status():
    lp = LinearProgram()
    for j in range(4):
        lp.add_variable(f"x{j}", -1.0, 0.0, 10.0)
    for j in range(4):
        lp.add_row([j], [-1.0], -5.0)
    sol = solve_lp(lp, max_iterations=1)
    assert sol.status == ITERATION_LIMIT


def test_add_row_validation():
    lp = LinearProgram()
    lp.add_variable("x", 1.0)
    with pytest.raises(LpError):
        lp.add_row([0, 0], [1.0, 2.0], 0.0)
    with pytest.raises(LpError):
        lp.add_row([1], [1.0], 0.0)
    with pytest.raises(LpError):
        lp.add_row([0], [math.inf], 0.0)
    with pytest.raises(LpError):
        lp.add_variable("x", 0.0)
    with pytest.raises(LpError):
        lp.add_variable("bad name", 0.0)


def test_export_parse_roundtrip(tmp_path):
    rng = np.random.default_rng(31)
    for i in range(10):
        lp = random_bounded_lp(rng)
        path = tmp_path / f"lp{i}.txt"
        export_lp_text(lp, path)
        back = parse_lp_text(path)
        assert back.names == lp.names
        assert back.objective == lp.objective
        assert back.lower == lp.lower and back.upper == lp.upper
        assert back.rows == lp.rows
        a, b = solve_lp(lp), solve_lp(back)
        assert a.status == b.status
        if a.status == OPTIMAL:
            assert a.objective == b.objective


def test_parse_errors(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("nonsense\n")
    with pytest.raises(LpError):
        parse_lp_text(path)
    path.write_text("LP-TEXT 1\nOBJECTIVE\nx not_a_number\n")
    with pytest.raises(LpError) as err:
        parse_lp_text(path)
    assert "line 3" in str(err.value)
