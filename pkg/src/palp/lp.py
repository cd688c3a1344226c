"""A small, self-contained linear-program type and simplex solver.

Programs are stated as: minimize c.v subject to sparse rows coeffs.v >= bound
plus optional per-variable box bounds.  Equalities are entered as paired
inequalities.  The solver is a dense two-phase primal simplex with Bland's
anti-cycling rule and native bound handling (nonbasic variables rest at a
bound), so box bounds never inflate the working numbers and identical
programs always produce identical solutions.

A plain-text export/import format (OBJECTIVE / CONSTRAINTS / BOUNDS sections,
17-significant-digit coefficients) is provided for use with external tools.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

PIVOT_TOL = 1e-10
_PIVOT_MIN = 1e-9  # smallest acceptable pivot element magnitude
FEAS_TOL = 1e-7
MAX_ITERATIONS = 10 ** 6

OPTIMAL = "optimal"
UNBOUNDED = "unbounded"
INFEASIBLE = "infeasible"
ITERATION_LIMIT = "iteration-limit"

_AT_LOWER, _AT_UPPER, _FREE, _BASIC = 0, 1, 2, 3


class LpError(ValueError):
    """Raised for malformed programs or export/import problems."""


@dataclass
class LinearProgram:
    names: list[str] = field(default_factory=list)
    objective: list[float] = field(default_factory=list)
    lower: list[float] = field(default_factory=list)
    upper: list[float] = field(default_factory=list)
    rows: list[tuple[tuple[int, ...], tuple[float, ...], float]] = field(default_factory=list)

    @property
    def num_variables(self) -> int:
        return len(self.names)

    def add_variable(self, name: str, objective: float = 0.0,
                     lower: float = -math.inf, upper: float = math.inf) -> int:
        if any(ch.isspace() for ch in name):
            raise LpError(f"variable name {name!r} contains whitespace")
        if name in self.names:
            raise LpError(f"duplicate variable name {name!r}")
        if not math.isfinite(objective):
            raise LpError(f"objective coefficient for {name!r} is not finite")
        self.names.append(name)
        self.objective.append(float(objective))
        self.lower.append(float(lower))
        self.upper.append(float(upper))
        return len(self.names) - 1

    def add_row(self, indices, coeffs, bound: float) -> None:
        """Add the constraint sum(coeffs * v[indices]) >= bound."""
        indices = tuple(int(i) for i in indices)
        coeffs = tuple(float(c) for c in coeffs)
        if len(indices) != len(coeffs):
            raise LpError("row indices and coefficients differ in length")
        for i in indices:
            if not 0 <= i < self.num_variables:
                raise LpError(f"row references unknown variable index {i}")
        if len(set(indices)) != len(indices):
            raise LpError("row has duplicate variable indices")
        if not all(math.isfinite(c) for c in coeffs) or not math.isfinite(bound):
            raise LpError("row has non-finite coefficients")
        self.rows.append((indices, coeffs, float(bound)))

    def add_equality(self, indices, coeffs, value: float) -> None:
        """Equality as two inequalities."""
        self.add_row(indices, coeffs, value)
        self.add_row(indices, tuple(-c for c in coeffs), -value)


@dataclass(frozen=True)
class LpSolution:
    values: np.ndarray | None
    objective: float
    status: str
    iterations: int


class _Simplex:
    """Dense bounded-variable primal simplex over equations A x = b.

    Column data stays at the caller's scale because bounds are handled by
    nonbasic statuses instead of shifted variables or bound rows.
    """

    def __init__(self, a, b, lower, upper, pivot_tol):
        self.a = a                      # (m, total) original, never mutated
        self.b = b                      # (m,)
        self.lower = lower
        self.upper = upper
        self.tol = pivot_tol
        self.m, self.total = a.shape
        self.status = np.empty(self.total, dtype=np.int8)
        for j in range(self.total):
            if math.isfinite(lower[j]):
                self.status[j] = _AT_LOWER
            elif math.isfinite(upper[j]):
                self.status[j] = _AT_UPPER
            else:
                self.status[j] = _FREE
        self.basis = np.zeros(self.m, dtype=np.int64)  # filled by the caller
        self.tableau = None             # B^-1 A, (m, total)
        self.bbar = None                # basic variable values, (m,)
        self.reduced = None             # reduced costs, (total,)
        self.allowed = np.ones(self.total, dtype=bool)

    def nonbasic_value(self, j: int) -> float:
        s = self.status[j]
        if s == _AT_LOWER:
            return self.lower[j]
        if s == _AT_UPPER:
            return self.upper[j]
        return 0.0

    def nonbasic_vector(self) -> np.ndarray:
        x = np.zeros(self.total)
        for j in range(self.total):
            if self.status[j] != _BASIC:
                x[j] = self.nonbasic_value(j)
        return x

    def refactor(self, cost) -> bool:
        """Recompute tableau, basic values, and reduced costs from originals."""
        bmat = self.a[:, self.basis]
        try:
            self.tableau = np.linalg.solve(bmat, self.a)
            rhs = self.b - self.a @ self.nonbasic_vector()
            bbar = np.linalg.solve(bmat, rhs)
            # One step of iterative refinement keeps basic values accurate.
            bbar += np.linalg.solve(bmat, rhs - bmat @ bbar)
            self.bbar = bbar
        except np.linalg.LinAlgError:
            return False
        if not (np.all(np.isfinite(self.tableau)) and np.all(np.isfinite(self.bbar))):
            return False
        basic_cost = cost[self.basis]
        self.reduced = cost - basic_cost @ self.tableau
        self.reduced[self.basis] = 0.0
        return True

    def _entering(self, bland: bool):
        d = self.reduced
        improving = self.allowed & (
            ((self.status == _AT_LOWER) & (d < -self.tol))
            | ((self.status == _AT_UPPER) & (d > self.tol))
            | ((self.status == _FREE) & (np.abs(d) > self.tol)))
        if bland:
            hits = np.flatnonzero(improving)
            if hits.size == 0:
                return -1, 0.0
            j = int(hits[0])  # Bland: lowest improving index
        else:
            score = np.where(improving, np.abs(d), 0.0)
            j = int(np.argmax(score))  # Dantzig; argmax keeps the lowest tie
            if score[j] == 0.0:
                return -1, 0.0
        if self.status[j] == _AT_UPPER or (self.status[j] == _FREE and d[j] > 0):
            return j, -1.0
        return j, 1.0

    def _ratio(self, enter, direction, bland):
        """Largest step along the entering direction.

        Near-tied blocking rows resolve to the largest pivot magnitude for
        stability, except under Bland's rule where the smallest basis id
        must win for the anti-cycling guarantee.
        """
        rate = -direction * self.tableau[:, enter]
        t = np.full(self.m, math.inf)
        dec = rate < -_PIVOT_MIN
        inc = rate > _PIVOT_MIN
        if np.any(dec):
            t[dec] = (self.bbar[dec] - self.lower[self.basis[dec]]) / -rate[dec]
        if np.any(inc):
            t[inc] = (self.upper[self.basis[inc]] - self.bbar[inc]) / rate[inc]
        np.maximum(t, 0.0, out=t)
        best_t = float(t.min()) if self.m else math.inf
        best_row = -1
        if math.isfinite(best_t):
            near = np.flatnonzero(t <= best_t + self.tol)
            if bland:
                best_row = int(near[np.argmin(self.basis[near])])
            else:
                best_row = int(near[np.argmax(np.abs(rate[near]))])
            best_t = float(t[best_row])
        flip_t = math.inf
        if math.isfinite(self.lower[enter]) and math.isfinite(self.upper[enter]):
            flip_t = self.upper[enter] - self.lower[enter]
        return best_t, best_row, flip_t

    def _apply_pivot(self, enter, direction, row, step, cost):
        col = self.tableau[:, enter].copy()
        self.bbar -= direction * step * col
        entering_value = self.nonbasic_value(enter) + direction * step
        leaving = self.basis[row]
        rate = -direction * col[row]
        self.status[leaving] = _AT_LOWER if rate < 0 else _AT_UPPER
        if not math.isfinite(self.nonbasic_value(leaving)):
            self.status[leaving] = _AT_UPPER if self.status[leaving] == _AT_LOWER else _AT_LOWER
        self.basis[row] = enter
        self.status[enter] = _BASIC
        self.bbar[row] = entering_value

        pivot = self.tableau[row, enter]
        self.tableau[row] /= pivot
        factors = self.tableau[:, enter].copy()
        factors[row] = 0.0
        self.tableau -= np.outer(factors, self.tableau[row])
        self.tableau[:, enter] = 0.0
        self.tableau[row, enter] = 1.0
        d = self.reduced[enter]
        if d != 0.0:
            self.reduced = self.reduced - d * self.tableau[row]
        self.reduced[enter] = 0.0

    def run(self, cost, budget) -> tuple[str, int]:
        """Pivot until no candidate improves; refactor to confirm each stop.

        Pricing is Dantzig's by default; a run of degenerate steps switches to
        Bland's rule until real progress resumes, which prevents cycling.
        """
        used = 0
        bland = False
        stalled = 0
        for _ in range(40):  # refactor rounds
            if not self.refactor(cost):
                return OPTIMAL, used  # singular refactor: trust current state
            while used < budget:
                enter, direction = self._entering(bland)
                if enter < 0:
                    break
                best_t, best_row, flip_t = self._ratio(enter, direction, bland)
                step = min(best_t, flip_t)
                if math.isinf(step):
                    return UNBOUNDED, used
                if flip_t < best_t - self.tol or best_row < 0:
                    self.bbar -= direction * flip_t * self.tableau[:, enter]
                    self.status[enter] = (_AT_UPPER if self.status[enter] == _AT_LOWER
                                          else _AT_LOWER)
                else:
                    self._apply_pivot(enter, direction, best_row, step, cost)
                used += 1
                if step > self.tol:
                    stalled = 0
                    bland = False
                else:
                    stalled += 1
                    if stalled >= 30:
                        bland = True
            else:
                return ITERATION_LIMIT, used
            # Re-derive everything from originals; stop only if still optimal.
            if not self.refactor(cost):
                return OPTIMAL, used
            enter, _ = self._entering(bland)
            if enter < 0:
                return OPTIMAL, used
            if used >= budget:
                return ITERATION_LIMIT, used
        return OPTIMAL, used

    def solution(self) -> np.ndarray:
        x = self.nonbasic_vector()
        x[self.basis] = self.bbar
        return x

    def objective_value(self, cost) -> float:
        return float(cost @ self.solution())

    def drop_rows(self, rows) -> None:
        keep = [i for i in range(self.m) if i not in set(rows)]
        self.a = self.a[keep]
        self.b = self.b[keep]
        self.basis = self.basis[keep]
        self.bbar = self.bbar[keep] if self.bbar is not None else None
        self.m = len(keep)

    def drop_columns(self, cols) -> None:
        cols = sorted(set(cols))
        self.a = np.delete(self.a, cols, axis=1)
        self.lower = np.delete(self.lower, cols)
        self.upper = np.delete(self.upper, cols)
        self.status = np.delete(self.status, cols)
        self.allowed = np.delete(self.allowed, cols)
        shift = np.zeros(self.total, dtype=np.int64)
        for c in cols:
            shift[c:] += 1
        self.basis = self.basis - shift[self.basis]
        self.total = self.a.shape[1]
        self.tableau = None  # stale; run() refactors before pivoting


def solve_lp(lp: LinearProgram, pivot_tol: float = PIVOT_TOL,
             max_iterations: int = MAX_ITERATIONS) -> LpSolution:
    """Solve with two-phase primal simplex; statuses are never silent."""
    n = lp.num_variables
    if n == 0:
        return LpSolution(np.zeros(0), 0.0, OPTIMAL, 0)
    for j in range(n):
        if lp.lower[j] > lp.upper[j]:
            return LpSolution(None, math.nan, INFEASIBLE, 0)

    m = len(lp.rows)
    # Equations: A v - s = bound with surplus s >= 0.  Structural variables
    # start at a bound (or 0 when free); rows whose surplus would come out
    # negative get one artificial column each so the start is feasible.
    struct_values = np.zeros(n)
    for j in range(n):
        if math.isfinite(lp.lower[j]):
            struct_values[j] = lp.lower[j]
        elif math.isfinite(lp.upper[j]):
            struct_values[j] = lp.upper[j]
    body = np.zeros((m, n + m))
    b = np.zeros(m)
    for i, (indices, coeffs, bound) in enumerate(lp.rows):
        for j, c in zip(indices, coeffs):
            body[i, j] = c
        body[i, n + i] = -1.0
        b[i] = bound
    residual = b - body[:, :n] @ struct_values
    art_rows = [i for i in range(m) if -residual[i] < 0.0]
    num_art = len(art_rows)
    total = n + m + num_art
    a = np.zeros((m, total))
    a[:, :n + m] = body
    for k, i in enumerate(art_rows):
        a[i, n + m + k] = 1.0
    lower = np.concatenate([np.asarray(lp.lower), np.zeros(m + num_art)])
    upper = np.concatenate([np.asarray(lp.upper), np.full(m + num_art, math.inf)])

    sx = _Simplex(a, b, lower, upper, pivot_tol)
    for i in range(m):
        sx.basis[i] = n + i
        sx.status[n + i] = _BASIC
    for k, i in enumerate(art_rows):
        sx.basis[i] = n + m + k
        sx.status[n + m + k] = _BASIC
        sx.status[n + i] = _AT_LOWER

    iterations = 0
    if num_art:
        phase1_cost = np.zeros(total)
        phase1_cost[n + m:] = 1.0
        status, used = sx.run(phase1_cost, max_iterations)
        iterations += used
        if status == ITERATION_LIMIT:
            return LpSolution(None, math.nan, ITERATION_LIMIT, iterations)
        if status == UNBOUNDED:
            return LpSolution(None, math.nan, INFEASIBLE, iterations)
        infeasibility = sx.objective_value(phase1_cost)
        scale = 1.0 + float(np.max(np.abs(b), initial=0.0))
        if infeasibility > FEAS_TOL * scale:
            return LpSolution(None, math.nan, INFEASIBLE, iterations)
        # Pivot leftover artificials out of the basis (dropping rows that
        # cannot pivot: they are redundant), then delete their columns.
        if not sx.refactor(phase1_cost):
            return LpSolution(None, math.nan, INFEASIBLE, iterations)
        drop = []
        for i in range(sx.m):
            if sx.basis[i] >= n + m:
                pivot_col = -1
                for j in range(n + m):
                    if abs(sx.tableau[i, j]) > _PIVOT_MIN:
                        pivot_col = j
                        break
                if pivot_col < 0:
                    drop.append(i)
                else:
                    sx._apply_pivot(pivot_col, 1.0, i, 0.0, phase1_cost)
        if drop:
            sx.drop_rows(drop)
        sx.drop_columns(range(n + m, total))

    cost = np.zeros(sx.total)
    cost[:n] = lp.objective
    status, used = sx.run(cost, max_iterations - iterations)
    iterations += used
    if status != OPTIMAL:
        return LpSolution(None, math.nan, status, iterations)
    values = sx.solution()[:n]
    values = np.minimum(np.maximum(values, lp.lower), lp.upper)
    return LpSolution(values, float(np.dot(lp.objective, values)), OPTIMAL,
                      iterations)


# --- plain-text export ------------------------------------------------------

def _fmt(x: float) -> str:
    return f"{x:.17g}"


def export_lp_text(lp: LinearProgram, path) -> None:
    """Documented line format: one variable/row per line, stable ordering."""
    lines = ["LP-TEXT 1", "OBJECTIVE"]
    for name, c in zip(lp.names, lp.objective):
        lines.append(f"{name} {_fmt(c)}")
    lines.append("CONSTRAINTS")
    for indices, coeffs, bound in lp.rows:
        parts = [f"{lp.names[i]} {_fmt(c)}" for i, c in zip(indices, coeffs)]
        lines.append(" ".join(parts) + f" >= {_fmt(bound)}")
    lines.append("BOUNDS")
    for name, lo, up in zip(lp.names, lp.lower, lp.upper):
        lines.append(f"{name} {_fmt(lo)} {_fmt(up)}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def parse_lp_text(path) -> LinearProgram:
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    if not lines or lines[0] != "LP-TEXT 1":
        raise LpError(f"{path}: missing LP-TEXT 1 header")
    lp = LinearProgram()
    section = None
    pending_rows = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        if line in ("OBJECTIVE", "CONSTRAINTS", "BOUNDS"):
            section = line
            continue
        parts = line.split()
        try:
            if section == "OBJECTIVE":
                lp.add_variable(parts[0], objective=float(parts[1]))
            elif section == "CONSTRAINTS":
                if len(parts) < 4 or parts[-2] != ">=":
                    raise LpError("expected 'name coeff ... >= bound'")
                names = parts[0:-2:2]
                coeffs = [float(c) for c in parts[1:-2:2]]
                pending_rows.append((names, coeffs, float(parts[-1])))
            elif section == "BOUNDS":
                idx = lp.names.index(parts[0])
                lp.lower[idx] = float(parts[1])
                lp.upper[idx] = float(parts[2])
            else:
                raise LpError("content before any section header")
        except (IndexError, ValueError) as exc:
            raise LpError(f"{path}: line {lineno}: {exc}") from exc
    index = {name: i for i, name in enumerate(lp.names)}
    for names, coeffs, bound in pending_rows:
        try:
            lp.add_row([index[nm] for nm in names], coeffs, bound)
        except KeyError as exc:
            raise LpError(f"{path}: constraint references unknown variable {exc}") from exc
    return lp
