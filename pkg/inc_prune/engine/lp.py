"""Dense two-phase simplex and the witness-region LP.

Pivoting follows Bland's rule: lowest-index entering column, lowest basic
index among ratio ties. Tolerances are relative to the largest entry of the
initial table. An optimum is accepted only once the basic solution satisfies
the original rows; otherwise the tableau is refactored from them.
"""
import sys
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Sequence

import numpy as np

from .errors import NumericalFailure
from .model import Belief

logger = logging.getLogger("inc_prune.engine.lp")

PIVOT_BUDGET = 10_000
PIVOT_TOL = 1e-10
FEASIBILITY_TOL = 1e-9
DRIFT_TOL = 1e-11
DELTA_EPS = 1e-9
MAX_MARGIN = sys.float_info.max


class Relation(str, Enum):
    LE = "<="
    GE = ">="
    EQ = "="

    def flipped(self) -> "Relation":
        return {Relation.LE: Relation.GE, Relation.GE: Relation.LE}.get(self, self)


class LpStatus(str, Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


@dataclass(frozen=True, eq=False)
class Constraint:
    coeffs: Sequence[float]
    relation: Relation
    bound: float


@dataclass
class LpProblem:
    """maximize objective·v subject to the constraints; variables are >= 0 unless free."""
    objective: np.ndarray
    constraints: List[Constraint] = field(default_factory=list)
    names: Sequence[str] = ()
    free: Sequence[bool] = ()

    def __post_init__(self):
        self.objective = np.asarray(self.objective, dtype=float)
        n = self.objective.size
        if not len(self.names):
            self.names = tuple(f"v{j}" for j in range(n))
        if not len(self.free):
            self.free = (False,) * n

    @property
    def n_vars(self) -> int:
        return self.objective.size

    def add(self, coeffs: Sequence[float], relation: Relation, bound: float):
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.size != self.n_vars:
            raise ValueError(f"constraint has {coeffs.size} coefficients, problem has {self.n_vars} variables")
        self.constraints.append(Constraint(coeffs, Relation(relation), float(bound)))


@dataclass(frozen=True)
class LpResult:
    status: LpStatus
    assignment: Optional[np.ndarray] = None
    objective: Optional[float] = None


class Tableau:
    """Constraint rows in canonical form for `basis`, plus the reduced-cost row.

    `original` keeps the untouched rows so the basis can be refactored.
    """

    def __init__(self, table: np.ndarray, basis: np.ndarray, budget: int):
        self.original = table.copy()
        self.rows = table
        self.basis = basis
        self.budget = budget
        self.pivots = 0
        self.scale = max(1.0, float(np.abs(table).max(initial=0.0)))
        self.tol = PIVOT_TOL * self.scale
        self.cost = np.zeros(table.shape[1])
        self.z = np.zeros(table.shape[1])

    def pivot(self, r: int, c: int):
        if self.pivots >= self.budget:
            raise NumericalFailure(f"simplex exceeded {self.budget} pivots")
        self.pivots += 1
        self.rows[r] /= self.rows[r, c]
        factors = self.rows[:, c].copy()
        factors[r] = 0.0
        touched = np.flatnonzero(factors)
        self.rows[touched] -= np.outer(factors[touched], self.rows[r])
        self.rows[:, c] = 0.0
        self.rows[r, c] = 1.0
        self.z -= self.z[c] * self.rows[r]
        self.basis[r] = c

    def price(self):
        self.z = self.cost - self.cost[self.basis] @ self.rows

    def refactor(self):
        try:
            self.rows = np.linalg.solve(self.original[:, self.basis], self.original)
        except np.linalg.LinAlgError as exc:
            raise NumericalFailure("simplex basis became singular") from exc
        self.price()
        if self.rows[:, -1].min(initial=0.0) < -FEASIBILITY_TOL:
            raise NumericalFailure("simplex basis lost primal feasibility")

    def drift(self) -> float:
        """Largest violation of the original rows or of v >= 0 by the current basic solution."""
        v = self.values()
        residual = self.original[:, :-1] @ v - self.original[:, -1]
        return max(float(np.abs(residual).max(initial=0.0)), float(-v.min(initial=0.0)))

    def optimize(self, cost: np.ndarray, n_allowed: int) -> bool:
        """Maximizes cost·v over the first n_allowed columns. False means unbounded."""
        self.cost[:] = 0.0
        self.cost[:cost.size] = cost
        self.price()
        refactored = False
        while True:
            entering = np.flatnonzero(self.z[:n_allowed] > self.tol)
            if entering.size == 0:
                if refactored or self.drift() <= DRIFT_TOL:
                    return True
                logger.debug("refactoring basis after %d pivots", self.pivots)
                self.refactor()
                refactored = True
                continue
            q = int(entering[0])
            column = self.rows[:, q]
            eligible = np.flatnonzero(column > self.tol)
            if eligible.size == 0:
                return False
            ratios = np.maximum(self.rows[eligible, -1], 0.0) / column[eligible]
            best = ratios.min()
            tied = eligible[ratios <= best + self.tol * max(1.0, best)]
            self.pivot(int(tied[np.argmin(self.basis[tied])]), q)
            refactored = False

    @property
    def objective(self) -> float:
        return -self.z[-1]

    def drive_out(self, first_artificial: int):
        """Pivots zero-level artificials out of the basis; drops redundant rows."""
        keep = np.ones(len(self.basis), dtype=bool)
        for i in np.flatnonzero(self.basis >= first_artificial):
            row = np.abs(self.rows[i, :first_artificial])
            c = int(np.argmax(row))
            if row[c] > self.tol:
                self.pivot(int(i), c)
            else:
                keep[i] = False
        if not keep.all():
            self.rows = self.rows[keep]
            self.original = self.original[keep]
            self.basis = self.basis[keep]

    def values(self) -> np.ndarray:
        v = np.zeros(self.rows.shape[1] - 1)
        v[self.basis] = self.rows[:, -1]
        return v


def solve_lp(problem: LpProblem, budget: int = PIVOT_BUDGET) -> LpResult:
    try:
        return _simplex(problem, budget)
    except NumericalFailure as exc:
        raise NumericalFailure(f"{exc} (LP over {', '.join(problem.names)}, "
                               f"{len(problem.constraints)} rows)") from exc


def _simplex(problem: LpProblem, budget: int) -> LpResult:
    # free variables are split into positive and negative parts
    free = np.asarray(problem.free, dtype=bool)
    index = np.repeat(np.arange(problem.n_vars), np.where(free, 2, 1))
    sign = np.ones(index.size)
    sign[np.flatnonzero(free[index][1:] & (index[1:] == index[:-1])) + 1] = -1.0
    n_struct = index.size

    m = len(problem.constraints)
    A = np.array([c.coeffs for c in problem.constraints], dtype=float).reshape(m, problem.n_vars)
    A = A[:, index] * sign
    b = np.array([c.bound for c in problem.constraints], dtype=float)
    relations = [c.relation for c in problem.constraints]
    flip = (b < 0) | ((b == 0) & np.array([r is Relation.GE for r in relations], dtype=bool))
    A[flip] *= -1.0
    b[flip] *= -1.0
    b += 0.0
    relations = [r.flipped() if f else r for r, f in zip(relations, flip)]
    le = np.array([r is Relation.LE for r in relations], dtype=bool)
    eq = np.array([r is Relation.EQ for r in relations], dtype=bool)

    slack_rows = np.flatnonzero(~eq)
    art_rows = np.flatnonzero(~le)
    first_artificial = n_struct + slack_rows.size
    width = first_artificial + art_rows.size
    table = np.zeros((m, width + 1))
    table[:, :n_struct] = A
    table[:, -1] = b
    slack_cols = n_struct + np.arange(slack_rows.size)
    art_cols = first_artificial + np.arange(art_rows.size)
    table[slack_rows, slack_cols] = np.where(le[slack_rows], 1.0, -1.0)
    table[art_rows, art_cols] = 1.0
    basis = np.empty(m, dtype=int)
    basis[art_rows] = art_cols
    basis[slack_rows[le[slack_rows]]] = slack_cols[le[slack_rows]]

    tab = Tableau(table, basis, budget)
    if art_rows.size:
        phase_one = np.zeros(width)
        phase_one[first_artificial:] = -1.0
        tab.optimize(phase_one, width)
        if tab.objective < -FEASIBILITY_TOL * tab.scale:
            return LpResult(LpStatus.INFEASIBLE)
        tab.drive_out(first_artificial)

    cost = np.zeros(width)
    cost[:n_struct] = problem.objective[index] * sign
    if not tab.optimize(cost, first_artificial):
        return LpResult(LpStatus.UNBOUNDED)

    assignment = np.zeros(problem.n_vars)
    np.add.at(assignment, index, sign * tab.values()[:n_struct])
    return LpResult(LpStatus.OPTIMAL, assignment, float(problem.objective @ assignment))


@dataclass(frozen=True, eq=False)
class DominanceWitness:
    """A belief x where the tested vector beats every other by margin delta."""
    x: Belief
    delta: float


@dataclass
class LpCounter:
    lp_count: int = 0
    constraint_total: int = 0
    witnesses: List[np.ndarray] = field(default_factory=list)

    def record(self, constraints: int, witness: Optional[DominanceWitness]):
        self.lp_count += 1
        self.constraint_total += constraints
        if witness is not None:
            self.witnesses.append(witness.x.probs)

    def merge(self, other: "LpCounter"):
        self.lp_count += other.lp_count
        self.constraint_total += other.constraint_total
        self.witnesses.extend(other.witnesses)


def _coeffs(v) -> np.ndarray:
    return np.asarray(getattr(v, "coeffs", v), dtype=float)


def dominate_lp(alpha: np.ndarray, others: np.ndarray) -> LpProblem:
    """max δ  s.t.  x·alpha >= δ + x·α' for every α' in others,  x·1 = 1,  x >= 0."""
    n = alpha.size
    problem = LpProblem(
        objective=np.append(np.zeros(n), 1.0),
        names=tuple(f"x({s})" for s in range(n)) + ("delta",),
        free=(False,) * n + (True,),
    )
    margins = np.hstack([alpha - others, -np.ones((others.shape[0], 1))])
    problem.constraints = [Constraint(row, Relation.GE, 0.0) for row in margins]
    problem.add(np.append(np.ones(n), 0.0), Relation.EQ, 1.0)
    return problem


def dominate(alpha, others, counter: Optional[LpCounter] = None) -> Optional[DominanceWitness]:
    """Finds a belief in the witness region R(alpha, others), or None when it is empty.

    Vectors equal to alpha are left out of the comparison set. Each call
    counts as one LP with |others \\ {alpha}| + 1 constraints: one margin row
    per comparison vector and the single row x·1 = 1. The bounds x >= 0 are
    not counted, so this is one less than counting both simplex rows.

    The reported margin is recomputed from the returned belief, so a witness
    always beats every comparison vector there by more than DELTA_EPS.
    """
    alpha = _coeffs(alpha)
    n = alpha.size
    if isinstance(others, np.ndarray):
        rest = others.reshape(-1, n)
    else:
        rest = np.array([_coeffs(o) for o in others], dtype=float).reshape(-1, n)
    rest = rest[~np.all(rest == alpha, axis=1)]

    if rest.shape[0] == 0:
        witness = DominanceWitness(Belief.corner(n, 0), MAX_MARGIN)
    else:
        result = solve_lp(dominate_lp(alpha, rest))
        witness = None
        if result.status is LpStatus.OPTIMAL:
            x = Belief.normalized(np.clip(result.assignment[:n], 0.0, None))
            margin = float(np.min((alpha - rest) @ x.probs))
            if abs(margin - result.assignment[-1]) > FEASIBILITY_TOL * max(1.0, abs(margin)):
                logger.debug("witness margin %.3g recomputed as %.3g", result.assignment[-1], margin)
            if margin > DELTA_EPS:
                witness = DominanceWitness(x, margin)
        else:
            logger.warning("witness LP ended %s", result.status.value)

    if counter is not None:
        counter.record(rest.shape[0] + 1, witness)
    return witness
