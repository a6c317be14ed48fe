"""Machine-readable run and benchmark records (JSON via pydantic)."""
from datetime import datetime
from typing import Dict, List, Optional, Tuple

from pydantic import BaseModel, Field

from ..engine.dpupdate import PhaseStats, UpdateStats
from ..engine.model import PomdpModel
from ..engine.solver import Solution

PHASES = ("sza_build", "sa_build", "union_purge")


def _ms(seconds: float) -> float:
    return round(seconds, 3)


class PhaseRecord(BaseModel):
    lp_count: int = 0
    constraint_total: int = 0
    wall_time: float = 0.0

    @classmethod
    def of(cls, phase: PhaseStats) -> "PhaseRecord":
        return cls(lp_count=phase.lp_count, constraint_total=phase.constraint_total,
                   wall_time=_ms(phase.wall_time))

    def add(self, other: "PhaseRecord"):
        self.lp_count += other.lp_count
        self.constraint_total += other.constraint_total
        self.wall_time = _ms(self.wall_time + other.wall_time)


class StageRecord(BaseModel):
    stage: int
    output_size: int
    sa_sizes: Dict[str, int]
    sza_sizes: Dict[str, Dict[str, int]]
    phases: Dict[str, PhaseRecord]
    residual: float
    fold_sizes: Dict[str, List[int]] = Field(default_factory=dict)

    @classmethod
    def of(cls, stage: int, stats: UpdateStats, residual: float, model: PomdpModel) -> "StageRecord":
        return cls(
            stage=stage,
            output_size=stats.output_size,
            sa_sizes=dict(zip(model.actions, stats.sa_sizes)),
            sza_sizes={an: dict(zip(model.observations, sizes))
                       for an, sizes in zip(model.actions, stats.sza_sizes)},
            phases={name: PhaseRecord.of(phase) for name, phase in zip(PHASES, stats.phases)},
            residual=residual,
            fold_sizes=dict(zip(model.actions, stats.fold_sizes)),
        )


class RunTotals(BaseModel):
    lp_count: int = 0
    constraint_total: int = 0
    wall_time: float = 0.0
    phases: Dict[str, PhaseRecord] = Field(default_factory=lambda: {p: PhaseRecord() for p in PHASES})


class StatsReport(BaseModel):
    algorithm: str
    problem: str
    started_at: datetime
    finished_at: datetime
    stages_run: int
    converged: bool = False
    timed_out: bool = False
    stages: List[StageRecord] = Field(default_factory=list)
    totals: RunTotals = Field(default_factory=RunTotals)

    @classmethod
    def from_solution(cls, solution: Solution, model: PomdpModel, algorithm: str, problem: str,
                      started_at: datetime, finished_at: datetime, timed_out: bool = False) -> "StatsReport":
        stages = [StageRecord.of(k, stats, residual, model)
                  for k, (stats, residual) in enumerate(zip(solution.stats, solution.residuals), 1)]
        totals = RunTotals()
        for record in stages:
            for name, phase in record.phases.items():
                totals.phases[name].add(phase)
        totals.lp_count = sum(p.lp_count for p in totals.phases.values())
        totals.constraint_total = sum(p.constraint_total for p in totals.phases.values())
        totals.wall_time = _ms(sum(p.wall_time for p in totals.phases.values()))
        return cls(algorithm=algorithm, problem=problem, started_at=started_at, finished_at=finished_at,
                   stages_run=solution.stages_run, converged=solution.converged, timed_out=timed_out,
                   stages=stages, totals=totals)


class BenchCell(BaseModel):
    problem: str
    algorithm: str
    stages_run: int = 0
    t_total: Optional[float] = None
    t_sa_build: Optional[float] = None
    lp_count: Optional[int] = None
    constraint_total: Optional[int] = None
    output_size: Optional[int] = None
    timed_out: bool = False
    error: Optional[str] = None
    contended: bool = False


class BenchReport(BaseModel):
    stages: int
    algorithms: List[str]
    concurrent: bool = False
    cells: List[BenchCell] = Field(default_factory=list)

    def cell(self, problem: str, algorithm: str) -> Optional[BenchCell]:
        for c in self.cells:
            if c.problem == problem and c.algorithm == algorithm:
                return c
        return None

    def constraint_wins(self, challenger: str, baseline: str) -> Tuple[int, int]:
        """(problems where challenger posed no more constraints than baseline, problems compared)."""
        wins = compared = 0
        for problem in dict.fromkeys(c.problem for c in self.cells):
            a, b = self.cell(problem, challenger), self.cell(problem, baseline)
            if a is None or b is None or a.constraint_total is None or b.constraint_total is None:
                continue
            compared += 1
            wins += a.constraint_total <= b.constraint_total
        return wins, compared
