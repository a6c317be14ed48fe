import time
import logging
from concurrent.futures import ThreadPoolExecutor
from typing import List, Optional, Sequence, Tuple

import numpy as np
from rich.console import Console
from rich.panel import Panel
from rich.table import Table

from ..config.models import BenchConfig, RandomSuiteConfig, SolveConfig, UpdateKind, UpdateVariant
from ..engine.errors import CombinatorialBlowup, NumericalFailure, SolveTimeout
from ..engine.model import PomdpModel, random_model
from ..engine.solver import Solution, value_iterate
from .report import BenchCell, BenchReport

logger = logging.getLogger("inc_prune.shell.bench")

TIMEOUT_MARK = ">TIMEOUT"
Problem = Tuple[str, PomdpModel]


def random_suite(suite: RandomSuiteConfig) -> List[Problem]:
    """Seeded random models; shapes are drawn from the configured size lists."""
    rng = np.random.Generator(np.random.PCG64(suite.seed))
    problems = []
    for k in range(suite.count):
        shape = (int(rng.choice(suite.states)), int(rng.choice(suite.actions)),
                 int(rng.choice(suite.observations)))
        problems.append((f"random-{k:03d}", random_model(rng, *shape, discount=suite.discount)))
    return problems


class BenchRunner:
    """Solves every problem with every algorithm for the same number of stages."""

    def __init__(self, config: BenchConfig, console: Optional[Console] = None):
        self.config = config
        self.console = console or Console()

    def solve_config(self, kind: UpdateKind) -> SolveConfig:
        variant = UpdateVariant(kind=kind, observation_order=self.config.observation_order)
        return SolveConfig(variant=variant, max_stages=self.config.stages)

    def run_cell(self, name: str, model: PomdpModel, kind: UpdateKind) -> BenchCell:
        cell = BenchCell(problem=name, algorithm=kind.value, contended=self.config.concurrent)
        deadline = time.monotonic() + self.config.timeout if self.config.timeout else None
        try:
            solution = value_iterate(model, self.solve_config(kind), deadline=deadline)
        except SolveTimeout as e:
            logger.info("%s/%s timed out after %d stages", name, kind.value,
                        e.partial.stages_run if e.partial else 0)
            cell.timed_out = True
            cell.stages_run = e.partial.stages_run if e.partial else 0
            return cell
        except (NumericalFailure, CombinatorialBlowup) as e:
            logger.warning("%s/%s failed: %s", name, kind.value, e)
            cell.error = str(e)
            return cell
        return self._fill(cell, solution)

    @staticmethod
    def _fill(cell: BenchCell, solution: Solution) -> BenchCell:
        cell.stages_run = solution.stages_run
        cell.t_total = round(sum(s.wall_time for s in solution.stats), 3)
        cell.t_sa_build = round(sum(s.sa_build.wall_time for s in solution.stats), 3)
        cell.lp_count = sum(s.lp_count for s in solution.stats)
        cell.constraint_total = sum(s.constraint_total for s in solution.stats)
        cell.output_size = len(solution.value_function)
        return cell

    def run(self, problems: Sequence[Problem]) -> BenchReport:
        jobs = [(name, model, kind) for name, model in problems for kind in self.config.algorithms]
        if self.config.concurrent:
            with ThreadPoolExecutor() as pool:
                cells = list(pool.map(lambda job: self.run_cell(*job), jobs))
        else:
            cells = [self.run_cell(*job) for job in jobs]
        return BenchReport(stages=self.config.stages, algorithms=[k.value for k in self.config.algorithms],
                           concurrent=self.config.concurrent, cells=cells)

    def render(self, report: BenchReport):
        title = f"{report.stages} stages" + (" (timings contended)" if report.concurrent else "")
        table = Table(title=title)
        table.add_column("Problem", style="cyan")
        table.add_column("Algorithm", style="green")
        table.add_column("T_TOTAL", justify="right")
        table.add_column("T_SA_BUILD", justify="right")
        table.add_column("lp_count", justify="right")
        table.add_column("constraint_total", justify="right")
        table.add_column("|S'|", justify="right")
        for c in report.cells:
            if c.timed_out:
                cols = [TIMEOUT_MARK] * 2 + ["-"] * 3
            elif c.error:
                cols = ["[red]error[/red]"] + ["-"] * 4
            else:
                cols = [f"{c.t_total:.3f}", f"{c.t_sa_build:.3f}", str(c.lp_count),
                        str(c.constraint_total), str(c.output_size)]
            table.add_row(c.problem, c.algorithm, *cols)
        self.console.print(table)

        names = report.algorithms
        if UpdateKind.IP.value in names and UpdateKind.RR.value in names:
            wins, compared = report.constraint_wins(UpdateKind.RR.value, UpdateKind.IP.value)
            if compared:
                self.console.print(Panel(
                    f"rr posed no more constraints than ip on {wins}/{compared} problems ({wins / compared:.0%})",
                    title="Constraint totals"))
