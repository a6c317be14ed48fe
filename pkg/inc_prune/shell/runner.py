import time
import logging
from argparse import Namespace
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Optional

import pydantic
from rich.console import Console
from rich.markup import escape
from rich.panel import Panel

from ..config.manager import ConfigManager
from ..config.models import UpdateKind
from ..engine.errors import (CombinatorialBlowup, EngineError, NumericalFailure, SolveTimeout)
from ..engine.model import Belief, PomdpModel
from ..engine.parser import load_pomdp
from ..engine.pwlc import VectorSet, evaluate, read_alpha_file, write_alpha_file
from ..engine.solver import Solution, oracle_value, simulate, value_iterate
from .bench import BenchRunner, random_suite
from .report import StatsReport

logger = logging.getLogger("inc_prune.shell")

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NUMERICAL = 3
EXIT_TIMEOUT = 4


def exit_code_for(exc: Exception) -> int:
    if isinstance(exc, SolveTimeout):
        return EXIT_TIMEOUT
    if isinstance(exc, (NumericalFailure, CombinatorialBlowup)):
        return EXIT_NUMERICAL
    return EXIT_INPUT


class CommandRunner:
    """Runs one subcommand and turns engine errors into exit statuses."""

    def __init__(self, manager: ConfigManager, console: Optional[Console] = None):
        self.manager = manager
        self.console = console or Console()

    def run(self, command: str, args: Namespace) -> int:
        handler: Callable[[Namespace], int] = getattr(self, f"cmd_{command}")
        try:
            return handler(args)
        except (EngineError, pydantic.ValidationError, OSError) as e:
            code = exit_code_for(e)
            logger.debug("%s failed", command, exc_info=True)
            self.console.print(f"[red]Error:[/red] {escape(str(e))}")
            return code

    # -- helpers ------------------------------------------------------------

    @staticmethod
    def _belief(model: PomdpModel, text: Optional[str]) -> Belief:
        return Belief.parse(text, model.n_states) if text else model.initial_belief()

    @staticmethod
    def _deadline(timeout: Optional[float]) -> Optional[float]:
        return time.monotonic() + timeout if timeout else None

    @staticmethod
    def _write(path: Optional[str], text: str):
        if path:
            Path(path).write_text(text, encoding="utf-8")

    def _load_alpha(self, path: str, model: Optional[PomdpModel] = None):
        text = Path(path).read_text(encoding="utf-8")
        return read_alpha_file(text, model.actions if model else None)

    # -- commands -----------------------------------------------------------

    def cmd_solve(self, args: Namespace) -> int:
        model = load_pomdp(args.problem)
        config = self.manager.solve_config(
            kind=args.algorithm, max_stages=args.stages, residual_target=args.residual,
            observation_order=args.order, seed=args.seed,
            parallel_actions=True if args.parallel else None,
        )
        logger.info("solving %s with %s for up to %d stages", args.problem, config.variant.kind.value,
                    config.max_stages)

        def progress(stage, V, stats, residual):
            logger.info("stage %d: %d vectors, %d LPs, residual %.3g", stage, len(V), stats.lp_count, residual)

        started = datetime.now(timezone.utc)
        timed_out = False
        try:
            solution = value_iterate(model, config, callback=progress, deadline=self._deadline(args.timeout))
        except SolveTimeout as e:
            timed_out = True
            solution = e.partial or Solution(VectorSet())
            self.console.print(f"[yellow]Timeout:[/yellow] stopped after {solution.stages_run} stages")
        finished = datetime.now(timezone.utc)

        if len(solution.value_function):
            alpha_text = write_alpha_file(solution.value_function.canonical(), model.actions)
            if args.out:
                self._write(args.out, alpha_text)
            else:
                self.console.print(alpha_text, end="", markup=False, highlight=False, soft_wrap=True)
        if args.stats:
            report = StatsReport.from_solution(solution, model, config.variant.kind.value, args.problem,
                                               started, finished, timed_out)
            self._write(args.stats, report.model_dump_json(indent=2))

        lps = sum(s.lp_count for s in solution.stats)
        constraints = sum(s.constraint_total for s in solution.stats)
        residual = f"{solution.residuals[-1]:.3g}" if solution.residuals else "n/a"
        self.console.print(Panel(
            f"stages {solution.stages_run}  |V| {len(solution.value_function)}  residual {residual}\n"
            f"LPs {lps}  constraints {constraints}",
            title=f"[bold green]{config.variant.kind.value}[/bold green] {args.problem}"), highlight=False)
        return EXIT_TIMEOUT if timed_out else EXIT_OK

    def cmd_eval(self, args: Namespace) -> int:
        model = load_pomdp(args.problem) if args.problem else None
        V, names = self._load_alpha(args.alpha, model)
        x = Belief.parse(args.belief, V.dim)
        value, winner = evaluate(V, x)
        action = names[winner.action] if winner.action is not None else "-"
        self.console.print(f"value {value:.17g}\naction {action}", highlight=False)
        return EXIT_OK

    def cmd_oracle(self, args: Namespace) -> int:
        model = load_pomdp(args.problem)
        x = self._belief(model, args.belief)
        self.console.print(f"{oracle_value(model, x, args.horizon):.17g}", highlight=False)
        return EXIT_OK

    def cmd_simulate(self, args: Namespace) -> int:
        model = load_pomdp(args.problem)
        V, _ = self._load_alpha(args.alpha, model)
        x = self._belief(model, args.belief)
        mean, stderr = simulate(model, V, x, args.trials, args.horizon, args.seed)
        self.console.print(f"{mean:.17g} ± {stderr:.17g}", highlight=False)
        return EXIT_OK

    def cmd_bench(self, args: Namespace) -> int:
        config = self.manager.bench_config(
            algorithms=[UpdateKind(a) for a in args.algorithms] if args.algorithms else None,
            stages=args.stages, timeout=args.timeout, observation_order=args.order,
            concurrent=True if args.concurrent else None,
            count=args.random_suite, seed=args.seed, states=args.states, actions=args.actions,
            observations=args.observations,
        )
        problems = [(path, load_pomdp(path)) for path in args.problems]
        problems += random_suite(config.random_suite)
        if not problems:
            self.console.print("[yellow]Nothing to benchmark:[/yellow] give problem files or --random-suite N")
            return EXIT_INPUT

        runner = BenchRunner(config, self.console)
        report = runner.run(problems)
        runner.render(report)
        if args.json:
            self._write(args.json, report.model_dump_json(indent=2))
        return EXIT_TIMEOUT if any(c.timed_out for c in report.cells) else EXIT_OK
