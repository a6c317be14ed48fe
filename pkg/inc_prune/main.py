import argparse
import logging
import sys
from typing import List, Optional

from rich.console import Console
from rich.logging import RichHandler

from inc_prune.config.manager import ConfigManager
from inc_prune.config.models import ObservationOrder, UpdateKind
from inc_prune.shell.runner import EXIT_INPUT, CommandRunner

ALGORITHMS = [k.value for k in UpdateKind]
ORDERS = [o.value for o in ObservationOrder]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="inc-prune",
                                     description="Exact POMDP value iteration by incremental pruning")
    parser.add_argument("--config", help="Path to a YAML file with run defaults")
    parser.add_argument("-v", "--verbose", action="store_true", help="Log at DEBUG level")
    sub = parser.add_subparsers(dest="command", required=True)

    solve = sub.add_parser("solve", help="Run value iteration and write the value function")
    solve.add_argument("problem", help="POMDP problem file")
    solve.add_argument("--algorithm", choices=ALGORITHMS)
    solve.add_argument("--stages", type=int, help="Stage cap (default 100)")
    solve.add_argument("--residual", type=float, help="Stop once the residual estimate is at most EPS")
    solve.add_argument("--order", choices=ORDERS, help="Observation fold order")
    solve.add_argument("--seed", type=int)
    solve.add_argument("--out", help="Alpha-vector output file (default: stdout)")
    solve.add_argument("--stats", help="JSON stats output file")
    solve.add_argument("--timeout", type=float, help="Give up after SECONDS, keeping finished stages")
    solve.add_argument("--parallel", action="store_true", help="Build the per-action sets on a thread pool")

    ev = sub.add_parser("eval", help="Evaluate a value function at a belief")
    ev.add_argument("alpha", help="Alpha-vector file")
    ev.add_argument("--belief", required=True, help="p1,p2,...")
    ev.add_argument("--problem", help="Problem file whose action names the alpha file uses")

    oracle = sub.add_parser("oracle", help="Exact finite-horizon value by expectimax")
    oracle.add_argument("problem")
    oracle.add_argument("--horizon", type=int, required=True)
    oracle.add_argument("--belief", help="p1,p2,... (default: start belief or uniform)")

    sim = sub.add_parser("simulate", help="Monte-Carlo return of the greedy policy")
    sim.add_argument("problem")
    sim.add_argument("alpha", help="Alpha-vector file")
    sim.add_argument("--belief", help="p1,p2,... (default: start belief or uniform)")
    sim.add_argument("--trials", type=int, default=1000)
    sim.add_argument("--horizon", type=int, default=100)
    sim.add_argument("--seed", type=int, default=0)

    bench = sub.add_parser("bench", help="Compare algorithms on the same problems")
    bench.add_argument("problems", nargs="*", help="POMDP problem files")
    bench.add_argument("--algorithms", nargs="+", choices=ALGORITHMS)
    bench.add_argument("--stages", type=int)
    bench.add_argument("--timeout", type=float, help="Per-cell time limit in seconds")
    bench.add_argument("--order", choices=ORDERS)
    bench.add_argument("--concurrent", action="store_true", help="Run cells on a thread pool")
    bench.add_argument("--json", help="Write the table as JSON")
    bench.add_argument("--random-suite", type=int, metavar="N", help="Add N seeded random models")
    bench.add_argument("--seed", type=int, help="Seed of the random suite")
    bench.add_argument("--states", type=int, nargs="+")
    bench.add_argument("--actions", type=int, nargs="+")
    bench.add_argument("--observations", type=int, nargs="+")
    return parser


def setup_logging(level: str, verbose: bool):
    logging.basicConfig(
        level=logging.DEBUG if verbose else getattr(logging, level.upper(), logging.WARNING),
        format="%(message)s",
        handlers=[RichHandler(console=Console(stderr=True), show_path=False)],
        force=True,
    )
    logging.captureWarnings(True)


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        mgr = ConfigManager(args.config)
    except Exception as e:
        print(f"Error: cannot load config {args.config}: {e}", file=sys.stderr)
        return EXIT_INPUT
    setup_logging(mgr.config.logging.level, args.verbose)
    return CommandRunner(mgr).run(args.command, args)


if __name__ == "__main__":
    sys.exit(main())
