import json

import pytest
from rich.console import Console

from fixture_models import TINY
from inc_prune.config.models import BenchConfig, UpdateKind
from inc_prune.main import main
from inc_prune.shell.bench import TIMEOUT_MARK, BenchRunner
from inc_prune.shell.runner import EXIT_INPUT, EXIT_NUMERICAL, EXIT_OK, EXIT_TIMEOUT, exit_code_for
from inc_prune.engine.errors import CombinatorialBlowup, ParseError, SolveTimeout
from inc_prune.engine.parser import parse_pomdp


@pytest.fixture
def tiny_file(tmp_path):
    path = tmp_path / "tiny.pomdp"
    path.write_text(TINY)
    return str(path)


def test_solve_writes_alpha_file(tiny_file, tmp_path):
    out = tmp_path / "tiny.alpha"
    assert main(["solve", tiny_file, "--algorithm", "ip", "--stages", "1", "--out", str(out)]) == EXIT_OK
    assert out.read_text() == "a0\n1 0\n\n"


def test_algorithms_write_identical_files(tiny_file, tmp_path):
    texts = []
    for algorithm in ("exhaustive", "ip", "rr", "rr-min"):
        out = tmp_path / f"{algorithm}.alpha"
        assert main(["solve", tiny_file, "--algorithm", algorithm, "--stages", "4", "--out", str(out)]) == 0
        texts.append(out.read_text())
    assert len(set(texts)) == 1


def test_solve_to_stdout(tiny_file, capsys):
    assert main(["solve", tiny_file, "--stages", "1"]) == EXIT_OK
    assert capsys.readouterr().out.startswith("a0\n1 0\n\n")


def test_stats_totals_match_stages(tiny_file, tmp_path):
    stats = tmp_path / "stats.json"
    assert main(["solve", tiny_file, "--stages", "5", "--out", str(tmp_path / "v.alpha"),
                 "--stats", str(stats)]) == EXIT_OK
    report = json.loads(stats.read_text())
    assert report["algorithm"] == "rr"
    assert report["stages_run"] == len(report["stages"]) == 5
    lps = sum(p["lp_count"] for s in report["stages"] for p in s["phases"].values())
    constraints = sum(p["constraint_total"] for s in report["stages"] for p in s["phases"].values())
    assert report["totals"]["lp_count"] == lps
    assert report["totals"]["constraint_total"] == constraints
    assert set(report["stages"][0]["sa_sizes"]) == {"a0", "a1"}


def test_bad_problem_file_exits_2(tmp_path, capsys):
    path = tmp_path / "broken.pomdp"
    path.write_text(TINY.replace("T: a1\n0 1\n1 0\n", "T: a1 : s1 : s0 1\n"))
    assert main(["solve", str(path)]) == EXIT_INPUT
    assert "T row (a1, s0)" in " ".join(capsys.readouterr().out.split())
    assert main(["solve", str(tmp_path / "missing.pomdp")]) == EXIT_INPUT


def test_eval(tiny_file, tmp_path, capsys):
    alpha = tmp_path / "tiny.alpha"
    main(["solve", tiny_file, "--stages", "1", "--out", str(alpha)])
    capsys.readouterr()
    assert main(["eval", str(alpha), "--belief", "0.5,0.5", "--problem", tiny_file]) == EXIT_OK
    assert capsys.readouterr().out.split() == ["value", "0.5", "action", "a0"]
    assert main(["eval", str(alpha), "--belief", "0.7,0.7"]) == EXIT_INPUT


def test_oracle(tiny_file, capsys):
    assert main(["oracle", tiny_file, "--horizon", "0"]) == EXIT_OK
    assert capsys.readouterr().out.strip() == "0"
    assert main(["oracle", tiny_file, "--horizon", "1", "--belief", "1,0"]) == EXIT_OK
    assert capsys.readouterr().out.strip() == "1"


def test_simulate(tiny_file, tmp_path, capsys):
    alpha = tmp_path / "tiny.alpha"
    main(["solve", tiny_file, "--stages", "3", "--out", str(alpha)])
    capsys.readouterr()
    args = ["simulate", tiny_file, str(alpha), "--trials", "50", "--horizon", "10", "--seed", "7"]
    assert main(args) == EXIT_OK
    first = capsys.readouterr().out
    main(args)
    assert capsys.readouterr().out == first
    assert "±" in first


def test_bench_json(tiny_file, tmp_path):
    out = tmp_path / "bench.json"
    assert main(["bench", tiny_file, "--algorithms", "ip", "rr", "--stages", "2", "--json", str(out),
                 "--random-suite", "2", "--states", "2", "--actions", "2", "--observations", "2"]) == EXIT_OK
    report = json.loads(out.read_text())
    assert report["algorithms"] == ["ip", "rr"]
    assert len(report["cells"]) == 6
    assert {c["problem"] for c in report["cells"]} == {tiny_file, "random-000", "random-001"}
    assert all(c["stages_run"] == 2 and not c["timed_out"] for c in report["cells"])


def test_bench_without_problems(capsys):
    assert main(["bench"]) == EXIT_INPUT


def test_bench_timeout_cells():
    console = Console(record=True, width=200)
    runner = BenchRunner(BenchConfig(algorithms=[UpdateKind.IP], stages=50, timeout=1e-9), console)
    report = runner.run([("tiny", parse_pomdp(TINY))])
    cell = report.cell("tiny", "ip")
    assert cell.timed_out
    assert cell.lp_count is None
    runner.render(report)
    assert TIMEOUT_MARK in console.export_text()


def test_exit_codes():
    assert exit_code_for(SolveTimeout("late")) == EXIT_TIMEOUT
    assert exit_code_for(CombinatorialBlowup(10, 5)) == EXIT_NUMERICAL
    assert exit_code_for(ParseError("bad")) == EXIT_INPUT
