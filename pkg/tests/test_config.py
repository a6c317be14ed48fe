import os
import sys

import pytest
import pydantic

sys.path.append(os.path.abspath(os.path.join(os.path.dirname(__file__), "..")))

from inc_prune.config.manager import ConfigManager
from inc_prune.config.models import ObservationOrder, UpdateKind
from inc_prune.main import main

CONFIG = """\
solve:
  max_stages: 7
  residual_target: 0.001
  variant:
    kind: rr-min
    observation_order: smallest-first
bench:
  algorithms: [ip, rr, rr-min]
  stages: 3
  random_suite:
    count: 4
    seed: 11
logging:
  level: INFO
"""


def write(tmp_path, text):
    path = tmp_path / "inc-prune.yaml"
    path.write_text(text)
    return str(path)


def test_defaults_without_file():
    mgr = ConfigManager()
    solve = mgr.solve_config()
    assert solve.variant.kind is UpdateKind.RR
    assert solve.max_stages == 100
    assert solve.residual_target is None
    assert mgr.bench_config().algorithms == [UpdateKind.IP, UpdateKind.RR]


def test_missing_file_falls_back_to_defaults(tmp_path):
    mgr = ConfigManager(str(tmp_path / "absent.yaml"))
    assert mgr.solve_config().max_stages == 100


def test_yaml_values(tmp_path):
    mgr = ConfigManager(write(tmp_path, CONFIG))
    solve = mgr.solve_config()
    assert solve.max_stages == 7
    assert solve.residual_target == 0.001
    assert solve.variant.kind is UpdateKind.RR_MIN
    assert solve.variant.observation_order is ObservationOrder.SMALLEST_FIRST
    bench = mgr.bench_config()
    assert bench.algorithms == [UpdateKind.IP, UpdateKind.RR, UpdateKind.RR_MIN]
    assert bench.random_suite.count == 4
    assert mgr.config.logging.level == "INFO"


def test_overrides_win(tmp_path):
    mgr = ConfigManager(write(tmp_path, CONFIG))
    solve = mgr.solve_config(kind="ip", max_stages=2, residual_target=None, parallel_actions=True)
    assert solve.variant.kind is UpdateKind.IP
    assert solve.variant.parallel_actions
    assert solve.variant.observation_order is ObservationOrder.SMALLEST_FIRST
    assert solve.max_stages == 2
    assert solve.residual_target == 0.001

    bench = mgr.bench_config(seed=5, states=[2], stages=None)
    assert bench.random_suite.seed == 5
    assert bench.random_suite.states == [2]
    assert bench.random_suite.count == 4
    assert bench.stages == 3


def test_invalid_values(tmp_path):
    with pytest.raises(pydantic.ValidationError):
        ConfigManager(write(tmp_path, "solve:\n  max_stages: 0\n"))
    with pytest.raises(pydantic.ValidationError):
        ConfigManager(write(tmp_path, "solve:\n  variant:\n    kind: simplex\n"))
    mgr = ConfigManager()
    with pytest.raises(pydantic.ValidationError):
        mgr.solve_config(residual_target=-1.0)


def test_bad_config_exits_2(tmp_path, capsys):
    path = write(tmp_path, "bench:\n  stages: -3\n")
    assert main(["--config", path, "oracle", "x.pomdp", "--horizon", "1"]) == 2
    assert "cannot load config" in capsys.readouterr().err
