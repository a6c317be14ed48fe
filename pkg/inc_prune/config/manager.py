from typing import Any, Dict, Optional
import logging
import yaml
from pathlib import Path
from .models import AppConfig, BenchConfig, SolveConfig

logger = logging.getLogger("inc_prune.config")


class ConfigManager:
    """Loads run defaults from an optional YAML file; command-line flags win."""

    def __init__(self, config_path: Optional[str] = None):
        self.config_path = Path(config_path) if config_path else None
        self.config: AppConfig = self.load()

    def load(self) -> AppConfig:
        if not self.config_path:
            return AppConfig()
        if not self.config_path.exists():
            logger.warning("config file %s not found, using defaults", self.config_path)
            return AppConfig()

        with open(self.config_path, 'r') as f:
            data = yaml.safe_load(f) or {}
        return AppConfig(**data)

    def solve_config(self, **overrides: Any) -> SolveConfig:
        """Returns the solve section with every non-None override applied.

        Variant fields (kind, observation_order, exhaustive_cap,
        parallel_actions) may be passed flat alongside the top-level ones.
        """
        base = self.config.solve.model_dump()
        variant_keys = set(base["variant"])
        for key, value in _present(overrides).items():
            if key in variant_keys:
                base["variant"][key] = value
            else:
                base[key] = value
        return SolveConfig(**base)

    def bench_config(self, **overrides: Any) -> BenchConfig:
        base = self.config.bench.model_dump()
        suite_keys = set(base["random_suite"])
        for key, value in _present(overrides).items():
            if key in suite_keys:
                base["random_suite"][key] = value
            else:
                base[key] = value
        return BenchConfig(**base)


def _present(overrides: Dict[str, Any]) -> Dict[str, Any]:
    return {k: v for k, v in overrides.items() if v is not None}
