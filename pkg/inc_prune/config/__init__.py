from .manager import ConfigManager
from .models import AppConfig, BenchConfig, SolveConfig, UpdateVariant, UpdateKind, ObservationOrder
