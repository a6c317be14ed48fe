from enum import Enum
from typing import List, Optional
from pydantic import BaseModel, Field


class UpdateKind(str, Enum):
    EXHAUSTIVE = "exhaustive"
    IP = "ip"
    RR = "rr"
    RR_MIN = "rr-min"
    FULL = "full"    # D = A (+) B inside the fold
    CROSS = "cross"  # D = ({alpha} (+) B) u (A (+) {beta})


class ObservationOrder(str, Enum):
    NATURAL = "natural"
    SMALLEST_FIRST = "smallest-first"


class UpdateVariant(BaseModel):
    kind: UpdateKind = UpdateKind.RR
    observation_order: ObservationOrder = ObservationOrder.NATURAL
    exhaustive_cap: int = Field(default=1_000_000, ge=1)
    parallel_actions: bool = False


class SolveConfig(BaseModel):
    variant: UpdateVariant = Field(default_factory=UpdateVariant)
    max_stages: int = Field(default=100, ge=1)
    residual_target: Optional[float] = Field(default=None, gt=0)
    seed: int = 0
    grid_resolution: int = Field(default=100, ge=1)


class RandomSuiteConfig(BaseModel):
    count: int = Field(default=0, ge=0)
    seed: int = 0
    states: List[int] = Field(default_factory=lambda: [2, 3, 4])
    actions: List[int] = Field(default_factory=lambda: [2, 3])
    observations: List[int] = Field(default_factory=lambda: [3, 4])
    discount: float = Field(default=0.9, ge=0, le=1)


class BenchConfig(BaseModel):
    algorithms: List[UpdateKind] = Field(default_factory=lambda: [UpdateKind.IP, UpdateKind.RR])
    stages: int = Field(default=8, ge=1)
    timeout: Optional[float] = Field(default=None, gt=0)
    concurrent: bool = False
    observation_order: ObservationOrder = ObservationOrder.NATURAL
    random_suite: RandomSuiteConfig = Field(default_factory=RandomSuiteConfig)


class LoggingConfig(BaseModel):
    level: str = "WARNING"


class AppConfig(BaseModel):
    solve: SolveConfig = Field(default_factory=SolveConfig)
    bench: BenchConfig = Field(default_factory=BenchConfig)
    logging: LoggingConfig = Field(default_factory=LoggingConfig)
