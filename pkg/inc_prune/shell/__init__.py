from .runner import CommandRunner
from .bench import BenchRunner
from .report import StatsReport, BenchReport
