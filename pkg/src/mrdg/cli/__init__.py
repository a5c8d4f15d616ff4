"""Run orchestration: problem catalog, configuration, outputs, CLI."""

from .catalog import catalog, get_problem, ProblemSpec
from .config import RunConfig, ConfigError, load_config
from .output import FrameOutput, write_frame
from .runner import run, RunResult

__all__ = ["catalog", "get_problem", "ProblemSpec", "RunConfig", "ConfigError",
           "load_config", "FrameOutput", "write_frame", "run", "RunResult"]
