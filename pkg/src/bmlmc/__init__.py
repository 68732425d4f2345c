"""Budget-constrained multilevel Monte Carlo engine.

Given a fixed computational budget, the controller picks discretization
levels and per-level sample counts round by round to minimize the
estimated mean squared error, executing samples on a (simulated or
threaded) worker pool with a power-of-two group load distribution.
"""

from .controller import BmlmcConfig, RunResult, run
from .scheduler import Scheduler, SchedulerConfig, build_plan, split_exponent

__all__ = ["BmlmcConfig", "RunResult", "run", "Scheduler", "SchedulerConfig",
           "build_plan", "split_exponent"]

__version__ = "0.1.0"
