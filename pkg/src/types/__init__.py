from .errors import (BracketError, BracketViolation, ComputationError, ConfigError,
                     ConvergenceError, PeriodicR0Error, SpectralError, StepError)
from .index import *  # noqa: F401,F403
