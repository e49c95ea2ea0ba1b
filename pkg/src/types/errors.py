# src/types/errors.py

from typing import Optional


class PeriodicR0Error(Exception):
    """Base class for every error raised by this package."""


class ConfigError(PeriodicR0Error, ValueError):
    """Configuration could not be turned into a valid model."""

    def __init__(self, message: str, key: Optional[str] = None):
        self.key = key
        super().__init__(f"{key}: {message}" if key else message)


class ComputationError(PeriodicR0Error, RuntimeError):
    """A numerical procedure failed on a valid model."""


class StepError(ComputationError):
    def __init__(self, message: str, time_index: int):
        self.time_index = time_index
        super().__init__(f"{message} (time index {time_index})")


class SpectralError(ComputationError):
    pass


class BracketError(ComputationError):
    pass


class ConvergenceError(ComputationError):
    pass


class BracketViolation(ComputationError):
    """The periodic march left the sub/supersolution bracket."""

    def __init__(self, message: str, component: int, node: int, time_index: int):
        self.component = component
        self.node = node
        self.time_index = time_index
        super().__init__(f"{message} (component {component}, node {node}, time index {time_index})")
