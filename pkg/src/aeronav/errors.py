class AeronavError(Exception):
    """Base class for package errors."""


class ConfigError(AeronavError, ValueError):
    """Invalid configuration or input that violates a documented precondition."""


class ContractError(AeronavError, RuntimeError):
    """An internal contract (frame tag, state validity) was violated."""


class GenerationError(AeronavError):
    """Procedural scene generation could not satisfy the requested config."""


class TrainingError(AeronavError):
    """Training diverged (non-finite loss or parameters)."""
