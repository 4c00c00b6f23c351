"""Exception types shared across the package."""


class ShapeError(ValueError):
    """Tensor/image dimensions are inconsistent with the requested operation."""


class ConfigError(ValueError):
    """A configuration value violates a structural constraint."""


class ParameterError(ValueError):
    """An operation parameter is outside its valid range."""


class ContractError(RuntimeError):
    """An API contract was violated (e.g. backward on a non-scalar)."""


class ImageIOError(RuntimeError):
    """Image file could not be read or written; message carries the path."""


class MaskGenerationError(RuntimeError):
    """Mask generation could not hit the requested coverage bucket."""


class CheckpointError(RuntimeError):
    """Checkpoint file is missing, truncated, or structurally invalid."""


class TrainingAbortError(RuntimeError):
    """Training stopped because a loss term became non-finite."""
