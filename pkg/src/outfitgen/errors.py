"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes (data problems -> 3, numeric
failures -> 4); the service maps them onto HTTP error bodies.
"""


class OutfitgenError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(OutfitgenError):
    """Invalid configuration value or combination."""


class DatasetFormatError(OutfitgenError):
    """Dataset directory is missing a required file or has bad syntax."""


class DataIntegrityError(OutfitgenError):
    """Cross-references inside a dataset do not resolve."""


class VocabularyError(OutfitgenError):
    """An item declares a semantic type outside the declared vocabulary."""


class SamplingExhaustionError(OutfitgenError):
    """Negative sampling found no eligible replacement for some type."""

    def __init__(self, semantic_type: str, message: str | None = None):
        self.semantic_type = semantic_type
        super().__init__(message or f"no eligible negative item of type {semantic_type!r}")


class ShapeError(OutfitgenError):
    """Array input has the wrong dimensions for the operation."""


class NumericError(OutfitgenError):
    """Non-finite values where finite ones are required."""


class InvalidQueryError(OutfitgenError):
    """Query text cannot be embedded (empty or whitespace-only)."""


class ModalityError(OutfitgenError):
    """A discriminator mode needs a modality the caller did not supply."""


class PoolError(OutfitgenError):
    """A required candidate pool is empty."""

    def __init__(self, semantic_type: str, message: str | None = None):
        self.semantic_type = semantic_type
        super().__init__(message or f"empty candidate pool for type {semantic_type!r}")


class UndefinedCorrelationError(OutfitgenError):
    """Correlation is undefined because one distance series has zero variance."""


class CheckpointIntegrityError(OutfitgenError):
    """Checkpoint file is corrupt, truncated, or inconsistent."""
