"""Exception hierarchy shared across the package.

CLI exit-code mapping: ConfigError -> 1, data errors (EmbeddingFormatError,
InsufficientDataError, ManifestError) -> 2, anything else -> 3.
"""


class OpenSetALError(Exception):
    pass


class ConfigError(OpenSetALError):
    """Invalid or inconsistent user configuration."""


class DataError(OpenSetALError):
    """Problems with input data files or their contents."""


class EmbeddingFormatError(DataError):
    """Malformed EMB1 file; `offset` is the byte position of the defect."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


class ManifestError(DataError):
    """Manifest fails validation against itself or its embedding matrix."""


class InsufficientDataError(DataError):
    """Not enough samples to satisfy the requested pool composition."""


class AnnotationError(OpenSetALError):
    """Oracle query violates pool preconditions (unknown or duplicate index)."""

    def __init__(self, message: str, offending: list[int]):
        super().__init__(f"{message}: {offending}")
        self.offending = offending


class GenerationError(OpenSetALError):
    """Synthetic geometry cannot be realized (centers too crowded)."""


class DegeneratePromptError(OpenSetALError):
    """Template averaging produced a zero-norm prompt vector."""
