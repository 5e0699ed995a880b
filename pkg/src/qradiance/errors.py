"""Exceptions shared across the package.

Plain ``ValueError`` is used for invalid arguments; the classes below exist
for failure modes the CLI maps to dedicated exit codes.
"""


class ConfigError(ValueError):
    """Bad or incomplete experiment configuration (exit code 2)."""


class TrainingDivergedError(RuntimeError):
    """Non-finite loss or gradient during optimisation (exit code 3)."""


class ResourceLimitError(RuntimeError):
    """Requested computation exceeds the qubit/memory budget (exit code 4)."""


class UnsupportedVersionError(ValueError):
    """Checkpoint written by an incompatible format version."""
