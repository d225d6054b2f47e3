"""Error taxonomy.

Every error the toolkit raises on purpose derives from :class:`StructBiasError`
and carries a machine-readable ``category`` plus a stable process exit code so
the CLI can fail in a scriptable way.
"""

from __future__ import annotations


class StructBiasError(Exception):
    """Base class for all toolkit errors."""

    category = "internal"
    exit_code = 1

    def to_record(self) -> dict:
        """Machine-readable error record emitted by the CLI on stderr."""
        return {"error": self.category, "message": str(self)}


class ValidationError(StructBiasError):
    """Invalid argument, parameter out of range, malformed request."""

    category = "validation"
    exit_code = 2


class DataFormatError(StructBiasError):
    """A data file (dataset, positions, report) failed to parse."""

    category = "data-format"
    exit_code = 3


class ModelFormatError(StructBiasError):
    """A model file is corrupt or structurally inconsistent."""

    category = "model-format"
    exit_code = 4


class VersionMismatchError(ModelFormatError):
    """A file declares a format version this build does not support."""

    category = "version-mismatch"
    exit_code = 5


class ShapeMismatchError(StructBiasError):
    """Input shape incompatible with a model or operation (wrong model picked)."""

    category = "shape-mismatch"
    exit_code = 6


class MissingResourceError(StructBiasError):
    """A required file (dataset, model, positions) is absent."""

    category = "missing-resource"
    exit_code = 7


class DivergenceError(StructBiasError):
    """Training produced a non-finite loss and was aborted."""

    category = "divergence"
    exit_code = 8
