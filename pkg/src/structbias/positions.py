"""PositionMatrix: final optimizer positions, the detectors' input format.

On disk a matrix is a CSV with header ``dim_0,...,dim_{d-1}``, one row per
run, full-precision decimal reals (``repr`` round-trips bit-exactly). A
sidecar JSON file at ``<path>.provenance.json`` records where the data came
from (optimizer config, budget, run seeds) plus the format version.
"""

from __future__ import annotations

import csv
import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np

from .errors import DataFormatError, MissingResourceError, ValidationError, VersionMismatchError

__all__ = [
    "POSITIONS_VERSION",
    "PositionMatrix",
    "load_positions",
    "provenance_path",
    "save_positions",
]

POSITIONS_VERSION = 1

_DIM_PATTERN = re.compile(r"dim_(\d+)")


@dataclass(frozen=True)
class PositionMatrix:
    """N final positions in [0, 1]^d plus a provenance record."""

    data: np.ndarray
    provenance: Mapping = field(default_factory=dict)

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim != 2 or data.shape[0] < 1 or data.shape[1] < 1:
            raise ValidationError(
                f"positions must form a non-empty N x d matrix, got shape {data.shape}"
            )
        if not np.all(np.isfinite(data)):
            raise ValidationError("positions contain non-finite entries")
        if np.any((data < 0.0) | (data > 1.0)):
            raise ValidationError("positions must lie in [0, 1]")
        data = data.copy()
        data.setflags(write=False)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "provenance", dict(self.provenance))

    @property
    def runs(self) -> int:
        return int(self.data.shape[0])

    @property
    def dimensionality(self) -> int:
        return int(self.data.shape[1])


def provenance_path(path) -> Path:
    """Sidecar location for a positions file."""
    return Path(str(path) + ".provenance.json")


def save_positions(matrix: PositionMatrix, path) -> None:
    """Write the CSV plus its provenance sidecar."""
    path = Path(path)
    header = [f"dim_{i}" for i in range(matrix.dimensionality)]
    with path.open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(header)
        for row in matrix.data:
            writer.writerow([repr(float(v)) for v in row])
    sidecar = {"format_version": POSITIONS_VERSION, "provenance": matrix.provenance}
    provenance_path(path).write_text(json.dumps(sidecar, indent=2, sort_keys=True) + "\n")


def _parse_header(fields: list[str], path: Path) -> int:
    for i, name in enumerate(fields):
        match = _DIM_PATTERN.fullmatch(name)
        if match is None or int(match.group(1)) != i:
            raise DataFormatError(
                f"{path}: expected header dim_0,...,dim_{{d-1}}, got {fields[:4]}..."
            )
    if not fields:
        raise DataFormatError(f"{path}: empty header")
    return len(fields)


def _load_sidecar(path: Path) -> Mapping:
    sidecar_file = provenance_path(path)
    if not sidecar_file.exists():
        return {}
    try:
        document = json.loads(sidecar_file.read_text())
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"{sidecar_file}: invalid JSON ({exc})") from exc
    if not isinstance(document, dict) or "format_version" not in document:
        raise DataFormatError(f"{sidecar_file}: missing format_version")
    if document["format_version"] != POSITIONS_VERSION:
        raise VersionMismatchError(
            f"{sidecar_file}: format_version {document['format_version']!r} "
            f"not supported (this build reads {POSITIONS_VERSION})"
        )
    provenance = document.get("provenance", {})
    if not isinstance(provenance, dict):
        raise DataFormatError(f"{sidecar_file}: provenance must be an object")
    return provenance


def load_positions(path) -> PositionMatrix:
    """Read a positions CSV (and its sidecar, when present) back bit-exactly."""
    path = Path(path)
    if not path.exists():
        raise MissingResourceError(f"positions file not found: {path}")
    with path.open(newline="") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise DataFormatError(f"{path}: file is empty") from None
        width = _parse_header(header, path)
        rows = []
        for line_number, fields in enumerate(reader, start=2):
            if len(fields) != width:
                raise DataFormatError(
                    f"{path}:{line_number}: expected {width} columns, got {len(fields)}"
                )
            try:
                rows.append([float(value) for value in fields])
            except ValueError as exc:
                raise DataFormatError(f"{path}:{line_number}: {exc}") from exc
    if not rows:
        raise DataFormatError(f"{path}: no data rows")
    try:
        return PositionMatrix(data=np.array(rows, dtype=np.float64),
                              provenance=_load_sidecar(path))
    except ValidationError as exc:
        raise DataFormatError(f"{path}: {exc}") from exc
