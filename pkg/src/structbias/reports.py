"""Versioned machine-readable reports and the dual-pipeline agreement logic.

Every report the CLI emits is a JSON document with ``schema_version`` and
``kind`` fields and is validated against the published schema below before it
is written. Figures are derived artifacts; the numbers they display are
always present in the report itself.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Mapping, Optional

import jsonschema
import numpy as np

from .classes import CLASS_ORDER
from .errors import ValidationError
from .nn.network import DeepBiasReport
from .stats import RejectionSummary

__all__ = [
    "Agreement",
    "ComparisonRecord",
    "ExperimentSummary",
    "REPORT_SCHEMA_VERSION",
    "REPORT_SCHEMAS",
    "SummaryCell",
    "agreement_of",
    "boundary_tie_counts",
    "build_detect_report",
    "validate_report",
]

REPORT_SCHEMA_VERSION = 1

_CLASS_NAMES = [c.value for c in CLASS_ORDER]


class Agreement(str, Enum):
    """Joint verdict of the statistical and deep pipelines."""

    BOTH_BIASED = "BothBiased"
    BOTH_UNBIASED = "BothUnbiased"
    STAT_ONLY = "StatOnly"
    DEEP_ONLY = "DeepOnly"


def agreement_of(stat_biased: bool, deep_biased: bool) -> Agreement:
    """Pure function of the two biased flags."""
    if stat_biased and deep_biased:
        return Agreement.BOTH_BIASED
    if stat_biased:
        return Agreement.STAT_ONLY
    if deep_biased:
        return Agreement.DEEP_ONLY
    return Agreement.BOTH_UNBIASED


def boundary_tie_counts(matrix) -> list[dict]:
    """Per dimension: how many values sit exactly on a bound (0 or 1).

    Multiple values exactly on the same bound are the saturate-correction
    signature a uniform distribution produces with probability zero.
    """
    data = np.asarray(matrix, dtype=np.float64)
    if data.ndim != 2:
        raise ValidationError(f"expected an N x d matrix, got shape {data.shape}")
    return [
        {"at_zero": int(np.sum(column == 0.0)), "at_one": int(np.sum(column == 1.0))}
        for column in data.T
    ]


# --------------------------------------------------------------------------
# schemas
# --------------------------------------------------------------------------

_PROBABILITY = {"type": "number", "minimum": 0.0, "maximum": 1.0}
_COUNT = {"type": "integer", "minimum": 0}

_CLASS_PROBABILITIES = {
    "type": "object",
    "properties": {name: _PROBABILITY for name in _CLASS_NAMES},
    "required": _CLASS_NAMES,
    "additionalProperties": False,
}

_STATISTICAL_SECTION = {
    "type": "object",
    "properties": {
        "alpha": _PROBABILITY,
        "fraction_rejected": _PROBABILITY,
        "biased": {"type": "boolean"},
        "per_dimension": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "properties": {
                    "dimension": _COUNT,
                    "rejected": {"type": "boolean"},
                    "tests": {
                        "type": "array",
                        "minItems": 1,
                        "items": {
                            "type": "object",
                            "properties": {
                                "test": {"type": "string"},
                                "statistic": {"type": "number"},
                                "p_value": _PROBABILITY,
                            },
                            "required": ["test", "statistic", "p_value"],
                        },
                    },
                },
                "required": ["dimension", "rejected", "tests"],
            },
        },
    },
    "required": ["alpha", "fraction_rejected", "biased", "per_dimension"],
}

_DEEP_SECTION = {
    "type": "object",
    "properties": {
        "fraction_non_uniform": _PROBABILITY,
        "biased": {"type": "boolean"},
        "aggregated": _CLASS_PROBABILITIES,
        "per_dimension": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "properties": {
                    "probabilities": _CLASS_PROBABILITIES,
                    "label": {"type": "string", "enum": _CLASS_NAMES},
                },
                "required": ["probabilities", "label"],
            },
        },
    },
    "required": ["fraction_non_uniform", "biased", "aggregated", "per_dimension"],
}

_AGREEMENT = {"type": "string", "enum": [a.value for a in Agreement]}

DETECT_REPORT_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "properties": {
        "schema_version": {"const": REPORT_SCHEMA_VERSION},
        "kind": {"const": "detect"},
        "method": {"type": "string", "enum": ["stat", "deep", "both"]},
        "alpha": _PROBABILITY,
        "positions": {
            "type": "object",
            "properties": {
                "runs": {"type": "integer", "minimum": 1},
                "dimensionality": {"type": "integer", "minimum": 1},
                "provenance": {"type": "object"},
            },
            "required": ["runs", "dimensionality"],
        },
        "boundary_ties": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "properties": {"at_zero": _COUNT, "at_one": _COUNT},
                "required": ["at_zero", "at_one"],
            },
        },
        "statistical": {"oneOf": [{"type": "null"}, _STATISTICAL_SECTION]},
        "deep": {"oneOf": [{"type": "null"}, _DEEP_SECTION]},
        "model": {"oneOf": [{"type": "null"}, {"type": "object"}]},
        "agreement": {"oneOf": [{"type": "null"}, _AGREEMENT]},
    },
    "required": ["schema_version", "kind", "method", "alpha", "positions",
                 "boundary_ties", "statistical", "deep", "agreement"],
    "additionalProperties": False,
}

_SUMMARY_CELL_SCHEMA = {
    "type": "object",
    "properties": {
        "method": {"type": "string", "enum": ["stat", "deep"]},
        "dimensionality": {"type": "integer", "minimum": 1},
        "sample_size": {"type": "integer", "minimum": 1},
        "tp": _COUNT, "fp": _COUNT, "tn": _COUNT, "fn": _COUNT,
        "fpr": _PROBABILITY, "fnr": _PROBABILITY, "f1": _PROBABILITY,
    },
    "required": ["method", "dimensionality", "sample_size",
                 "tp", "fp", "tn", "fn", "fpr", "fnr", "f1"],
    "additionalProperties": False,
}

COMPARE_REPORT_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "properties": {
        "schema_version": {"const": REPORT_SCHEMA_VERSION},
        "kind": {"const": "compare"},
        "alpha": _PROBABILITY,
        "master_seed": {"type": "integer"},
        "subjects_per_condition": {
            "type": "object",
            "properties": {"biased": _COUNT, "unbiased": _COUNT},
            "required": ["biased", "unbiased"],
        },
        "cells": {"type": "array", "minItems": 1, "items": _SUMMARY_CELL_SCHEMA},
    },
    "required": ["schema_version", "kind", "alpha", "master_seed",
                 "subjects_per_condition", "cells"],
    "additionalProperties": False,
}

BENCHMARK_REPORT_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "properties": {
        "schema_version": {"const": REPORT_SCHEMA_VERSION},
        "kind": {"const": "benchmark"},
        "alpha": _PROBABILITY,
        "budget": {"type": "object"},
        "records": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "properties": {
                    "subject": {"type": "string"},
                    "config": {"type": "object"},
                    "statistical": _STATISTICAL_SECTION,
                    "deep": _DEEP_SECTION,
                    "agreement": _AGREEMENT,
                    "positions_file": {"type": "string"},
                },
                "required": ["subject", "statistical", "deep", "agreement"],
            },
        },
    },
    "required": ["schema_version", "kind", "alpha", "budget", "records"],
    "additionalProperties": False,
}

REPORT_SCHEMAS = {
    "detect": DETECT_REPORT_SCHEMA,
    "compare": COMPARE_REPORT_SCHEMA,
    "benchmark": BENCHMARK_REPORT_SCHEMA,
}


def validate_report(record: Mapping) -> None:
    """Check a report against its published schema; ValidationError if not."""
    if not isinstance(record, Mapping):
        raise ValidationError("report must be a mapping")
    kind = record.get("kind")
    if kind not in REPORT_SCHEMAS:
        raise ValidationError(
            f"unknown report kind {kind!r}; expected one of {sorted(REPORT_SCHEMAS)}"
        )
    try:
        jsonschema.validate(instance=record, schema=REPORT_SCHEMAS[kind])
    except jsonschema.ValidationError as exc:
        raise ValidationError(
            f"report does not match the {kind} schema: {exc.message}"
        ) from exc


# --------------------------------------------------------------------------
# report builders
# --------------------------------------------------------------------------

def build_detect_report(matrix, method: str, alpha: float,
                        statistical: Optional[RejectionSummary] = None,
                        deep: Optional[DeepBiasReport] = None,
                        provenance: Optional[Mapping] = None,
                        model_info: Optional[Mapping] = None) -> dict:
    """Assemble and validate a detect report for one position matrix."""
    data = np.asarray(matrix, dtype=np.float64)
    if method not in ("stat", "deep", "both"):
        raise ValidationError(f"method must be stat, deep or both, got {method!r}")
    agreement = (
        agreement_of(statistical.biased, deep.biased).value
        if statistical is not None and deep is not None
        else None
    )
    positions: dict = {"runs": int(data.shape[0]), "dimensionality": int(data.shape[1])}
    if provenance:
        positions["provenance"] = dict(provenance)
    report = {
        "schema_version": REPORT_SCHEMA_VERSION,
        "kind": "detect",
        "method": method,
        "alpha": float(alpha),
        "positions": positions,
        "boundary_ties": boundary_tie_counts(data),
        "statistical": statistical.to_record() if statistical is not None else None,
        "deep": deep.to_record() if deep is not None else None,
        "model": dict(model_info) if model_info is not None else None,
        "agreement": agreement,
    }
    validate_report(report)
    return report


@dataclass(frozen=True)
class ComparisonRecord:
    """One benchmark subject: both pipelines' verdicts plus their agreement."""

    subject_id: str
    statistical: RejectionSummary
    deep: DeepBiasReport
    agreement: Agreement

    def __post_init__(self):
        expected = agreement_of(self.statistical.biased, self.deep.biased)
        if Agreement(self.agreement) is not expected:
            raise ValidationError(
                f"agreement {self.agreement} inconsistent with biased flags "
                f"(stat={self.statistical.biased}, deep={self.deep.biased})"
            )

    @classmethod
    def of(cls, subject_id: str, statistical: RejectionSummary,
           deep: DeepBiasReport) -> "ComparisonRecord":
        return cls(subject_id=subject_id, statistical=statistical, deep=deep,
                   agreement=agreement_of(statistical.biased, deep.biased))

    def to_record(self) -> dict:
        return {
            "subject": self.subject_id,
            "statistical": self.statistical.to_record(),
            "deep": self.deep.to_record(),
            "agreement": self.agreement.value,
        }


@dataclass(frozen=True)
class SummaryCell:
    """Confusion counts for one (method, dimensionality, sample size) cell."""

    method: str
    dimensionality: int
    sample_size: int
    tp: int
    fp: int
    tn: int
    fn: int

    def __post_init__(self):
        if self.method not in ("stat", "deep"):
            raise ValidationError(f"method must be stat or deep, got {self.method!r}")
        for name in ("tp", "fp", "tn", "fn"):
            if getattr(self, name) < 0:
                raise ValidationError(f"{name} must be non-negative")

    @property
    def false_positive_rate(self) -> float:
        negatives = self.fp + self.tn
        return self.fp / negatives if negatives else 0.0

    @property
    def false_negative_rate(self) -> float:
        positives = self.fn + self.tp
        return self.fn / positives if positives else 0.0

    @property
    def f1(self) -> float:
        denominator = 2 * self.tp + self.fp + self.fn
        return 2 * self.tp / denominator if denominator else 0.0

    def to_record(self) -> dict:
        return {
            "method": self.method,
            "dimensionality": self.dimensionality,
            "sample_size": self.sample_size,
            "tp": self.tp, "fp": self.fp, "tn": self.tn, "fn": self.fn,
            "fpr": self.false_positive_rate,
            "fnr": self.false_negative_rate,
            "f1": self.f1,
        }


@dataclass(frozen=True)
class ExperimentSummary:
    """Dual-pipeline comparison outcome across all conditions."""

    cells: tuple
    alpha: float
    master_seed: int
    biased_subjects: int
    unbiased_subjects: int

    def __post_init__(self):
        object.__setattr__(self, "cells", tuple(self.cells))
        if not self.cells:
            raise ValidationError("summary needs at least one cell")
        for cell in self.cells:
            if not isinstance(cell, SummaryCell):
                raise ValidationError("cells must be SummaryCell instances")

    def cell(self, method: str, dimensionality: int, sample_size: int) -> SummaryCell:
        for candidate in self.cells:
            if (candidate.method == method
                    and candidate.dimensionality == dimensionality
                    and candidate.sample_size == sample_size):
                return candidate
        raise ValidationError(
            f"no cell for method={method}, d={dimensionality}, n={sample_size}"
        )

    def to_record(self) -> dict:
        report = {
            "schema_version": REPORT_SCHEMA_VERSION,
            "kind": "compare",
            "alpha": self.alpha,
            "master_seed": self.master_seed,
            "subjects_per_condition": {
                "biased": self.biased_subjects,
                "unbiased": self.unbiased_subjects,
            },
            "cells": [cell.to_record() for cell in self.cells],
        }
        validate_report(report)
        return report
