"""Stratified dataset assembly and serialization.

``build_dataset`` turns a portfolio of scenario specs into train/validation
splits: per class, the requested count is divided as evenly as possible across
that class's specs, every sample gets its own seed derived from the master
seed (so regeneration is bit-exact and order-independent), and the split is
stratified per class.

Serialization is one CSV file per split (columns ``v0..v{n-1}, label,
scenario_id, seed``; floats written as shortest round-trip representations,
so reloading is bit-identical) plus a JSON portfolio export with a schema
version.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .classes import CLASS_ORDER, BiasClass
from .errors import DataFormatError, ValidationError, VersionMismatchError
from .scenarios import PORTFOLIO_VERSION, ScenarioSpec, generate
from .seeding import derive_seed, rng_for

__all__ = [
    "DatasetSpec",
    "Dataset",
    "build_dataset",
    "save_dataset",
    "load_dataset",
    "save_portfolio",
    "load_portfolio",
    "desk_scale_spec",
]


@dataclass(frozen=True)
class DatasetSpec:
    """How much data to build, at what sample size, split how, seeded how."""

    per_class_counts: Mapping[BiasClass, int]
    sample_size: int
    train_fraction: float = 0.8
    master_seed: int = 0

    def __post_init__(self):
        counts = {}
        for label, count in self.per_class_counts.items():
            label = BiasClass(label)
            count = int(count)
            if count < 0:
                raise ValidationError("per-class counts must be non-negative")
            counts[label] = count
        if not counts or all(count == 0 for count in counts.values()):
            raise ValidationError("dataset spec requests no samples")
        object.__setattr__(self, "per_class_counts", counts)
        if int(self.sample_size) < 1:
            raise ValidationError("sample_size must be a positive integer")
        object.__setattr__(self, "sample_size", int(self.sample_size))
        if not 0.0 < self.train_fraction < 1.0:
            raise ValidationError("train_fraction must lie in (0, 1)")
        object.__setattr__(self, "master_seed", int(self.master_seed))

    def to_record(self) -> dict:
        return {
            "per_class_counts": {c.value: n for c, n in self.per_class_counts.items()},
            "sample_size": self.sample_size,
            "train_fraction": self.train_fraction,
            "master_seed": self.master_seed,
        }


def desk_scale_spec(sample_size: int, per_bias_class: int = 2000,
                    master_seed: int = 0) -> DatasetSpec:
    """The default 4:1 scheme: uniform count = sum of the bias-class counts."""
    counts = {label: per_bias_class for label in CLASS_ORDER if label is not BiasClass.UNIFORM}
    counts[BiasClass.UNIFORM] = 4 * per_bias_class
    return DatasetSpec(per_class_counts=counts, sample_size=sample_size,
                       master_seed=master_seed)


@dataclass(frozen=True)
class Dataset:
    """Generated samples with full provenance, row-aligned."""

    values: np.ndarray
    labels: tuple[BiasClass, ...]
    scenario_ids: tuple[str, ...]
    seeds: tuple[int, ...]

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2:
            raise ValidationError("dataset values must be a 2-D array")
        if not (len(self.labels) == len(self.scenario_ids) == len(self.seeds) == values.shape[0]):
            raise ValidationError("dataset columns must be row-aligned")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return self.values.shape[0]

    @property
    def sample_size(self) -> int:
        return self.values.shape[1]

    def class_counts(self) -> dict[BiasClass, int]:
        counts = {label: 0 for label in CLASS_ORDER}
        for label in self.labels:
            counts[label] += 1
        return counts


def _specs_by_class(portfolio: Sequence[ScenarioSpec]) -> dict[BiasClass, list[ScenarioSpec]]:
    grouped: dict[BiasClass, list[ScenarioSpec]] = {}
    for spec in portfolio:
        grouped.setdefault(spec.class_label, []).append(spec)
    return grouped


def build_dataset(dataset_spec: DatasetSpec,
                  portfolio: Sequence[ScenarioSpec]) -> tuple[Dataset, Dataset]:
    """Generate and stratify; returns (train, validation)."""
    grouped = _specs_by_class(portfolio)
    train_rows, val_rows = [], []

    for label in CLASS_ORDER:
        count = dataset_spec.per_class_counts.get(label, 0)
        if count == 0:
            continue
        specs = grouped.get(label)
        if not specs:
            raise ValidationError(
                f"portfolio has no specs for requested class {label.value!r}"
            )
        if count < len(specs):
            raise ValidationError(
                f"class {label.value!r}: requested {count} samples across "
                f"{len(specs)} specs; need at least one sample per spec"
            )

        # divide as evenly as possible: the first (count % len) specs get one extra
        base, extra = divmod(count, len(specs))
        rows = []
        index = 0
        for spec_position, spec in enumerate(specs):
            spec_count = base + (1 if spec_position < extra else 0)
            sized = spec.with_sample_size(dataset_spec.sample_size)
            for _ in range(spec_count):
                seed = derive_seed(dataset_spec.master_seed, label.value, index)
                sample = generate(sized, seed)
                rows.append((sample.values, label, spec.scenario_id, seed))
                index += 1

        # stratified split: validation gets round((1 - train_fraction) * count)
        val_count = int(round((1.0 - dataset_spec.train_fraction) * count))
        perm = rng_for(dataset_spec.master_seed, "split", label.value).permutation(count)
        val_idx = set(perm[:val_count].tolist())
        for i, row in enumerate(rows):
            (val_rows if i in val_idx else train_rows).append(row)

    def as_dataset(rows) -> Dataset:
        if not rows:
            raise ValidationError("split would be empty; adjust counts or train_fraction")
        values = np.stack([r[0] for r in rows])
        return Dataset(
            values=values,
            labels=tuple(r[1] for r in rows),
            scenario_ids=tuple(r[2] for r in rows),
            seeds=tuple(r[3] for r in rows),
        )

    return as_dataset(train_rows), as_dataset(val_rows)


# ---------------------------------------------------------------------------
# serialization


def save_dataset(dataset: Dataset, path) -> None:
    """One CSV per split: v0..v{n-1}, label, scenario_id, seed."""
    path = Path(path)
    header = [f"v{i}" for i in range(dataset.sample_size)] + ["label", "scenario_id", "seed"]
    with path.open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(header)
        for row_values, label, scenario_id, seed in zip(
            dataset.values, dataset.labels, dataset.scenario_ids, dataset.seeds
        ):
            writer.writerow([repr(float(v)) for v in row_values]
                            + [label.value, scenario_id, str(seed)])


def load_dataset(path) -> Dataset:
    path = Path(path)
    with path.open(newline="") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise DataFormatError(f"{path}: empty dataset file") from None
        if len(header) < 4 or header[-3:] != ["label", "scenario_id", "seed"]:
            raise DataFormatError(f"{path}: malformed dataset header")
        sample_size = len(header) - 3
        if [f"v{i}" for i in range(sample_size)] != header[:-3]:
            raise DataFormatError(f"{path}: malformed dataset header")

        values, labels, scenario_ids, seeds = [], [], [], []
        for line_number, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise DataFormatError(f"{path}:{line_number}: wrong column count")
            try:
                values.append([float(v) for v in row[:sample_size]])
                labels.append(BiasClass(row[sample_size]))
                seeds.append(int(row[sample_size + 2]))
            except ValueError as exc:
                raise DataFormatError(f"{path}:{line_number}: {exc}") from exc
            scenario_ids.append(row[sample_size + 1])
    if not values:
        raise DataFormatError(f"{path}: dataset has no rows")
    return Dataset(
        values=np.array(values, dtype=np.float64),
        labels=tuple(labels),
        scenario_ids=tuple(scenario_ids),
        seeds=tuple(seeds),
    )


def save_portfolio(portfolio: Sequence[ScenarioSpec], path) -> None:
    """Portfolio export: one spec per record, with a schema version."""
    document = {
        "schema_version": PORTFOLIO_VERSION,
        "specs": [spec.to_record() for spec in portfolio],
    }
    Path(path).write_text(json.dumps(document, indent=2, sort_keys=True) + "\n")


def load_portfolio(path) -> tuple[ScenarioSpec, ...]:
    path = Path(path)
    try:
        document = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"{path}: not valid JSON: {exc}") from exc
    if not isinstance(document, dict) or "schema_version" not in document:
        raise DataFormatError(f"{path}: missing schema_version")
    if document["schema_version"] != PORTFOLIO_VERSION:
        raise VersionMismatchError(
            f"{path}: portfolio schema version {document['schema_version']} "
            f"is not supported (expected {PORTFOLIO_VERSION})"
        )
    try:
        return tuple(ScenarioSpec.from_record(record) for record in document["specs"])
    except (KeyError, TypeError) as exc:
        raise DataFormatError(f"{path}: malformed spec record: {exc}") from exc
