"""Reference optimizers on f0 and run collection into PositionMatrix data.

Algorithms
----------
* RandomSearch — argmin over uniformly drawn points.
* DE — generational differential evolution, ``best/1/bin`` or ``rand/1/bin``,
  binomial crossover, selectable boundary correction.
* OnePlusOneES — (1+1) evolution strategy, isotropic Gaussian mutation with a
  1/5-success-rule step-size adaptation.
* LocalSearch — adaptive-step uniform-box local search (double the step after
  two consecutive successes, halve it after three consecutive failures).

Determinism
-----------
Each run owns a private ``numpy`` Generator seeded with ``run_seed``; the
same stream supplies the optimizer's decisions and the default objective's
fresh U(0,1) draws (one per evaluation). The draw order per algorithm is
fixed and documented on the implementation functions, so results are
bit-reproducible given ``(config, budget, run_seed)`` regardless of chunk
sizes. With a custom objective the stream order additionally depends on how
many draws the objective consumes per call.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable, Mapping

import numpy as np

from .corrections import BoundaryCorrection, apply_correction
from .errors import ValidationError
from .f0 import f0_eval
from .positions import PositionMatrix
from .seeding import derive_seed

__all__ = [
    "Algorithm",
    "DE_STRATEGIES",
    "OptimizerConfig",
    "RunBudget",
    "collect",
    "reference_portfolio",
    "run_optimizer",
]

Objective = Callable[[np.ndarray, np.random.Generator], float]


class Algorithm(str, Enum):
    RANDOM_SEARCH = "RandomSearch"
    DE = "DE"
    ONE_PLUS_ONE_ES = "OnePlusOneES"
    LOCAL_SEARCH = "LocalSearch"


DE_STRATEGIES = ("best/1/bin", "rand/1/bin")

DESK_EVALUATIONS_PER_DIMENSION = 1_000
PAPER_EVALUATIONS_PER_DIMENSION = 10_000

_RS_CHUNK = 4096


@dataclass(frozen=True)
class OptimizerConfig:
    """A fully specified optimizer: algorithm, strategy and correction."""

    algorithm: Algorithm
    boundary_correction: BoundaryCorrection = BoundaryCorrection.SATURATE
    population_size: int = 20
    mutation_factor: float = 0.5
    crossover_rate: float = 0.9
    strategy: str = "best/1/bin"
    initial_step: float = 0.1

    def __post_init__(self):
        object.__setattr__(self, "algorithm", Algorithm(self.algorithm))
        object.__setattr__(
            self, "boundary_correction", BoundaryCorrection(self.boundary_correction)
        )
        if not isinstance(self.population_size, int) or self.population_size < 1:
            raise ValidationError("population_size must be a positive integer")
        if self.algorithm is Algorithm.DE and self.population_size < 4:
            raise ValidationError("DE needs a population of at least 4")
        if not 0.0 < self.mutation_factor <= 2.0:
            raise ValidationError("mutation factor F must lie in (0, 2]")
        if not 0.0 <= self.crossover_rate <= 1.0:
            raise ValidationError("crossover rate CR must lie in [0, 1]")
        if self.strategy not in DE_STRATEGIES:
            raise ValidationError(
                f"unknown DE strategy {self.strategy!r}; expected one of {DE_STRATEGIES}"
            )
        if not 0.0 < self.initial_step <= 1.0:
            raise ValidationError("initial_step must lie in (0, 1]")

    @property
    def config_id(self) -> str:
        """Stable identifier used in provenance records and reports."""
        correction = self.boundary_correction.value.lower()
        if self.algorithm is Algorithm.RANDOM_SEARCH:
            return "random_search"
        if self.algorithm is Algorithm.DE:
            strategy = self.strategy.replace("/", "_")
            return f"de_{strategy}_p{self.population_size}_{correction}"
        if self.algorithm is Algorithm.ONE_PLUS_ONE_ES:
            return f"es_1plus1_{correction}"
        return f"local_search_{correction}"

    def to_record(self) -> dict:
        return {
            "algorithm": self.algorithm.value,
            "boundary_correction": self.boundary_correction.value,
            "population_size": self.population_size,
            "mutation_factor": self.mutation_factor,
            "crossover_rate": self.crossover_rate,
            "strategy": self.strategy,
            "initial_step": self.initial_step,
        }

    @classmethod
    def from_record(cls, record: Mapping) -> "OptimizerConfig":
        try:
            return cls(**{key: record[key] for key in (
                "algorithm", "boundary_correction", "population_size",
                "mutation_factor", "crossover_rate", "strategy", "initial_step",
            )})
        except KeyError as exc:
            raise ValidationError(f"optimizer record missing field {exc}") from exc


@dataclass(frozen=True)
class RunBudget:
    """How much searching each run may do and how many runs to collect.

    ``max_evaluations`` defaults to the desk-scale 1000·n; use
    :meth:`paper_scale` for the full 10000·n budget.
    """

    dimensionality: int
    max_evaluations: int | None = None
    runs: int = 100
    master_seed: int = 0

    def __post_init__(self):
        if not isinstance(self.dimensionality, int) or self.dimensionality < 1:
            raise ValidationError("dimensionality must be a positive integer")
        if self.max_evaluations is None:
            object.__setattr__(
                self,
                "max_evaluations",
                DESK_EVALUATIONS_PER_DIMENSION * self.dimensionality,
            )
        if not isinstance(self.max_evaluations, int) or self.max_evaluations < 1:
            raise ValidationError("max_evaluations must be a positive integer")
        if not isinstance(self.runs, int) or self.runs < 30:
            raise ValidationError("runs must be an integer >= 30")

    @classmethod
    def paper_scale(cls, dimensionality: int, runs: int = 100,
                    master_seed: int = 0) -> "RunBudget":
        return cls(
            dimensionality=dimensionality,
            max_evaluations=PAPER_EVALUATIONS_PER_DIMENSION * dimensionality,
            runs=runs,
            master_seed=master_seed,
        )

    def to_record(self) -> dict:
        return {
            "dimensionality": self.dimensionality,
            "max_evaluations": self.max_evaluations,
            "runs": self.runs,
            "master_seed": self.master_seed,
        }


def _evaluate_rows(rows: np.ndarray, stream: np.random.Generator,
                   objective: Objective) -> np.ndarray:
    """Objective values for a block of feasible points.

    For the default f0 objective this is a single vectorized draw (identical
    stream consumption to row-by-row calls); custom objectives are called one
    row at a time in order.
    """
    if objective is f0_eval:
        return stream.random(rows.shape[0])
    return np.array([objective(row, stream) for row in rows], dtype=np.float64)


def _run_random_search(config: OptimizerConfig, budget: RunBudget,
                       stream: np.random.Generator, objective: Objective) -> np.ndarray:
    """Draw order per candidate: n position coordinates, then 1 objective draw.

    Candidates are processed in chunks of interleaved (n+1)-draw rows, which
    consumes the stream identically to a per-candidate loop.
    """
    n = budget.dimensionality
    best_x, best_f = None, np.inf
    remaining = budget.max_evaluations
    fast = objective is f0_eval
    while remaining > 0:
        count = min(_RS_CHUNK, remaining)
        if fast:
            block = stream.random((count, n + 1))
            points, values = block[:, :n], block[:, n]
        else:
            points = np.empty((count, n))
            values = np.empty(count)
            for i in range(count):
                points[i] = stream.random(n)
                values[i] = objective(points[i], stream)
        index = int(np.argmin(values))
        if values[index] < best_f:
            best_f = float(values[index])
            best_x = points[index].copy()
        remaining -= count
    return best_x


def _distinct_donor_indices(stream: np.random.Generator, population: int,
                            trials: int, count: int) -> np.ndarray:
    """For each trial row i: ``count`` distinct indices != i, uniformly random.

    One block of trials x population uniform keys is drawn; the ``count``
    smallest keys per row (self excluded) give the donor indices.
    """
    keys = stream.random((trials, population))
    keys[np.arange(trials), np.arange(trials) % population] = np.inf
    return np.argsort(keys, axis=1, kind="stable")[:, :count]


def _run_de(config: OptimizerConfig, budget: RunBudget,
            stream: np.random.Generator, objective: Objective) -> np.ndarray:
    """Generational DE. Draw order per generation: donor-index keys
    (k x population), crossover mask (k x n), forced-dimension indices (k),
    boundary-correction draws (resample only, row-major over infeasible
    coordinates), then k objective draws.
    """
    n = budget.dimensionality
    pop = config.population_size
    if budget.max_evaluations < pop:
        raise ValidationError(
            f"budget of {budget.max_evaluations} evaluations cannot initialize "
            f"a population of {pop}"
        )
    positions = stream.random((pop, n))
    values = _evaluate_rows(positions, stream, objective)
    evaluations = pop

    best_index = int(np.argmin(values))
    best_x = positions[best_index].copy()
    best_f = float(values[best_index])

    donors = 2 if config.strategy == "best/1/bin" else 3
    factor = config.mutation_factor

    while evaluations < budget.max_evaluations:
        k = min(pop, budget.max_evaluations - evaluations)
        index_block = _distinct_donor_indices(stream, pop, k, donors)
        if config.strategy == "best/1/bin":
            base = np.broadcast_to(positions[best_index], (k, n))
            diff = positions[index_block[:, 0]] - positions[index_block[:, 1]]
        else:
            base = positions[index_block[:, 0]]
            diff = positions[index_block[:, 1]] - positions[index_block[:, 2]]
        mutants = base + factor * diff

        mask = stream.random((k, n)) < config.crossover_rate
        forced = stream.integers(0, n, size=k)
        mask[np.arange(k), forced] = True
        trials = np.where(mask, mutants, positions[:k])

        trials = apply_correction(trials, config.boundary_correction, stream)
        trial_values = _evaluate_rows(trials, stream, objective)
        evaluations += k

        improved = trial_values <= values[:k]
        positions[:k][improved] = trials[improved]
        values[:k][improved] = trial_values[improved]

        generation_best = int(np.argmin(trial_values))
        if trial_values[generation_best] < best_f:
            best_f = float(trial_values[generation_best])
            best_x = trials[generation_best].copy()
        best_index = int(np.argmin(values))
    return best_x


def _run_one_plus_one_es(config: OptimizerConfig, budget: RunBudget,
                         stream: np.random.Generator, objective: Objective) -> np.ndarray:
    """(1+1)-ES. Draw order per iteration: n Gaussian mutation draws,
    boundary-correction draws (resample only), 1 objective draw. The step
    size follows the 1/5 success rule, sigma <- sigma * exp((hit - 0.2) / 3).
    """
    n = budget.dimensionality
    current = stream.random(n)
    current_f = objective(current, stream)
    sigma = config.initial_step
    evaluations = 1
    while evaluations < budget.max_evaluations:
        candidate = current + sigma * stream.standard_normal(n)
        candidate = apply_correction(candidate, config.boundary_correction, stream)
        candidate_f = objective(candidate, stream)
        evaluations += 1
        success = candidate_f <= current_f
        if success:
            current, current_f = candidate, candidate_f
        sigma *= np.exp(((1.0 if success else 0.0) - 0.2) / 3.0)
        sigma = float(np.clip(sigma, 1e-12, 1.0))
    return np.asarray(current, dtype=np.float64)


def _run_local_search(config: OptimizerConfig, budget: RunBudget,
                      stream: np.random.Generator, objective: Objective) -> np.ndarray:
    """Adaptive-step local search. Draw order per iteration: n uniform offset
    draws, boundary-correction draws (resample only), 1 objective draw.
    """
    n = budget.dimensionality
    current = stream.random(n)
    current_f = objective(current, stream)
    step = config.initial_step
    evaluations = 1
    successes = failures = 0
    while evaluations < budget.max_evaluations:
        offset = step * (2.0 * stream.random(n) - 1.0)
        candidate = apply_correction(current + offset, config.boundary_correction, stream)
        candidate_f = objective(candidate, stream)
        evaluations += 1
        if candidate_f <= current_f:
            current, current_f = candidate, candidate_f
            successes, failures = successes + 1, 0
        else:
            successes, failures = 0, failures + 1
        if successes >= 2:
            step, successes = min(step * 2.0, 1.0), 0
        if failures >= 3:
            step, failures = max(step * 0.5, 1e-12), 0
    return np.asarray(current, dtype=np.float64)


_RUNNERS = {
    Algorithm.RANDOM_SEARCH: _run_random_search,
    Algorithm.DE: _run_de,
    Algorithm.ONE_PLUS_ONE_ES: _run_one_plus_one_es,
    Algorithm.LOCAL_SEARCH: _run_local_search,
}


def run_optimizer(config: OptimizerConfig, budget: RunBudget, run_seed: int,
                  objective: Objective = f0_eval) -> np.ndarray:
    """One run: returns the best position encountered, in [0, 1]^n."""
    if not isinstance(config, OptimizerConfig):
        raise ValidationError("config must be an OptimizerConfig")
    if not isinstance(budget, RunBudget):
        raise ValidationError("budget must be a RunBudget")
    stream = np.random.default_rng(int(run_seed))
    result = _RUNNERS[config.algorithm](config, budget, stream, objective)
    result = np.asarray(result, dtype=np.float64)
    if result.shape != (budget.dimensionality,) or np.any((result < 0) | (result > 1)):
        raise ValidationError("optimizer returned an invalid position")
    return result


def collect(config: OptimizerConfig, budget: RunBudget,
            objective: Objective = f0_eval) -> PositionMatrix:
    """budget.runs independent runs; row i uses seed derive_seed(master, "run", i)."""
    seeds = [derive_seed(budget.master_seed, "run", i) for i in range(budget.runs)]
    rows = [run_optimizer(config, budget, seed, objective) for seed in seeds]
    provenance = {
        "optimizer": config.config_id,
        "config": config.to_record(),
        "budget": budget.to_record(),
        "run_seeds": seeds,
    }
    return PositionMatrix(data=np.stack(rows), provenance=provenance)


def reference_portfolio() -> tuple[OptimizerConfig, ...]:
    """The fixed desk-scale stand-in for a heterogeneous algorithm pool:
    RandomSearch, both DE strategies crossed with all four boundary
    corrections, and the two single-solution methods.
    """
    configs = [OptimizerConfig(algorithm=Algorithm.RANDOM_SEARCH)]
    de = OptimizerConfig(algorithm=Algorithm.DE)
    for strategy in DE_STRATEGIES:
        for correction in BoundaryCorrection:
            configs.append(replace(de, strategy=strategy, boundary_correction=correction))
    configs.append(OptimizerConfig(algorithm=Algorithm.ONE_PLUS_ONE_ES))
    configs.append(OptimizerConfig(algorithm=Algorithm.LOCAL_SEARCH))
    return tuple(configs)
