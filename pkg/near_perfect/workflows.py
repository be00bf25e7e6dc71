"""
Experiment definitions and runner.

An experiment is split into cells, one per (n, alpha, trial) or per
(n, trial) for the alpha-independent baselines. Each cell draws its keys
and GA seed from its own RNG substream, so cells can run in any order or in
parallel and the assembled CSV is byte-identical for a given seed.
"""

import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from .baselines import SortedArray, binary_search, fks_build, fks_search
from .core_hash import build_table
from .fitness import FitnessConfig, KeySet, measure_searches
from .genetic import GaConfig, gen_alg, random_search
from .parsers import draw_keys
from .theory import expected_comparisons_asymptotic
from .utils import alpha_tag, speedup_percent, substream, table_size_for, validate_fill_factor

logger = logging.getLogger(__name__)

EXPERIMENTS = ("table1", "fig2", "fig3", "fig4")
STRUCTURES = ("near_perfect", "random_k", "binary_search", "fks", "sorted_array", "theory")
SEARCH_KINDS = ("successful", "unsuccessful", "mixed", "all", "none")
METRICS = (
    "avg_comparisons",
    "worst_comparisons",
    "table_size_slots",
    "speedup_vs_theory_pct",
    "theory_comparisons",
    "fitness",
    "table_size_bytes",
    "error",
)

DEFAULT_KEY_LENGTH = 16
FIGURE_SIZES = tuple(range(1000, 10001, 1000))

# metrics reported by each experiment; the cells compute a superset
_EXPERIMENT_METRICS = {
    "table1": {"avg_comparisons", "worst_comparisons", "theory_comparisons",
               "speedup_vs_theory_pct", "fitness"},
    "fig2": {"avg_comparisons", "fitness"},
    "fig3": {"worst_comparisons"},
    "fig4": {"table_size_slots", "table_size_bytes"},
}

AGGREGATE_TRIAL = -1


@dataclass(frozen=True)
class ExperimentSpec:
    """Grid and parameters of one experiment run."""

    experiment: str
    sizes: Tuple[int, ...]
    fill_factors: Tuple[float, ...]
    trials: int = 1
    rng_seed: int = 0
    ga: GaConfig = field(default_factory=GaConfig)
    lambda_: float = 0.5
    key_length: int = DEFAULT_KEY_LENGTH
    workers: int = 1

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ValueError(f"unknown experiment '{self.experiment}', expected one of {EXPERIMENTS}")
        object.__setattr__(self, 'sizes', tuple(int(n) for n in self.sizes))
        object.__setattr__(self, 'fill_factors',
                           tuple(validate_fill_factor(alpha) for alpha in self.fill_factors))
        if not self.sizes:
            raise ValueError("sizes must not be empty")
        if any(n < 1 for n in self.sizes):
            raise ValueError(f"sizes must be positive, got {self.sizes}")
        if not self.fill_factors:
            raise ValueError("fill factors must not be empty")
        if self.trials < 1:
            raise ValueError(f"trials must be at least 1, got {self.trials}")
        if self.key_length < 1:
            raise ValueError(f"key length must be positive, got {self.key_length}")
        if self.workers < 1:
            raise ValueError(f"workers must be positive, got {self.workers}")
        validate_fill_factor(self.lambda_, "lambda")


@dataclass(frozen=True)
class ResultRow:
    experiment: str
    n: int
    alpha: Optional[float]
    structure: str
    search_kind: str
    metric: str
    value: float
    trial: int
    note: str = ""

    def __post_init__(self):
        if self.structure not in STRUCTURES and self.metric != "error":
            raise ValueError(f"unknown structure '{self.structure}'")
        if self.search_kind not in SEARCH_KINDS:
            raise ValueError(f"unknown search kind '{self.search_kind}'")
        if self.metric not in METRICS:
            raise ValueError(f"unknown metric '{self.metric}'")
        if self.metric != "speedup_vs_theory_pct" and not self.value >= 0:
            raise ValueError(f"{self.metric} must be non-negative, got {self.value}")


RESULT_COLUMNS = [f.name for f in fields(ResultRow)]


@dataclass(frozen=True)
class ExperimentCell:
    kind: str
    n: int
    alpha: Optional[float]
    trial: int


class ExperimentError(RuntimeError):
    """A cell failed; the rows before it and an error marker were written."""


class ExperimentWorkflows:
    """Factory class for experiment specs and their cell plans."""

    @staticmethod
    def default_spec(experiment: str, **overrides) -> ExperimentSpec:
        """
        ExperimentSpec with the grid each experiment reports by default.

        table1 sweeps alpha 0.1..0.9 at n = 10**4 with 5 trials; the figures
        sweep n = 1000..10000 with one trial.
        """
        if experiment == "table1":
            defaults = dict(sizes=(10_000,), fill_factors=tuple(i / 10 for i in range(1, 10)),
                            trials=5)
        elif experiment == "fig2":
            defaults = dict(sizes=FIGURE_SIZES, fill_factors=(0.3, 0.7, 0.8, 0.9), trials=1)
        elif experiment == "fig3":
            defaults = dict(sizes=FIGURE_SIZES, fill_factors=(0.1, 0.3, 0.5, 0.6), trials=1)
        elif experiment == "fig4":
            defaults = dict(sizes=FIGURE_SIZES, fill_factors=(0.5,), trials=1)
        else:
            raise ValueError(f"unknown experiment '{experiment}', expected one of {EXPERIMENTS}")
        defaults.update({key: value for key, value in overrides.items() if value is not None})
        return ExperimentSpec(experiment=experiment, **defaults)

    @staticmethod
    def create_plan(spec: ExperimentSpec) -> List[ExperimentCell]:
        planners: Dict[str, Callable[[ExperimentSpec], List[ExperimentCell]]] = {
            "table1": ExperimentWorkflows.create_table1_plan,
            "fig2": ExperimentWorkflows.create_comparison_plan,
            "fig3": ExperimentWorkflows.create_comparison_plan,
            "fig4": ExperimentWorkflows.create_size_plan,
        }
        return planners[spec.experiment](spec)

    @staticmethod
    def create_table1_plan(spec: ExperimentSpec) -> List[ExperimentCell]:
        return [
            ExperimentCell("near_perfect", n, alpha, trial)
            for n in spec.sizes
            for alpha in spec.fill_factors
            for trial in range(spec.trials)
        ]

    @staticmethod
    def create_comparison_plan(spec: ExperimentSpec) -> List[ExperimentCell]:
        """Per n: the alpha-independent baselines, then one GA cell per alpha."""
        cells = []
        for n in spec.sizes:
            for trial in range(spec.trials):
                cells.append(ExperimentCell("baselines", n, None, trial))
            for alpha in spec.fill_factors:
                for trial in range(spec.trials):
                    cells.append(ExperimentCell("near_perfect", n, alpha, trial))
        return cells

    @staticmethod
    def create_size_plan(spec: ExperimentSpec) -> List[ExperimentCell]:
        return [
            ExperimentCell("sizes", n, None, trial)
            for n in spec.sizes
            for trial in range(spec.trials)
        ]


def cell_keyset(spec: ExperimentSpec, n: int, trial: int) -> KeySet:
    """Keys shared by every cell with the same (n, trial)."""
    members = draw_keys(n, spec.key_length, substream(spec.rng_seed, n, trial))
    return KeySet.balanced(members, substream(spec.rng_seed, n, trial, 1))


def cell_ga_seed(spec: ExperimentSpec, n: int, alpha: float, trial: int) -> int:
    rng = substream(spec.rng_seed, n, alpha_tag(alpha), trial)
    return int(rng.integers(0, 2**63))


def _lookup_rows(spec: ExperimentSpec, cell: ExperimentCell, structure: str,
                 lookup: Callable, keys: KeySet) -> List[ResultRow]:
    hits = [lookup(key).comparisons for key in keys.to_insert]
    misses = [lookup(key).comparisons for key in keys.absent]
    rows = []
    for search_kind, counts in (("successful", hits), ("unsuccessful", misses),
                                ("mixed", hits + misses)):
        rows.append(ResultRow(spec.experiment, cell.n, cell.alpha, structure, search_kind,
                              "avg_comparisons", float(np.mean(counts)), cell.trial))
        rows.append(ResultRow(spec.experiment, cell.n, cell.alpha, structure, search_kind,
                              "worst_comparisons", float(np.max(counts)), cell.trial))
    return rows


def _near_perfect_rows(spec: ExperimentSpec, cell: ExperimentCell) -> List[ResultRow]:
    keys = cell_keyset(spec, cell.n, cell.trial)
    fitness_config = FitnessConfig(spec.lambda_, cell.alpha)
    seed = cell_ga_seed(spec, cell.n, cell.alpha, cell.trial)
    ga_config = replace(spec.ga, rng_seed=seed, workers=1 if spec.workers > 1 else spec.ga.workers)

    result = gen_alg(keys, ga_config, fitness_config)
    table = build_table(keys.to_insert, result.best_k, cell.alpha)
    stats = measure_searches(table, keys.to_search)
    theory = expected_comparisons_asymptotic(cell.alpha)
    note = f"k={result.best_k:#010x} generations={result.generations_run}"

    def row(structure, search_kind, metric, value, row_note=""):
        return ResultRow(spec.experiment, cell.n, cell.alpha, structure, search_kind, metric,
                         float(value), cell.trial, row_note)

    rows = []
    for search_kind, avg, worst in (
        ("successful", stats.successful_avg, stats.successful_worst),
        ("unsuccessful", stats.unsuccessful_avg, stats.unsuccessful_worst),
        ("mixed", stats.mixed_avg, stats.mixed_worst),
    ):
        rows.append(row("near_perfect", search_kind, "avg_comparisons", avg, note))
        rows.append(row("near_perfect", search_kind, "worst_comparisons", worst, note))
        rows.append(row("near_perfect", search_kind, "speedup_vs_theory_pct",
                        speedup_percent(theory, avg)))
    rows.append(row("near_perfect", "mixed", "fitness", result.report.fitness, note))
    rows.append(row("theory", "unsuccessful", "theory_comparisons", theory))

    baseline = random_search(keys, 1, seed, fitness_config)
    random_note = f"k={baseline.best_k:#010x}"
    rows.append(row("random_k", "mixed", "avg_comparisons", baseline.report.avg_comparisons,
                    random_note))
    rows.append(row("random_k", "mixed", "worst_comparisons", baseline.report.max_comparisons,
                    random_note))
    rows.append(row("random_k", "mixed", "fitness", baseline.report.fitness, random_note))
    return rows


def _baseline_rows(spec: ExperimentSpec, cell: ExperimentCell) -> List[ResultRow]:
    keys = cell_keyset(spec, cell.n, cell.trial)
    array = SortedArray.from_keys(keys.to_insert)
    fks = fks_build(keys.to_insert, spec.rng_seed + cell.trial)
    rows = _lookup_rows(spec, cell, "binary_search", lambda key: binary_search(array, key), keys)
    rows += _lookup_rows(spec, cell, "fks", lambda key: fks_search(fks, key), keys)
    return rows


def _size_rows(spec: ExperimentSpec, cell: ExperimentCell) -> List[ResultRow]:
    keys = cell_keyset(spec, cell.n, cell.trial)
    fks = fks_build(keys.to_insert, spec.rng_seed + cell.trial)
    sizes = [("sorted_array", None, cell.n), ("fks", None, fks.total_size)]
    sizes += [("near_perfect", alpha, table_size_for(cell.n, alpha)) for alpha in spec.fill_factors]

    rows = []
    for structure, alpha, slots in sizes:
        for metric, value in (("table_size_slots", slots),
                              ("table_size_bytes", slots * spec.key_length)):
            rows.append(ResultRow(spec.experiment, cell.n, alpha, structure, "none", metric,
                                  float(value), cell.trial))
    return rows


_CELL_RUNNERS = {
    "near_perfect": _near_perfect_rows,
    "baselines": _baseline_rows,
    "sizes": _size_rows,
}


def run_cell(spec: ExperimentSpec, cell: ExperimentCell) -> List[ResultRow]:
    """Rows of one cell, filtered to the metrics the experiment reports."""
    start = time.time()
    rows = _CELL_RUNNERS[cell.kind](spec, cell)
    wanted = _EXPERIMENT_METRICS[spec.experiment]
    rows = [row for row in rows if row.metric in wanted]
    logger.info(f"Cell {spec.experiment} {cell.kind} n={cell.n} alpha={cell.alpha} "
                f"trial={cell.trial}: {len(rows)} rows in {time.time() - start:.2f}s")
    return rows


def aggregate_rows(spec: ExperimentSpec, rows: Sequence[ResultRow]) -> List[ResultRow]:
    """Median over trials of every (n, alpha, structure, search kind, metric) group."""
    if spec.trials < 2:
        return []
    groups: Dict[tuple, List[float]] = {}
    for row in rows:
        key = (row.n, row.alpha, row.structure, row.search_kind, row.metric)
        groups.setdefault(key, []).append(row.value)
    return [
        ResultRow(spec.experiment, n, alpha, structure, search_kind, metric,
                  float(np.median(values)), AGGREGATE_TRIAL, f"median of {len(values)} trials")
        for (n, alpha, structure, search_kind, metric), values in groups.items()
    ]


def rows_to_frame(rows: Iterable[ResultRow]) -> pd.DataFrame:
    return pd.DataFrame([asdict(row) for row in rows], columns=RESULT_COLUMNS)


def write_results(rows: Iterable[ResultRow], path: Union[str, Path]) -> None:
    rows_to_frame(rows).to_csv(path, index=False)


def _error_row(spec: ExperimentSpec, cell: ExperimentCell, error: Exception) -> ResultRow:
    return ResultRow(spec.experiment, cell.n, cell.alpha, "", "none", "error", 0.0, cell.trial,
                     f"{type(error).__name__}: {error}")


def run_experiment(spec: ExperimentSpec, output_path: Optional[Union[str, Path]] = None) -> pd.DataFrame:
    """
    Run every cell of ``spec`` and return the result rows as a DataFrame.

    :param spec: Experiment grid and parameters.
    :type spec: ExperimentSpec
    :param output_path: Optional CSV destination, written when all cells
        are done, or up to the first failing cell followed by an error row.
    :return: One row per ResultRow, aggregate medians last.
    :rtype: pandas.DataFrame
    :raises ExperimentError: if a cell fails.
    """
    cells = ExperimentWorkflows.create_plan(spec)
    logger.info(f"Running {spec.experiment}: {len(cells)} cells with {spec.workers} worker(s)")

    rows: List[ResultRow] = []
    failure: Optional[Tuple[ExperimentCell, Exception]] = None
    if spec.workers > 1:
        with ProcessPoolExecutor(max_workers=spec.workers) as executor:
            futures = [executor.submit(run_cell, spec, cell) for cell in cells]
            for cell, future in zip(cells, futures):
                try:
                    rows.extend(future.result())
                except Exception as e:
                    failure = (cell, e)
                    for pending in futures:
                        pending.cancel()
                    break
    else:
        for cell in cells:
            try:
                rows.extend(run_cell(spec, cell))
            except Exception as e:
                failure = (cell, e)
                break

    if failure is not None:
        cell, error = failure
        logger.error(f"Cell n={cell.n} alpha={cell.alpha} trial={cell.trial} failed: {error}")
        rows.append(_error_row(spec, cell, error))
        if output_path is not None:
            write_results(rows, output_path)
        raise ExperimentError(f"{spec.experiment} failed at n={cell.n} alpha={cell.alpha} "
                              f"trial={cell.trial}: {error}") from error

    rows.extend(aggregate_rows(spec, rows))
    if output_path is not None:
        write_results(rows, output_path)
        logger.info(f"Wrote {len(rows)} rows to {output_path}")
    return rows_to_frame(rows)
