"""
Genetic search for the XOR parameter k.

Fitness is a cost (comparisons), so every step minimizes: the elite is the
lowest-fitness individuals, roulette weights are ``(F_max - F_i) + 1e-6``
and the result is the best individual seen over the whole run.

Random draws come from PCG64 substreams: stream 0 seeds the population and
stream g drives selection, crossover pairing and mutation of generation g.
Fitness evaluation draws nothing, so evaluating in a process pool cannot
change the trajectory.
"""

import logging
import math
from concurrent.futures import Executor, ProcessPoolExecutor
from contextlib import ExitStack
from dataclasses import dataclass, field
from functools import partial
from typing import Dict, List, Optional, Sequence, Tuple, TypeVar

import numpy as np

from .event_emitter import ProgressEmitter
from .execution_tracker import GaExecutionTracker, create_tracked_controller
from .fitness import FitnessConfig, FitnessEvaluator, FitnessReport, KeySet
from .local_ga import (
    Breed,
    Controller,
    EvaluateFitness,
    GenerationGraph,
    Individual,
    KeepElite,
    Mutate,
    Seed,
)
from .utils import MASK32, substream

logger = logging.getLogger(__name__)

GENOME_BITS = 32
LOW_HALF = 0x0000FFFF
HIGH_HALF = 0xFFFF0000
ROULETTE_EPSILON = 1e-6
PARENT_REDRAWS = 16
RECOMMENDED_MUTATION_RANGE = (0.05, 0.10)
RANDOM_SEARCH_STREAM = 2**31

T = TypeVar("T")


@dataclass(frozen=True)
class GaConfig:
    """Population, elitism, mutation and stopping parameters."""

    population_size: int = 32
    elite_size: int = 4
    mutation_probability: float = 0.05
    max_generations: int = 100
    stagnation_limit: int = 15
    rng_seed: int = 0
    max_flips: int = 3
    workers: int = 1

    def __post_init__(self):
        if self.population_size < 2:
            raise ValueError(f"population size must be at least 2, got {self.population_size}")
        if not 0 <= self.elite_size < self.population_size:
            raise ValueError(
                f"elite size must lie in [0, {self.population_size}), got {self.elite_size}"
            )
        if not 0.0 <= self.mutation_probability <= 1.0:
            raise ValueError(
                f"mutation probability must lie in [0, 1], got {self.mutation_probability}"
            )
        if self.max_generations < 1:
            raise ValueError(f"max generations must be positive, got {self.max_generations}")
        if self.stagnation_limit < 1:
            raise ValueError(f"stagnation limit must be positive, got {self.stagnation_limit}")
        if not 0 <= self.rng_seed < 2**64:
            raise ValueError(f"rng seed must be a 64-bit unsigned integer, got {self.rng_seed}")
        if not 1 <= self.max_flips <= GENOME_BITS:
            raise ValueError(f"max flips must lie in [1, {GENOME_BITS}], got {self.max_flips}")
        if self.workers < 1:
            raise ValueError(f"workers must be positive, got {self.workers}")
        low, high = RECOMMENDED_MUTATION_RANGE
        if not low <= self.mutation_probability <= high:
            logger.warning(
                f"mutation probability {self.mutation_probability} is outside the "
                f"recommended range [{low}, {high}]"
            )

    @property
    def offspring_count(self) -> int:
        return self.population_size - self.elite_size


@dataclass
class GaRun:
    """Evolving state of one run."""

    population: List[Individual]
    generation_number: int = 0
    best_fitness_so_far: float = math.inf
    last_improvement_generation: int = 0
    best: Optional[Individual] = None


@dataclass(frozen=True)
class GaResult:
    best_k: int
    report: FitnessReport
    history: Tuple[float, ...]
    generation_best: Tuple[float, ...]
    generations_run: int
    evaluations: int
    stop_reason: str
    trace: Dict = field(default_factory=dict, compare=False)


def _genome(individual) -> int:
    return individual.genome if isinstance(individual, Individual) else int(individual)


def select_top(population: Sequence[T], fitness_values: Sequence[float], count: int) -> List[T]:
    """
    The ``count`` members with the lowest fitness, best first.

    Ties go to the lower genome so the elite is deterministic.
    """
    if count > len(population):
        raise ValueError(f"cannot select {count} of {len(population)} individuals")
    ranked = sorted(
        range(len(population)),
        key=lambda index: (fitness_values[index], _genome(population[index])),
    )
    return [population[index] for index in ranked[:count]]


def selection_weights(fitness_values: Sequence[float]) -> np.ndarray:
    """Roulette weights for minimized fitness: ``(F_max - F_i) + epsilon``."""
    values = np.asarray(fitness_values, dtype=np.float64)
    return (values.max() - values) + ROULETTE_EPSILON


def roulette_select(population: Sequence[T], fitness_values: Sequence[float],
                    rng: np.random.Generator) -> Tuple[T, T]:
    """
    Draw two parents with probability proportional to their selection weight.

    The second parent is redrawn while it is the same individual as the
    first, at most 16 times.
    """
    if len(population) < 2:
        raise ValueError("roulette selection needs at least two individuals")
    weights = selection_weights(fitness_values)
    probabilities = weights / weights.sum()
    first = int(rng.choice(len(population), p=probabilities))
    second = int(rng.choice(len(population), p=probabilities))
    redraws = 0
    while second == first and redraws < PARENT_REDRAWS:
        second = int(rng.choice(len(population), p=probabilities))
        redraws += 1
    return population[first], population[second]


def crossover_genomes(genome1: int, genome2: int) -> Tuple[int, int]:
    """Swap the low 16-bit halves of two genomes."""
    child1 = (genome1 & HIGH_HALF) | (genome2 & LOW_HALF)
    child2 = (genome2 & HIGH_HALF) | (genome1 & LOW_HALF)
    return child1, child2


def crossover(parent1: Individual, parent2: Individual) -> Tuple[Individual, Individual]:
    """Single-point crossover at the 16-bit boundary."""
    child1, child2 = crossover_genomes(_genome(parent1), _genome(parent2))
    return Individual(child1), Individual(child2)


def mutate(individual: Individual, mutation_probability: float, rng: np.random.Generator,
           max_flips: int = 3) -> Individual:
    """
    With probability ``mutation_probability`` flip b distinct random bits,
    b uniform in {1, ..., max_flips}; otherwise return an unchanged copy.
    """
    if not 0.0 <= mutation_probability <= 1.0:
        raise ValueError(f"mutation probability must lie in [0, 1], got {mutation_probability}")
    genome = _genome(individual)
    if rng.random() < mutation_probability:
        flips = int(rng.integers(1, max_flips + 1))
        positions = rng.choice(GENOME_BITS, size=flips, replace=False)
        mask = 0
        for position in positions:
            mask |= 1 << int(position)
        genome = (genome ^ mask) & MASK32
    return Individual(genome)


class GenerationScorer:
    """
    Scores genomes for one run, memoizing reports per genome.

    With an executor, uncached genomes are evaluated in parallel; results
    are matched back by position, so order never depends on scheduling.
    """

    def __init__(self, evaluator: FitnessEvaluator, executor: Optional[Executor] = None,
                 workers: int = 1):
        self.evaluator = evaluator
        self.executor = executor
        self.workers = workers
        self.cache: Dict[int, FitnessReport] = {}
        self.evaluations = 0

    def __call__(self, genomes: Sequence[int]) -> List[FitnessReport]:
        self.evaluations += len(genomes)
        missing = sorted({genome for genome in genomes if genome not in self.cache})
        if missing:
            if self.executor is not None and len(missing) > 1:
                chunksize = max(1, math.ceil(len(missing) / self.workers))
                reports = list(self.executor.map(self.evaluator.evaluate, missing,
                                                 chunksize=chunksize))
            else:
                reports = [self.evaluator.evaluate(genome) for genome in missing]
            self.cache.update(zip(missing, reports))
        return [self.cache[genome] for genome in genomes]


def create_generation_graph(config: GaConfig) -> GenerationGraph:
    """
    Seed -> EvaluateFitness -> KeepElite
                            -> Breed -> Mutate
    """
    graph = GenerationGraph()

    seed = Seed()
    graph.add_operation(seed)

    evaluate = EvaluateFitness()
    evaluate.add_predecessor(seed)
    graph.add_operation(evaluate)

    keep_elite = KeepElite(config.elite_size, select_top)
    keep_elite.add_predecessor(evaluate)
    graph.add_operation(keep_elite)

    breed = Breed(config.offspring_count, roulette_select, crossover)
    breed.add_predecessor(evaluate)
    graph.add_operation(breed)

    mutation = Mutate(partial(_mutate_with, config.mutation_probability, config.max_flips))
    mutation.add_predecessor(breed)
    graph.add_operation(mutation)

    return graph


def _mutate_with(mutation_probability: float, max_flips: int, individual: Individual,
                 rng: np.random.Generator) -> Individual:
    return mutate(individual, mutation_probability, rng, max_flips)


def initial_population(config: GaConfig) -> List[Individual]:
    rng = substream(config.rng_seed, 0)
    genomes = rng.integers(0, 2**GENOME_BITS, size=config.population_size, dtype=np.uint64)
    return [Individual(int(genome)) for genome in genomes]


def gen_alg(keys: KeySet, config: GaConfig, fitness_config: FitnessConfig,
            progress: Optional[ProgressEmitter] = None,
            tracker: Optional[GaExecutionTracker] = None) -> GaResult:
    """
    Evolve XOR parameters for ``keys`` and return the best one found.

    :param keys: Keys to insert and the mixed search sequence.
    :type keys: KeySet
    :param config: GA parameters, including the seed.
    :type config: GaConfig
    :param fitness_config: Lambda and fill factor.
    :type fitness_config: FitnessConfig
    :param progress: Optional emitter receiving one record per generation.
    :param tracker: Optional tracker of every graph operation.
    :return: The best k, its report and the per-generation history.
    :rtype: GaResult
    """
    evaluator = FitnessEvaluator(keys, fitness_config)
    run = GaRun(population=initial_population(config))
    generation_best: List[float] = []
    history: List[float] = []

    if progress is not None:
        progress.emit_run_started(config.population_size, config.max_generations,
                                  config.stagnation_limit, len(keys.to_insert))
    if tracker is not None:
        tracker.initialize_tracking(progress.run_id if progress else "ga",
                                    config.population_size, config.elite_size)

    with ExitStack() as stack:
        executor = None
        if config.workers > 1:
            executor = stack.enter_context(ProcessPoolExecutor(max_workers=config.workers))
        scorer = GenerationScorer(evaluator, executor, config.workers)

        while (run.generation_number < config.max_generations
               and run.generation_number - run.last_improvement_generation < config.stagnation_limit):
            run.generation_number += 1
            graph = create_generation_graph(config)
            rng = substream(config.rng_seed, run.generation_number)
            parameters = {'population': run.population}
            if tracker is not None:
                ctrl = create_tracked_controller(graph, scorer, rng, parameters, tracker,
                                                 run.generation_number)
            else:
                ctrl = Controller(graph, scorer, rng, parameters)
            ctrl.run()

            scored = graph.find(EvaluateFitness).get_individuals()
            best_here = select_top(scored, [individual.score for individual in scored], 1)[0]
            if best_here.score < run.best_fitness_so_far:
                run.best_fitness_so_far = best_here.score
                run.best = best_here
                run.last_improvement_generation = run.generation_number
            generation_best.append(best_here.score)
            history.append(run.best_fitness_so_far)

            mean_fitness = float(np.mean([individual.score for individual in scored]))
            logger.debug(f"Generation {run.generation_number}: best={best_here.score:.4f} "
                         f"mean={mean_fitness:.4f} best_so_far={run.best_fitness_so_far:.4f}")
            if progress is not None:
                progress.emit_generation(run.generation_number, best_here.score, mean_fitness,
                                         run.best_fitness_so_far, run.best.genome,
                                         scorer.evaluations)

            run.population = ctrl.next_population()
            assert len(run.population) == config.population_size

    if config.elite_size >= 1:
        assert generation_best[-1] == run.best_fitness_so_far, \
            "elitism must keep the best individual in the last evaluated generation"

    stop_reason = ("max_generations" if run.generation_number >= config.max_generations
                   else "stagnation")
    logger.info(f"GA finished after {run.generation_number} generations ({stop_reason}): "
                f"k={run.best.genome:#010x} fitness={run.best_fitness_so_far:.4f}")
    if progress is not None:
        progress.emit_run_completed(run.best.genome, run.best_fitness_so_far,
                                    run.generation_number, stop_reason)

    return GaResult(
        best_k=run.best.genome,
        report=run.best.report,
        history=tuple(history),
        generation_best=tuple(generation_best),
        generations_run=run.generation_number,
        evaluations=scorer.evaluations,
        stop_reason=stop_reason,
        trace=tracker.get_execution_trace() if tracker is not None else {},
    )


@dataclass(frozen=True)
class RandomSearchResult:
    best_k: int
    report: FitnessReport
    fitness_values: Tuple[float, ...]

    @property
    def median_fitness(self) -> float:
        return float(np.median(self.fitness_values))


def random_search(keys: KeySet, budget: int, seed: int,
                  fitness_config: FitnessConfig) -> RandomSearchResult:
    """Blind sampling of ``budget`` uniform k values, the GA's baseline."""
    if budget < 1:
        raise ValueError(f"budget must be positive, got {budget}")
    evaluator = FitnessEvaluator(keys, fitness_config)
    rng = substream(seed, RANDOM_SEARCH_STREAM)
    genomes = [int(g) for g in rng.integers(0, 2**GENOME_BITS, size=budget, dtype=np.uint64)]
    reports = [evaluator.evaluate(genome) for genome in genomes]
    best_index = min(range(budget), key=lambda i: (reports[i].fitness, genomes[i]))
    return RandomSearchResult(
        best_k=genomes[best_index],
        report=reports[best_index],
        fitness_values=tuple(report.fitness for report in reports),
    )
