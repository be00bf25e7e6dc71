"""
Generation graph for the genetic search over XOR parameters.

One generation is a small graph of operations: the seeded population is
scored, the elite is kept, and roulette-selected parents are crossed over
and mutated. The next population is the concatenation of the graph's leaf
outputs, elite first.
"""

import itertools
import logging
from abc import ABC, abstractmethod
from typing import Callable, Iterator, List, Optional, Sequence

import numpy as np

from .fitness import FitnessReport
from .utils import MASK32

Scorer = Callable[[Sequence[int]], List[FitnessReport]]


class Individual:
    """A candidate 32-bit XOR parameter with its fitness, once scored."""
    _ids: Iterator[int] = itertools.count(0)

    def __init__(self, genome: int):
        if not 0 <= genome <= MASK32:
            raise ValueError(f"genome must be a 32-bit unsigned integer, got {genome}")
        self.id = next(Individual._ids)
        self.genome = int(genome)
        self._score = 0.0
        self.report: Optional[FitnessReport] = None
        self.scored = False

    @staticmethod
    def from_individual(individual: "Individual") -> "Individual":
        """Creates a new individual carrying the same genome and score."""
        new_individual = Individual(individual.genome)
        new_individual.report = individual.report
        if individual.scored:
            new_individual.score = individual.score
        return new_individual

    @property
    def score(self) -> float:
        return self._score

    @score.setter
    def score(self, new_score: float):
        self.scored = True
        self._score = new_score

    def __repr__(self):
        score = f"{self._score:.4f}" if self.scored else "unscored"
        return f"Individual({self.genome:#010x}, {score})"


class Operation(ABC):
    """Abstract base class for all generation operations."""
    _ids: Iterator[int] = itertools.count(0)

    def __init__(self):
        self.logger = logging.getLogger(self.__class__.__name__)
        self.id = next(Operation._ids)
        self.predecessors: List["Operation"] = []
        self.successors: List["Operation"] = []
        self.executed = False

    def can_be_executed(self) -> bool:
        return all(predecessor.executed for predecessor in self.predecessors)

    def get_previous_individuals(self) -> List[Individual]:
        return [
            individual
            for predecessor in self.predecessors
            for individual in predecessor.get_individuals()
        ]

    def add_predecessor(self, operation: "Operation"):
        self.predecessors.append(operation)
        operation.successors.append(self)

    def execute(self, scorer: Scorer, rng: np.random.Generator, **kwargs):
        assert self.can_be_executed(), "Not all predecessors have been executed"
        self.logger.debug(f"Executing operation {self.id}")
        self._execute(scorer, rng, **kwargs)
        self.executed = True

    @abstractmethod
    def _execute(self, scorer: Scorer, rng: np.random.Generator, **kwargs):
        pass

    @abstractmethod
    def get_individuals(self) -> List[Individual]:
        pass


class Seed(Operation):
    """Root operation: emits the current population passed as ``population``."""

    def __init__(self):
        super().__init__()
        self.individuals: List[Individual] = []

    def get_individuals(self):
        return self.individuals

    def _execute(self, scorer, rng, **kwargs):
        population = kwargs.get('population') or []
        self.individuals = [Individual.from_individual(individual) for individual in population]


class EvaluateFitness(Operation):
    """Scores every incoming individual with the run's scorer."""

    def __init__(self):
        super().__init__()
        self.individuals: List[Individual] = []

    def get_individuals(self):
        return self.individuals

    def _execute(self, scorer, rng, **kwargs):
        assert len(self.predecessors) > 0, "EvaluateFitness operation needs at least one predecessor"
        previous = self.get_previous_individuals()
        reports = scorer([individual.genome for individual in previous])
        for individual, report in zip(previous, reports):
            scored = Individual.from_individual(individual)
            scored.report = report
            scored.score = report.fitness
            self.individuals.append(scored)
        self.logger.debug(f"EvaluateFitness operation {self.id} scored {len(self.individuals)} individuals")


class KeepElite(Operation):
    """Keep the ``n`` lowest-fitness individuals, ranked by ``selector``."""

    def __init__(self, n: int, selector: Callable):
        super().__init__()
        assert n >= 0, "KeepElite cannot keep a negative number of individuals"
        self.n = n
        self.selector = selector
        self.individuals: List[Individual] = []

    def get_individuals(self):
        return self.individuals

    def _execute(self, scorer, rng, **kwargs):
        assert len(self.predecessors) >= 1, "KeepElite operation must have at least one predecessor"
        previous = self.get_previous_individuals()
        assert all(individual.scored for individual in previous), "Not all individuals have been scored"
        kept = self.selector(previous, [individual.score for individual in previous], self.n)
        self.individuals = [Individual.from_individual(individual) for individual in kept]


class Breed(Operation):
    """Fills ``count`` offspring slots with crossovers of roulette-selected parents."""

    def __init__(self, count: int, selection_function: Callable, crossover_function: Callable):
        super().__init__()
        self.count = count
        self.selection_function = selection_function
        self.crossover_function = crossover_function
        self.individuals: List[Individual] = []

    def get_individuals(self):
        return self.individuals

    def _execute(self, scorer, rng, **kwargs):
        previous = self.get_previous_individuals()
        if self.count and len(previous) < 2:
            raise ValueError("breeding needs at least two scored individuals")
        fitness_values = [individual.score for individual in previous]
        while len(self.individuals) < self.count:
            parent1, parent2 = self.selection_function(previous, fitness_values, rng)
            for child in self.crossover_function(parent1, parent2):
                if len(self.individuals) < self.count:
                    self.individuals.append(child)


class Mutate(Operation):
    """Applies ``mutation_function`` to every incoming individual."""

    def __init__(self, mutation_function: Callable):
        super().__init__()
        self.mutation_function = mutation_function
        self.individuals: List[Individual] = []

    def get_individuals(self):
        return self.individuals

    def _execute(self, scorer, rng, **kwargs):
        assert len(self.predecessors) > 0, "Mutate operation needs at least one predecessor"
        self.individuals = [
            self.mutation_function(individual, rng)
            for individual in self.get_previous_individuals()
        ]


class GenerationGraph:
    """Represents the graph of operations making up one generation."""

    def __init__(self):
        self.operations: List[Operation] = []
        self.roots: List[Operation] = []
        self.leaves: List[Operation] = []

    def add_operation(self, operation: Operation):
        self.operations.append(operation)
        if len(self.roots) == 0:
            self.roots = [operation]
            self.leaves = [operation]
            assert len(operation.predecessors) == 0, "First operation should have no predecessors"
        else:
            if len(operation.predecessors) == 0:
                self.roots.append(operation)
            for predecessor in operation.predecessors:
                if predecessor in self.leaves:
                    self.leaves.remove(predecessor)
            if len(operation.successors) == 0:
                self.leaves.append(operation)

    def find(self, operation_type: type) -> Operation:
        """First operation of the given type."""
        for operation in self.operations:
            if isinstance(operation, operation_type):
                return operation
        raise LookupError(f"no {operation_type.__name__} operation in the graph")


class Controller:
    """Runs one generation graph in dependency order."""

    def __init__(self, graph: GenerationGraph, scorer: Scorer, rng: np.random.Generator,
                 problem_parameters: dict):
        self.logger = logging.getLogger(self.__class__.__module__)
        self.graph = graph
        self.scorer = scorer
        self.rng = rng
        self.problem_parameters = problem_parameters
        self.run_executed = False

    def run(self):
        assert self.graph.roots, "The generation graph has no root"

        execution_queue = [
            operation
            for operation in self.graph.operations
            if operation.can_be_executed()
        ]

        while len(execution_queue) > 0:
            current_operation = execution_queue.pop(0)
            current_operation.execute(self.scorer, self.rng, **self.problem_parameters)
            for operation in current_operation.successors:
                assert (
                    operation in self.graph.operations
                ), "The successor of an operation is not in the generation graph"
                if operation.can_be_executed():
                    execution_queue.append(operation)
        self.run_executed = True

    def get_final_individuals(self) -> List[List[Individual]]:
        assert self.run_executed, "The run method has not been executed"
        return [operation.get_individuals() for operation in self.graph.leaves]

    def next_population(self) -> List[Individual]:
        """Leaf outputs concatenated in leaf order."""
        return [
            individual
            for individuals in self.get_final_individuals()
            for individual in individuals
        ]
