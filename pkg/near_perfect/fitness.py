"""
Fitness of a candidate XOR parameter k.

A candidate is scored by building the table over ``to_insert`` and
searching every key of ``to_search``::

    F(k) = lambda * avg_comparisons + (1 - lambda) * max_comparisons

Lower is better.
"""

import logging
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, Tuple

import numpy as np

from .core_hash import (
    HashKey,
    NearPerfectTable,
    TableFullNoTerminator,
    hash_pair,
    place_keys,
)
from .utils import table_size_for, validate_fill_factor

logger = logging.getLogger(__name__)

DEFAULT_LAMBDA = 0.5
DEFAULT_FILL_FACTOR = 0.5

_ABSENT_KEY_MAX_DRAWS = 1000


def _as_key_tuple(keys: Iterable[HashKey]) -> Tuple[HashKey, ...]:
    if isinstance(keys, (set, frozenset)):
        return tuple(sorted(bytes(key) for key in keys))
    return tuple(bytes(key) for key in keys)


@dataclass(frozen=True)
class KeySet:
    """Keys stored in the table and the mixed hit/miss sequence searched against it."""

    to_insert: Tuple[HashKey, ...]
    to_search: Tuple[HashKey, ...]

    def __post_init__(self):
        object.__setattr__(self, 'to_insert', _as_key_tuple(self.to_insert))
        object.__setattr__(self, 'to_search', tuple(bytes(key) for key in self.to_search))
        if not self.to_insert:
            raise ValueError("to_insert must not be empty")
        if not self.to_search:
            raise ValueError("to_search must not be empty")
        members = set(self.to_insert)
        if len(members) != len(self.to_insert):
            raise ValueError("to_insert must hold distinct keys")
        hits = sum(1 for key in self.to_search if key in members)
        if hits == 0:
            raise ValueError("to_search must contain at least one member of to_insert")
        if hits == len(self.to_search):
            raise ValueError("to_search must contain at least one key absent from to_insert")

    @property
    def absent(self) -> Tuple[HashKey, ...]:
        """Keys of to_search that are not stored."""
        members = set(self.to_insert)
        return tuple(key for key in self.to_search if key not in members)

    @classmethod
    def balanced(cls, to_insert: Iterable[HashKey], rng: np.random.Generator,
                 absent_count: Optional[int] = None) -> "KeySet":
        """
        Default composition: every member plus as many uniform absent keys.

        Absent keys have the most common member length (at least one byte)
        and are redrawn while they collide with a member or with each other.
        """
        members = _as_key_tuple(to_insert)
        if not members:
            raise ValueError("to_insert must not be empty")
        count = len(members) if absent_count is None else absent_count
        if count < 1:
            raise ValueError(f"absent_count must be positive, got {count}")
        key_length = max(1, Counter(len(key) for key in members).most_common(1)[0][0])

        taken = set(members)
        absent = []
        draws = 0
        while len(absent) < count:
            draws += 1
            if draws > count * _ABSENT_KEY_MAX_DRAWS:
                raise ValueError(
                    f"could not draw {count} distinct absent keys of length {key_length}"
                )
            candidate = rng.bytes(key_length)
            if candidate in taken:
                continue
            taken.add(candidate)
            absent.append(candidate)
        return cls(to_insert=members, to_search=members + tuple(absent))


@dataclass(frozen=True)
class FitnessConfig:
    """Trade-off lambda between average and worst case, and the table fill factor."""

    lambda_: float = DEFAULT_LAMBDA
    alpha: float = DEFAULT_FILL_FACTOR

    def __post_init__(self):
        object.__setattr__(self, 'lambda_', validate_fill_factor(self.lambda_, "lambda"))
        object.__setattr__(self, 'alpha', validate_fill_factor(self.alpha))


@dataclass(frozen=True)
class FitnessReport:
    """Average and worst comparisons over to_search, blended into the fitness."""

    avg_comparisons: float
    max_comparisons: int
    fitness: float

    @classmethod
    def from_comparisons(cls, comparisons: Sequence[int], lambda_: float) -> "FitnessReport":
        counts = np.asarray(comparisons, dtype=np.int64)
        if counts.size == 0:
            raise ValueError("no searches to report on")
        avg = int(counts.sum()) / counts.size
        worst = int(counts.max())
        return cls(
            avg_comparisons=avg,
            max_comparisons=worst,
            fitness=lambda_ * avg + (1 - lambda_) * worst,
        )


class FitnessEvaluator:
    """
    Evaluates many candidate k values against one KeySet.

    The base hashes of every key are computed once; each evaluation reruns
    the insertion kernel for its k and replays all searches in lockstep with
    numpy. Instances hold only arrays and tuples, so they pickle cleanly for
    process pools.
    """

    def __init__(self, keys: KeySet, config: FitnessConfig):
        self.keys = keys
        self.config = config
        self.table_size = table_size_for(len(keys.to_insert), config.alpha)

        insert_hashes = [hash_pair(key) for key in keys.to_insert]
        self._insert_h1 = [h1 for h1, _ in insert_hashes]
        self._insert_h2 = [h2 for _, h2 in insert_hashes]

        member_index = {key: index for index, key in enumerate(keys.to_insert)}
        search_hashes = [hash_pair(key) for key in keys.to_search]
        self._search_h1 = np.array([h1 for h1, _ in search_hashes], dtype=np.uint64)
        self._search_h2 = np.array([h2 for _, h2 in search_hashes], dtype=np.uint64)
        self._search_ids = np.array(
            [member_index.get(key, -1) for key in keys.to_search], dtype=np.int64
        )

    def comparisons(self, k: int) -> np.ndarray:
        """Comparison count of every search in to_search, in order."""
        size = self.table_size
        layout, _ = place_keys(self._insert_h1, self._insert_h2, k, size)
        layout = np.asarray(layout, dtype=np.int64)

        xor_key = np.uint64(k)
        modulus = np.uint64(size)
        position = (self._search_h1 ^ xor_key) % modulus
        step = (self._search_h2 ^ xor_key) % modulus
        step[step == 0] = 1

        counts = np.zeros(position.shape[0], dtype=np.int64)
        active = np.arange(position.shape[0])
        for _ in range(size):
            if active.size == 0:
                break
            stored = layout[position[active]]
            counts[active] += 1
            finished = (stored == -1) | (stored == self._search_ids[active])
            active = active[~finished]
            position[active] = (position[active] + step[active]) % modulus
        if active.size:
            raise TableFullNoTerminator(
                f"{active.size} searches probed all {size} slots (k={k:#010x})"
            )
        return counts

    def evaluate(self, k: int) -> FitnessReport:
        return FitnessReport.from_comparisons(self.comparisons(k), self.config.lambda_)

    __call__ = evaluate


def compute_fitness(k: int, keys: KeySet, config: FitnessConfig) -> FitnessReport:
    """
    Build the table for k over keys.to_insert and search keys.to_search.

    :param k: Candidate 32-bit XOR parameter.
    :type k: int
    :param keys: Keys to insert and to search.
    :type keys: KeySet
    :param config: Lambda and fill factor.
    :type config: FitnessConfig
    :return: Average, worst and blended comparisons.
    :rtype: FitnessReport
    """
    return FitnessEvaluator(keys, config).evaluate(k)


@dataclass(frozen=True)
class SearchStats:
    """Successful, unsuccessful and mixed comparison statistics on one table."""

    successful_avg: float
    successful_worst: int
    unsuccessful_avg: float
    unsuccessful_worst: int
    mixed_avg: float
    mixed_worst: int
    successful_count: int
    unsuccessful_count: int


def measure_searches(table: NearPerfectTable, queries: Iterable[HashKey]) -> SearchStats:
    """Search every query on a built table and split the counts by outcome."""
    hits, misses = [], []
    for key in queries:
        outcome = table.search(key)
        (hits if outcome.found else misses).append(outcome.comparisons)
    everything = hits + misses
    if not everything:
        raise ValueError("no queries to measure")

    def _avg(values):
        return sum(values) / len(values) if values else 0.0

    return SearchStats(
        successful_avg=_avg(hits),
        successful_worst=max(hits, default=0),
        unsuccessful_avg=_avg(misses),
        unsuccessful_worst=max(misses, default=0),
        mixed_avg=_avg(everything),
        mixed_worst=max(everything),
        successful_count=len(hits),
        unsuccessful_count=len(misses),
    )
