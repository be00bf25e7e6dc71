"""
Reference searchers with comparison counting: binary search over a sorted
array and two-level FKS perfect hashing.
"""

import bisect
import logging
from dataclasses import dataclass
from typing import Iterable, List, NamedTuple, Optional, Tuple

import backoff
import numpy as np

from .core_hash import HashKey, hash_pair
from .utils import substream

logger = logging.getLogger(__name__)

MAX_REDRAWS = 10**4
LEVEL_ONE_FACTOR = 4

_PARAMETER_BITS = 96
_PARAMETER_MASK = (1 << _PARAMETER_BITS) - 1
_OUTPUT_SHIFT = 64
_FKS_STREAM = 0xF5


class BuildFailure(RuntimeError):
    """A redraw loop exhausted its budget without a usable hash."""


class Lookup(NamedTuple):
    found: bool
    comparisons: int


@dataclass(frozen=True)
class SortedArray:
    """Distinct keys in strictly ascending byte order."""

    keys: Tuple[HashKey, ...]

    def __post_init__(self):
        object.__setattr__(self, 'keys', tuple(bytes(key) for key in self.keys))
        for left, right in zip(self.keys, self.keys[1:]):
            if not left < right:
                raise ValueError("sorted array keys must be strictly ascending")

    @classmethod
    def from_keys(cls, keys: Iterable[HashKey]) -> "SortedArray":
        ordered = sorted(bytes(key) for key in keys)
        for left, right in zip(ordered, ordered[1:]):
            if left == right:
                raise ValueError(f"duplicate key {left.hex()}")
        return cls(tuple(ordered))

    @property
    def size_slots(self) -> int:
        return len(self.keys)

    def __len__(self):
        return len(self.keys)

    def __contains__(self, key: HashKey) -> bool:
        index = bisect.bisect_left(self.keys, key)
        return index < len(self.keys) and self.keys[index] == key


def binary_search(array: SortedArray, key: HashKey) -> Lookup:
    """
    Halving search counting one three-way comparison per loop iteration.

    :param array: Keys to search.
    :type array: SortedArray
    :param key: Key to look up.
    :type key: bytes
    :return: Membership and the number of iterations executed.
    :rtype: Lookup
    """
    key = bytes(key)
    low, high = 0, len(array.keys) - 1
    comparisons = 0
    while low <= high:
        comparisons += 1
        middle = (low + high) // 2
        probe = array.keys[middle]
        if probe == key:
            return Lookup(True, comparisons)
        if probe < key:
            low = middle + 1
        else:
            high = middle - 1
    return Lookup(False, comparisons)


def key_mix(key: HashKey) -> int:
    """64-bit value h1 || h2 fed to the universal family."""
    h1, h2 = hash_pair(key)
    return (h1 << 32) | h2


@dataclass(frozen=True)
class UniversalHash:
    """
    Multiply-add-shift over 64-bit inputs with 96-bit parameters.

    ``((a * x + b) mod 2**96) >> 64`` gives a 32-bit value that is mapped
    onto ``range(m)`` by a multiply and a 32-bit shift.
    """

    a: int
    b: int

    def __post_init__(self):
        if not (0 < self.a <= _PARAMETER_MASK and self.a & 1):
            raise ValueError("multiplier must be an odd 96-bit integer")
        if not 0 <= self.b <= _PARAMETER_MASK:
            raise ValueError("offset must be a 96-bit integer")

    @classmethod
    def draw(cls, rng: np.random.Generator) -> "UniversalHash":
        a = int.from_bytes(rng.bytes(_PARAMETER_BITS // 8), "little") | 1
        b = int.from_bytes(rng.bytes(_PARAMETER_BITS // 8), "little")
        return cls(a, b)

    def apply(self, mix: int, m: int) -> int:
        value = ((self.a * mix + self.b) & _PARAMETER_MASK) >> _OUTPUT_SHIFT
        return (value * m) >> 32


@dataclass(frozen=True)
class FksBucket:
    """Secondary array of c**2 slots; empty buckets carry no hash."""

    function: Optional[UniversalHash]
    slots: Tuple[Optional[HashKey], ...]

    @property
    def size(self) -> int:
        return len(self.slots)

    @property
    def key_count(self) -> int:
        return sum(1 for slot in self.slots if slot is not None)


@dataclass(frozen=True)
class FksTable:
    first_level: UniversalHash
    buckets: Tuple[FksBucket, ...]

    @property
    def bucket_count(self) -> int:
        return len(self.buckets)

    @property
    def total_size(self) -> int:
        """n pointers plus the sum of squared bucket loads, in slots."""
        return self.bucket_count + sum(bucket.size for bucket in self.buckets)

    def size_bytes(self, key_length: int) -> int:
        """Footprint assuming a pointer is as large as a key."""
        return self.total_size * key_length


class _Redraw(Exception):
    pass


def _retrying(function):
    return backoff.on_exception(
        backoff.constant,
        _Redraw,
        interval=0,
        jitter=None,
        max_tries=MAX_REDRAWS,
        logger=None,
    )(function)


def _bucket_loads(function: UniversalHash, mixes: List[int], bucket_count: int) -> List[List[int]]:
    members: List[List[int]] = [[] for _ in range(bucket_count)]
    for index, mix in enumerate(mixes):
        members[function.apply(mix, bucket_count)].append(index)
    return members


def fks_build(keys: Iterable[HashKey], rng_seed: int) -> FksTable:
    """
    Build a two-level perfect hash table over distinct keys.

    Level 1 hashes n keys into n buckets and is redrawn until the squared
    loads sum to less than 4n. Each non-empty bucket of c keys gets c**2
    slots and a hash redrawn until it is injective on its keys. Each loop
    gives up after ``MAX_REDRAWS`` draws with ``BuildFailure``.
    """
    ordered = sorted(bytes(key) for key in keys)
    if not ordered:
        raise ValueError("cannot build a perfect hash table over no keys")
    for left, right in zip(ordered, ordered[1:]):
        if left == right:
            raise ValueError(f"duplicate key {left.hex()}")

    n = len(ordered)
    mixes = [key_mix(key) for key in ordered]
    rng = substream(rng_seed, _FKS_STREAM)
    limit = LEVEL_ONE_FACTOR * n

    @_retrying
    def draw_first_level():
        function = UniversalHash.draw(rng)
        members = _bucket_loads(function, mixes, n)
        squares = sum(len(bucket) ** 2 for bucket in members)
        if squares >= limit:
            logger.debug(f"Level-1 redraw: sum of squared loads {squares} >= {limit}")
            raise _Redraw()
        return function, members

    @_retrying
    def draw_second_level(indices: List[int]):
        size = len(indices) ** 2
        function = UniversalHash.draw(rng)
        slots: List[Optional[HashKey]] = [None] * size
        for index in indices:
            slot = function.apply(mixes[index], size)
            if slots[slot] is not None:
                raise _Redraw()
            slots[slot] = ordered[index]
        return FksBucket(function, tuple(slots))

    try:
        first_level, members = draw_first_level()
        buckets = tuple(
            draw_second_level(indices) if indices else FksBucket(None, ())
            for indices in members
        )
    except _Redraw:
        raise BuildFailure(f"no usable hash after {MAX_REDRAWS} draws for {n} keys")

    table = FksTable(first_level, buckets)
    logger.debug(f"Built FKS table: n={n} total_size={table.total_size}")
    return table


def fks_search(table: FksTable, key: HashKey) -> Lookup:
    """One key comparison at the level-2 slot; none when the bucket is empty."""
    key = bytes(key)
    mix = key_mix(key)
    bucket = table.buckets[table.first_level.apply(mix, table.bucket_count)]
    if bucket.size == 0:
        return Lookup(False, 0)
    stored = bucket.slots[bucket.function.apply(mix, bucket.size)]
    return Lookup(stored == key, 1)
