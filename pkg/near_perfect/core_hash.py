"""
Open-addressing tables with an XOR-parametrized double-hashing probe.

The base hashes are FNV-1a over the key bytes followed by the 32-bit
murmur finalizer. h1 and h2 differ only in their offset basis. A probe at
attempt ``att`` lands on::

    ((h1(x) ^ k) + step(x, k, N) * att) mod N

where ``step`` is ``(h2(x) ^ k) mod N`` with 0 replaced by 1. N is always
prime, so every nonzero step walks the whole table.
"""

import logging
from dataclasses import dataclass, field
from typing import Iterable, List, Optional, Sequence, Tuple

from sympy import isprime

from .utils import MASK32, fill_fraction, table_size_for, validate_fill_factor

logger = logging.getLogger(__name__)

HashKey = bytes

FNV32_OFFSET_BASIS = 2166136261
FNV32_PRIME = 16777619
H2_BASIS_TWEAK = 0x5BD1E995


class InsertionOverflow(RuntimeError):
    """A key exhausted all N probe positions without finding an empty slot."""


class TableFullNoTerminator(RuntimeError):
    """A search probed N slots without a match or an empty slot."""


def _fmix32(h: int) -> int:
    h ^= h >> 16
    h = (h * 0x85EBCA6B) & MASK32
    h ^= h >> 13
    h = (h * 0xC2B2AE35) & MASK32
    h ^= h >> 16
    return h


def _fnv1a_mixed(data: bytes, basis: int) -> int:
    h = basis
    for byte in data:
        h ^= byte
        h = (h * FNV32_PRIME) & MASK32
    return _fmix32(h)


def hash1(key: HashKey) -> int:
    """FNV-1a (standard 32-bit basis) followed by the avalanche finalizer."""
    return _fnv1a_mixed(bytes(key), FNV32_OFFSET_BASIS)


def hash2(key: HashKey) -> int:
    """Same construction as :func:`hash1` with basis ``FNV32_OFFSET_BASIS ^ 0x5BD1E995``."""
    return _fnv1a_mixed(bytes(key), FNV32_OFFSET_BASIS ^ H2_BASIS_TWEAK)


def hash_pair(key: HashKey) -> Tuple[int, int]:
    """Both base hashes of a key. Neither depends on k, so callers may cache them."""
    return hash1(key), hash2(key)


def probe_step(h2: int, k: int, table_size: int) -> int:
    """Sanitized double-hashing step in [1, N-1] (or 1 when N == 1)."""
    step = ((h2 ^ k) & MASK32) % table_size
    return step if step else 1


def probe_from_hashes(h1: int, h2: int, att: int, k: int, table_size: int) -> int:
    """Probe position for precomputed base hashes (Python ints never overflow)."""
    start = (h1 ^ k) & MASK32
    return (start + probe_step(h2, k, table_size) * att) % table_size


@dataclass(frozen=True)
class ProbeParams:
    """XOR parameter, prime table size and the fill factor the table was sized for."""

    k: int
    table_size: int
    fill_factor: float

    def __post_init__(self):
        if not 0 <= self.k <= MASK32:
            raise ValueError(f"k must be a 32-bit unsigned integer, got {self.k}")
        if self.table_size < 1 or not isprime(self.table_size):
            raise ValueError(f"table size must be a prime, got {self.table_size}")
        object.__setattr__(self, 'fill_factor', validate_fill_factor(self.fill_factor))


def probe_position(key: HashKey, att: int, params: ProbeParams) -> int:
    """
    Slot visited by ``key`` at attempt ``att``.

    :param key: The key being inserted or searched.
    :type key: bytes
    :param att: Attempt number, 0 <= att < N.
    :type att: int
    :param params: Probe parameters of the table.
    :type params: ProbeParams
    :return: Slot index in [0, N).
    :rtype: int
    """
    h1, h2 = hash_pair(key)
    return probe_from_hashes(h1, h2, att, params.k, params.table_size)


@dataclass(frozen=True)
class SearchOutcome:
    """Result of one instrumented search."""

    found: bool
    comparisons: int
    attempts: int


@dataclass(frozen=True)
class NearPerfectTable:
    """
    Immutable open-addressed slot array plus its probe parameters.

    ``slots[i]`` is None for an empty slot or the stored key bytes.
    Searches never mutate the table and are safe from any number of threads.
    """

    params: ProbeParams
    slots: Tuple[Optional[HashKey], ...]
    element_count: int = field(default=-1)

    def __post_init__(self):
        if len(self.slots) != self.params.table_size:
            raise ValueError(
                f"slot array has {len(self.slots)} entries, expected {self.params.table_size}"
            )
        occupied = sum(1 for slot in self.slots if slot is not None)
        if self.element_count == -1:
            object.__setattr__(self, 'element_count', occupied)
        elif self.element_count != occupied:
            raise ValueError(
                f"element_count {self.element_count} does not match {occupied} occupied slots"
            )
        if occupied == len(self.slots):
            raise ValueError(f"all {len(self.slots)} slots are occupied, searches could not terminate")
        if occupied > fill_fraction(self.params.fill_factor) * self.params.table_size:
            raise ValueError(
                f"{occupied} keys in {self.params.table_size} slots exceed fill factor "
                f"{self.params.fill_factor}"
            )

    @property
    def k(self) -> int:
        return self.params.k

    @property
    def table_size(self) -> int:
        return self.params.table_size

    @property
    def load(self) -> float:
        """Realized fill factor n / N."""
        return self.element_count / self.table_size

    def probe_trail(self, key: HashKey) -> List[int]:
        """Slot indices visited by a search for ``key``, in order."""
        return self._walk(key)[1]

    def search(self, key: HashKey) -> SearchOutcome:
        """Search with an exact comparison count; see :func:`search`."""
        return self._walk(key)[0]

    def __contains__(self, key: HashKey) -> bool:
        return self.search(key).found

    def _walk(self, key: HashKey) -> Tuple[SearchOutcome, List[int]]:
        key = bytes(key)
        h1, h2 = hash_pair(key)
        size = self.params.table_size
        k = self.params.k
        position = ((h1 ^ k) & MASK32) % size
        step = probe_step(h2, k, size)
        trail = []
        for att in range(size):
            trail.append(position)
            stored = self.slots[position]
            if stored is None:
                return SearchOutcome(found=False, comparisons=att + 1, attempts=att), trail
            if stored == key:
                return SearchOutcome(found=True, comparisons=att + 1, attempts=att), trail
            position = (position + step) % size
        raise TableFullNoTerminator(
            f"search probed all {size} slots without a match or an empty slot"
        )


def search(table: NearPerfectTable, key: HashKey) -> SearchOutcome:
    """
    Probe att = 0, 1, ... until the key or an empty slot is met.

    Each probe costs one comparison, including the probe that lands on the
    empty slot ending an unsuccessful search, so comparisons = attempts + 1.
    """
    return table.search(key)


def place_keys(h1s: Sequence[int], h2s: Sequence[int], k: int,
               table_size: int) -> Tuple[List[int], List[int]]:
    """
    Insert keys, given by their base hashes, in order.

    :return: ``(layout, attempts)`` where ``layout[slot]`` is the index of
        the key stored there or -1, and ``attempts[i]`` is the attempt
        number at which key ``i`` was placed.
    :raises InsertionOverflow: if a key finds no empty slot in N probes.
    """
    if len(h1s) > table_size:
        raise InsertionOverflow(f"{len(h1s)} keys cannot fit into {table_size} slots")
    layout = [-1] * table_size
    attempts = [0] * len(h1s)
    for index, (h1, h2) in enumerate(zip(h1s, h2s)):
        position = ((h1 ^ k) & MASK32) % table_size
        step = probe_step(h2, k, table_size)
        for att in range(table_size):
            if layout[position] == -1:
                layout[position] = index
                attempts[index] = att
                break
            position = (position + step) % table_size
        else:
            raise InsertionOverflow(
                f"key #{index} exhausted {table_size} attempts (k={k:#010x})"
            )
    return layout, attempts


def _ordered_unique(keys: Iterable[HashKey]) -> List[HashKey]:
    if isinstance(keys, (set, frozenset)):
        ordered = sorted(bytes(key) for key in keys)
    else:
        ordered = [bytes(key) for key in keys]
    if len(set(ordered)) != len(ordered):
        raise ValueError("keys passed to build_table must be distinct")
    return ordered


def build_table(keys: Iterable[HashKey], k: int, alpha: float) -> NearPerfectTable:
    """
    Build a table over ``keys`` with XOR parameter ``k`` at fill factor ``alpha``.

    N is the smallest prime >= ceil(n / alpha). Keys are inserted in the
    order given; sets are sorted byte-wise first so the layout is the same
    in every process.

    :param keys: Distinct, non-empty collection of keys.
    :type keys: Iterable[bytes]
    :param k: 32-bit XOR parameter.
    :type k: int
    :param alpha: Fill factor in (0, 1).
    :type alpha: float
    :return: The built table.
    :rtype: NearPerfectTable
    """
    ordered = _ordered_unique(keys)
    if not ordered:
        raise ValueError("cannot build a table over an empty key collection")
    alpha = validate_fill_factor(alpha)
    table_size = table_size_for(len(ordered), alpha)
    params = ProbeParams(k=k, table_size=table_size, fill_factor=alpha)

    hashes = [hash_pair(key) for key in ordered]
    layout, attempts = place_keys([h[0] for h in hashes], [h[1] for h in hashes], k, table_size)
    slots = tuple(ordered[index] if index >= 0 else None for index in layout)

    logger.debug(
        f"Built table: n={len(ordered)}, N={table_size}, k={k:#010x}, "
        f"max insertion attempt={max(attempts)}"
    )
    return NearPerfectTable(params=params, slots=slots, element_count=len(ordered))
