import numpy as np
import pytest
from sympy import isprime, nextprime

from near_perfect.core_hash import (
    NearPerfectTable,
    ProbeParams,
    build_table,
    hash1,
    hash2,
    hash_pair,
    place_keys,
    probe_from_hashes,
    probe_position,
    search,
)
from near_perfect.utils import table_size_for


def reference_hash(data, basis):
    h = basis
    for byte in data:
        h = ((h ^ byte) * 16777619) % 2**32
    h ^= h >> 16
    h = (h * 0x85EBCA6B) % 2**32
    h ^= h >> 13
    h = (h * 0xC2B2AE35) % 2**32
    h ^= h >> 16
    return h


def replay_search(table, key):
    """Independent probe-by-probe search using probe_position only."""
    for att in range(table.table_size):
        stored = table.slots[probe_position(key, att, table.params)]
        if stored is None:
            return False, att + 1, att
        if stored == key:
            return True, att + 1, att
    raise AssertionError("no terminator")


class TestHashes:
    def test_empty_key_is_finalized_offset_basis(self):
        assert hash1(b"") == reference_hash(b"", 2166136261)

    def test_matches_reference_implementation(self, make_keys):
        for key in make_keys(200) + [b"a", b"hello world"]:
            assert hash1(key) == reference_hash(key, 2166136261)
            assert hash2(key) == reference_hash(key, 2166136261 ^ 0x5BD1E995)

    def test_deterministic_on_copies(self):
        key = b"near-perfect"
        assert hash1(key) == hash1(bytes(bytearray(key)))
        assert hash2(key) == hash2(bytes(bytearray(key)))
        assert hash_pair(key) == (hash1(key), hash2(key))

    def test_bit_frequency(self, make_keys):
        keys = make_keys(100_000, seed=3)
        for hash_function in (hash1, hash2):
            values = np.array([hash_function(key) for key in keys], dtype=np.uint64)
            bits = (values[:, None] >> np.arange(32, dtype=np.uint64)) & np.uint64(1)
            frequencies = bits.mean(axis=0)
            assert np.all(np.abs(frequencies - 0.5) <= 0.01)

    def test_hash2_differs_from_hash1(self, make_keys):
        keys = make_keys(100_000, seed=4)
        equal = sum(1 for key in keys if hash1(key) == hash2(key))
        assert equal <= 100


class TestProbe:
    def test_first_attempt_ignores_step(self, make_keys):
        params = ProbeParams(k=0x1234ABCD, table_size=101, fill_factor=0.5)
        for key in make_keys(20):
            assert probe_position(key, 0, params) == (hash1(key) ^ params.k) % 101

    def test_direct_arithmetic_with_stub_hashes(self):
        assert probe_from_hashes(5, 3, 1, 0, 7) == 1

    def test_zero_step_is_replaced_by_one(self):
        # h2 ^ k == 7 == N, so the raw step is 0
        assert probe_from_hashes(2, 7, 1, 0, 7) == 3
        assert probe_from_hashes(2, 7, 3, 0, 7) == 5

    def test_full_cycle(self, make_keys):
        for table_size in (2, 3, 101, 211):
            params = ProbeParams(k=0xDEADBEEF, table_size=table_size, fill_factor=0.5)
            for key in make_keys(10, seed=table_size):
                positions = sorted(probe_position(key, att, params) for att in range(table_size))
                assert positions == list(range(table_size))

    def test_no_overflow_for_large_attempts(self):
        size = 4_294_967_311  # smallest prime above 2**32
        assert isprime(size)
        position = probe_from_hashes(0xFFFFFFFF, 0xFFFFFFFE, size - 1, 0, size)
        assert position == (0xFFFFFFFF + 0xFFFFFFFE * (size - 1)) % size

    def test_params_validation(self):
        with pytest.raises(ValueError):
            ProbeParams(k=2**32, table_size=7, fill_factor=0.5)
        with pytest.raises(ValueError):
            ProbeParams(k=0, table_size=8, fill_factor=0.5)
        with pytest.raises(ValueError):
            ProbeParams(k=0, table_size=7, fill_factor=1.0)


class TestBuildTable:
    def test_single_key(self):
        table = build_table([b"only"], 0, 0.5)
        assert table.table_size == 2
        assert table.element_count == 1
        assert sum(slot is not None for slot in table.slots) == 1

    def test_hundred_keys_size(self, make_keys):
        table = build_table(make_keys(100), 42, 0.5)
        assert table.table_size == nextprime(199) == 211
        assert isprime(table.table_size)
        assert table.element_count / table.table_size <= 0.5

    def test_exact_fraction_sizing(self):
        assert table_size_for(3, 0.3) == 11
        assert table_size_for(30, 0.3) == 101
        assert table_size_for(1, 0.5) == 2

    def test_k_changes_layout(self, make_keys):
        keys = make_keys(1000)
        first = build_table(keys, 0, 0.5)
        second = build_table(keys, 0xDEADBEEF, 0.5)
        assert first.table_size == second.table_size
        assert first.element_count == second.element_count == 1000
        assert first.slots != second.slots

    def test_deterministic(self, make_keys):
        keys = make_keys(300)
        assert build_table(keys, 7, 0.7) == build_table(list(keys), 7, 0.7)

    def test_set_input_is_sorted(self, make_keys):
        keys = make_keys(50)
        assert build_table(set(keys), 9, 0.5) == build_table(sorted(keys), 9, 0.5)

    def test_rejects_duplicates_and_empty(self):
        with pytest.raises(ValueError):
            build_table([b"a", b"a"], 0, 0.5)
        with pytest.raises(ValueError):
            build_table([], 0, 0.5)

    def test_every_key_reachable(self, make_keys):
        keys = make_keys(500)
        table = build_table(keys, 0xC0FFEE, 0.8)
        hashes = [hash_pair(key) for key in keys]
        _, attempts = place_keys([h[0] for h in hashes], [h[1] for h in hashes],
                                 table.k, table.table_size)
        for key, att in zip(keys, attempts):
            outcome = search(table, key)
            assert outcome.found
            assert outcome.comparisons <= att + 1

    def test_element_count_must_match(self):
        params = ProbeParams(k=0, table_size=3, fill_factor=0.5)
        with pytest.raises(ValueError):
            NearPerfectTable(params, (b"a", None, None), element_count=2)
        with pytest.raises(ValueError):
            NearPerfectTable(params, (b"a", None))


class TestSearch:
    def test_first_inserted_key_costs_one_comparison(self, make_keys):
        keys = make_keys(100)
        table = build_table(keys, 5, 0.5)
        outcome = table.search(keys[0])
        assert outcome.found
        assert outcome.comparisons == 1
        assert outcome.attempts == 0

    def test_immediate_miss(self, make_keys):
        keys = make_keys(100)
        table = build_table(keys, 5, 0.5)
        absent = make_keys(200, seed=1)
        key = next(key for key in absent
                   if table.slots[probe_position(key, 0, table.params)] is None)
        outcome = table.search(key)
        assert not outcome.found
        assert outcome.comparisons == 1
        assert table.probe_trail(key) == [probe_position(key, 0, table.params)]

    def test_matches_replay_oracle(self, make_keys):
        keys = make_keys(50)
        table = build_table(keys, 0x5EED, 0.5)
        assert table.table_size == 101
        for key in keys + make_keys(50, seed=11):
            outcome = table.search(key)
            assert (outcome.found, outcome.comparisons, outcome.attempts) == replay_search(table, key)
            assert outcome.comparisons == outcome.attempts + 1
            assert (key in table) == outcome.found

    def test_trail_follows_probe_sequence(self, make_keys):
        keys = make_keys(300)
        table = build_table(keys, 77, 0.9)
        for key in keys[-20:]:
            trail = table.probe_trail(key)
            assert trail == [probe_position(key, att, table.params) for att in range(len(trail))]

    def test_full_table_is_rejected(self):
        params = ProbeParams(k=0, table_size=2, fill_factor=0.5)
        with pytest.raises(ValueError, match="occupied"):
            NearPerfectTable(params, (b"a", b"b"))

    def test_overfilled_table_is_rejected(self):
        params = ProbeParams(k=0, table_size=5, fill_factor=0.5)
        with pytest.raises(ValueError, match="exceed fill factor"):
            NearPerfectTable(params, (b"a", b"b", b"c", None, None))
        assert NearPerfectTable(params, (b"a", b"b", None, None, None)).load == 0.4

    def test_unsuccessful_average_near_uniform_probing(self, make_keys):
        keys = make_keys(4000, seed=21)
        absent = make_keys(4000, seed=22)
        table = build_table(keys, 0x9E3779B9, 0.5)
        avg = np.mean([table.search(key).comparisons for key in absent if key not in set(keys)])
        assert abs(avg - 2.0) <= 0.1

    @pytest.mark.slow
    @pytest.mark.parametrize("alpha", [i / 10 for i in range(1, 10)])
    def test_uniform_probing_model(self, make_keys, alpha):
        keys = make_keys(10_000, seed=31)
        members = set(keys)
        absent = [key for key in make_keys(10_000, seed=32) if key not in members]
        table = build_table(keys, int(np.random.default_rng(5).integers(0, 2**32)), alpha)
        avg = np.mean([table.search(key).comparisons for key in absent])
        assert abs(avg - 1 / (1 - alpha)) <= 0.05 / (1 - alpha)
