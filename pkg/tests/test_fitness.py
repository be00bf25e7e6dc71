import pickle

import numpy as np
import pytest

from near_perfect.core_hash import build_table, hash1, probe_position
from near_perfect.fitness import (
    FitnessConfig,
    FitnessEvaluator,
    FitnessReport,
    KeySet,
    compute_fitness,
    measure_searches,
)
from near_perfect.utils import substream


def replay_fitness(k, keys, config):
    """Step-by-step oracle: dict slots, insertion and search via probe_position only."""
    table = build_table(keys.to_insert, k, config.alpha)
    slots = {}
    for key in keys.to_insert:
        att = 0
        while probe_position(key, att, table.params) in slots:
            att += 1
        slots[probe_position(key, att, table.params)] = key
    counts = []
    for key in keys.to_search:
        att = 0
        while True:
            stored = slots.get(probe_position(key, att, table.params))
            if stored is None or stored == key:
                counts.append(att + 1)
                break
            att += 1
    avg = sum(counts) / len(counts)
    worst = max(counts)
    return avg, worst, config.lambda_ * avg + (1 - config.lambda_) * worst


class TestKeySet:
    def test_rejects_invalid_compositions(self):
        with pytest.raises(ValueError):
            KeySet(to_insert=[], to_search=[b"a"])
        with pytest.raises(ValueError):
            KeySet(to_insert=[b"a"], to_search=[])
        with pytest.raises(ValueError, match="absent"):
            KeySet(to_insert=[b"a"], to_search=[b"a"])
        with pytest.raises(ValueError, match="member"):
            KeySet(to_insert=[b"a"], to_search=[b"b"])
        with pytest.raises(ValueError, match="distinct"):
            KeySet(to_insert=[b"a", b"a"], to_search=[b"a", b"b"])

    def test_balanced_composition(self, make_keys):
        members = make_keys(100)
        keys = KeySet.balanced(members, substream(1))
        assert keys.to_insert == tuple(members)
        assert len(keys.to_search) == 200
        assert keys.to_search[:100] == tuple(members)
        assert len(keys.absent) == 100
        assert len(set(keys.absent)) == 100
        assert not set(keys.absent) & set(members)
        assert all(len(key) == 16 for key in keys.absent)

    def test_balanced_is_deterministic(self, make_keys):
        members = make_keys(50)
        assert KeySet.balanced(members, substream(3)) == KeySet.balanced(members, substream(3))

    def test_set_members_are_sorted(self):
        keys = KeySet(to_insert={b"b", b"a", b"c"}, to_search=[b"a", b"z"])
        assert keys.to_insert == (b"a", b"b", b"c")


class TestFitnessReport:
    def test_weighting(self):
        comparisons = [6, 1, 1, 1, 1]
        report = FitnessReport.from_comparisons(comparisons, 0.5)
        assert report.avg_comparisons == 2.0
        assert report.max_comparisons == 6
        assert report.fitness == pytest.approx(4.0)
        assert FitnessReport.from_comparisons(comparisons, 0.9).fitness == pytest.approx(2.4)

    def test_convex_combination(self):
        report = FitnessReport.from_comparisons([1, 2, 3, 9], 0.3)
        assert report.avg_comparisons <= report.fitness <= report.max_comparisons

    def test_config_validation(self):
        for value in (0.0, 1.0, -0.5, 2.0):
            with pytest.raises(ValueError):
                FitnessConfig(lambda_=value)
            with pytest.raises(ValueError):
                FitnessConfig(alpha=value)


class TestComputeFitness:
    def test_single_key_two_searches(self):
        k = 0
        x = b"x"
        # N = 2; pick y whose first probe is the slot x does not occupy
        y = next(bytes([b]) for b in range(256)
                 if (hash1(bytes([b])) ^ k) % 2 != (hash1(x) ^ k) % 2)
        keys = KeySet(to_insert=[x], to_search=[x, y])
        report = compute_fitness(k, keys, FitnessConfig(0.5, 0.5))
        assert report == FitnessReport(1.0, 1, 1.0)

    def test_matches_replay_oracle(self, small_keyset):
        config = FitnessConfig(0.5, 0.5)
        for k in (0, 1, 0xDEADBEEF, 0x12345678):
            report = compute_fitness(k, small_keyset, config)
            avg, worst, fitness = replay_fitness(k, small_keyset, config)
            assert report.avg_comparisons == avg
            assert report.max_comparisons == worst
            assert report.fitness == fitness

    def test_high_fill_factor_matches_oracle(self, small_keyset):
        config = FitnessConfig(0.7, 0.95)
        report = compute_fitness(0xCAFEBABE, small_keyset, config)
        avg, worst, fitness = replay_fitness(0xCAFEBABE, small_keyset, config)
        assert (report.avg_comparisons, report.max_comparisons) == (avg, worst)
        assert report.fitness == pytest.approx(fitness)

    def test_matches_built_table(self, small_keyset):
        config = FitnessConfig(0.5, 0.6)
        evaluator = FitnessEvaluator(small_keyset, config)
        table = build_table(small_keyset.to_insert, 99, 0.6)
        expected = [table.search(key).comparisons for key in small_keyset.to_search]
        assert evaluator.comparisons(99).tolist() == expected

    def test_reproducible(self, small_keyset):
        config = FitnessConfig()
        assert compute_fitness(5, small_keyset, config) == compute_fitness(5, small_keyset, config)

    def test_adding_a_search_never_decreases_totals(self, small_keyset, make_keys):
        config = FitnessConfig()
        base = FitnessEvaluator(small_keyset, config).comparisons(17)
        extended_keys = KeySet(small_keyset.to_insert,
                               small_keyset.to_search + tuple(make_keys(1, seed=44)))
        extended = FitnessEvaluator(extended_keys, config).comparisons(17)
        assert extended.sum() >= base.sum()
        assert extended.max() >= base.max()

    def test_evaluator_pickles(self, small_keyset):
        evaluator = FitnessEvaluator(small_keyset, FitnessConfig())
        clone = pickle.loads(pickle.dumps(evaluator))
        assert clone.evaluate(123) == evaluator(123)


class TestMeasureSearches:
    def test_split_by_outcome(self, small_keyset):
        table = build_table(small_keyset.to_insert, 3, 0.5)
        stats = measure_searches(table, small_keyset.to_search)
        assert stats.successful_count == 200
        assert stats.unsuccessful_count == 200
        hits = [table.search(key).comparisons for key in small_keyset.to_insert]
        misses = [table.search(key).comparisons for key in small_keyset.absent]
        assert stats.successful_avg == pytest.approx(np.mean(hits))
        assert stats.unsuccessful_worst == max(misses)
        assert stats.mixed_worst == max(hits + misses)

    def test_agrees_with_fitness_average(self, small_keyset):
        config = FitnessConfig(0.5, 0.5)
        report = compute_fitness(11, small_keyset, config)
        table = build_table(small_keyset.to_insert, 11, 0.5)
        stats = measure_searches(table, small_keyset.to_search)
        assert stats.mixed_avg == report.avg_comparisons
        assert stats.mixed_worst == report.max_comparisons

    def test_requires_queries(self, small_keyset):
        table = build_table(small_keyset.to_insert, 3, 0.5)
        with pytest.raises(ValueError):
            measure_searches(table, [])
