import json
import struct

import pandas as pd
import pytest
from click.testing import CliRunner

from app import cli
from near_perfect.core_hash import probe_position
from near_perfect.fitness import measure_searches
from near_perfect.parsers import read_keyset
from near_perfect.table_codec import load_table
from near_perfect.utils import format_comparisons
from near_perfect.workflows import RESULT_COLUMNS

SMALL_GA_FLAGS = ['--psize', '6', '--elite', '2', '--theta1', '3', '--theta2', '2']


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def keyset_path(runner, tmp_path):
    path = tmp_path / "keys.txt"
    result = runner.invoke(cli, ['generate', '--count', '200', '--seed', '3', '--out', str(path)])
    assert result.exit_code == 0, result.output
    return path


def lines_starting(output, prefix):
    return [line for line in output.splitlines() if line.startswith(prefix)]


def test_generate(runner, tmp_path):
    path = tmp_path / "keys.txt"
    result = runner.invoke(cli, ['generate', '--count', '50', '--key-length', '8', '--out', str(path)])
    assert result.exit_code == 0
    assert "wrote 50 keys" in result.output
    keys = read_keyset(path)
    assert len(keys) == 50 and all(len(key) == 8 for key in keys)


def test_generate_rejects_impossible_count(runner, tmp_path):
    result = runner.invoke(cli, ['generate', '--count', '300', '--key-length', '1',
                                 '--out', str(tmp_path / "k.txt")])
    assert result.exit_code == 1
    assert "Error" in result.output


class TestOptimize:
    def test_writes_table_and_summary(self, runner, keyset_path, tmp_path):
        table_path = tmp_path / "table.nph"
        result = runner.invoke(cli, ['optimize', str(keyset_path), '--alpha', '0.5',
                                     *SMALL_GA_FLAGS, '--out', str(table_path)])
        assert result.exit_code == 0, result.output
        table = load_table(table_path)
        assert table.element_count == 200
        assert table.table_size == 401
        assert lines_starting(result.output, "k: 0x")[0] == f"k: {table.k:#010x}"
        assert lines_starting(result.output, "table size: ")[0] == "table size: 401"
        assert lines_starting(result.output, "load: ")[0] == "load: 0.4988"
        assert lines_starting(result.output, "generations: ")
        assert all(key in table for key in read_keyset(keyset_path))

    def test_reported_average_matches_reloaded_table(self, runner, keyset_path, tmp_path):
        table_path, search_path = tmp_path / "t.nph", tmp_path / "search.txt"
        result = runner.invoke(cli, ['optimize', str(keyset_path), *SMALL_GA_FLAGS,
                                     '--out', str(table_path), '--search-out', str(search_path)])
        assert result.exit_code == 0, result.output
        reported = lines_starting(result.output, "avg comparisons: ")[0]
        stats = measure_searches(load_table(table_path), read_keyset(search_path))
        assert reported == f"avg comparisons: {format_comparisons(stats.mixed_avg)}"

    def test_deterministic_table_bytes(self, runner, keyset_path, tmp_path):
        paths = [tmp_path / "a.nph", tmp_path / "b.nph"]
        for path in paths:
            result = runner.invoke(cli, ['optimize', str(keyset_path), '--seed', '9',
                                         *SMALL_GA_FLAGS, '--out', str(path)])
            assert result.exit_code == 0, result.output
        assert paths[0].read_bytes() == paths[1].read_bytes()

    def test_search_keys_and_trace(self, runner, keyset_path, tmp_path):
        search_path, trace_path = tmp_path / "search.txt", tmp_path / "trace.json"
        result = runner.invoke(cli, ['optimize', str(keyset_path), *SMALL_GA_FLAGS,
                                     '--out', str(tmp_path / "t.nph"),
                                     '--search-out', str(search_path), '--trace', str(trace_path)])
        assert result.exit_code == 0, result.output
        searched = read_keyset(search_path)
        members = set(read_keyset(keyset_path))
        assert len(searched) == 400
        assert sum(key in members for key in searched) == 200

        trace = json.loads(trace_path.read_text())
        assert trace['summary']['success'] is True
        assert len(trace['history']) == trace['summary']['generations']
        assert trace['trace']['completion_rate'] == 1.0

    def test_config_file_supplies_defaults(self, runner, keyset_path, tmp_path):
        config_path = tmp_path / "config.json"
        config_path.write_text(json.dumps({"fitness": {"alpha": 0.25},
                                           "ga": {"population_size": 4, "elite_size": 2,
                                                  "max_generations": 2}}))
        table_path = tmp_path / "t.nph"
        result = runner.invoke(cli, ['--config', str(config_path), 'optimize', str(keyset_path),
                                     '--out', str(table_path)])
        assert result.exit_code == 0, result.output
        assert load_table(table_path).table_size == 809
        assert "generations: 2 (max_generations)" in result.output


class TestSearch:
    def test_trail_replays_probe_sequence(self, runner, keyset_path, tmp_path):
        table_path = tmp_path / "t.nph"
        runner.invoke(cli, ['optimize', str(keyset_path), *SMALL_GA_FLAGS, '--out', str(table_path)])
        table = load_table(table_path)
        for key in read_keyset(keyset_path)[:20]:
            result = runner.invoke(cli, ['search', str(table_path), key.hex(), '--hex'])
            assert result.exit_code == 0, result.output
            assert lines_starting(result.output, "found")
            comparisons = int(lines_starting(result.output, "comparisons: ")[0].split()[-1])
            trail = [int(slot) for slot in lines_starting(result.output, "trail: ")[0].split()[1:]]
            assert len(trail) == comparisons
            assert trail == [probe_position(key, att, table.params) for att in range(comparisons)]

    def test_absent_key(self, runner, keyset_path, tmp_path):
        table_path = tmp_path / "t.nph"
        runner.invoke(cli, ['optimize', str(keyset_path), *SMALL_GA_FLAGS, '--out', str(table_path)])
        result = runner.invoke(cli, ['search', str(table_path), 'not a stored key'])
        assert result.exit_code == 0
        assert lines_starting(result.output, "not found")

    def test_bad_hex(self, runner, keyset_path, tmp_path):
        table_path = tmp_path / "t.nph"
        runner.invoke(cli, ['optimize', str(keyset_path), *SMALL_GA_FLAGS, '--out', str(table_path)])
        result = runner.invoke(cli, ['search', str(table_path), 'xyz', '--hex'])
        assert result.exit_code == 2


class TestErrors:
    def test_corrupt_table(self, runner, tmp_path):
        path = tmp_path / "broken.nph"
        path.write_bytes(b"NOPE" + bytes(40))
        result = runner.invoke(cli, ['search', str(path), 'key'])
        assert result.exit_code == 3
        assert "corrupt table file" in result.output

    def test_missing_table(self, runner, tmp_path):
        result = runner.invoke(cli, ['search', str(tmp_path / "absent.nph"), 'key'])
        assert result.exit_code == 1
        assert "I/O error" in result.output

    def test_malformed_keyset(self, runner, tmp_path):
        path = tmp_path / "keys.txt"
        path.write_text("00ff\nnot-hex\n")
        result = runner.invoke(cli, ['optimize', str(path), '--out', str(tmp_path / "t.nph")])
        assert result.exit_code == 4
        assert "line 2" in result.output

    def test_invalid_fill_factor(self, runner, keyset_path, tmp_path):
        result = runner.invoke(cli, ['optimize', str(keyset_path), '--alpha', '1.0',
                                     '--out', str(tmp_path / "t.nph")])
        assert result.exit_code == 1

    def test_invalid_config(self, runner, tmp_path):
        path = tmp_path / "config.json"
        path.write_text("{oops")
        result = runner.invoke(cli, ['--config', str(path), 'theory'])
        assert result.exit_code == 1
        assert "not valid JSON" in result.output

    def test_wrongly_typed_config_value(self, runner, keyset_path, tmp_path):
        path = tmp_path / "config.json"
        path.write_text(json.dumps({"ga": {"population_size": "32"}}))
        result = runner.invoke(cli, ['--config', str(path), 'optimize', str(keyset_path),
                                     '--out', str(tmp_path / "t.nph")])
        assert result.exit_code == 1
        assert "ga.population_size" in result.output
        assert "Traceback" not in result.output

    def test_table_without_empty_slot(self, runner, tmp_path):
        path = tmp_path / "full.nph"
        slot = bytes((1,)) + struct.pack("<I", 1)
        path.write_bytes(struct.pack("<4sHIQdQ", b"NPH1", 1, 0, 2, 0.5, 2)
                         + slot + b"a" + slot + b"b")
        result = runner.invoke(cli, ['search', str(path), 'c'])
        assert result.exit_code == 3
        assert "corrupt table file" in result.output


def test_theory(runner):
    result = runner.invoke(cli, ['theory'])
    assert result.exit_code == 0
    assert "1.11" in result.output
    assert "10.00" in result.output

    result = runner.invoke(cli, ['theory', '--alpha', '0.5', '--positions', '4'])
    assert "1.62" in result.output or "1.63" in result.output


def test_init_config(runner, tmp_path):
    path = tmp_path / "config.json"
    result = runner.invoke(cli, ['init-config', str(path)])
    assert result.exit_code == 0
    assert json.loads(path.read_text())["ga"]["population_size"] == 32


def test_unknown_config_key_is_reported(runner, tmp_path, caplog):
    path = tmp_path / "config.json"
    path.write_text(json.dumps({"ga": {"colour": "red"}}))
    result = runner.invoke(cli, ['--config', str(path), 'theory', '--alpha', '0.5'])
    assert result.exit_code == 0
    assert "ga.colour" in caplog.text


def test_experiment_writes_csv(runner, tmp_path):
    path = tmp_path / "fig4.csv"
    result = runner.invoke(cli, ['experiment', 'fig4', '--size', '100', '--size', '200',
                                 '--out', str(path)])
    assert result.exit_code == 0, result.output
    frame = pd.read_csv(path)
    assert list(frame.columns) == RESULT_COLUMNS
    assert set(frame.n) == {100, 200}
    assert set(frame.structure) == {"sorted_array", "fks", "near_perfect"}
