import functools
import json
import logging
import sys
import time
import uuid

import click

from near_perfect.core_hash import build_table
from near_perfect.event_emitter import ProgressEmitter
from near_perfect.execution_tracker import GaExecutionTracker
from near_perfect.fitness import FitnessConfig, KeySet, measure_searches
from near_perfect.genetic import GaConfig, gen_alg
from near_perfect.parsers import KeysetFormatError, generate_keys, read_keyset, write_keyset
from near_perfect.settings import create_config_file, load_config
from near_perfect.table_codec import CorruptTableError, load_table, save_table
from near_perfect.theory import theory_table
from near_perfect.utils import create_execution_summary, format_comparisons, substream
from near_perfect.workflows import EXPERIMENTS, ExperimentWorkflows, run_experiment

logger = logging.getLogger(__name__)

# (0, 1) never collides with the per-generation GA streams (g,)
ABSENT_KEYS_STREAM = (0, 1)


class CorruptTableFileError(click.ClickException):
    exit_code = 3


class KeysetFileError(click.ClickException):
    exit_code = 4


def handle_errors(command):
    """Turn domain and I/O errors into one-line diagnostics with distinct exit codes."""

    @functools.wraps(command)
    def wrapper(*args, **kwargs):
        try:
            return command(*args, **kwargs)
        except click.ClickException:
            raise
        except CorruptTableError as e:
            logger.debug("Corrupt table file", exc_info=True)
            raise CorruptTableFileError(f"corrupt table file: {e}")
        except KeysetFormatError as e:
            logger.debug("Malformed keyset file", exc_info=True)
            raise KeysetFileError(f"malformed keyset file: {e}")
        except OSError as e:
            logger.debug("I/O failure", exc_info=True)
            raise click.ClickException(f"I/O error: {e}")
        except (ValueError, TypeError, RuntimeError) as e:
            logger.debug("Command failed", exc_info=True)
            raise click.ClickException(str(e))

    return wrapper


def _pick(value, section, key):
    """Explicit flag, else config file, else built-in default."""
    if value is not None:
        return value
    return click.get_current_context().obj['config'][section][key]


def ga_options(command):
    options = [
        click.option('--alpha', type=float, default=None, help='Fill factor in (0, 1).'),
        click.option('--lambda', 'lambda_', type=float, default=None,
                     help='Weight of the average against the worst case.'),
        click.option('--psize', type=int, default=None, help='Population size.'),
        click.option('--elite', type=int, default=None, help='Individuals kept unchanged.'),
        click.option('--mutation-prob', type=float, default=None, help='Mutation probability.'),
        click.option('--max-flips', type=int, default=None, help='Most bits flipped by a mutation.'),
        click.option('--theta1', type=int, default=None, help='Maximum number of generations.'),
        click.option('--theta2', type=int, default=None,
                     help='Generations without improvement before stopping.'),
        click.option('--seed', type=int, default=None, help='RNG seed.'),
        click.option('--workers', type=int, default=None, help='Worker processes.'),
    ]
    for option in reversed(options):
        command = option(command)
    return command


def _ga_config(psize, elite, mutation_prob, max_flips, theta1, theta2, seed, workers) -> GaConfig:
    return GaConfig(
        population_size=_pick(psize, 'ga', 'population_size'),
        elite_size=_pick(elite, 'ga', 'elite_size'),
        mutation_probability=_pick(mutation_prob, 'ga', 'mutation_probability'),
        max_flips=_pick(max_flips, 'ga', 'max_flips'),
        max_generations=_pick(theta1, 'ga', 'max_generations'),
        stagnation_limit=_pick(theta2, 'ga', 'stagnation_limit'),
        rng_seed=_pick(seed, 'ga', 'rng_seed'),
        workers=_pick(workers, 'ga', 'workers'),
    )


@click.group()
@click.option('--log-level', default='WARNING', show_default=True,
              type=click.Choice(['DEBUG', 'INFO', 'WARNING', 'ERROR'], case_sensitive=False))
@click.option('--config', 'config_path', type=click.Path(dir_okay=False), default=None,
              help='JSON file with default parameters.')
@click.pass_context
def cli(ctx, log_level, config_path):
    """Near-perfect hashing: GA-optimized double-hashing tables and experiments."""
    logging.basicConfig(level=getattr(logging, log_level.upper()), stream=sys.stderr,
                        format='%(asctime)s %(name)s %(levelname)s %(message)s')
    ctx.ensure_object(dict)
    try:
        ctx.obj['config'] = load_config(config_path)
    except ValueError as e:
        raise click.ClickException(str(e))


@cli.command()
@click.option('--count', type=int, required=True, help='Number of keys.')
@click.option('--key-length', type=int, default=16, show_default=True, help='Bytes per key.')
@click.option('--seed', type=int, default=0, show_default=True)
@click.option('--out', 'output_path', type=click.Path(dir_okay=False), required=True)
@handle_errors
def generate(count, key_length, seed, output_path):
    """Write COUNT distinct random keys, hex-encoded, one per line."""
    keys = generate_keys(count, key_length, seed)
    write_keyset(keys, output_path)
    click.echo(f"wrote {len(keys)} keys to {output_path}")


@cli.command()
@click.argument('keyset_path', type=click.Path(dir_okay=False))
@ga_options
@click.option('--out', 'table_path', type=click.Path(dir_okay=False), required=True,
              help='Serialized table destination.')
@click.option('--search-out', type=click.Path(dir_okay=False), default=None,
              help='Also write the searched keys (members and absent keys).')
@click.option('--trace', 'trace_path', type=click.Path(dir_okay=False), default=None,
              help='Write the per-operation execution trace as JSON.')
@click.option('--progress', is_flag=True, help='Per-generation JSON records on stderr.')
@handle_errors
def optimize(keyset_path, alpha, lambda_, psize, elite, mutation_prob, max_flips, theta1, theta2,
             seed, workers, table_path, search_out, trace_path, progress):
    """Evolve k for the keys in KEYSET_PATH and write the resulting table."""
    run_id = str(uuid.uuid4())
    fitness_config = FitnessConfig(_pick(lambda_, 'fitness', 'lambda'), _pick(alpha, 'fitness', 'alpha'))
    ga_config = _ga_config(psize, elite, mutation_prob, max_flips, theta1, theta2, seed, workers)

    members = read_keyset(keyset_path)
    keys = KeySet.balanced(members, substream(ga_config.rng_seed, *ABSENT_KEYS_STREAM))
    emitter = ProgressEmitter(sink=sys.stderr, run_id=run_id) if progress else None
    tracker = GaExecutionTracker() if trace_path else None

    start_time = time.time()
    result = gen_alg(keys, ga_config, fitness_config, progress=emitter, tracker=tracker)
    table = build_table(keys.to_insert, result.best_k, fitness_config.alpha)
    save_table(table, table_path)
    execution_time = time.time() - start_time

    if search_out:
        write_keyset(keys.to_search, search_out)

    stats = measure_searches(load_table(table_path), keys.to_search)
    if stats.mixed_avg != result.report.avg_comparisons:
        logger.warning(f"Reloaded table measures {stats.mixed_avg} comparisons on average, "
                       f"the GA reported {result.report.avg_comparisons}")

    if trace_path:
        trace = {
            'summary': create_execution_summary(run_id, 'optimize', execution_time,
                                                result.evaluations, result.generations_run, True),
            'history': list(result.history),
            'generation_best': list(result.generation_best),
            'trace': result.trace,
        }
        with open(trace_path, 'w') as f:
            json.dump(trace, f, indent=2)
        logger.info(f"Trace saved to {trace_path}")

    click.echo(f"k: {result.best_k:#010x}")
    click.echo(f"table size: {table.table_size}")
    click.echo(f"load: {table.load:.4f}")
    click.echo(f"avg comparisons: {format_comparisons(result.report.avg_comparisons)}")
    click.echo(f"worst comparisons: {result.report.max_comparisons}")
    click.echo(f"fitness: {result.report.fitness:.4f}")
    click.echo(f"generations: {result.generations_run} ({result.stop_reason})")


@cli.command()
@click.argument('table_path', type=click.Path(dir_okay=False))
@click.argument('key')
@click.option('--hex', 'is_hex', is_flag=True, help='KEY is hex-encoded bytes.')
@handle_errors
def search(table_path, key, is_hex):
    """Search KEY in a serialized table and print the probe trail."""
    if is_hex:
        try:
            key_bytes = bytes.fromhex(key)
        except ValueError:
            raise click.BadParameter(f"not a hex string: {key!r}", param_hint='KEY')
    else:
        key_bytes = key.encode('utf-8')
    table = load_table(table_path)
    outcome = table.search(key_bytes)
    trail = table.probe_trail(key_bytes)
    click.echo(f"{'found' if outcome.found else 'not found'}")
    click.echo(f"comparisons: {outcome.comparisons}")
    click.echo(f"trail: {' '.join(str(slot) for slot in trail)}")


@cli.command()
@click.argument('experiment', type=click.Choice(EXPERIMENTS))
@click.option('--size', 'sizes', type=int, multiple=True, help='Element count; repeatable.')
@click.option('--alpha', 'fill_factors', type=float, multiple=True, help='Fill factor; repeatable.')
@click.option('--lambda', 'lambda_', type=float, default=None)
@click.option('--psize', type=int, default=None)
@click.option('--elite', type=int, default=None)
@click.option('--mutation-prob', type=float, default=None)
@click.option('--max-flips', type=int, default=None)
@click.option('--theta1', type=int, default=None)
@click.option('--theta2', type=int, default=None)
@click.option('--seed', type=int, default=None)
@click.option('--trials', type=int, default=None)
@click.option('--workers', type=int, default=None, help='Cells run in parallel.')
@click.option('--out', 'output_path', type=click.Path(dir_okay=False), required=True)
@handle_errors
def experiment(experiment, sizes, fill_factors, lambda_, psize, elite, mutation_prob, max_flips,
               theta1, theta2, seed, trials, workers, output_path):
    """Regenerate the data of EXPERIMENT as CSV."""
    config = click.get_current_context().obj['config']['experiment']
    ga_config = _ga_config(psize, elite, mutation_prob, max_flips, theta1, theta2, seed, None)
    spec = ExperimentWorkflows.default_spec(
        experiment,
        sizes=tuple(sizes) or config['sizes'],
        fill_factors=tuple(fill_factors) or config['fill_factors'],
        trials=trials if trials is not None else config['trials'],
        rng_seed=ga_config.rng_seed,
        ga=ga_config,
        lambda_=_pick(lambda_, 'fitness', 'lambda'),
        workers=_pick(workers, 'experiment', 'workers'),
    )
    frame = run_experiment(spec, output_path)
    click.echo(f"wrote {len(frame)} rows to {output_path}")


@cli.command()
@click.option('--alpha', 'fill_factors', type=float, multiple=True,
              help='Fill factor; repeatable. Defaults to 0.1 ... 0.9.')
@click.option('--positions', type=int, default=None,
              help='Also show the expectation over this many probe positions.')
@handle_errors
def theory(fill_factors, positions):
    """Print expected comparisons per fill factor."""
    alphas = fill_factors or tuple(i / 10 for i in range(1, 10))
    frame = theory_table(alphas, positions)
    click.echo(frame.to_string(index=False, float_format=lambda value: f"{value:.2f}"))


@cli.command('init-config')
@click.argument('config_path', type=click.Path(dir_okay=False), default='config.json')
@handle_errors
def init_config(config_path):
    """Write the default configuration file."""
    create_config_file(config_path)
    click.echo(f"wrote {config_path}")


if __name__ == '__main__':
    cli()
