"""
Utility functions for near-perfect hashing workflows.
"""

import datetime
import math
from fractions import Fraction
from typing import Any, Dict

import numpy as np
from sympy import isprime, nextprime

MASK32 = 0xFFFFFFFF

# Fill factors are user-supplied decimals; this bound keeps 0.3 == 3/10.
_FRACTION_DENOMINATOR_LIMIT = 10**9


def validate_fill_factor(alpha: float, name: str = "fill factor") -> float:
    """Return alpha as float, raising ValueError unless 0 < alpha < 1."""
    try:
        value = float(alpha)
    except (TypeError, ValueError):
        raise ValueError(f"{name} must be a real number, got {alpha!r}")
    if not 0.0 < value < 1.0 or math.isnan(value):
        raise ValueError(f"{name} must lie in (0, 1), got {alpha!r}")
    return value


def fill_fraction(alpha: float) -> Fraction:
    """Exact rational value of a decimal fill factor."""
    return Fraction(alpha).limit_denominator(_FRACTION_DENOMINATOR_LIMIT)


def smallest_prime_at_least(m: int) -> int:
    """Smallest prime p with p >= m (2 for any m <= 2)."""
    if m <= 2:
        return 2
    return int(m) if isprime(m) else int(nextprime(m))


def table_size_for(element_count: int, alpha: float) -> int:
    """
    Number of slots for a table of element_count keys at fill factor alpha.

    :param element_count: Number of keys to store, at least 1.
    :type element_count: int
    :param alpha: Requested fill factor in (0, 1).
    :type alpha: float
    :return: The smallest prime >= ceil(element_count / alpha).
    :rtype: int
    """
    if element_count < 1:
        raise ValueError(f"element count must be positive, got {element_count}")
    alpha = validate_fill_factor(alpha)
    minimum_slots = math.ceil(Fraction(element_count) / fill_fraction(alpha))
    return smallest_prime_at_least(minimum_slots)


def alpha_tag(alpha: float) -> int:
    """Integer tag for a fill factor, usable as an RNG spawn key."""
    return int(round(float(alpha) * 1_000_000))


def substream(seed: int, *tags: int) -> np.random.Generator:
    """
    Independent PCG64 generator for (seed, *tags).

    Streams with different tags never overlap, so work split across
    generations, cells or processes draws the same numbers in any schedule.
    """
    sequence = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(t) for t in tags))
    return np.random.Generator(np.random.PCG64(sequence))


def format_comparisons(value: float) -> str:
    """Format a comparison count with two decimals."""
    return f"{value:.2f}"


def speedup_percent(theory: float, measured: float) -> float:
    """Relative saving of measured against theory, in percent."""
    if theory <= 0:
        raise ValueError(f"theory value must be positive, got {theory}")
    return (theory - measured) / theory * 100.0


def create_execution_summary(run_id: str, workflow_type: str,
                             execution_time: float, evaluations: int,
                             generations: int, success: bool) -> Dict[str, Any]:
    """Create execution summary for logging."""
    return {
        'run_id': run_id,
        'workflow_type': workflow_type,
        'timestamp': datetime.datetime.now().isoformat(),
        'execution_time_seconds': execution_time,
        'evaluations': evaluations,
        'generations': generations,
        'success': success,
        'evaluations_per_second': evaluations / execution_time if execution_time > 0 else 0
    }
