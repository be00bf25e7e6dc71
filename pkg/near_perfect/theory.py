"""
Analytical comparison counts for probe-until-empty search.

Each probe lands on an occupied slot with probability alpha, independently,
so a search costs one comparison per occupied slot plus the one that finds
the empty slot. Over the first N probe positions the expectation is

    E_N = (N * alpha**(N + 1) - (N + 1) * alpha**N + 1) / (1 - alpha)

which tends to 1 / (1 - alpha) as N grows. The model describes unsuccessful
searches; measured successful and mixed averages are compared against it
separately by the experiments.
"""

import logging
import math
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np
import pandas as pd

from .utils import validate_fill_factor

logger = logging.getLogger(__name__)

_BIT_BLOCK = 64
_TRIAL_BATCH = 1 << 14


@dataclass(frozen=True)
class TheoryParams:
    alpha: float
    positions: int

    def __post_init__(self):
        object.__setattr__(self, 'alpha', validate_fill_factor(self.alpha))
        if int(self.positions) != self.positions or self.positions < 1:
            raise ValueError(f"number of probe positions must be a positive integer, got {self.positions}")


def run_probability(alpha: float, k: int) -> float:
    """Probability of exactly k occupied probes followed by an empty one."""
    alpha = validate_fill_factor(alpha)
    if k < 0:
        raise ValueError(f"run length must be non-negative, got {k}")
    return alpha**k * (1.0 - alpha)


def expected_comparisons_exact(alpha: float, positions: int) -> float:
    """
    Expected comparisons over a finite number of probe positions.

    Evaluated as ``(1 - a**N) / (1 - a) - N * a**N`` with ``a**N`` taken
    through ``exp``/``expm1`` of ``N * log(a)``, which keeps full precision
    as alpha approaches 1 and underflows cleanly to the asymptotic value
    for large N.

    :param alpha: Fill factor in (0, 1).
    :type alpha: float
    :param positions: Number of probe positions N, at least 1.
    :type positions: int
    :return: The expectation; 1 - alpha for a single position.
    :rtype: float
    """
    params = TheoryParams(alpha, positions)
    log_power = params.positions * math.log(params.alpha)
    power = math.exp(log_power)
    geometric_part = -math.expm1(log_power) / (1.0 - params.alpha)
    return geometric_part - params.positions * power


def expected_comparisons_asymptotic(alpha: float) -> float:
    """Limit of the expectation for an unbounded probe sequence: 1 / (1 - alpha)."""
    alpha = validate_fill_factor(alpha)
    return 1.0 / (1.0 - alpha)


def direct_summation(alpha: float, positions: int) -> float:
    """Term-by-term sum of (k + 1) * P(run of k) for k < positions."""
    params = TheoryParams(alpha, positions)
    k = np.arange(params.positions, dtype=np.float64)
    terms = (k + 1.0) * np.power(params.alpha, k) * (1.0 - params.alpha)
    return float(math.fsum(terms))


def simulate_bit_model(alpha: float, trials: int, rng: np.random.Generator) -> float:
    """
    Monte Carlo of the bit abstraction: draw bits that are 1 with
    probability alpha and count draws up to and including the first 0.

    Bits are drawn in blocks of ``_BIT_BLOCK`` per trial; a trial whose
    block is all ones adds the block length and draws another.
    """
    alpha = validate_fill_factor(alpha)
    if trials < 1:
        raise ValueError(f"trials must be positive, got {trials}")
    total = 0
    remaining = trials
    while remaining:
        rows = min(remaining, _TRIAL_BATCH)
        counts = np.zeros(rows, dtype=np.int64)
        pending = np.arange(rows)
        while pending.size:
            empty = rng.random((pending.size, _BIT_BLOCK)) >= alpha
            ended = empty.any(axis=1)
            counts[pending[ended]] += empty[ended].argmax(axis=1) + 1
            counts[pending[~ended]] += _BIT_BLOCK
            pending = pending[~ended]
        total += int(counts.sum())
        remaining -= rows
    return total / trials


def theory_table(alphas: Iterable[float], positions: Optional[int] = None) -> pd.DataFrame:
    """Asymptotic (and, with ``positions``, exact) expectation per fill factor."""
    rows = []
    for alpha in alphas:
        row = {'alpha': validate_fill_factor(alpha),
               'asymptotic': expected_comparisons_asymptotic(alpha)}
        if positions is not None:
            row['positions'] = positions
            row['exact'] = expected_comparisons_exact(alpha, positions)
        rows.append(row)
    if not rows:
        raise ValueError("at least one fill factor is required")
    logger.debug(f"Theory table for {len(rows)} fill factors")
    return pd.DataFrame(rows)
