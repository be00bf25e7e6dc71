import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

from near_perfect.fitness import KeySet  # noqa: E402
from near_perfect.parsers import draw_keys  # noqa: E402
from near_perfect.utils import substream  # noqa: E402


@pytest.fixture
def make_keys():
    """Distinct random 16-byte keys, deterministic in ``seed``."""
    def _make(count, seed=0, key_length=16):
        return draw_keys(count, key_length, substream(seed, 99))
    return _make


@pytest.fixture
def small_keyset(make_keys):
    members = make_keys(200, seed=7)
    return KeySet.balanced(members, substream(7, 1))
