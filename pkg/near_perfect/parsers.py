"""
Keyset files: one hex-encoded key per line.

Blank lines and lines starting with ``#`` are skipped when reading. Keys
must be distinct.
"""

import logging
import re
from pathlib import Path
from typing import Iterable, List, Union

import numpy as np

from .core_hash import HashKey
from .utils import substream

logger = logging.getLogger(__name__)

_HEX_LINE = re.compile(r"^(?:[0-9a-fA-F]{2})+$")
_MAX_DUPLICATE_DRAWS = 1000


class KeysetFormatError(ValueError):
    """A keyset file line is not an even-length hex string, or repeats a key."""

    def __init__(self, message: str, line_number: int = 0):
        self.line_number = line_number
        super().__init__(f"line {line_number}: {message}" if line_number else message)


def parse_keyset(text: str) -> List[HashKey]:
    """Parse keyset text into key bytes, in file order."""
    keys: List[HashKey] = []
    seen = {}
    for line_number, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.strip()
        if not line or line.startswith("#"):
            continue
        if not _HEX_LINE.match(line):
            raise KeysetFormatError(f"not an even-length hex string: {line[:40]!r}", line_number)
        key = bytes.fromhex(line)
        if key in seen:
            raise KeysetFormatError(f"duplicate of the key on line {seen[key]}", line_number)
        seen[key] = line_number
        keys.append(key)
    if not keys:
        raise KeysetFormatError("keyset contains no keys")
    return keys


def format_keyset(keys: Iterable[HashKey]) -> str:
    return "".join(f"{bytes(key).hex()}\n" for key in keys)


def read_keyset(path: Union[str, Path]) -> List[HashKey]:
    """
    :param path: Keyset file.
    :raises KeysetFormatError: on malformed or duplicate lines.
    :raises OSError: when the file cannot be read.
    """
    keys = parse_keyset(Path(path).read_text(encoding="ascii", errors="replace"))
    logger.info(f"Read {len(keys)} keys from {path}")
    return keys


def write_keyset(keys: Iterable[HashKey], path: Union[str, Path]) -> None:
    Path(path).write_text(format_keyset(keys), encoding="ascii")


def generate_keys(count: int, key_length: int, seed: int) -> List[HashKey]:
    """
    ``count`` distinct uniform random keys of ``key_length`` bytes.

    Deterministic in ``seed``; a duplicate draw is discarded and redrawn.
    """
    if count < 1:
        raise ValueError(f"count must be positive, got {count}")
    if key_length < 1:
        raise ValueError(f"key length must be positive, got {key_length}")
    return draw_keys(count, key_length, substream(seed, key_length))


def draw_keys(count: int, key_length: int, rng: np.random.Generator) -> List[HashKey]:
    if count > 256**key_length:
        raise ValueError(f"cannot draw {count} distinct keys of {key_length} bytes")
    keys: List[HashKey] = []
    seen = set()
    duplicates = 0
    while len(keys) < count:
        key = rng.bytes(key_length)
        if key in seen:
            duplicates += 1
            if duplicates > count * _MAX_DUPLICATE_DRAWS:
                raise ValueError(f"gave up drawing distinct keys after {duplicates} duplicates")
            continue
        seen.add(key)
        keys.append(key)
    logger.debug(f"Generated {count} keys of {key_length} bytes ({duplicates} duplicates redrawn)")
    return keys
