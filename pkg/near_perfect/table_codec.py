"""
NPH1 binary format for NearPerfectTable.

Little-endian layout::

    magic "NPH1" | version u16 | k u32 | N u64 | alpha f64 | element_count u64
    then N records: tag u8 (0 empty, 1 occupied) [key length u32, key bytes]
"""

import logging
import struct
from pathlib import Path
from typing import List, Optional, Union

from .core_hash import NearPerfectTable, ProbeParams

logger = logging.getLogger(__name__)

MAGIC = b"NPH1"
VERSION = 1

_HEADER = struct.Struct("<4sHIQdQ")
_KEY_LENGTH = struct.Struct("<I")
_EMPTY, _OCCUPIED = 0, 1


class CorruptTableError(ValueError):
    """The bytes are not a valid NPH1 table."""


def dumps(table: NearPerfectTable) -> bytes:
    """Serialize a table; the output is a pure function of the table."""
    params = table.params
    parts = [_HEADER.pack(MAGIC, VERSION, params.k, params.table_size,
                          params.fill_factor, table.element_count)]
    for slot in table.slots:
        if slot is None:
            parts.append(bytes((_EMPTY,)))
        else:
            parts.append(bytes((_OCCUPIED,)))
            parts.append(_KEY_LENGTH.pack(len(slot)))
            parts.append(slot)
    return b"".join(parts)


def loads(data: bytes) -> NearPerfectTable:
    """
    Parse an NPH1 table.

    :raises CorruptTableError: on a bad magic, unknown version, truncated
        record, trailing bytes or inconsistent header.
    """
    data = bytes(data)
    if len(data) < _HEADER.size:
        raise CorruptTableError(f"file too short for an NPH1 header ({len(data)} bytes)")
    magic, version, k, table_size, alpha, element_count = _HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise CorruptTableError(f"bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise CorruptTableError(f"unsupported NPH1 version {version}")

    offset = _HEADER.size
    slots: List[Optional[bytes]] = []
    for index in range(table_size):
        if offset >= len(data):
            raise CorruptTableError(f"truncated at slot {index} of {table_size}")
        tag = data[offset]
        offset += 1
        if tag == _EMPTY:
            slots.append(None)
        elif tag == _OCCUPIED:
            if offset + _KEY_LENGTH.size > len(data):
                raise CorruptTableError(f"truncated key length at slot {index}")
            (length,) = _KEY_LENGTH.unpack_from(data, offset)
            offset += _KEY_LENGTH.size
            if offset + length > len(data):
                raise CorruptTableError(f"truncated key bytes at slot {index}")
            slots.append(data[offset:offset + length])
            offset += length
        else:
            raise CorruptTableError(f"unknown slot tag {tag} at slot {index}")
    if offset != len(data):
        raise CorruptTableError(f"{len(data) - offset} trailing bytes after the last slot")

    try:
        params = ProbeParams(k=k, table_size=table_size, fill_factor=alpha)
        return NearPerfectTable(params=params, slots=tuple(slots), element_count=element_count)
    except ValueError as e:
        raise CorruptTableError(f"inconsistent table header: {e}") from e


def save_table(table: NearPerfectTable, path: Union[str, Path]) -> None:
    """Write a table to ``path``."""
    payload = dumps(table)
    Path(path).write_bytes(payload)
    logger.info(f"Wrote table (N={table.table_size}, n={table.element_count}) to {path}")


def load_table(path: Union[str, Path]) -> NearPerfectTable:
    """Read a table from ``path``; I/O errors propagate as OSError."""
    return loads(Path(path).read_bytes())
