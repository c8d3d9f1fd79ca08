"""Bit-exact binary codec for motion-vector streams.

Wire layout, all little-endian, no padding:

* magic ``"MVS1"`` (4 ASCII bytes),
* per frame: ``u32 frame_index``, ``f64 timestamp_seconds``, ``u16 grid_w``,
  ``u16 grid_h``, ``u16 macroblock_size``, ``u16 reserved`` (written 0),
  followed by ``grid_w * grid_h`` records of ``{i8 du, i8 dv, u16 sad}``.

Frames are concatenated without padding, so each record is exactly 4 bytes
and a frame payload is ``4 * grid_w * grid_h`` bytes.
"""

from __future__ import annotations

import struct
from typing import Sequence

import numpy as np

from .types import FlowField

__all__ = ["MAGIC", "StreamFormatError", "encode_mv_stream", "decode_mv_stream"]

MAGIC = b"MVS1"

_FRAME_HEADER = struct.Struct("<IdHHHH")
_RECORD_DTYPE = np.dtype([("du", "<i1"), ("dv", "<i1"), ("sad", "<u2")])
assert _RECORD_DTYPE.itemsize == 4


class StreamFormatError(ValueError):
    """Raised when stream content violates the documented layout."""


def encode_mv_stream(fields: Sequence[FlowField]) -> bytes:
    """Serialize flow fields to the binary stream format.

    All fields must share grid dimensions and macroblock size and carry
    strictly increasing timestamps.  Displacements must be integral and
    within the signed 8-bit range; SAD must fit 16 unsigned bits.
    """
    chunks = [MAGIC]
    prev_ts = None
    shape = None
    for field in fields:
        if shape is None:
            shape = (field.grid_w, field.grid_h, field.macroblock_size)
        elif shape != (field.grid_w, field.grid_h, field.macroblock_size):
            raise StreamFormatError(
                f"mixed grid dimensions: {shape} vs "
                f"{(field.grid_w, field.grid_h, field.macroblock_size)}"
            )
        if prev_ts is not None and field.timestamp <= prev_ts:
            raise StreamFormatError(
                f"timestamps must strictly increase ({field.timestamp} after {prev_ts})"
            )
        prev_ts = field.timestamp

        du, dv, sad = field.du, field.dv, field.sad
        if not (np.all(du == np.rint(du)) and np.all(dv == np.rint(dv))):
            raise ValueError("displacements must be integral for encoding")
        if du.size and (du.min() < -128 or du.max() > 127 or dv.min() < -128 or dv.max() > 127):
            raise ValueError("displacement outside signed 8-bit range")

        chunks.append(
            _FRAME_HEADER.pack(
                field.frame_index,
                field.timestamp,
                field.grid_w,
                field.grid_h,
                field.macroblock_size,
                0,
            )
        )
        records = np.empty(du.shape, dtype=_RECORD_DTYPE)
        records["du"] = du.astype(np.int8)
        records["dv"] = dv.astype(np.int8)
        records["sad"] = sad
        chunks.append(records.tobytes())
    return b"".join(chunks)


def decode_mv_stream(data: bytes) -> tuple[list[FlowField], bool]:
    """Parse a binary stream back into flow fields.

    Returns ``(fields, truncated)``: ``truncated`` is True when the stream
    ends mid-frame, in which case all complete frames read up to that point
    are still returned.  A bad magic or a corrupt frame header raises
    :class:`StreamFormatError` with the offending byte offset.
    """
    if data[:4] != MAGIC:
        raise StreamFormatError(f"bad magic {data[:4]!r} at offset 0")
    fields: list[FlowField] = []
    offset = 4
    total = len(data)
    while offset < total:
        if total - offset < _FRAME_HEADER.size:
            return fields, True
        frame_index, timestamp, grid_w, grid_h, mb_size, _reserved = _FRAME_HEADER.unpack_from(
            data, offset
        )
        if grid_w == 0 or grid_h == 0 or mb_size == 0:
            raise StreamFormatError(f"corrupt frame header at offset {offset}")
        payload = 4 * grid_w * grid_h
        if total - offset - _FRAME_HEADER.size < payload:
            return fields, True
        offset += _FRAME_HEADER.size
        records = np.frombuffer(data, dtype=_RECORD_DTYPE, count=grid_w * grid_h, offset=offset)
        offset += payload
        fields.append(
            FlowField.from_components(
                frame_index,
                timestamp,
                grid_w,
                grid_h,
                records["du"].astype(np.float64),
                records["dv"].astype(np.float64),
                records["sad"].copy(),
                mb_size,
            )
        )
    return fields, False
