"""Run-length mask helpers matching the spinseg interchange convention.

The interchange format stores masks column-major with counts alternating
zero-runs/one-runs starting with zeros. Grounding services may return either
row-major or column-major runs; everything is normalized here.
"""

from __future__ import annotations

import numpy as np


def decode(counts, width: int, height: int, order: str = "column-major") -> np.ndarray:
    counts = np.asarray(counts, dtype=np.int64)
    total = int(counts.sum())
    if total != width * height:
        raise ValueError(f"RLE total {total} != {width}x{height}")
    values = np.zeros(len(counts), dtype=bool)
    values[1::2] = True
    flat = np.repeat(values, counts)
    if order == "column-major":
        return flat.reshape((height, width), order="F")
    if order == "row-major":
        return flat.reshape((height, width), order="C")
    raise ValueError(f"unknown RLE order {order!r}")


def encode_column_major(bitmap: np.ndarray) -> list[int]:
    flat = np.asarray(bitmap, dtype=bool).ravel(order="F")
    change = np.flatnonzero(flat[1:] != flat[:-1]) + 1
    bounds = np.concatenate(([0], change, [flat.size]))
    counts = np.diff(bounds)
    if flat[0]:
        counts = np.concatenate(([0], counts))
    return [int(c) for c in counts]


def to_column_major(counts, width: int, height: int, order: str) -> list[int]:
    """Re-encode any supported RLE into the interchange convention."""
    if order == "column-major":
        return [int(c) for c in np.asarray(counts, dtype=np.int64)]
    return encode_column_major(decode(counts, width, height, order))
