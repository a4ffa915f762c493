"""Units-in-the-last-place distance for 32-bit floats.

Adjacent representable float32 values differ by exactly 1 ULP; equality
tolerances for the 32-bit paths are stated in ULPs rather than relative
error so they stay meaningful across the whole exponent range.
"""

from __future__ import annotations

import numpy as np


def ulp_diff_f32(a, b):
    """ULP distance between two float32 values (elementwise for arrays).

    Maps the float32 bit patterns onto a monotone integer line (two's
    complement style fold of the sign bit) and returns the absolute
    difference. Values of opposite sign are separated by their combined
    distance from zero; -0.0 and +0.0 are 0 apart. Inputs must be finite.
    """
    a32 = np.asarray(a, dtype=np.float32)
    b32 = np.asarray(b, dtype=np.float32)
    if not (np.all(np.isfinite(a32)) and np.all(np.isfinite(b32))):
        raise ValueError("ulp_diff_f32 requires finite inputs")
    ai = a32.view(np.int32).astype(np.int64)
    bi = b32.view(np.int32).astype(np.int64)
    ai = np.where(ai < 0, np.int64(-0x80000000) - ai, ai)
    bi = np.where(bi < 0, np.int64(-0x80000000) - bi, bi)
    d = np.abs(ai - bi)
    return int(d) if d.ndim == 0 else d


def max_ulp_diff_f32(a, b) -> int:
    """Largest elementwise ULP distance between two float32 arrays."""
    d = ulp_diff_f32(a, b)
    return int(np.max(d)) if np.ndim(d) else int(d)
