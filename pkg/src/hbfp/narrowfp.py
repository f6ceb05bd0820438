"""Emulation of narrow sign/magnitude floating-point formats.

Used to study how mantissa and exponent width alone affect training. No
subnormals: magnitudes that round below the smallest normal flush to zero,
and magnitudes above the largest finite value saturate.
"""
from __future__ import annotations

import numpy as np


def format_limits(mantissa_bits: int, exponent_bits: int) -> tuple[int, int, float, float]:
    """``(emin, emax, smallest normal, largest finite)`` for the format.

    The exponent range is symmetric, ``emin = -emax`` with
    ``emax = 2**(exponent_bits - 1) - 1``; ``mantissa_bits`` counts the
    implicit leading one.
    """
    if not 1 <= mantissa_bits <= 24:
        raise ValueError(f"mantissa_bits must be in [1, 24], got {mantissa_bits}")
    if not 2 <= exponent_bits <= 8:
        raise ValueError(f"exponent_bits must be in [2, 8], got {exponent_bits}")
    emax = 2 ** (exponent_bits - 1) - 1
    emin = -emax
    largest = float(np.ldexp(2.0 - 2.0 ** (1 - mantissa_bits), emax))
    return emin, emax, float(np.ldexp(1.0, emin)), largest


def quantize_narrow_float(x, mantissa_bits: int, exponent_bits: int):
    """Round to the nearest value of the narrow format (ties to even)."""
    _, _, smallest, largest = format_limits(mantissa_bits, exponent_bits)
    arr = np.asarray(x, dtype=np.float64)
    _, e = np.frexp(arr)
    # x = f * 2**e with f in [0.5, 1): keep mantissa_bits significant bits
    shift = (mantissa_bits - e).astype(np.int32)
    q = np.ldexp(np.rint(np.ldexp(arr, shift)), -shift)
    mag = np.abs(q)
    q = np.where(mag < smallest, 0.0, q)
    q = np.where(mag > largest, np.copysign(largest, arr), q)
    if np.ndim(x) == 0:
        return float(q)
    return q
