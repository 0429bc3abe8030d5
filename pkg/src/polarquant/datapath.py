"""Vectorized bit-level model of the lower-branch integer datapath.

Bit patterns are plain non-negative integers holding ``width`` bits. A
sign-magnitude pattern keeps the sign in the MSB; a two's-complement pattern
is the value modulo ``2^width``.
"""

from __future__ import annotations

import numpy as np

ACCURATE = "accurate"
SIMPLIFIED = "simplified"
CONVERSIONS = (ACCURATE, SIMPLIFIED)


def _check_conversion(conversion: str):
    if conversion not in CONVERSIONS:
        raise ValueError(f"conversion must be one of {CONVERSIONS}, got {conversion!r}")


def sm_pattern(sign, mag, width: int):
    sign = np.asarray(sign, dtype=np.int64)
    return (sign << (width - 1)) | np.asarray(mag, dtype=np.int64)


def sm_split(pattern, width: int):
    p = np.asarray(pattern, dtype=np.int64)
    return (p >> (width - 1)) & 1, p & ((1 << (width - 1)) - 1)


def sm_value(pattern, width: int):
    s, m = sm_split(pattern, width)
    return np.where(s == 1, -m, m)


def twos_value(pattern, width: int):
    p = np.asarray(pattern, dtype=np.int64) & ((1 << width) - 1)
    return np.where(p >> (width - 1), p - (1 << width), p)


def twos_pattern(value, width: int):
    return np.asarray(value, dtype=np.int64) & ((1 << width) - 1)


def sm_to_twos(sign, mag, width: int, conversion: str = ACCURATE):
    """Sign-magnitude (sign, magnitude) to a ``width``-bit two's-complement pattern.

    The magnitude bits are XORed with the broadcast sign; the accurate variant
    then adds the sign bit with carry, the simplified one does not.
    """
    _check_conversion(conversion)
    sign = np.asarray(sign, dtype=np.int64)
    mmask = (1 << (width - 1)) - 1
    word = (sign << (width - 1)) | (np.asarray(mag, dtype=np.int64) ^ (sign * mmask))
    if conversion == ACCURATE:
        word = word + sign
    return word & ((1 << width) - 1)


def twos_to_sm(word, width: int, conversion: str = ACCURATE):
    """``width``-bit two's-complement pattern to (sign, magnitude, saturated).

    Only the accurate variant can saturate: the most negative input has no
    sign-magnitude counterpart and is mapped to the largest negative magnitude.
    """
    _check_conversion(conversion)
    word = np.asarray(word, dtype=np.int64) & ((1 << width) - 1)
    mmask = (1 << (width - 1)) - 1
    sign = (word >> (width - 1)) & 1
    low = word & mmask
    if conversion == ACCURATE:
        mag = np.where(sign == 1, ((low + mmask) & mmask) ^ mmask, low)
        saturated = (sign == 1) & (low == 0)
        mag = np.where(saturated, mmask, mag)
    else:
        mag = low ^ (sign * mmask)
        saturated = np.zeros(np.shape(word), dtype=bool)
    return sign, mag, saturated


def sign_extend(word, width: int, new_width: int):
    word = np.asarray(word, dtype=np.int64)
    sign = (word >> (width - 1)) & 1
    fill = ((1 << new_width) - 1) ^ ((1 << width) - 1)
    return word | (sign * fill)


def nonuniform_magnitude(mag, thresholds):
    """1 + number of thresholds strictly below ``mag``."""
    return 1 + np.searchsorted(np.asarray(thresholds), np.asarray(mag), side="left")


def uniform_magnitude(mag, r: int, w: int):
    return np.minimum((np.asarray(mag, dtype=np.int64) >> r) + 1, 1 << (w - 1))


def uniform_magnitude_bits(mag, r: int, w: int):
    """Clip-and-shift realized with an OR over the bits above the output field."""
    mag = np.asarray(mag, dtype=np.int64)
    field = (1 << (w - 1)) - 1
    shifted = mag >> r
    overflow = (shifted >> (w - 1)) != 0
    return np.where(overflow, field, shifted & field) + 1


def lower_update(ta, tb, u0, phi_a, phi_b, w_internal: int, quantizer, conversion: str = ACCURATE,
                 parity=0):
    """Translate, add and requantize, all in bit patterns.

    ``quantizer`` is ``("nonuniform", thresholds)`` or ``("uniform", r)`` with the
    output width implied by the translation table length. With ``parity`` odd the
    inputs and output are negated (alternating sign inversion).
    """
    phi_a = np.asarray(phi_a, dtype=np.int64)
    phi_b = np.asarray(phi_b, dtype=np.int64)
    w = int(phi_a.size).bit_length()
    flip = (np.asarray(parity, dtype=np.int64) & 1)
    ta = np.asarray(ta, dtype=np.int64) * (1 - 2 * flip)
    tb = np.asarray(tb, dtype=np.int64) * (1 - 2 * flip)
    sa = (ta < 0).astype(np.int64) ^ np.asarray(u0, dtype=np.int64)
    sb = (tb < 0).astype(np.int64)
    wa = sm_to_twos(sa, phi_a[np.abs(ta) - 1], w_internal, conversion)
    wb = sm_to_twos(sb, phi_b[np.abs(tb) - 1], w_internal, conversion)
    W = w_internal + 1
    total = (sign_extend(wa, w_internal, W) + sign_extend(wb, w_internal, W)) & ((1 << W) - 1)
    s, m, _ = twos_to_sm(total, W, conversion)
    kind, param = quantizer
    if kind == "nonuniform":
        c = nonuniform_magnitude(m, param)
    elif kind == "uniform":
        c = uniform_magnitude_bits(m, int(param), w)
    else:
        raise ValueError(f"unknown quantizer kind {kind!r}")
    t = np.where(s == 1, -c, c)
    return t * (1 - 2 * flip)
