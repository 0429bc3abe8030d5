"""Bit-accurate finite-alphabet SC / SCL runtime.

Messages are signed integers in ``{-2^(w-1), .., -1, +1, .., 2^(w-1)}``. Each
node update is realized either from its designed lookup table or through the
translate / add / requantize datapath. For decoding, every node's update is
materialized once into a table by running the bit-level datapath over all
inputs, so the compiled kernels only perform lookups.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from polarquant import core, datapath
from polarquant._pycore import softplus
from polarquant.channel import NoiseConfig, ebn0_to_sigma
from polarquant.codec import CodeConfig, CrcConfig, _bitrev_cached
from polarquant.datapath import ACCURATE, SIMPLIFIED, sm_pattern, sm_split
from polarquant.fa_design import DecoderSpec, LowerParams, minsum_table
from polarquant.infoquant import message_alphabet
from polarquant.llr_decoder import select_payload

__all__ = [
    "ACCURATE", "SIMPLIFIED", "minsum_upper", "sm_to_twos_accurate", "twos_to_sm_accurate",
    "sm_to_twos_simplified", "twos_to_sm_simplified", "uniform_quantize", "uniform_quantize_bits",
    "nonuniform_quantize", "nonuniform_quantize_bsearch", "cd_lower_update", "lut_lower_update",
    "lut_upper_update", "pack_lower_index", "unpack_lower_index", "materialize_lower_lut",
    "RuntimeTables", "build_tables", "channel_rescale", "quantize_channel", "fa_sc_decode",
    "fa_scl_candidates", "fa_scl_decode", "FaScDecoder", "FaSclDecoder",
]


def minsum_upper(ta, tb):
    ta = np.asarray(ta)
    tb = np.asarray(tb)
    out = np.sign(ta) * np.sign(tb) * np.minimum(np.abs(ta), np.abs(tb))
    return int(out) if out.ndim == 0 else out


# conversions on bit patterns ------------------------------------------------


def _scalar(x):
    x = np.asarray(x)
    return int(x) if x.ndim == 0 else x


def sm_to_twos_accurate(a, width: int):
    s, m = sm_split(a, width)
    return _scalar(datapath.sm_to_twos(s, m, width, ACCURATE))


def sm_to_twos_simplified(a, width: int):
    s, m = sm_split(a, width)
    return _scalar(datapath.sm_to_twos(s, m, width, SIMPLIFIED))


def twos_to_sm_accurate(b, width: int, return_flag: bool = False):
    """Two's complement to sign-magnitude; the most negative input saturates."""
    s, m, sat = datapath.twos_to_sm(b, width, ACCURATE)
    out = _scalar(sm_pattern(s, m, width))
    return (out, _scalar(sat)) if return_flag else out


def twos_to_sm_simplified(b, width: int):
    s, m, _ = datapath.twos_to_sm(b, width, SIMPLIFIED)
    return _scalar(sm_pattern(s, m, width))


# quantizers ----------------------------------------------------------------


def uniform_quantize(y, r: int, w: int):
    """``sgn(y) min(floor(|y| / 2^r) + 1, 2^(w-1))`` with y = 0 mapped to +1."""
    if r < 0:
        raise ValueError("shift must be non-negative")
    y = np.asarray(y, dtype=np.int64)
    c = np.minimum((np.abs(y) >> r) + 1, 1 << (w - 1))
    return _scalar(np.where(y < 0, -c, c))


def uniform_quantize_bits(y_pattern, width: int, r: int, w: int):
    """Same quantizer on a ``width``-bit two's-complement pattern, using OR-clip and shift."""
    s, m, _ = datapath.twos_to_sm(y_pattern, width, ACCURATE)
    c = datapath.uniform_magnitude_bits(m, r, w)
    return _scalar(np.where(s == 1, -c, c))


def nonuniform_quantize(y, thresholds, w: int):
    thresholds = np.asarray(thresholds)
    if thresholds.size != (1 << (w - 1)) - 1:
        raise ValueError("need 2^(w-1) - 1 thresholds")
    y = np.asarray(y, dtype=np.int64)
    c = datapath.nonuniform_magnitude(np.abs(y), thresholds)
    return _scalar(np.where(y < 0, -c, c))


def nonuniform_quantize_bsearch(y: int, thresholds, w: int) -> int:
    """Scalar (w-1)-step binary search over the thresholds."""
    thr = [int(t) for t in thresholds]
    m = abs(int(y))
    lo, hi = 0, len(thr)  # answer: number of thresholds below m
    for _ in range(w - 1):
        mid = (lo + hi) // 2
        if mid < len(thr) and thr[mid] < m:
            lo = mid + 1
        else:
            hi = mid
    c = lo + 1
    return -c if y < 0 else c


# node updates --------------------------------------------------------------


def _quantizer_of(params: LowerParams):
    if params.kind == "cd_nonuniform":
        return ("nonuniform", params.thresholds)
    if params.kind == "cd_uniform":
        return ("uniform", params.shift)
    raise ValueError(f"not a computational-domain node: {params.kind!r}")


def cd_lower_update(ta, tb, u0, params: LowerParams, w_internal: int, conversion: str = ACCURATE,
                    parity=0):
    """Lower update through translate, two's-complement add and requantization."""
    out = datapath.lower_update(ta, tb, u0, params.phi_a, params.phi_b, w_internal,
                                _quantizer_of(params), conversion, parity)
    return _scalar(out)


def _idx(t, w):
    t = np.asarray(t, dtype=np.int64)
    half = 1 << (w - 1)
    return np.where(t > 0, t + half - 1, t + half)


def pack_lower_index(ta, tb, u0, w: int):
    S = 1 << w
    return _scalar((np.asarray(u0, dtype=np.int64) * S + _idx(ta, w)) * S + _idx(tb, w))


def unpack_lower_index(k, w: int):
    alphabet = message_alphabet(w)
    S = 1 << w
    k = np.asarray(k, dtype=np.int64)
    return _scalar(alphabet[(k // S) % S]), _scalar(alphabet[k % S]), _scalar(k // (S * S))


def lut_lower_update(ta, tb, u0, lut, w: int):
    return _scalar(np.asarray(lut)[pack_lower_index(ta, tb, u0, w)])


def lut_upper_update(ta, tb, lut, w: int):
    return _scalar(np.asarray(lut)[_idx(ta, w) * (1 << w) + _idx(tb, w)])


def _all_lower_inputs(w: int):
    k = np.arange(2 << (2 * w))
    return unpack_lower_index(k, w)


def materialize_lower_lut(params: LowerParams, w: int, w_internal: int) -> np.ndarray:
    """Table of a computational-domain node from integer arithmetic alone.

    ``(-1)^u0 phi_a(ta) + phi_b(tb)`` is evaluated exactly and quantized; this is
    an independent reference for the bit-level datapath with accurate conversions.
    """
    ta, tb, u0 = _all_lower_inputs(w)
    ya = np.sign(ta) * np.asarray(params.phi_a)[np.abs(ta) - 1]
    yb = np.sign(tb) * np.asarray(params.phi_b)[np.abs(tb) - 1]
    y = np.where(u0 == 1, -ya, ya) + yb
    if params.kind == "cd_nonuniform":
        return np.asarray(nonuniform_quantize(y, params.thresholds, w))
    return np.asarray(uniform_quantize(y, params.shift, w))


_TIE_LLR = 1e-9

# decoder tables --------------------------------------------------------------


@dataclass(frozen=True)
class RuntimeTables:
    """Per-node lookup tables in the layout the kernels expect."""

    w: int
    upper: np.ndarray     # (N-1, 2^(2w)) int16
    lower: np.ndarray     # (N-1, 2, 2^(2w+1)) int16, axis 1 = element parity
    metric: np.ndarray    # (N, 2^w, 2) float64
    leaf_llr: np.ndarray  # (N, 2^w) decision LLR per leaf and message index


def _lower_table(p: LowerParams, w: int, w_internal: int, conversion: str, alt_sign_invert: bool):
    ta, tb, u0 = _all_lower_inputs(w)
    if p.kind == "lut":
        even = np.asarray(p.table)
        odd = -even[pack_lower_index(-ta, -tb, u0, w)] if alt_sign_invert else even
    else:
        even = datapath.lower_update(ta, tb, u0, p.phi_a, p.phi_b, w_internal, _quantizer_of(p), conversion, 0)
        odd = (datapath.lower_update(ta, tb, u0, p.phi_a, p.phi_b, w_internal, _quantizer_of(p), conversion, 1)
               if alt_sign_invert else even)
    return np.stack([even, odd])


def build_tables(spec: DecoderSpec, conversion: str = ACCURATE, alt_sign_invert: bool = False) -> RuntimeTables:
    datapath._check_conversion(conversion)
    w, N = spec.w, spec.N
    S = 1 << w
    ms = minsum_table(w)
    upper = np.empty((N - 1, S * S), dtype=np.int16)
    lower = np.empty((N - 1, 2, 2 * S * S), dtype=np.int16)
    leaf_llr = np.empty((N, S))
    alphabet = message_alphabet(w)
    for k, p in enumerate(spec.nodes):
        upper[k] = ms if p.upper.kind == "minsum" else p.upper.table
        lower[k] = _lower_table(p.lower, w, spec.w_internal, conversion, alt_sign_invert)
        if p.decision_llr:
            for child, mags in enumerate(p.decision_llr):
                lv = np.asarray(mags)[np.abs(alphabet) - 1]
                # a zero level keeps its message sign so metric ties follow the hard decision
                leaf_llr[2 * p.index + child] = np.sign(alphabet) * np.maximum(lv, _TIE_LLR)
    metric = np.stack([softplus(-leaf_llr), softplus(leaf_llr)], axis=-1)
    return RuntimeTables(w, upper, lower, np.ascontiguousarray(metric), leaf_llr)


def _check(spec: DecoderSpec, cfg: CodeConfig):
    if spec.N != cfg.N:
        raise ValueError(f"spec is for N={spec.N}, code has N={cfg.N}")


def channel_rescale(spec: DecoderSpec, noise: NoiseConfig) -> float:
    """Factor mapping runtime LLRs onto the design noise level.

    The channel quantizer thresholds live on the LLR scale of the design
    point. Multiplying ``2y/sigma^2`` by ``sigma^2 / sigma_d^2`` makes the
    quantizer act on the received sample ``y`` with fixed thresholds, as a
    receiver front end would.
    """
    sigma_d = ebn0_to_sigma(spec.design_ebn0_db, spec.design_rate)
    return float(noise.sigma**2 / sigma_d**2)


def quantize_channel(channel_llrs, spec: DecoderSpec) -> np.ndarray:
    return spec.channel_quantizer(channel_llrs)


def _messages(channel_llrs, spec, cfg):
    llr = np.asarray(channel_llrs, dtype=np.float64)
    if llr.shape != (cfg.N,):
        raise ValueError(f"expected {cfg.N} channel LLRs, got shape {llr.shape}")
    t = quantize_channel(llr, spec)
    return np.ascontiguousarray(t[_bitrev_cached(cfg.n)].astype(np.float64))


def fa_sc_decode(channel_llrs, spec: DecoderSpec, cfg: CodeConfig, conversion: str = ACCURATE,
                 alt_sign_invert: bool = False, tables: RuntimeTables | None = None) -> np.ndarray:
    """Full u estimate from finite-alphabet successive cancellation."""
    _check(spec, cfg)
    tables = tables or build_tables(spec, conversion, alt_sign_invert)
    return core.sc_decode(_messages(channel_llrs, spec, cfg), np.ascontiguousarray(cfg.frozen_mask),
                          tables.upper, tables.lower, tables.w)


def fa_scl_candidates(channel_llrs, spec: DecoderSpec, cfg: CodeConfig, list_size: int,
                      tables: RuntimeTables | None = None, conversion: str = ACCURATE,
                      alt_sign_invert: bool = False):
    _check(spec, cfg)
    tables = tables or build_tables(spec, conversion, alt_sign_invert)
    return core.scl_decode(_messages(channel_llrs, spec, cfg), np.ascontiguousarray(cfg.frozen_mask),
                           int(list_size), tables.upper, tables.lower, tables.w, tables.metric)


def fa_scl_decode(channel_llrs, spec: DecoderSpec, cfg: CodeConfig, list_size: int,
                  crc: CrcConfig | None = None, conversion: str = ACCURATE, alt_sign_invert: bool = False,
                  tables: RuntimeTables | None = None) -> np.ndarray:
    """Decoded payload (checksum stripped when a CRC is given)."""
    uh, _ = fa_scl_candidates(channel_llrs, spec, cfg, list_size, tables, conversion, alt_sign_invert)
    return select_payload(uh, cfg, crc)


class FaScDecoder:
    def __init__(self, spec: DecoderSpec, cfg: CodeConfig, conversion: str = ACCURATE,
                 alt_sign_invert: bool = False, crc: CrcConfig | None = None):
        _check(spec, cfg)
        self.spec, self.cfg, self.crc = spec, cfg, crc
        self.tables = build_tables(spec, conversion, alt_sign_invert)

    def decode(self, channel_llrs, noise: NoiseConfig | None = None) -> np.ndarray:
        """Payload estimate; with ``noise`` the LLRs are first mapped to the design scale."""
        if noise is not None:
            channel_llrs = np.asarray(channel_llrs) * channel_rescale(self.spec, noise)
        u = fa_sc_decode(channel_llrs, self.spec, self.cfg, tables=self.tables)[self.cfg.info_set]
        return u[: self.cfg.K - self.crc.length] if self.crc else u


class FaSclDecoder:
    def __init__(self, spec: DecoderSpec, cfg: CodeConfig, list_size: int = 32, crc: CrcConfig | None = None,
                 conversion: str = ACCURATE, alt_sign_invert: bool = False):
        _check(spec, cfg)
        self.spec, self.cfg, self.list_size, self.crc = spec, cfg, list_size, crc
        self.tables = build_tables(spec, conversion, alt_sign_invert)

    def decode(self, channel_llrs, noise: NoiseConfig | None = None) -> np.ndarray:
        if noise is not None:
            channel_llrs = np.asarray(channel_llrs) * channel_rescale(self.spec, noise)
        return fa_scl_decode(channel_llrs, self.spec, self.cfg, self.list_size, self.crc, tables=self.tables)
