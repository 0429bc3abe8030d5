"""Double-precision LLR successive-cancellation and CRC-aided list decoders."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from polarquant import core
from polarquant._pycore import boxplus as _boxplus_array
from polarquant._pycore import softplus
from polarquant.codec import CodeConfig, CrcConfig, _bitrev_cached


def boxplus(L0, L1):
    """Exact check-node combination of two LLRs (stable form)."""
    out = _boxplus_array(L0, L1)
    return float(out) if out.ndim == 0 else out


def g_update(L0, L1, u0):
    out = np.where(np.asarray(u0) == 1, -np.asarray(L0, dtype=float), L0) + np.asarray(L1, dtype=float)
    return float(out) if out.ndim == 0 else out


def path_metric_update(M, L, u):
    """``M + log(1 + exp(-(1 - 2u) L))``."""
    sgn = 1.0 - 2.0 * np.asarray(u, dtype=float)
    out = np.asarray(M, dtype=float) + softplus(-sgn * np.asarray(L, dtype=float))
    return float(out) if out.ndim == 0 else out


def _prepare(channel_llrs, cfg: CodeConfig) -> np.ndarray:
    llr = np.asarray(channel_llrs, dtype=np.float64)
    if llr.shape != (cfg.N,):
        raise ValueError(f"expected {cfg.N} channel LLRs, got shape {llr.shape}")
    return np.ascontiguousarray(llr[_bitrev_cached(cfg.n)])


def sc_decode(channel_llrs, cfg: CodeConfig) -> np.ndarray:
    """Estimate of the full input vector u (frozen positions are zero)."""
    return core.sc_decode(_prepare(channel_llrs, cfg), np.ascontiguousarray(cfg.frozen_mask))


def scl_candidates(channel_llrs, cfg: CodeConfig, list_size: int):
    """All surviving u estimates with their metrics, best first."""
    return core.scl_decode(_prepare(channel_llrs, cfg), np.ascontiguousarray(cfg.frozen_mask),
                           int(list_size))


def select_payload(candidates: np.ndarray, cfg: CodeConfig, crc: CrcConfig | None) -> np.ndarray:
    """Pick the best CRC-passing path (or the best path) and strip the checksum."""
    info = candidates[:, cfg.info_set]
    if crc is None:
        return info[0].copy()
    ok = crc.check_many(info)
    best = int(np.argmax(ok)) if ok.any() else 0
    return info[best, : cfg.K - crc.length].copy()


def scl_decode(channel_llrs, cfg: CodeConfig, list_size: int, crc: CrcConfig | None = None) -> np.ndarray:
    """Decoded payload; with a CRC the information set carries payload plus checksum."""
    if crc is not None and cfg.K <= crc.length:
        raise ValueError("information set too small for the CRC")
    uh, _ = scl_candidates(channel_llrs, cfg, list_size)
    return select_payload(uh, cfg, crc)


@dataclass
class LlrScDecoder:
    cfg: CodeConfig
    crc: CrcConfig | None = None

    def decode(self, channel_llrs) -> np.ndarray:
        u = sc_decode(channel_llrs, self.cfg)[self.cfg.info_set]
        return u[: self.cfg.K - self.crc.length] if self.crc else u


@dataclass
class LlrSclDecoder:
    cfg: CodeConfig
    list_size: int = 32
    crc: CrcConfig | None = None

    def decode(self, channel_llrs) -> np.ndarray:
        return scl_decode(channel_llrs, self.cfg, self.list_size, self.crc)
