"""Polar encoding, code construction and CRC handling.

Conventions: ``x = F^{(x)n} B u`` with ``F = [[1, 1], [0, 1]]`` acting on column
vectors and ``B`` the bit-reversal permutation. Since ``B`` commutes with the
Kronecker power, a decoder that receives channel LLRs in bit-reversed order can
run the natural-order successive-cancellation schedule directly on ``u``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from polarquant._nr5g import NR_RELIABILITY_1024


def _log2_exact(N: int) -> int:
    n = int(N).bit_length() - 1
    if N < 1 or (1 << n) != N:
        raise ValueError(f"block length must be a power of two, got {N}")
    return n


@lru_cache(maxsize=None)
def _bitrev_cached(n: int) -> np.ndarray:
    N = 1 << n
    idx = np.arange(N)
    out = np.zeros(N, dtype=np.int64)
    for b in range(n):
        out |= ((idx >> b) & 1) << (n - 1 - b)
    out.setflags(write=False)
    return out


def bit_reversal_permutation(n: int) -> np.ndarray:
    """Permutation ``pi`` with ``pi[i]`` equal to ``i`` with its n bits reversed."""
    if n < 0:
        raise ValueError("tree depth must be non-negative")
    return _bitrev_cached(int(n)).copy()


@dataclass(frozen=True)
class CodeConfig:
    """Polar code parameters. Frozen bits are always zero."""

    N: int
    K: int
    info_set: np.ndarray = field(repr=False)

    def __post_init__(self):
        n = _log2_exact(self.N)
        info = np.asarray(self.info_set, dtype=np.int64)
        # K = 0 (all frozen) is accepted for decoder corner cases
        if not 0 <= self.K <= self.N:
            raise ValueError(f"need 0 <= K <= N, got K={self.K}, N={self.N}")
        if info.shape != (self.K,):
            raise ValueError("information set size must equal K")
        if self.K and (np.any(np.diff(info) <= 0) or info[0] < 0 or info[-1] >= self.N):
            raise ValueError("information set must be strictly increasing indices below N")
        info.setflags(write=False)
        object.__setattr__(self, "info_set", info)
        frozen = np.ones(self.N, dtype=np.uint8)
        frozen[info] = 0
        frozen.setflags(write=False)
        object.__setattr__(self, "_frozen", frozen)
        object.__setattr__(self, "_n", n)

    @property
    def n(self) -> int:
        return self._n

    @property
    def rate(self) -> float:
        return self.K / self.N

    @property
    def frozen_mask(self) -> np.ndarray:
        """uint8 mask, 1 where ``u_i`` is frozen."""
        return self._frozen

    @classmethod
    def construct(cls, N: int, K: int, method: str = "nr5g", **kwargs) -> "CodeConfig":
        return cls(N, K, construct_information_set(N, K, method, **kwargs))


def construct_information_set(N: int, K: int, method: str = "nr5g", z0: float = 0.5) -> np.ndarray:
    """Return the ``K`` most reliable sub-channel indices, sorted ascending.

    ``nr5g`` filters the 1024-entry 5G NR sequence to indices below ``N``.
    ``bhattacharyya`` runs the erasure-proxy recursion from ``z0``; the most
    significant index bit selects the tree branch at the root.
    """
    n = _log2_exact(N)
    if not 0 <= K <= N:
        raise ValueError(f"need 0 <= K <= N, got K={K}, N={N}")
    if method == "nr5g":
        if N > 1024:
            raise ValueError("the 5G NR sequence covers N <= 1024 only")
        seq = np.asarray(NR_RELIABILITY_1024)
        seq = seq[seq < N]
        chosen = seq[N - K:]
    elif method == "bhattacharyya":
        z = np.array([z0], dtype=float)
        for _ in range(n):
            # children of node j: upper (index bit 0) then lower (index bit 1)
            z = np.stack([2 * z - z * z, z * z], axis=1).reshape(-1)
        order = np.argsort(z, kind="stable")
        chosen = order[:K]
    else:
        raise ValueError(f"unknown construction method {method!r}")
    return np.sort(chosen).astype(np.int64)


def butterfly(v: np.ndarray) -> np.ndarray:
    """Apply ``F^{(x)n}`` over GF(2) along the last axis (self-inverse)."""
    x = np.array(v, dtype=np.uint8, copy=True)
    N = x.shape[-1]
    _log2_exact(N)
    lead = x.shape[:-1]
    h = 1
    while h < N:
        view = x.reshape(*lead, N // (2 * h), 2, h)
        view[..., 0, :] ^= view[..., 1, :]
        h *= 2
    return x


def polar_encode(u: np.ndarray, cfg: CodeConfig | int) -> np.ndarray:
    """Encode ``u`` (last axis of length N) into ``x = F^{(x)n} B u``."""
    N = cfg.N if isinstance(cfg, CodeConfig) else int(cfg)
    u = np.asarray(u, dtype=np.uint8)
    if u.shape[-1] != N:
        raise ValueError(f"expected length {N}, got {u.shape[-1]}")
    n = _log2_exact(N)
    return butterfly(u[..., _bitrev_cached(n)])


def build_message(payload: np.ndarray, cfg: CodeConfig) -> np.ndarray:
    """Scatter the payload into the information positions, zeros elsewhere."""
    payload = np.asarray(payload, dtype=np.uint8)
    if payload.shape[-1] != cfg.K:
        raise ValueError(f"payload length {payload.shape[-1]} != |A| = {cfg.K}")
    u = np.zeros(payload.shape[:-1] + (cfg.N,), dtype=np.uint8)
    u[..., cfg.info_set] = payload
    return u


@dataclass(frozen=True)
class CrcConfig:
    """CRC with generator ``x^length + poly``, MSB-first, no reflection.

    ``poly`` holds the generator coefficients below the implicit leading one.
    """

    poly: int = 0x1021
    length: int = 16
    init: int = 0

    def __post_init__(self):
        if self.length < 1:
            raise ValueError("CRC length must be positive")
        if self.poly >> self.length:
            raise ValueError("polynomial has terms at or above x^length")
        if self.init >> self.length:
            raise ValueError("init does not fit the register")

    def remainder(self, payload: np.ndarray) -> np.ndarray:
        """Shift-register remainder of ``payload * x^length`` (plus preset)."""
        L = self.length
        top = 1 << (L - 1)
        mask = (1 << L) - 1
        reg = self.init
        for bit in np.asarray(payload, dtype=np.uint8).tolist():
            fb = bool(reg & top) ^ bool(bit)
            reg = (reg << 1) & mask
            if fb:
                reg ^= self.poly
        return np.array([(reg >> (L - 1 - k)) & 1 for k in range(L)], dtype=np.uint8)

    def _affine(self, k: int):
        return _crc_affine(self.poly, self.length, self.init, k)

    def check_many(self, blocks: np.ndarray) -> np.ndarray:
        """Vectorized check of rows ``[payload | crc]``; returns a bool per row."""
        blocks = np.atleast_2d(np.asarray(blocks, dtype=np.uint8))
        k = blocks.shape[1] - self.length
        gen, offset = self._affine(k)
        crc = (blocks[:, :k].astype(np.int64) @ gen + offset) & 1
        return np.all(crc == blocks[:, k:], axis=1)


@lru_cache(maxsize=64)
def _crc_affine(poly: int, length: int, init: int, k: int):
    cfg = CrcConfig(poly, length, init)
    offset = cfg.remainder(np.zeros(k, dtype=np.uint8)).astype(np.int64)
    gen = np.zeros((k, length), dtype=np.int64)
    unit = np.zeros(k, dtype=np.uint8)
    for i in range(k):
        unit[i] = 1
        gen[i] = cfg.remainder(unit) ^ offset
        unit[i] = 0
    gen.setflags(write=False)
    offset.setflags(write=False)
    return gen, offset


def crc_attach(payload: np.ndarray, crc: CrcConfig) -> np.ndarray:
    payload = np.asarray(payload, dtype=np.uint8)
    if payload.size == 0:
        raise ValueError("payload must be non-empty")
    return np.concatenate([payload, crc.remainder(payload)])


def crc_check(block: np.ndarray, crc: CrcConfig) -> bool:
    block = np.asarray(block, dtype=np.uint8)
    k = block.size - crc.length
    if k < 1:
        return False
    return bool(np.array_equal(crc.remainder(block[:k]), block[k:]))
