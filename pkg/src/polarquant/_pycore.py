"""Numpy implementation of the SC / SCL kernels (fallback when the extension is absent).

Same calling convention and observable results as the compiled module. The
list decoder vectorizes across paths and copies arrays on pruning instead of
sharing them by reference.
"""

from __future__ import annotations

import numpy as np


def boxplus(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    m = np.minimum(np.abs(a), np.abs(b))
    s = np.where((a < 0) != (b < 0), -m, m)
    with np.errstate(invalid="ignore", over="ignore"):
        corr = np.log1p(np.exp(-np.abs(a + b))) - np.log1p(np.exp(-np.abs(a - b)))
    return np.where(np.isinf(a) | np.isinf(b), s, s + corr)


def softplus(x):
    x = np.asarray(x, dtype=np.float64)
    return np.where(x > 0, x + np.log1p(np.exp(-np.abs(x))), np.log1p(np.exp(-np.abs(x))))


def _depth(N: int, frozen) -> int:
    n = int(N).bit_length() - 1
    if (1 << n) != N or len(frozen) != N:
        raise ValueError("length mismatch or block length not a power of two")
    return n


class _Ops:
    """f / g node updates in float or table mode, vectorized over leading axes."""

    def __init__(self, n, fa_upper, fa_lower, w):
        self.n = n
        self.fa = fa_upper is not None
        if self.fa:
            self.up = np.asarray(fa_upper)
            self.lo = np.asarray(fa_lower)
            self.half = 1 << (w - 1)
            self.S = 1 << w
            if self.up.shape[1:] != (self.S * self.S,) or self.lo.shape[1:] != (2, 2 * self.S * self.S):
                raise ValueError("table shape does not match message width")

    def idx(self, t):
        t = t.astype(np.int64)
        return np.where(t > 0, t + self.half - 1, t + self.half)

    def node(self, lam, i):
        return (1 << (self.n - lam - 1)) - 1 + (i >> (lam + 1))

    def f(self, lam, i, src):
        h = 1 << lam
        a, b = src[..., :h], src[..., h:]
        if not self.fa:
            return boxplus(a, b)
        return self.up[self.node(lam, i)][self.idx(a) * self.S + self.idx(b)].astype(np.float64)

    def g(self, lam, i, src, u):
        h = 1 << lam
        a, b = src[..., :h], src[..., h:]
        if not self.fa:
            return np.where(u == 1, -a, a) + b
        par = np.arange(h) & 1
        key = (u.astype(np.int64) * self.S + self.idx(a)) * self.S + self.idx(b)
        return self.lo[self.node(lam, i)][par, key].astype(np.float64)

    def decide(self, L):
        return np.where(L > 0 if self.fa else L >= 0, 0, 1).astype(np.uint8)


def sc_decode(llr, frozen, fa_upper=None, fa_lower=None, w=0):
    llr = np.ascontiguousarray(llr, dtype=np.float64)
    frozen = np.asarray(frozen, dtype=np.uint8)
    N = llr.size
    n = _depth(N, frozen)
    ops = _Ops(n, fa_upper, fa_lower, w)
    u = np.zeros(N, dtype=np.uint8)

    def rec(L, lam, first):
        # L has length 2^lam and feeds leaves first .. first + 2^lam - 1
        if lam == 0:
            bit = 0 if frozen[first] else int(ops.decide(L[0]))
            u[first] = bit
            return np.array([bit], dtype=np.uint8)
        h = 1 << (lam - 1)
        vu = rec(ops.f(lam - 1, first, L), lam - 1, first)
        vl = rec(ops.g(lam - 1, first + h, L, vu), lam - 1, first + h)
        return np.concatenate([vu ^ vl, vl])

    if N == 1 and not frozen[0]:
        u[0] = ops.decide(llr[0])
    elif N > 1:
        rec(llr, n, 0)
    return u


def _ctz(i: int) -> int:
    return (i & -i).bit_length() - 1


def scl_decode(llr, frozen, list_size, fa_upper=None, fa_lower=None, w=0, metric_table=None):
    llr = np.ascontiguousarray(llr, dtype=np.float64)
    frozen = np.asarray(frozen, dtype=np.uint8)
    N = llr.size
    n = _depth(N, frozen)
    if list_size < 1:
        raise ValueError("list size must be positive")
    ops = _Ops(n, fa_upper, fa_lower, w)
    if ops.fa:
        if metric_table is None:
            raise ValueError("finite-alphabet list decoding needs a metric table")
        inc = np.asarray(metric_table, dtype=np.float64)
        if inc.shape != (N, ops.S, 2):
            raise ValueError("metric table shape mismatch")

    P = [np.zeros((1, 1 << lam)) for lam in range(n)] + [llr[None, :]]
    B = [np.zeros((1, 1 << lam), dtype=np.uint8) for lam in range(n)]
    metric = np.zeros(1)
    ubits = np.zeros((N, list_size), dtype=np.uint8)
    parent = np.zeros((N, list_size), dtype=np.int64)
    count = 1

    for i in range(N):
        if i == 0:
            start = n - 1
        else:
            k = _ctz(i)
            P[k] = ops.g(k, i, P[k + 1] if k + 1 < n else np.broadcast_to(llr, (count, N)), B[k])
            start = k - 1
        for lam in range(start, -1, -1):
            src = P[lam + 1] if lam + 1 < n else np.broadcast_to(llr, (count, N))
            P[lam] = ops.f(lam, i, src)
        leaf = P[0][:, 0] if n else np.full(count, llr[0])

        if ops.fa:
            row = inc[i][ops.idx(leaf)]
            inc0, inc1 = row[:, 0], row[:, 1]
        else:
            inc0, inc1 = softplus(-leaf), softplus(leaf)

        if frozen[i]:
            metric = metric + inc0
            bits = np.zeros(count, dtype=np.uint8)
            par = np.arange(count)
        else:
            cm = np.stack([metric + inc0, metric + inc1], axis=1).reshape(-1)
            cidx = np.arange(2 * count)
            nsel = min(2 * count, list_size)
            keep = np.sort(np.lexsort((cidx, cm))[:nsel])
            metric = cm[keep]
            bits = (keep & 1).astype(np.uint8)
            par = keep >> 1
            P = [p[par] for p in P[:n]] + [P[n]]
            B = [b[par] for b in B]
            count = nsel
        ubits[i, :count] = bits
        parent[i, :count] = par

        v = bits[:, None]
        lam = 0
        while lam < n and (i >> lam) & 1:
            v = np.concatenate([B[lam] ^ v, v], axis=1)
            lam += 1
        if lam < n:
            B[lam] = v.astype(np.uint8)

    order = np.argsort(metric, kind="stable")
    uh = np.zeros((count, N), dtype=np.uint8)
    pos = order.copy()
    for i in range(N - 1, -1, -1):
        uh[:, i] = ubits[i, pos]
        pos = parent[i, pos]
    return uh, metric[order]
