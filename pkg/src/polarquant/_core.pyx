# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled SC / SCL kernels shared by the float and finite-alphabet decoders.

Inputs are already in bit-reversed order so the natural-order schedule
applies. In finite-alphabet mode messages are integers stored as doubles and
every node update is a table lookup; ``fa_upper`` has shape (N-1, 2^(2w)) and
``fa_lower`` has shape (N-1, 2, 2^(2w+1)) where the middle axis selects the
element-index parity.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport log1p, exp, fabs, isinf
from libc.stdlib cimport malloc, free

cnp.import_array()


cdef inline double _boxplus(double a, double b) noexcept nogil:
    cdef double m = fabs(a) if fabs(a) < fabs(b) else fabs(b)
    cdef double s = -m if (a < 0) != (b < 0) else m
    if isinf(a) or isinf(b):
        return s
    return s + log1p(exp(-fabs(a + b))) - log1p(exp(-fabs(a - b)))


cdef inline double _softplus(double x) noexcept nogil:
    # log(1 + e^x)
    if x > 0:
        return x + log1p(exp(-x))
    return log1p(exp(x))


cdef inline int _ctz(int i) noexcept nogil:
    cdef int k = 0
    while not (i & 1):
        i >>= 1
        k += 1
    return k


cdef inline int _idx(double t, int half) noexcept nogil:
    cdef int v = <int>t
    return v + half - 1 if v > 0 else v + half


cdef struct Ctx:
    int n
    int fa
    int w
    int half
    int S
    short *up
    short *lo
    Py_ssize_t up_stride
    Py_ssize_t lo_stride


cdef inline void _f(Ctx *c, int node, const double *src, double *dst, int h) noexcept nogil:
    cdef int j
    cdef const short *tab
    if not c.fa:
        for j in range(h):
            dst[j] = _boxplus(src[j], src[h + j])
    else:
        tab = c.up + node * c.up_stride
        for j in range(h):
            dst[j] = tab[_idx(src[j], c.half) * c.S + _idx(src[h + j], c.half)]


cdef inline void _g(Ctx *c, int node, const double *src, const unsigned char *u,
                    double *dst, int h) noexcept nogil:
    cdef int j
    cdef const short *tab
    if not c.fa:
        for j in range(h):
            dst[j] = (-src[j] if u[j] else src[j]) + src[h + j]
    else:
        tab = c.lo + node * c.lo_stride
        for j in range(h):
            dst[j] = tab[(j & 1) * (c.lo_stride >> 1)
                         + (u[j] * c.S + _idx(src[j], c.half)) * c.S + _idx(src[h + j], c.half)]


cdef inline int _node_id(int n, int lam, int i) noexcept nogil:
    # parent of the layer-lam value that feeds leaf i
    return (1 << (n - lam - 1)) - 1 + (i >> (lam + 1))


cdef int _setup(Ctx *c, int n, object fa_upper, object fa_lower, int w) except -1:
    cdef short[:, ::1] up
    cdef short[:, :, ::1] lo
    c.n = n
    c.fa = 0
    c.w = w
    c.half = 1 << (w - 1) if w > 0 else 0
    c.S = 1 << w if w > 0 else 0
    if fa_upper is None:
        return 0
    up = fa_upper
    lo = fa_lower
    if up.shape[0] < (1 << n) - 1 or lo.shape[0] < (1 << n) - 1:
        raise ValueError("table count does not match block length")
    if up.shape[1] != c.S * c.S or lo.shape[1] != 2 or lo.shape[2] != 2 * c.S * c.S:
        raise ValueError("table shape does not match message width")
    c.fa = 1
    c.up = &up[0, 0] if up.shape[0] else NULL
    c.lo = &lo[0, 0, 0] if lo.shape[0] else NULL
    c.up_stride = up.shape[1]
    c.lo_stride = 2 * lo.shape[2]
    return 0


def sc_decode(const double[::1] llr, const unsigned char[::1] frozen,
              fa_upper=None, fa_lower=None, int w=0):
    """Successive cancellation on bit-reversed inputs; returns u-hat (uint8)."""
    cdef int N = llr.shape[0]
    cdef int n = 0
    while (1 << n) < N:
        n += 1
    if (1 << n) != N or frozen.shape[0] != N:
        raise ValueError("length mismatch or block length not a power of two")
    cdef Ctx c
    _setup(&c, n, fa_upper, fa_lower, w)
    out = np.zeros(N, dtype=np.uint8)
    cdef unsigned char[::1] u = out
    if N == 1:
        u[0] = 0 if frozen[0] else (0 if (llr[0] > 0 if c.fa else llr[0] >= 0) else 1)
        return out
    cdef double *P = <double *> malloc(2 * N * sizeof(double))
    cdef unsigned char *B = <unsigned char *> malloc(N * sizeof(unsigned char))
    cdef unsigned char *v = <unsigned char *> malloc(N * sizeof(unsigned char))
    cdef int i, j, lam, start, k, h
    cdef double L
    cdef unsigned char bit
    try:
        with nogil:
            for j in range(N):
                P[N + j] = llr[j]
            for i in range(N):
                if i == 0:
                    start = n - 1
                else:
                    k = _ctz(i)
                    _g(&c, _node_id(n, k, i), P + (2 << k), B + (1 << k), P + (1 << k), 1 << k)
                    start = k - 1
                lam = start
                while lam >= 0:
                    _f(&c, _node_id(n, lam, i), P + (2 << lam), P + (1 << lam), 1 << lam)
                    lam -= 1
                L = P[1]
                if frozen[i]:
                    bit = 0
                elif c.fa:
                    bit = 0 if L > 0 else 1
                else:
                    bit = 0 if L >= 0 else 1
                u[i] = bit
                # fold the decision into partial sums
                v[0] = bit
                lam = 0
                while lam < n and ((i >> lam) & 1):
                    h = 1 << lam
                    for j in range(h):
                        v[h + j] = v[j]
                        v[j] = v[j] ^ B[h + j]
                    lam += 1
                if lam < n:
                    for j in range(1 << lam):
                        B[(1 << lam) + j] = v[j]
    finally:
        free(P)
        free(B)
        free(v)
    return out


cdef struct ListState:
    int n
    int L
    double *P           # layer lam slot s at P + L*((1<<lam)-1) + s*(1<<lam)
    unsigned char *B
    int *pref           # [lam*L + path] -> slot
    int *bref
    int *prc            # [lam*L + slot] -> reference count
    int *brc


cdef inline double *_pslot(ListState *st, int lam, int s) noexcept nogil:
    return st.P + st.L * ((1 << lam) - 1) + s * (1 << lam)


cdef inline unsigned char *_bslot(ListState *st, int lam, int s) noexcept nogil:
    return st.B + st.L * ((1 << lam) - 1) + s * (1 << lam)


cdef inline int _own(int *ref, int *rc, int L, int lam, int p) noexcept nogil:
    # private slot for a full overwrite: no contents are copied
    cdef int s = ref[lam * L + p]
    if rc[lam * L + s] == 1:
        return s
    rc[lam * L + s] -= 1
    s = 0
    while rc[lam * L + s] != 0:
        s += 1
    rc[lam * L + s] = 1
    ref[lam * L + p] = s
    return s


def scl_decode(const double[::1] llr, const unsigned char[::1] frozen, int list_size,
               fa_upper=None, fa_lower=None, int w=0, metric_table=None):
    """List decoding on bit-reversed inputs.

    Returns ``(uhat, metrics)`` for every surviving path sorted by metric with
    ties kept in list order. In finite-alphabet mode ``metric_table`` of shape
    (N, 2^w, 2) gives the metric increment per leaf, message index and bit.
    """
    cdef int N = llr.shape[0]
    cdef int n = 0
    while (1 << n) < N:
        n += 1
    if (1 << n) != N or frozen.shape[0] != N:
        raise ValueError("length mismatch or block length not a power of two")
    if list_size < 1:
        raise ValueError("list size must be positive")
    cdef Ctx c
    _setup(&c, n, fa_upper, fa_lower, w)
    cdef const double[:, :, ::1] inc
    cdef const double *incp = NULL
    if c.fa:
        if metric_table is None:
            raise ValueError("finite-alphabet list decoding needs a metric table")
        inc = metric_table
        if inc.shape[0] != N or inc.shape[1] != c.S or inc.shape[2] != 2:
            raise ValueError("metric table shape mismatch")
        incp = &inc[0, 0, 0]
    cdef int Lmax = list_size
    cdef ListState st
    st.n = n
    st.L = Lmax
    st.P = <double *> malloc(max(1, Lmax * (N - 1)) * sizeof(double))
    st.B = <unsigned char *> malloc(max(1, Lmax * (N - 1)) * sizeof(unsigned char))
    st.pref = <int *> malloc(max(1, n) * Lmax * sizeof(int))
    st.bref = <int *> malloc(max(1, n) * Lmax * sizeof(int))
    st.prc = <int *> malloc(max(1, n) * Lmax * sizeof(int))
    st.brc = <int *> malloc(max(1, n) * Lmax * sizeof(int))
    cdef int *npref = <int *> malloc(max(1, n) * Lmax * sizeof(int))
    cdef int *nbref = <int *> malloc(max(1, n) * Lmax * sizeof(int))
    cdef double *metric = <double *> malloc(Lmax * sizeof(double))
    cdef double *nmetric = <double *> malloc(Lmax * sizeof(double))
    cdef double *leaf = <double *> malloc(Lmax * sizeof(double))
    cdef double *cm = <double *> malloc(2 * Lmax * sizeof(double))
    cdef int *cidx = <int *> malloc(2 * Lmax * sizeof(int))
    cdef unsigned char *v = <unsigned char *> malloc(N * sizeof(unsigned char))
    cdef unsigned char *ubits = <unsigned char *> malloc(N * Lmax * sizeof(unsigned char))
    cdef int *parent = <int *> malloc(N * Lmax * sizeof(int))
    cdef int i, j, p, q, s, lam, k, h, start, count, ncand, nsel, a, b2, node
    cdef double x, tmpm, Lv
    cdef int tmpi
    cdef unsigned char bit
    cdef const double *src
    cdef const unsigned char *ub
    cdef unsigned char[:, ::1] uhv
    cdef Py_ssize_t[::1] ordv
    try:
        with nogil:
            for lam in range(n):
                for p in range(Lmax):
                    st.pref[lam * Lmax + p] = 0
                    st.bref[lam * Lmax + p] = 0
                    st.prc[lam * Lmax + p] = 0
                    st.brc[lam * Lmax + p] = 0
                st.prc[lam * Lmax] = 1
                st.brc[lam * Lmax] = 1
            count = 1
            metric[0] = 0.0
            for i in range(N):
                for p in range(count):
                    if i == 0:
                        start = n - 1
                    else:
                        k = _ctz(i)
                        node = _node_id(n, k, i)
                        if k + 1 == n:
                            src = &llr[0]
                        else:
                            src = _pslot(&st, k + 1, st.pref[(k + 1) * Lmax + p])
                        ub = _bslot(&st, k, st.bref[k * Lmax + p])
                        s = _own(st.pref, st.prc, Lmax, k, p)
                        _g(&c, node, src, ub, _pslot(&st, k, s), 1 << k)
                        start = k - 1
                    lam = start
                    while lam >= 0:
                        if lam + 1 == n:
                            src = &llr[0]
                        else:
                            src = _pslot(&st, lam + 1, st.pref[(lam + 1) * Lmax + p])
                        s = _own(st.pref, st.prc, Lmax, lam, p)
                        _f(&c, _node_id(n, lam, i), src, _pslot(&st, lam, s), 1 << lam)
                        lam -= 1
                    if n == 0:
                        leaf[p] = llr[0]
                    else:
                        leaf[p] = _pslot(&st, 0, st.pref[p])[0]

                if frozen[i]:
                    for p in range(count):
                        Lv = leaf[p]
                        if c.fa:
                            metric[p] += incp[(i * c.S + _idx(Lv, c.half)) * 2]
                        else:
                            metric[p] += _softplus(-Lv)
                        ubits[i * Lmax + p] = 0
                        parent[i * Lmax + p] = p
                    nsel = count
                else:
                    ncand = 2 * count
                    for p in range(count):
                        Lv = leaf[p]
                        for b2 in range(2):
                            if c.fa:
                                x = incp[(i * c.S + _idx(Lv, c.half)) * 2 + b2]
                            else:
                                x = _softplus(Lv if b2 else -Lv)
                            cm[2 * p + b2] = metric[p] + x
                            cidx[2 * p + b2] = 2 * p + b2
                    # stable insertion sort by (metric, candidate index)
                    for a in range(1, ncand):
                        tmpm = cm[a]
                        tmpi = cidx[a]
                        q = a - 1
                        while q >= 0 and (cm[q] > tmpm or (cm[q] == tmpm and cidx[q] > tmpi)):
                            cm[q + 1] = cm[q]
                            cidx[q + 1] = cidx[q]
                            q -= 1
                        cm[q + 1] = tmpm
                        cidx[q + 1] = tmpi
                    nsel = ncand if ncand < Lmax else Lmax
                    # survivors back in candidate order
                    for a in range(1, nsel):
                        tmpm = cm[a]
                        tmpi = cidx[a]
                        q = a - 1
                        while q >= 0 and cidx[q] > tmpi:
                            cm[q + 1] = cm[q]
                            cidx[q + 1] = cidx[q]
                            q -= 1
                        cm[q + 1] = tmpm
                        cidx[q + 1] = tmpi
                    for lam in range(n):
                        for j in range(nsel):
                            p = cidx[j] >> 1
                            npref[lam * Lmax + j] = st.pref[lam * Lmax + p]
                            nbref[lam * Lmax + j] = st.bref[lam * Lmax + p]
                            st.prc[lam * Lmax + npref[lam * Lmax + j]] += 1
                            st.brc[lam * Lmax + nbref[lam * Lmax + j]] += 1
                        for p in range(count):
                            st.prc[lam * Lmax + st.pref[lam * Lmax + p]] -= 1
                            st.brc[lam * Lmax + st.bref[lam * Lmax + p]] -= 1
                        for j in range(nsel):
                            st.pref[lam * Lmax + j] = npref[lam * Lmax + j]
                            st.bref[lam * Lmax + j] = nbref[lam * Lmax + j]
                    for j in range(nsel):
                        metric[j] = cm[j]
                        ubits[i * Lmax + j] = cidx[j] & 1
                        parent[i * Lmax + j] = cidx[j] >> 1
                    count = nsel

                # partial sums
                for p in range(count):
                    v[0] = ubits[i * Lmax + p]
                    lam = 0
                    while lam < n and ((i >> lam) & 1):
                        h = 1 << lam
                        ub = _bslot(&st, lam, st.bref[lam * Lmax + p])
                        for j in range(h):
                            v[h + j] = v[j]
                            v[j] = v[j] ^ ub[j]
                        lam += 1
                    if lam < n:
                        s = _own(st.bref, st.brc, Lmax, lam, p)
                        ub = _bslot(&st, lam, s)
                        for j in range(1 << lam):
                            (<unsigned char *> ub)[j] = v[j]

        mets = np.array(<double[:count]> metric)
        order = np.argsort(mets, kind="stable").astype(np.intp)
        mets = mets[order]
        uh = np.zeros((count, N), dtype=np.uint8)
        uhv = uh
        ordv = order
        with nogil:
            for j in range(count):
                p = <int> ordv[j]
                for i in range(N - 1, -1, -1):
                    uhv[j, i] = ubits[i * Lmax + p]
                    p = parent[i * Lmax + p]
    finally:
        free(st.P); free(st.B); free(st.pref); free(st.bref); free(st.prc); free(st.brc)
        free(npref); free(nbref); free(metric); free(nmetric); free(leaf); free(cm); free(cidx)
        free(v); free(ubits); free(parent)
    return uh, mets
