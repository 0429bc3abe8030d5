"""Mutual information and symmetric threshold quantization of binary-input channels.

Every symmetric joint ``p(x, y)`` with ``p(0, y) = p(1, -y)`` is handled through
its *fold*: one entry per distinct key magnitude ``m`` carrying
``a_m = p(0, +m)`` and ``b_m = p(1, +m)`` (zero keys contribute half their mass
to each side). A sign-preserving quantizer is then a partition of the sorted
magnitudes into contiguous clusters, and I(X;T) is additive over clusters.
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

LLR_CLIP = 64.0
_LN2 = np.log(2.0)


@dataclass(frozen=True)
class BinaryJoint:
    """Joint distribution of a binary relevant bit and a finite observation.

    ``labels`` are the observation keys (LLRs, integers or messages) and
    ``joint[x, k]`` the probability of ``(x, labels[k])``.
    """

    labels: np.ndarray
    joint: np.ndarray

    def __post_init__(self):
        joint = np.asarray(self.joint, dtype=np.float64)
        labels = np.asarray(self.labels)
        if joint.ndim != 2 or joint.shape[0] != 2 or joint.shape[1] != labels.size:
            raise ValueError("joint must have shape (2, len(labels))")
        if np.any(joint < 0):
            raise ValueError("negative probability")
        object.__setattr__(self, "joint", joint)
        object.__setattr__(self, "labels", labels)

    @property
    def total(self) -> float:
        return float(self.joint.sum())

    def is_odd_symmetric(self, tol: float = 0.0) -> bool:
        """``p(0, y) == p(1, -y)`` for every label (labels must be closed under negation)."""
        order = np.argsort(self.labels, kind="stable")
        lab = self.labels[order]
        if not np.array_equal(lab, -lab[::-1]):
            return False
        j = self.joint[:, order]
        return bool(np.max(np.abs(j[0] - j[1, ::-1])) <= tol)

    def is_llr_sorted(self) -> bool:
        lv, _ = llr_levels(self)
        return bool(np.all(np.diff(lv) >= 0))


def _check_normalized(joint: np.ndarray, tol: float = 1e-9):
    if abs(joint.sum() - 1.0) > tol:
        raise ValueError(f"joint is not normalized (sum = {joint.sum():.12g})")


def mutual_information(j: BinaryJoint | np.ndarray) -> float:
    """I(X;Y) in bits."""
    joint = j.joint if isinstance(j, BinaryJoint) else np.asarray(j, dtype=np.float64)
    _check_normalized(joint)
    px = joint.sum(axis=1, keepdims=True)
    py = joint.sum(axis=0, keepdims=True)
    denom = px * py
    mask = joint > 0
    return float(np.sum(joint[mask] * np.log2(joint[mask] / denom[mask])))


def binary_entropy(p: float) -> float:
    if p <= 0 or p >= 1:
        return 0.0
    return float(-p * np.log2(p) - (1 - p) * np.log2(1 - p))


def llr_levels(j: BinaryJoint, clip: float = LLR_CLIP, symmetric: bool = False):
    """Per-label LLR ``log p(y|0)/p(y|1)`` and a flag array for zero-probability labels.

    Unbounded levels are clipped to ``+-clip``; a zero-probability label gets the
    clip value signed by its key. With ``symmetric`` the negative labels are set to
    the exact negation of their mirrors.
    """
    joint = j.joint
    px = joint.sum(axis=1)
    cond0 = np.divide(joint[0], px[0], out=np.zeros_like(joint[0]), where=px[0] > 0)
    cond1 = np.divide(joint[1], px[1], out=np.zeros_like(joint[1]), where=px[1] > 0)
    empty = (cond0 == 0) & (cond1 == 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        lv = np.log(cond0) - np.log(cond1)
    lv = np.where(empty, np.sign(j.labels) * clip, lv)
    lv = np.clip(np.nan_to_num(lv, posinf=clip, neginf=-clip), -clip, clip)
    if symmetric:
        labels = np.asarray(j.labels)
        pos = np.flatnonzero(labels > 0)
        lookup = {lab: k for k, lab in enumerate(labels.tolist())}
        for k in pos:
            lv[lookup[-labels[k]]] = -lv[k]
        lv[labels == 0] = 0.0
    return lv, empty


def pair_information(a, b) -> np.ndarray:
    """MI contribution of a cluster pair (+c, -c) with p(0,+c)=a, p(1,+c)=b."""
    a = np.maximum(np.asarray(a, dtype=np.float64), 0.0)
    b = np.maximum(np.asarray(b, dtype=np.float64), 0.0)
    s = a + b
    with np.errstate(divide="ignore", invalid="ignore"):
        ta = np.where(a > 0, a * np.log(2.0 * a / s), 0.0)
        tb = np.where(b > 0, b * np.log(2.0 * b / s), 0.0)
    return 2.0 * (ta + tb) / _LN2


@dataclass(frozen=True)
class Fold:
    """Magnitude view of a symmetric joint; ``a + b`` sums to one half."""

    magnitudes: np.ndarray
    a: np.ndarray
    b: np.ndarray

    @property
    def mi(self) -> float:
        return float(pair_information(self.a, self.b).sum())


def fold_symmetric(labels: np.ndarray, joint: np.ndarray) -> Fold:
    labels = np.asarray(labels)
    joint = np.asarray(joint, dtype=np.float64)
    mags, inv = np.unique(np.abs(labels), return_inverse=True)
    pos, neg, zero = labels > 0, labels < 0, labels == 0
    half0 = 0.5 * (joint[0] + joint[1])
    wa = np.where(pos, joint[0], 0.0) + np.where(neg, joint[1], 0.0) + np.where(zero, half0, 0.0)
    wb = np.where(pos, joint[1], 0.0) + np.where(neg, joint[0], 0.0) + np.where(zero, half0, 0.0)
    a = 0.5 * np.bincount(inv, weights=wa, minlength=mags.size)
    b = 0.5 * np.bincount(inv, weights=wb, minlength=mags.size)
    return Fold(mags, a, b)


def symmetric_joint(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Full (2, 2K) joint over messages -K..-1, +1..+K from cluster masses."""
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    return np.stack([np.concatenate([B[::-1], A]), np.concatenate([A[::-1], B])])


def message_alphabet(w: int) -> np.ndarray:
    half = 1 << (w - 1)
    return np.concatenate([np.arange(-half, 0), np.arange(1, half + 1)]).astype(np.int64)


def partition_dp(a: np.ndarray, b: np.ndarray, K: int) -> list[int]:
    """Exclusive end index of each of ``K`` contiguous clusters maximizing MI.

    Ties keep the smallest start index for the later clusters.
    """
    M = a.size
    if M <= K:
        if M < K:
            warnings.warn(f"only {M} distinct magnitudes for {K} clusters; "
                          "using identity clustering", RuntimeWarning, stacklevel=3)
        return list(range(1, M + 1)) + [M] * (K - M)
    PA = np.concatenate([[0.0], np.cumsum(a)])
    PB = np.concatenate([[0.0], np.cumsum(b)])
    i_idx, j_idx = np.triu_indices(M + 1, k=1)
    cost = np.full((M + 1, M + 1), -np.inf)
    cost[i_idx, j_idx] = pair_information(PA[j_idx] - PA[i_idx], PB[j_idx] - PB[i_idx])
    dp = np.full(M + 1, -np.inf)
    dp[0] = 0.0
    back = np.zeros((K, M + 1), dtype=np.int64)
    cols = np.arange(M + 1)
    for k in range(K):
        total = dp[:, None] + cost
        back[k] = np.argmax(total, axis=0)
        dp = total[back[k], cols]
    ends = []
    j = M
    for k in range(K - 1, -1, -1):
        ends.append(j)
        j = int(back[k, j])
    return ends[::-1]


def cluster_sums(a: np.ndarray, b: np.ndarray, ends: Sequence[int]):
    starts = [0] + list(ends[:-1])
    A = np.array([a[s:e].sum() for s, e in zip(starts, ends)])
    B = np.array([b[s:e].sum() for s, e in zip(starts, ends)])
    return A, B


def exhaustive_partition(a: np.ndarray, b: np.ndarray, K: int):
    """Brute-force best contiguous partition (test oracle); returns (ends, mi)."""
    M = a.size
    best, best_ends = -np.inf, None
    for cuts in itertools.combinations(range(1, M), K - 1):
        ends = list(cuts) + [M]
        A, B = cluster_sums(a, b, ends)
        mi = float(pair_information(A, B).sum())
        if mi > best:
            best, best_ends = mi, ends
    return best_ends, best


@dataclass(frozen=True)
class SymmetricQuantizer:
    """Sign-preserving magnitude quantizer to ``2^w`` messages.

    Message magnitude ``i`` is emitted for ``thresholds[i-2] < |y| <= thresholds[i-1]``
    with magnitude 1 for ``|y| <= thresholds[0]`` and ``2^(w-1)`` above the last one.
    """

    w: int
    thresholds: np.ndarray

    def magnitude(self, y) -> np.ndarray:
        return 1 + np.searchsorted(self.thresholds, np.abs(y), side="left")

    def __call__(self, y, tie_sign=1) -> np.ndarray:
        y = np.asarray(y)
        sign = np.where(y > 0, 1, np.where(y < 0, -1, tie_sign))
        return sign * self.magnitude(y)


def optimal_symmetric_quantizer(j: BinaryJoint, w: int):
    """Best sign-preserving threshold quantizer of a symmetric joint.

    Labels are clustered by magnitude in ascending key order. For LLR keys this
    is the MI-optimal quantizer; for integer keys it is the best threshold
    quantizer on the integer magnitude. Returns
    ``(quantizer, output joint over messages, preserved MI)``.
    """
    f = fold_symmetric(j.labels, j.joint)
    K = 1 << (w - 1)
    ends = partition_dp(f.a, f.b, K)
    A, B = cluster_sums(f.a, f.b, ends)
    M = f.magnitudes.size
    # threshold k is the largest magnitude inside cluster k
    thr = np.array([f.magnitudes[min(e, M) - 1] for e in ends[:-1]])
    if M < K:
        # pad empty clusters above the data with strictly increasing thresholds
        top = f.magnitudes[-1]
        step = 1 if np.issubdtype(f.magnitudes.dtype, np.integer) else max(abs(top), 1.0) * 1e-9
        for k in range(M - 1, K - 1):
            thr[k] = top + (k - M + 2) * step
    out = BinaryJoint(message_alphabet(w), symmetric_joint(A, B))
    return SymmetricQuantizer(w, thr), out, float(pair_information(A, B).sum())


@dataclass(frozen=True)
class UniformQuantizerParams:
    """Translation scale ``s`` plus clip-shift ``r``; threshold spacing is ``2^r / s``."""

    s: float
    r: int
    w: int
    w_internal: int

    @property
    def delta(self) -> float:
        return 1.0 / self.s

    @property
    def iota(self) -> int:
        return (1 << (self.w_internal - 1)) - 1


def clip_shift_clusters(magnitudes: np.ndarray, r: int, w: int) -> np.ndarray:
    """0-based cluster index ``min(|y| >> r, 2^(w-1) - 1)``."""
    return np.minimum(np.asarray(magnitudes, dtype=np.int64) >> r, (1 << (w - 1)) - 1)


def clip_shift_mi(fold: Fold, r: int, w: int) -> float:
    K = 1 << (w - 1)
    c = clip_shift_clusters(fold.magnitudes, r, w)
    A = np.bincount(c, weights=fold.a, minlength=K)
    B = np.bincount(c, weights=fold.b, minlength=K)
    return float(pair_information(A, B).sum())


def default_s_grid(points: int = 64) -> np.ndarray:
    """Scales with resolution 1/s log-spaced over [2^-6, 2], ascending in s."""
    return np.sort(1.0 / np.logspace(-6, 1, points, base=2.0))


def uniform_grid_search(j_sum: Callable[[float], BinaryJoint], s_grid: Iterable[float],
                        r_range: Iterable[int], w: int, w_internal: int):
    """Maximize I(U;T) over (s, r) for clip-shift quantization of integer sums.

    ``j_sum(s)`` returns the symmetric joint of the integer sum at scale ``s``.
    Ties go to smaller ``r``, then smaller ``s``. Returns ``(params, mi)``.
    """
    s_grid = sorted(float(s) for s in s_grid)
    r_range = sorted(int(r) for r in r_range)
    if not s_grid or not r_range:
        raise ValueError("empty search grid")
    folds = [fold_symmetric(js.labels, js.joint) for js in map(j_sum, s_grid)]
    best = (-np.inf, None)
    for r in r_range:
        for s, f in zip(s_grid, folds):
            mi = clip_shift_mi(f, r, w)
            if mi > best[0]:
                best = (mi, UniformQuantizerParams(s, r, w, w_internal))
    return best[1], best[0]
