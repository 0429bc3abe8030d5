"""Offline design of finite-alphabet polar decoders by quantized density evolution.

Message distributions are :class:`BinaryJoint` objects over the symmetric
alphabet ``-2^(w-1) .. -1, +1 .. +2^(w-1)`` (in that column order). Each of the
``N - 1`` building blocks of the decoding tree gets its own upper and lower
update, designed from the distribution of its inputs at the design SNR under
the genie assumption that the upper decision is correct.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from polarquant.channel import DEFAULT_BIN_COUNT, DEFAULT_CLIP_LLR, NoiseConfig, discretize_channel
from polarquant.codec import CodeConfig
from polarquant.infoquant import (
    BinaryJoint,
    default_s_grid,
    fold_symmetric,
    llr_levels,
    message_alphabet,
    mutual_information,
    optimal_symmetric_quantizer,
    pair_information,
    symmetric_joint,
)

SCHEMA_VERSION = 1
VARIANTS = {
    "ib-ib": ("lut", "lut"),
    "ms-ib": ("minsum", "lut"),
    "ms-cd-nonuniform": ("minsum", "cd_nonuniform"),
    "ms-cd-uniform": ("minsum", "cd_uniform"),
}
LOWER_KINDS = ("lut", "cd_nonuniform", "cd_uniform")


# ---------------------------------------------------------------------------
# message distributions


def message_joint(w: int, joint) -> BinaryJoint:
    return BinaryJoint(message_alphabet(w), np.asarray(joint, dtype=np.float64))


def symmetrize(d: BinaryJoint) -> BinaryJoint:
    """Average ``p(0, t)`` with ``p(1, -t)`` so odd symmetry holds exactly."""
    j = d.joint
    p0 = 0.5 * (j[0] + j[1, ::-1])
    return BinaryJoint(d.labels, np.stack([p0, p0[::-1]]))


def _width(d: BinaryJoint) -> int:
    return int(d.labels.size).bit_length() - 1


def message_levels(d: BinaryJoint) -> np.ndarray:
    """LLR magnitude per message magnitude 1..2^(w-1).

    Messages without probability mass inherit the largest level below them so
    the table stays usable (and non-decreasing across such gaps).
    """
    K = d.labels.size // 2
    lv, empty = llr_levels(d, symmetric=True)
    mags = np.maximum(lv[K:], 0.0)
    filled = mags.copy()
    run = 0.0
    for k in range(K):
        if empty[K + k]:
            filled[k] = run
        run = max(run, filled[k])
    return filled


def translation_levels(d: BinaryJoint) -> np.ndarray:
    """Non-decreasing LLR magnitudes used to build integer translation tables."""
    return np.maximum.accumulate(message_levels(d))


def _signed_levels(mags: np.ndarray) -> np.ndarray:
    return np.concatenate([-mags[::-1], mags])


def check_distribution(d: BinaryJoint, tol: float = 1e-12):
    """Raise if ``d`` is not normalized or not odd-symmetric."""
    if abs(d.total - 1.0) > 1e-9:
        raise AssertionError(f"distribution sums to {d.total!r}")
    if not d.is_odd_symmetric(tol):
        raise AssertionError("distribution is not odd-symmetric")


# ---------------------------------------------------------------------------
# channel quantizer


@dataclass(frozen=True)
class ChannelQuantizer:
    """Thresholds on |channel LLR| and the LLR level carried by each message magnitude."""

    w: int
    thresholds: np.ndarray
    levels: np.ndarray

    def __call__(self, llr) -> np.ndarray:
        llr = np.asarray(llr, dtype=np.float64)
        mag = 1 + np.searchsorted(self.thresholds, np.abs(llr), side="left")
        return np.where(llr >= 0, mag, -mag).astype(np.int64)


def design_channel_quantizer(noise: NoiseConfig | float, w: int, bin_count: int = DEFAULT_BIN_COUNT,
                             clip_llr: float = DEFAULT_CLIP_LLR):
    """MI-maximizing sign-preserving quantizer of the binned channel LLR."""
    fine = discretize_channel(noise, bin_count, clip_llr)
    q, out, _ = optimal_symmetric_quantizer(BinaryJoint(fine.support, fine.joint), w)
    # thresholds move from the last bin center of a cluster to its upper bin edge
    thr = q.thresholds + 0.5 * fine.bin_width
    d = symmetrize(message_joint(w, out.joint))
    return ChannelQuantizer(w, thr, message_levels(d)), d


# ---------------------------------------------------------------------------
# upper branch


def _pair_upper(pa: BinaryJoint, pb: BinaryJoint) -> np.ndarray:
    """p(u0, ta, tb) with u0 = xa xor xb, flattened to index ia * S + ib."""
    A, B = pa.joint, pb.joint
    p0 = np.outer(A[0], B[0]) + np.outer(A[1], B[1])
    p1 = np.outer(A[0], B[1]) + np.outer(A[1], B[0])
    return np.stack([p0.ravel(), p1.ravel()])


def _pair_lower(pa: BinaryJoint, pb: BinaryJoint) -> np.ndarray:
    """p(u1, ta, tb | u0 = 0), flattened to index ia * S + ib."""
    A, B = pa.joint, pb.joint
    return 2.0 * np.stack([np.outer(A[0], B[0]).ravel(), np.outer(A[1], B[1]).ravel()])


def _check_pair(pa: BinaryJoint, pb: BinaryJoint) -> int:
    if pa.labels.size != pb.labels.size or not np.array_equal(pa.labels, pb.labels):
        raise ValueError("input alphabets differ")
    return _width(pa)


def minsum_table(w: int) -> np.ndarray:
    t = message_alphabet(w)
    ta, tb = np.meshgrid(t, t, indexing="ij")
    return (np.sign(ta) * np.sign(tb) * np.minimum(np.abs(ta), np.abs(tb))).ravel()


def _apply_table(pair_joint: np.ndarray, table: np.ndarray, w: int) -> BinaryJoint:
    alphabet = message_alphabet(w)
    col = np.searchsorted(alphabet, table)
    out = np.stack([np.bincount(col, weights=pair_joint[x], minlength=alphabet.size) for x in (0, 1)])
    return symmetrize(message_joint(w, out))


def evolve_upper_minsum(pa: BinaryJoint, pb: BinaryJoint) -> BinaryJoint:
    w = _check_pair(pa, pb)
    return _apply_table(_pair_upper(pa, pb), minsum_table(w), w)


def _boxplus(a, b):
    m = np.minimum(np.abs(a), np.abs(b))
    s = np.sign(a) * np.sign(b) * m
    return s + np.log1p(np.exp(-np.abs(a + b))) - np.log1p(np.exp(-np.abs(a - b)))


def evolve_upper_lut(pa: BinaryJoint, pb: BinaryJoint, w: int | None = None):
    """Optimal upper table over all input pairs; returns ``(table, distribution)``."""
    wa = _check_pair(pa, pb)
    if w is not None and w != wa:
        raise ValueError("alphabet width mismatch")
    La = _signed_levels(message_levels(pa))
    Lb = _signed_levels(message_levels(pb))
    keys = _boxplus(La[:, None], Lb[None, :]).ravel()
    pj = _pair_upper(pa, pb)
    q, out, _ = optimal_symmetric_quantizer(BinaryJoint(keys, pj), wa)
    t = message_alphabet(wa)
    tie = (np.sign(t)[:, None] * np.sign(t)[None, :]).ravel()
    table = q(keys, tie_sign=tie).astype(np.int64)
    return table, symmetrize(message_joint(wa, out.joint))


# ---------------------------------------------------------------------------
# lower branch


@dataclass(frozen=True)
class UpperParams:
    kind: str
    table: np.ndarray | None = None


@dataclass(frozen=True)
class LowerParams:
    """Lower-branch parameters of one node.

    ``lut``: full table indexed by ``(u0 * S + ia) * S + ib``.
    ``cd_nonuniform`` / ``cd_uniform``: translation magnitudes ``phi_a``,
    ``phi_b`` indexed by |t| - 1, the scale they were built with, and either
    integer ``thresholds`` or the right ``shift``.
    """

    kind: str
    table: np.ndarray | None = None
    phi_a: np.ndarray | None = None
    phi_b: np.ndarray | None = None
    thresholds: np.ndarray | None = None
    shift: int | None = None
    scale: float | None = None


def translate(mags: np.ndarray, s: float, w_internal: int) -> np.ndarray:
    """Scaled and rounded magnitudes, saturated at 2^(w'-1) - 1."""
    iota = (1 << (w_internal - 1)) - 1
    return np.minimum(np.floor(s * np.asarray(mags) + 0.5), iota).astype(np.int64)


def integer_sum_joint(pa: BinaryJoint, pb: BinaryJoint, phi_a, phi_b, w_internal: int) -> BinaryJoint:
    """p(u1, y) of y = phi_a(ta) + phi_b(tb) given u0 = 0, over y in [-2 iota, 2 iota]."""
    iota = (1 << (w_internal - 1)) - 1
    ya = np.concatenate([-np.asarray(phi_a)[::-1], phi_a])
    yb = np.concatenate([-np.asarray(phi_b)[::-1], phi_b])
    y = (ya[:, None] + yb[None, :]).ravel() + 2 * iota
    pj = _pair_lower(pa, pb)
    size = 4 * iota + 1
    joint = np.stack([np.bincount(y, weights=pj[x], minlength=size) for x in (0, 1)])
    return BinaryJoint(np.arange(-2 * iota, 2 * iota + 1), joint)


def _partition_mi_batch(a: np.ndarray, b: np.ndarray, K: int) -> np.ndarray:
    """Best K-cluster contiguous-partition MI for each row of (G, M) folds."""
    G, M = a.shape
    if M <= K:
        return pair_information(a, b).sum(axis=1)
    PA = np.concatenate([np.zeros((G, 1)), np.cumsum(a, axis=1)], axis=1)
    PB = np.concatenate([np.zeros((G, 1)), np.cumsum(b, axis=1)], axis=1)
    i_idx, j_idx = np.triu_indices(M + 1, k=1)
    cost = np.full((G, M + 1, M + 1), -np.inf)
    cost[:, i_idx, j_idx] = pair_information(PA[:, j_idx] - PA[:, i_idx], PB[:, j_idx] - PB[:, i_idx])
    dp = np.full((G, M + 1), -np.inf)
    dp[:, 0] = 0.0
    for _ in range(K):
        dp = np.max(dp[:, :, None] + cost, axis=1)
    return dp[:, M]


def _quantized_joint_from_fold(fold, cluster_of_mag: np.ndarray, K: int, w: int) -> BinaryJoint:
    A = np.bincount(cluster_of_mag, weights=fold.a, minlength=K)
    B = np.bincount(cluster_of_mag, weights=fold.b, minlength=K)
    return message_joint(w, symmetric_joint(A, B))


@dataclass(frozen=True)
class _ScaleSearch:
    """Integer-sum statistics for every scale of the grid (one row per scale)."""

    scales: np.ndarray
    phi_a: np.ndarray
    phi_b: np.ndarray
    joint: np.ndarray   # (G, 2, 4 iota + 1) over y = -2 iota .. 2 iota
    a: np.ndarray       # folded masses per magnitude 0 .. 2 iota
    b: np.ndarray
    w_internal: int

    def sum_joint(self, g: int) -> BinaryJoint:
        iota = (1 << (self.w_internal - 1)) - 1
        return BinaryJoint(np.arange(-2 * iota, 2 * iota + 1), self.joint[g])


def _scale_search(pa, pb, w_internal, s_grid) -> _ScaleSearch:
    iota = (1 << (w_internal - 1)) - 1
    size, c = 4 * iota + 1, 2 * iota
    s_grid = np.asarray(s_grid, dtype=np.float64)
    G = s_grid.size
    phi_a = translate(translation_levels(pa)[None, :], s_grid[:, None], w_internal)
    phi_b = translate(translation_levels(pb)[None, :], s_grid[:, None], w_internal)
    ya = np.concatenate([-phi_a[:, ::-1], phi_a], axis=1)
    yb = np.concatenate([-phi_b[:, ::-1], phi_b], axis=1)
    y = (ya[:, :, None] + yb[:, None, :]).reshape(G, -1) + c + size * np.arange(G)[:, None]
    pj = _pair_lower(pa, pb)
    joint = np.stack([np.bincount(y.ravel(), weights=np.tile(pj[x], G), minlength=G * size)
                      .reshape(G, size) for x in (0, 1)], axis=1)
    p0, p1 = joint[:, 0], joint[:, 1]
    a = np.empty((G, c + 1))
    b = np.empty((G, c + 1))
    a[:, 1:] = 0.5 * (p0[:, c + 1:] + p1[:, c - 1::-1])
    b[:, 1:] = 0.5 * (p1[:, c + 1:] + p0[:, c - 1::-1])
    a[:, 0] = b[:, 0] = 0.25 * (p0[:, c] + p1[:, c])
    return _ScaleSearch(s_grid, phi_a, phi_b, joint, a, b, w_internal)


def _clip_shift_mi_batch(search: _ScaleSearch, r: int, w: int) -> np.ndarray:
    K = 1 << (w - 1)
    mags = np.arange(search.a.shape[1])
    onehot = np.eye(K)[np.minimum(mags >> r, K - 1)]
    return pair_information(search.a @ onehot, search.b @ onehot).sum(axis=1)


def evolve_lower(pa: BinaryJoint, pb: BinaryJoint, variant: str, w: int | None = None,
                 w_internal: int = 6, s_grid=None, r_range=None, _search=None):
    """Design one lower update; returns ``(LowerParams, distribution)``.

    ``variant`` is a lower kind (``lut``, ``cd_nonuniform``, ``cd_uniform``).
    """
    wa = _check_pair(pa, pb)
    if w is not None and w != wa:
        raise ValueError("alphabet width mismatch")
    w = wa
    K = 1 << (w - 1)
    S = 1 << w
    if variant == "lut":
        La = _signed_levels(message_levels(pa))
        Lb = _signed_levels(message_levels(pb))
        keys = (La[:, None] + Lb[None, :]).ravel()
        q, out, _ = optimal_symmetric_quantizer(BinaryJoint(keys, _pair_lower(pa, pb)), w)
        t = message_alphabet(w)
        tie = np.repeat(np.sign(t), S)
        t0 = q(keys, tie_sign=tie).astype(np.int64).reshape(S, S)
        # u0 = 1 flips the sign of ta: row ia maps to its mirror S - 1 - ia
        table = np.concatenate([t0.ravel(), t0[::-1].ravel()])
        return LowerParams("lut", table=table), symmetrize(message_joint(w, out.joint))
    if variant not in ("cd_nonuniform", "cd_uniform"):
        raise ValueError(f"unknown lower variant {variant!r}")
    if w_internal < 2:
        raise ValueError("internal width must be at least 2 bits")
    s_grid = np.asarray(default_s_grid() if s_grid is None else sorted(s_grid), dtype=np.float64)
    search = _search if _search is not None else _scale_search(pa, pb, w_internal, s_grid)
    if variant == "cd_nonuniform":
        g = int(np.argmax(_partition_mi_batch(search.a, search.b, K)))  # first maximum: smallest scale
        q, out, _ = optimal_symmetric_quantizer(search.sum_joint(g), w)
        params = LowerParams("cd_nonuniform", phi_a=search.phi_a[g], phi_b=search.phi_b[g],
                             thresholds=np.asarray(q.thresholds, dtype=np.int64), scale=float(s_grid[g]))
        return params, symmetrize(message_joint(w, out.joint))
    best = (-np.inf, None, None)
    for r in sorted(default_r_range(w, w_internal) if r_range is None else r_range):
        mis = _clip_shift_mi_batch(search, r, w)
        g = int(np.argmax(mis))
        if mis[g] > best[0]:
            best = (mis[g], r, g)
    _, r, g = best
    fold = fold_symmetric(*_labels_joint(search, g))
    out = _quantized_joint_from_fold(fold, np.minimum(fold.magnitudes >> r, K - 1), K, w)
    params = LowerParams("cd_uniform", phi_a=search.phi_a[g], phi_b=search.phi_b[g], shift=int(r),
                         scale=float(s_grid[g]))
    return params, symmetrize(out)


def _labels_joint(search: _ScaleSearch, g: int):
    j = search.sum_joint(g)
    return j.labels, j.joint


def default_r_range(w: int, w_internal: int) -> range:
    return range(0, max(w_internal - w + 1, 0) + 1)


# ---------------------------------------------------------------------------
# decoder spec


@dataclass(frozen=True)
class NodeParams:
    """Parameters of the building block at tree ``level`` (root = 0) and ``index``.

    ``decision_llr`` holds two magnitude tables (upper leaf, lower leaf) on the
    bottom level and is empty elsewhere.
    """

    level: int
    index: int
    upper: UpperParams
    lower: LowerParams
    decision_llr: tuple = ()


@dataclass(frozen=True)
class DecoderSpec:
    N: int
    w: int
    w_internal: int
    design_ebn0_db: float
    design_rate: float
    variant: str
    channel_quantizer: ChannelQuantizer
    nodes: tuple
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}")
        if len(self.nodes) != self.N - 1:
            raise ValueError(f"expected {self.N - 1} nodes, got {len(self.nodes)}")
        if self.channel_quantizer.thresholds.size != (1 << (self.w - 1)) - 1:
            raise ValueError("channel quantizer does not match the message width")

    @property
    def n(self) -> int:
        return self.N.bit_length() - 1

    def node(self, level: int, index: int) -> NodeParams:
        return self.nodes[(1 << level) - 1 + index]

    def to_json(self) -> str:
        return dumps_spec(self)

    @classmethod
    def from_json(cls, text: str) -> "DecoderSpec":
        return loads_spec(text)

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_json())

    @classmethod
    def load(cls, path) -> "DecoderSpec":
        with open(path, encoding="utf-8") as fh:
            return loads_spec(fh.read())


def _fmt(x) -> str:
    if isinstance(x, dict):
        return "{" + ", ".join(f'"{k}": {_fmt(v)}' for k, v in x.items()) + "}"
    if isinstance(x, (list, tuple, np.ndarray)):
        return "[" + ", ".join(_fmt(v) for v in x) + "]"
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        if not math.isfinite(x):
            raise ValueError("non-finite value in spec")
        return "%.17g" % float(x)
    if isinstance(x, str):
        return '"' + x + '"'
    if x is None:
        return "null"
    raise TypeError(f"cannot serialize {type(x).__name__}")


def _node_dict(p: NodeParams) -> dict:
    up = {"kind": p.upper.kind}
    if p.upper.kind == "lut":
        up["table"] = p.upper.table
    lo = {"kind": p.lower.kind}
    if p.lower.kind == "lut":
        lo["table"] = p.lower.table
    else:
        lo["phi_a"] = p.lower.phi_a
        lo["phi_b"] = p.lower.phi_b
        if p.lower.kind == "cd_nonuniform":
            lo["thresholds"] = p.lower.thresholds
        else:
            lo["shift"] = p.lower.shift
        lo["scale"] = float(p.lower.scale)
    return {"node": [p.level, p.index], "upper": up, "lower": lo,
            "decision_llr": [[float(v) for v in t] for t in p.decision_llr]}


def dumps_spec(spec: DecoderSpec) -> str:
    head = {
        "schema_version": spec.schema_version,
        "N": spec.N,
        "w": spec.w,
        "w_internal": spec.w_internal,
        "design_ebn0_db": float(spec.design_ebn0_db),
        "design_rate": float(spec.design_rate),
        "variant": spec.variant,
        "channel_quantizer": {
            "thresholds": [float(v) for v in spec.channel_quantizer.thresholds],
            "levels": [float(v) for v in spec.channel_quantizer.levels],
        },
    }
    lines = ["{"] + [f'  "{k}": {_fmt(v)},' for k, v in head.items()]
    lines.append('  "nodes": [')
    body = [f"    {_fmt(_node_dict(p))}" for p in spec.nodes]
    lines.append(",\n".join(body))
    lines.append("  ]")
    lines.append("}")
    return "\n".join(lines) + "\n"


def _ints(v):
    return None if v is None else np.asarray(v, dtype=np.int64)


def loads_spec(text: str) -> DecoderSpec:
    import json

    d = json.loads(text)
    if d.get("schema_version") != SCHEMA_VERSION:
        raise ValueError(f"unsupported schema version {d.get('schema_version')!r}")
    w = int(d["w"])
    cq = ChannelQuantizer(w, np.asarray(d["channel_quantizer"]["thresholds"], dtype=np.float64),
                          np.asarray(d["channel_quantizer"]["levels"], dtype=np.float64))
    nodes = []
    for nd in d["nodes"]:
        up = nd["upper"]
        lo = nd["lower"]
        upper = UpperParams(up["kind"], _ints(up.get("table")))
        lower = LowerParams(lo["kind"], table=_ints(lo.get("table")), phi_a=_ints(lo.get("phi_a")),
                            phi_b=_ints(lo.get("phi_b")), thresholds=_ints(lo.get("thresholds")),
                            shift=lo.get("shift"), scale=lo.get("scale"))
        dec = tuple(np.asarray(t, dtype=np.float64) for t in nd["decision_llr"])
        nodes.append(NodeParams(int(nd["node"][0]), int(nd["node"][1]), upper, lower, dec))
    spec = DecoderSpec(int(d["N"]), w, int(d["w_internal"]), float(d["design_ebn0_db"]),
                       float(d["design_rate"]), d["variant"], cq, tuple(nodes), int(d["schema_version"]))
    validate_spec(spec)
    return spec


def validate_spec(spec: DecoderSpec):
    """Check the structural invariants of every node; raises ValueError."""
    w, K = spec.w, 1 << (spec.w - 1)
    iota = (1 << (spec.w_internal - 1)) - 1
    up_kind, lo_kind = VARIANTS[spec.variant]
    alphabet = set(message_alphabet(w).tolist())
    for i, p in enumerate(spec.nodes):
        level = int(math.log2(i + 1))
        if (p.level, p.index) != (level, i + 1 - (1 << level)):
            raise ValueError(f"node {i} is out of tree order")
        if p.upper.kind != up_kind or p.lower.kind != lo_kind:
            raise ValueError(f"node {i} does not match variant {spec.variant}")
        if p.upper.kind == "lut" and (p.upper.table.size != 4**w or not set(p.upper.table.tolist()) <= alphabet):
            raise ValueError(f"node {i}: invalid upper table")
        lo = p.lower
        if lo.kind == "lut":
            if lo.table.size != 2 * 4**w or not set(lo.table.tolist()) <= alphabet:
                raise ValueError(f"node {i}: invalid lower table")
        else:
            for phi in (lo.phi_a, lo.phi_b):
                if phi.size != K or np.any(np.diff(phi) < 0) or phi.min() < 0 or phi.max() > iota:
                    raise ValueError(f"node {i}: invalid translation table")
            if lo.kind == "cd_nonuniform":
                if lo.thresholds.size != K - 1 or np.any(np.diff(lo.thresholds) <= 0):
                    raise ValueError(f"node {i}: thresholds must be strictly increasing")
            elif lo.shift is None or lo.shift < 0:
                raise ValueError(f"node {i}: invalid shift")
        if level == spec.n - 1 and len(p.decision_llr) != 2:
            raise ValueError(f"node {i}: bottom-level nodes need decision tables")


# ---------------------------------------------------------------------------
# tree design


@dataclass
class NodeTrace:
    """Diagnostics of one designed node (MI values in bits)."""

    level: int
    index: int
    mi_in: float
    mi_upper: float
    mi_lower: float
    lower_mi_by_kind: dict = field(default_factory=dict)
    degenerate: bool = False
    upper_out: BinaryJoint | None = field(default=None, repr=False)
    lower_out: BinaryJoint | None = field(default=None, repr=False)


def compare_lower_kinds(pa, pb, w_internal=6, s_grid=None, r_range=None) -> dict:
    """Preserved MI of every lower kind on the same inputs."""
    s_grid = np.asarray(default_s_grid() if s_grid is None else sorted(s_grid), dtype=np.float64)
    search = _scale_search(pa, pb, w_internal, s_grid)
    out = {}
    for kind in LOWER_KINDS:
        _, d = evolve_lower(pa, pb, kind, w_internal=w_internal, s_grid=s_grid, r_range=r_range,
                            _search=search if kind != "lut" else None)
        out[kind] = mutual_information(d)
    return out


def design_decoder(cfg: CodeConfig | int, w: int, w_internal: int = 6, design_ebn0_db: float = 0.5,
                   variant: str = "ms-cd-uniform", rate: float | None = None, s_grid=None, r_range=None,
                   bin_count: int = DEFAULT_BIN_COUNT, clip_llr: float = DEFAULT_CLIP_LLR,
                   trace: list | None = None, compare_lower: bool = False) -> DecoderSpec:
    """Run density evolution down the tree and collect per-node parameters.

    ``rate`` converts the design Eb/N0 to a noise level; it defaults to K/N.
    When ``trace`` is a list it receives one :class:`NodeTrace` per node (with
    all lower kinds compared on the node's inputs if ``compare_lower``).
    """
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}")
    if isinstance(cfg, CodeConfig):
        N, rate = cfg.N, cfg.rate if rate is None else rate
    else:
        N = int(cfg)
        if rate is None:
            raise ValueError("rate is required when only N is given")
    if N < 2 or N & (N - 1):
        raise ValueError("block length must be a power of two >= 2")
    if w < 1:
        raise ValueError("message width must be at least one bit")
    n = N.bit_length() - 1
    up_kind, lo_kind = VARIANTS[variant]
    s_grid = np.asarray(default_s_grid() if s_grid is None else sorted(s_grid), dtype=np.float64)
    chq, d0 = design_channel_quantizer(NoiseConfig(design_ebn0_db, rate), w, bin_count, clip_llr)
    iota = (1 << (w_internal - 1)) - 1

    nodes = []
    level_in = [d0]
    with warnings.catch_warnings():
        # saturated nodes legitimately have fewer distinct levels than messages
        warnings.filterwarnings("ignore", message="only .* distinct magnitudes")
        for level in range(n):
            nxt = []
            for index, pin in enumerate(level_in):
                if up_kind == "minsum":
                    du = evolve_upper_minsum(pin, pin)
                    upper = UpperParams("minsum")
                else:
                    table, du = evolve_upper_lut(pin, pin)
                    upper = UpperParams("lut", table)
                lower, dl = evolve_lower(pin, pin, lo_kind, w_internal=w_internal, s_grid=s_grid,
                                         r_range=r_range)
                dec = (message_levels(du), message_levels(dl)) if level == n - 1 else ()
                nodes.append(NodeParams(level, index, upper, lower, dec))
                nxt.extend([du, dl])
                if trace is not None:
                    mi_in = mutual_information(pin)
                    degenerate = lower.phi_a is not None and bool(np.all(lower.phi_a == iota)) \
                        and mi_in < 1 - 1e-9
                    t = NodeTrace(level, index, mi_in, mutual_information(du), mutual_information(dl),
                                  degenerate=degenerate, upper_out=du, lower_out=dl)
                    if compare_lower:
                        t.lower_mi_by_kind = compare_lower_kinds(pin, pin, w_internal, s_grid, r_range)
                    trace.append(t)
            level_in = nxt
    if trace is not None and any(t.degenerate for t in trace):
        warnings.warn("internal width too small: some translation tables saturate completely",
                      RuntimeWarning, stacklevel=2)
    spec = DecoderSpec(N, w, w_internal, float(design_ebn0_db), float(rate), variant, chq, tuple(nodes))
    validate_spec(spec)
    return spec


def memory_footprint(variant: str, w: int, w_internal: int = 6) -> int:
    """Parameter memory of one lower-branch update in bits."""
    kind = VARIANTS[variant][1] if variant in VARIANTS else variant
    K = 1 << (w - 1)
    if kind == "lut":
        return w * (1 << (2 * w + 1))
    if kind == "cd_nonuniform":
        return (2 * (w_internal - 1) + w_internal) * K
    if kind == "cd_uniform":
        return 2 * (w_internal - 1) * K
    raise ValueError(f"unknown lower kind {variant!r}")


def lower_operation_count(variant: str, w: int) -> int:
    """Additions or comparisons per lower update beyond table reads."""
    kind = VARIANTS[variant][1] if variant in VARIANTS else variant
    return {"lut": 0, "cd_nonuniform": w, "cd_uniform": 1}[kind]
