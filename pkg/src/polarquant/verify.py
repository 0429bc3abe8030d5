"""Exhaustive self-checks behind ``polarquant verify``."""

from __future__ import annotations

import sys
import time

import numpy as np

from polarquant import datapath
from polarquant.datapath import ACCURATE, SIMPLIFIED

# 3-bit conversion golden rows: (input pattern, output pattern); None = no valid output
SM_TO_TWOS_ACCURATE = [("000", "000"), ("001", "001"), ("010", "010"), ("011", "011"),
                       ("111", "101"), ("110", "110"), ("101", "111"), ("100", "000")]
TWOS_TO_SM_ACCURATE = [("000", "000"), ("001", "001"), ("010", "010"), ("011", "011"),
                       ("100", None), ("101", "111"), ("110", "110"), ("111", "101")]
SM_TO_TWOS_SIMPLIFIED = [("000", "000"), ("001", "001"), ("010", "010"), ("011", "011"),
                         ("111", "100"), ("110", "101"), ("101", "110"), ("100", "111")]
TWOS_TO_SM_SIMPLIFIED = [("000", "000"), ("001", "001"), ("010", "010"), ("011", "011"),
                         ("100", None), ("101", "110"), ("110", "101"), ("111", "100")]


def check_golden_tables() -> bool:
    from polarquant import fa_runtime as fr

    cases = [(fr.sm_to_twos_accurate, SM_TO_TWOS_ACCURATE), (fr.twos_to_sm_accurate, TWOS_TO_SM_ACCURATE),
             (fr.sm_to_twos_simplified, SM_TO_TWOS_SIMPLIFIED),
             (fr.twos_to_sm_simplified, TWOS_TO_SM_SIMPLIFIED)]
    for fn, rows in cases:
        for src, dst in rows:
            if dst is not None and fn(int(src, 2), 3) != int(dst, 2):
                return False
    return True


def check_conversion_properties(max_width: int = 9) -> bool:
    for W in range(3, max_width + 1):
        mmask = (1 << (W - 1)) - 1
        mags = np.arange(mmask + 1)
        for sign in (0, 1):
            word = datapath.sm_to_twos(sign, mags, W, ACCURATE)
            if not np.array_equal(datapath.twos_value(word, W), -mags if sign else mags):
                return False
            s, m, sat = datapath.twos_to_sm(word, W, ACCURATE)
            back = np.where(s == 1, -m, m)
            if not np.array_equal(back, -mags if sign else mags) or sat.any():
                return False
        # simplified path: the value bias of one add through both conversions stays within 2
        for sa in (0, 1):
            for sb in (0, 1):
                ma, mb = np.meshgrid(mags, mags, indexing="ij")
                exact = np.where(sa, -ma, ma) + np.where(sb, -mb, mb)
                wa = datapath.sm_to_twos(sa, ma, W, SIMPLIFIED)
                wb = datapath.sm_to_twos(sb, mb, W, SIMPLIFIED)
                tot = (datapath.sign_extend(wa, W, W + 1) + datapath.sign_extend(wb, W, W + 1)) & ((2 << W) - 1)
                s, m, _ = datapath.twos_to_sm(tot, W + 1, SIMPLIFIED)
                if np.max(np.abs(np.where(s == 1, -m, m) - exact)) > 2:
                    return False
    return True


def check_quantizers() -> bool:
    from polarquant.fa_runtime import nonuniform_quantize, nonuniform_quantize_bsearch

    mags = np.arange(1 << 9)
    for r in range(6):
        if not np.array_equal(datapath.uniform_magnitude_bits(mags, r, 4), datapath.uniform_magnitude(mags, r, 4)):
            return False
    rng = np.random.default_rng(0)
    for _ in range(50):
        thr = np.sort(rng.choice(np.arange(1, 64), 7, replace=False))
        for y in range(-64, 65):
            if nonuniform_quantize(y, thr, 4) != nonuniform_quantize_bsearch(y, thr, 4):
                return False
    return True


def check_cd_equals_lut(spec) -> tuple:
    """Datapath with accurate conversions against the arithmetic table at every node."""
    from polarquant.fa_runtime import _all_lower_inputs, materialize_lower_lut

    ta, tb, u0 = _all_lower_inputs(spec.w)
    mismatches = 0
    for p in spec.nodes:
        lut = materialize_lower_lut(p.lower, spec.w, spec.w_internal)
        got = datapath.lower_update(ta, tb, u0, p.lower.phi_a, p.lower.phi_b, spec.w_internal,
                                    ("nonuniform", p.lower.thresholds) if p.lower.kind == "cd_nonuniform"
                                    else ("uniform", p.lower.shift), ACCURATE)
        mismatches += int(np.count_nonzero(got != lut))
    return mismatches == 0, len(spec.nodes), ta.size


def check_dp_bruteforce(instances: int = 1000, seed: int = 0) -> bool:
    from polarquant.infoquant import exhaustive_partition, pair_information, partition_dp, cluster_sums

    rng = np.random.default_rng(seed)
    for _ in range(instances):
        M = int(rng.integers(2, 13))
        K = int(rng.integers(1, min(4, M) + 1))
        a, b = random_fold(rng, M)
        ends = partition_dp(a, b, K)
        A, B = cluster_sums(a, b, ends)
        _, best = exhaustive_partition(a, b, K)
        if abs(float(pair_information(A, B).sum()) - best) > 1e-12:
            return False
    return True


def random_fold(rng, M):
    """Random magnitude fold (a_m >= b_m, sorted by LLR) summing to one half."""
    llr = np.sort(rng.exponential(2.0, M))
    mass = rng.dirichlet(np.ones(M)) * 0.5
    a = mass / (1 + np.exp(-llr))
    b = mass - a
    return a, b


def check_backends(frames: int = 20) -> bool | None:
    from polarquant import core
    from polarquant import _pycore

    try:
        native = core.get_backend("cython")
    except RuntimeError:
        return None
    from polarquant.codec import CodeConfig

    rng = np.random.default_rng(1)
    cfg = CodeConfig.construct(256, 128)
    fr = np.ascontiguousarray(cfg.frozen_mask)
    for _ in range(frames):
        llr = rng.normal(1.0, 1.5, cfg.N)
        if not np.array_equal(native.sc_decode(llr, fr), _pycore.sc_decode(llr, fr)):
            return False
        a, _ = native.scl_decode(llr, fr, 4)
        b, _ = _pycore.scl_decode(llr, fr, 4)
        if not np.array_equal(a, b):
            return False
    return True


def run_all(n: int = 1024, w: int = 4, w_internal: int = 6, design_ebn0_db: float = 0.5, out=sys.stdout) -> bool:
    from polarquant.codec import CodeConfig
    from polarquant.fa_design import design_decoder

    results = []

    def report(name, ok, detail=""):
        status = "SKIP" if ok is None else ("PASS" if ok else "FAIL")
        print(f"[{status}] {name}{'  ' + detail if detail else ''}", file=out, flush=True)
        results.append(ok is not False)

    report("3-bit conversion golden rows", check_golden_tables())
    report("conversion round trip and simplified bias (widths 3..9)", check_conversion_properties())
    report("quantizer bit logic and binary search", check_quantizers())
    t0 = time.perf_counter()
    spec = design_decoder(CodeConfig.construct(n, n // 2), w, w_internal, design_ebn0_db, "ms-cd-nonuniform")
    ok, nodes, inputs = check_cd_equals_lut(spec)
    report("computational domain equals lookup table", ok,
           f"{nodes} nodes x {inputs} inputs ({time.perf_counter() - t0:.1f} s incl. design)")
    report("partition DP equals brute force (1000 instances)", check_dp_bruteforce())
    report("compiled kernels equal numpy fallback", check_backends())
    return all(results)
