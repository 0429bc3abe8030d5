import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from polarquant import datapath
from polarquant.channel import NoiseConfig, transmit
from polarquant.codec import CodeConfig, CrcConfig, bit_reversal_permutation, build_message, crc_attach, polar_encode
from polarquant.fa_design import LowerParams, design_decoder
from polarquant.fa_runtime import (
    ACCURATE,
    SIMPLIFIED,
    FaScDecoder,
    FaSclDecoder,
    build_tables,
    cd_lower_update,
    channel_rescale,
    fa_sc_decode,
    fa_scl_candidates,
    lut_lower_update,
    materialize_lower_lut,
    minsum_upper,
    nonuniform_quantize,
    nonuniform_quantize_bsearch,
    pack_lower_index,
    quantize_channel,
    sm_to_twos_accurate,
    sm_to_twos_simplified,
    twos_to_sm_accurate,
    twos_to_sm_simplified,
    uniform_quantize,
    uniform_quantize_bits,
    unpack_lower_index,
)

# 3-bit sign-magnitude -> two's complement
SM2TC_ACCURATE = {0b000: 0b000, 0b001: 0b001, 0b010: 0b010, 0b011: 0b011,
                  0b100: 0b000, 0b101: 0b111, 0b110: 0b110, 0b111: 0b101}
SM2TC_SIMPLIFIED = {0b000: 0b000, 0b001: 0b001, 0b010: 0b010, 0b011: 0b011,
                    0b100: 0b111, 0b101: 0b110, 0b110: 0b101, 0b111: 0b100}
# 3-bit two's complement -> sign-magnitude (100 has no exact counterpart)
TC2SM_ACCURATE = {0b000: 0b000, 0b001: 0b001, 0b010: 0b010, 0b011: 0b011,
                  0b101: 0b111, 0b110: 0b110, 0b111: 0b101}
TC2SM_SIMPLIFIED = {0b000: 0b000, 0b001: 0b001, 0b010: 0b010, 0b011: 0b011,
                    0b101: 0b110, 0b110: 0b101, 0b111: 0b100}


def test_conversion_rows_width3():
    for a, b in SM2TC_ACCURATE.items():
        assert sm_to_twos_accurate(a, 3) == b
    for a, b in SM2TC_SIMPLIFIED.items():
        assert sm_to_twos_simplified(a, 3) == b
    for a, b in TC2SM_ACCURATE.items():
        assert twos_to_sm_accurate(a, 3) == b
    for a, b in TC2SM_SIMPLIFIED.items():
        assert twos_to_sm_simplified(a, 3) == b


def test_most_negative_saturates():
    assert twos_to_sm_accurate(0b100, 3, return_flag=True) == (0b111, True)
    assert twos_to_sm_accurate(0b101, 3, return_flag=True) == (0b111, False)


@pytest.mark.parametrize("W", range(3, 10))
def test_accurate_roundtrip_exhaustive(W):
    patterns = np.arange(1 << W)
    s, m = datapath.sm_split(patterns, W)
    tc = sm_to_twos_accurate(patterns, W)
    assert np.array_equal(datapath.twos_value(tc, W), np.where(s == 1, -m, m))
    back = twos_to_sm_accurate(tc, W)
    neg_zero = patterns == (1 << (W - 1))
    assert np.array_equal(back[~neg_zero], patterns[~neg_zero])
    # every non-saturating two's-complement word comes back unchanged
    words = patterns[patterns != (1 << (W - 1))]
    assert np.array_equal(sm_to_twos_accurate(twos_to_sm_accurate(words, W), W), words)


@pytest.mark.parametrize("W", range(3, 10))
def test_simplified_is_ones_complement(W):
    patterns = np.arange(1 << W)
    s, m = datapath.sm_split(patterns, W)
    v = datapath.twos_value(sm_to_twos_simplified(patterns, W), W)
    assert np.array_equal(v, np.where(s == 1, -m - 1, m))
    assert np.array_equal(twos_to_sm_simplified(sm_to_twos_simplified(patterns, W), W), patterns)
    # per-conversion bias is -1 for negatives and 0 otherwise
    assert set(np.unique(v - np.where(s == 1, -m, m)).tolist()) <= {-1, 0}


def test_uniform_quantize_values():
    assert [uniform_quantize(y, 1, 3) for y in (-9, -3, -1, 0, 1, 2, 5, 7, 100)] == [-4, -2, -1, 1, 1, 2, 3, 4, 4]
    with pytest.raises(ValueError):
        uniform_quantize(1, -1, 3)


@pytest.mark.parametrize("width", [5, 6, 7, 8])
def test_uniform_bits_equal_arithmetic(width):
    values = np.arange(-(1 << (width - 1)) + 1, 1 << (width - 1))
    for w in (2, 3, 4):
        for r in range(width - w + 2):
            got = uniform_quantize_bits(datapath.twos_pattern(values, width), width, r, w)
            assert np.array_equal(got, uniform_quantize(values, r, w))


@settings(max_examples=60)
@given(st.sets(st.integers(0, 120), min_size=7, max_size=7), st.integers(-130, 130))
def test_nonuniform_bsearch_equals_comparator(thr, y):
    thr = sorted(thr)
    assert nonuniform_quantize(y, thr, 4) == nonuniform_quantize_bsearch(y, thr, 4)


def test_nonuniform_quantize_boundaries():
    thr = [2, 5, 9]
    assert [nonuniform_quantize(y, thr, 3) for y in (0, 2, 3, 5, 6, 9, 10, -2, -3)] == [1, 1, 2, 2, 3, 3, 4, -1, -2]
    with pytest.raises(ValueError):
        nonuniform_quantize(1, [1, 2], 3)


def test_lower_index_packing():
    k = np.arange(2 * 16 * 16)
    ta, tb, u0 = unpack_lower_index(k, 4)
    assert np.array_equal(pack_lower_index(ta, tb, u0, 4), k)
    assert unpack_lower_index(0, 2) == (-2, -2, 0)
    assert pack_lower_index(2, 2, 1, 2) == 31


def random_cd_params(rng, w, wi, kind):
    K = 1 << (w - 1)
    iota = (1 << (wi - 1)) - 1
    phi_a = np.sort(rng.integers(0, iota + 1, K))
    phi_b = np.sort(rng.integers(0, iota + 1, K))
    if kind == "cd_nonuniform":
        thr = np.sort(rng.choice(np.arange(0, 2 * iota + 1), K - 1, replace=False))
        return LowerParams(kind, phi_a=phi_a, phi_b=phi_b, thresholds=thr)
    return LowerParams(kind, phi_a=phi_a, phi_b=phi_b, shift=int(rng.integers(0, wi - w + 2)))


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6), st.sampled_from([2, 3, 4]), st.sampled_from([4, 5, 6, 8]),
       st.sampled_from(["cd_nonuniform", "cd_uniform"]))
def test_cd_datapath_equals_integer_table(seed, w, wi, kind):
    rng = np.random.default_rng(seed)
    p = random_cd_params(rng, w, wi, kind)
    lut = materialize_lower_lut(p, w, wi)
    k = np.arange(lut.size)
    ta, tb, u0 = unpack_lower_index(k, w)
    assert np.array_equal(cd_lower_update(ta, tb, u0, p, wi, ACCURATE), lut)
    assert np.array_equal(lut_lower_update(ta, tb, u0, lut, w), lut)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6))
def test_parity_negates_inputs_and_output(seed):
    rng = np.random.default_rng(seed)
    p = random_cd_params(rng, 3, 6, "cd_nonuniform")
    ta, tb, u0 = unpack_lower_index(np.arange(128), 3)
    for conv in (ACCURATE, SIMPLIFIED):
        odd = cd_lower_update(ta, tb, u0, p, 6, conv, parity=1)
        assert np.array_equal(odd, -cd_lower_update(-ta, -tb, u0, p, 6, conv))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6), st.sampled_from([3, 4]), st.sampled_from(["cd_nonuniform", "cd_uniform"]))
def test_lower_update_odd_symmetry(seed, w, kind):
    # negating both messages (same u0) negates the output except where the integer sum is 0
    rng = np.random.default_rng(seed)
    p = random_cd_params(rng, w, 6, kind)
    ta, tb, u0 = unpack_lower_index(np.arange(1 << (2 * w + 1)), w)
    out = cd_lower_update(ta, tb, u0, p, 6, ACCURATE)
    y = (1 - 2 * u0) * np.sign(ta) * p.phi_a[np.abs(ta) - 1] + np.sign(tb) * p.phi_b[np.abs(tb) - 1]
    neg = cd_lower_update(-ta, -tb, u0, p, 6, ACCURATE)
    assert np.array_equal(neg[y != 0], -out[y != 0])
    assert np.all(out[y == 0] > 0) and np.array_equal(neg[y == 0], out[y == 0])
    # flipping u0 together with ta is an exact invariance
    assert np.array_equal(cd_lower_update(-ta, tb, 1 - u0, p, 6, ACCURATE), out)


def test_minsum_upper():
    assert minsum_upper(-3, 2) == -2 and minsum_upper(-1, -4) == 1
    assert minsum_upper(np.array([1, -2]), np.array([3, 3])).tolist() == [1, -2]


@pytest.fixture(scope="module")
def spec64():
    return design_decoder(CodeConfig.construct(64, 32), 3, 6, 2.0, "ms-cd-nonuniform")


def reference_fa_sc(t_nat, spec, frozen):
    """Recursive SC over integer messages using min-sum and the integer lower tables."""
    n = spec.n
    luts = [materialize_lower_lut(p.lower, spec.w, spec.w_internal) for p in spec.nodes]
    u = []

    def walk(level, index, msgs):
        if level == n:
            i = len(u)
            u.append(0 if frozen[i] else int(msgs[0] < 0))
            return [u[-1]]
        m = len(msgs) // 2
        a, b = msgs[:m], msgs[m:]
        k = (1 << level) - 1 + index
        xl = walk(level + 1, 2 * index, [minsum_upper(x, y) for x, y in zip(a, b)])
        lo = [lut_lower_update(x, y, s, luts[k], spec.w) for x, y, s in zip(a, b, xl)]
        xr = walk(level + 1, 2 * index + 1, lo)
        return [p ^ q for p, q in zip(xl, xr)] + xr

    walk(0, 0, list(t_nat))
    return np.array(u, dtype=np.uint8)


def test_fa_sc_matches_recursive_reference(backend, spec64):
    cfg = CodeConfig.construct(64, 32)
    rng = np.random.default_rng(0)
    perm = bit_reversal_permutation(cfg.n)
    for _ in range(15):
        llr = rng.normal(1.5, 2.5, 64)
        t = quantize_channel(llr, spec64)
        ref = reference_fa_sc(t[perm], spec64, cfg.frozen_mask)
        assert np.array_equal(fa_sc_decode(llr, spec64, cfg), ref)


def test_fa_scl_list_one_equals_sc(backend, spec64):
    cfg = CodeConfig.construct(64, 32)
    tables = build_tables(spec64)
    rng = np.random.default_rng(1)
    for _ in range(15):
        llr = rng.normal(1.0, 2.5, 64)
        uh, _ = fa_scl_candidates(llr, spec64, cfg, 1, tables)
        assert np.array_equal(uh[0], fa_sc_decode(llr, spec64, cfg, tables=tables))


def test_fa_backends_agree(spec64):
    from polarquant import core

    if core.BACKEND != "cython":
        pytest.skip("compiled kernels not built")
    cfg = CodeConfig.construct(64, 32)
    tb = build_tables(spec64, SIMPLIFIED, alt_sign_invert=True)
    fr = np.ascontiguousarray(cfg.frozen_mask)
    rng = np.random.default_rng(2)
    for _ in range(10):
        t = quantize_channel(rng.normal(1.0, 2.5, 64), spec64).astype(np.float64)
        args = (t, fr, 8, tb.upper, tb.lower, tb.w, tb.metric)
        a, b = core.get_backend("cython").scl_decode(*args), core.get_backend("python").scl_decode(*args)
        assert np.array_equal(a[0], b[0]) and np.allclose(a[1], b[1], atol=1e-9)
        sc = (t, fr, tb.upper, tb.lower, tb.w)
        assert np.array_equal(core.get_backend("cython").sc_decode(*sc), core.get_backend("python").sc_decode(*sc))


def test_alt_sign_invert_is_neutral_with_accurate_conversions(spec64):
    # inverting both inputs and the output only moves the zero-sum tie from +1 to -1
    tb = build_tables(spec64, ACCURATE, alt_sign_invert=True)
    ta, tbb, u0 = unpack_lower_index(np.arange(128), 3)
    for k, p in enumerate(spec64.nodes):
        ya = np.sign(ta) * p.lower.phi_a[np.abs(ta) - 1]
        y = np.where(u0 == 1, -ya, ya) + np.sign(tbb) * p.lower.phi_b[np.abs(tbb) - 1]
        assert np.array_equal(tb.lower[k, 0][y != 0], tb.lower[k, 1][y != 0])
        assert np.all(tb.lower[k, 0][y == 0] == 1) and np.all(tb.lower[k, 1][y == 0] == -1)
    ts = build_tables(spec64, SIMPLIFIED, alt_sign_invert=True)
    assert not np.array_equal(ts.lower[:, 0], ts.lower[:, 1])


def test_table_shapes(spec64):
    tb = build_tables(spec64)
    assert tb.upper.shape == (63, 64) and tb.lower.shape == (63, 2, 128)
    assert tb.metric.shape == (64, 8, 2) and tb.upper.dtype == np.int16
    with pytest.raises(ValueError):
        build_tables(spec64, "sloppy")


def test_channel_rescale():
    spec = design_decoder(CodeConfig.construct(8, 4), 2, 6, 1.0, "ms-cd-uniform")
    assert channel_rescale(spec, NoiseConfig(1.0, 0.5)) == pytest.approx(1.0)
    assert channel_rescale(spec, NoiseConfig(3.0, 0.5)) == pytest.approx(10 ** (-0.2))
    assert channel_rescale(spec, NoiseConfig(1.0, 0.25)) == pytest.approx(2.0)


@pytest.mark.parametrize("variant", ["ib-ib", "ms-ib", "ms-cd-nonuniform", "ms-cd-uniform"])
def test_fa_decoders_recover_clean_frames(variant, backend):
    crc = CrcConfig()
    cfg = CodeConfig.construct(128, 64 + 16)
    spec = design_decoder(cfg, 3, 6, 2.0, variant, rate=0.5)
    rng = np.random.default_rng(3)
    noise = NoiseConfig(6.0, 0.5)
    for _ in range(5):
        payload = rng.integers(0, 2, 64).astype(np.uint8)
        llr = transmit(polar_encode(build_message(crc_attach(payload, crc), cfg), cfg), noise, rng)
        assert np.array_equal(FaScDecoder(spec, cfg, crc=crc).decode(llr, noise), payload)
        assert np.array_equal(FaSclDecoder(spec, cfg, 4, crc).decode(llr, noise), payload)


def test_spec_length_mismatch(spec64):
    with pytest.raises(ValueError):
        FaScDecoder(spec64, CodeConfig.construct(128, 64))
    with pytest.raises(ValueError):
        fa_sc_decode(np.zeros(32), spec64, CodeConfig.construct(64, 32))
