import itertools
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from polarquant.codec import CodeConfig
from polarquant.fa_design import (
    LOWER_KINDS,
    DecoderSpec,
    check_distribution,
    compare_lower_kinds,
    design_channel_quantizer,
    design_decoder,
    evolve_lower,
    evolve_upper_lut,
    evolve_upper_minsum,
    integer_sum_joint,
    lower_operation_count,
    memory_footprint,
    message_joint,
    message_levels,
    minsum_table,
    translate,
    translation_levels,
    validate_spec,
)
from polarquant.infoquant import message_alphabet, mutual_information, symmetric_joint


def random_message_dist(rng, w):
    K = 1 << (w - 1)
    mass = rng.dirichlet(np.ones(K)) * 0.5
    err = rng.uniform(0, 0.5, K) * mass
    return message_joint(w, symmetric_joint(mass - err, err))


def enumerate_upper(pa, pb, table_fn):
    """p(u0, t) by looping over xa, xb and message pairs."""
    alphabet = list(pa.labels)
    out = np.zeros((2, len(alphabet)))
    for xa, xb in itertools.product((0, 1), repeat=2):
        for ia, ta in enumerate(alphabet):
            for ib, tb in enumerate(alphabet):
                t = table_fn(ta, tb)
                out[xa ^ xb, alphabet.index(t)] += pa.joint[xa, ia] * pb.joint[xb, ib]
    return out


def test_minsum_evolution_matches_enumeration():
    rng = np.random.default_rng(1)
    for w in (2, 3):
        pa = random_message_dist(rng, w)
        d = evolve_upper_minsum(pa, pa)
        ref = enumerate_upper(pa, pa, lambda a, b: int(np.sign(a) * np.sign(b) * min(abs(a), abs(b))))
        assert np.allclose(d.joint, ref, atol=1e-15)


def test_minsum_table_layout():
    t = minsum_table(2).reshape(4, 4)
    # rows ta = -2, -1, 1, 2; columns tb likewise
    assert t.tolist() == [[2, 1, -1, -2], [1, 1, -1, -1], [-1, -1, 1, 1], [-2, -1, 1, 2]]


def test_integer_sum_joint_matches_enumeration():
    rng = np.random.default_rng(2)
    w, wi = 2, 4
    pa, pb = random_message_dist(rng, w), random_message_dist(rng, w)
    phi_a, phi_b = np.array([1, 4]), np.array([2, 7])
    d = integer_sum_joint(pa, pb, phi_a, phi_b, wi)
    iota = 7
    ref = np.zeros((2, 4 * iota + 1))
    alphabet = message_alphabet(w)
    for x in (0, 1):
        for ia, ta in enumerate(alphabet):
            for ib, tb in enumerate(alphabet):
                y = np.sign(ta) * phi_a[abs(ta) - 1] + np.sign(tb) * phi_b[abs(tb) - 1]
                # u0 = 0: xa = x (u1 xor 0), xb = x
                ref[x, y + 2 * iota] += 2 * pa.joint[x, ia] * pb.joint[x, ib]
    assert np.allclose(d.joint, ref, atol=1e-15)
    assert d.total == pytest.approx(1.0)


def test_translate_rounds_and_saturates():
    assert translate(np.array([0.0, 0.24, 0.25, 1.0, 100.0]), 2.0, 4).tolist() == [0, 0, 1, 2, 7]


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6), st.sampled_from([2, 3, 4]))
def test_lower_kind_mi_ordering(seed, w):
    pa = random_message_dist(np.random.default_rng(seed), w)
    mi = compare_lower_kinds(pa, pa, 6)
    assert mi["lut"] >= mi["cd_nonuniform"] - 1e-12
    assert mi["cd_nonuniform"] >= mi["cd_uniform"] - 1e-12


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6), st.sampled_from([2, 3]))
def test_node_chain_rule_bound(seed, w):
    # quantized upper + lower MI cannot exceed the two input channels
    pa = random_message_dist(np.random.default_rng(seed), w)
    mi_in = mutual_information(pa)
    up = [evolve_upper_minsum(pa, pa), evolve_upper_lut(pa, pa)[1]]
    lo = [evolve_lower(pa, pa, k)[1] for k in LOWER_KINDS]
    for du in up:
        for dl in lo:
            check_distribution(du)
            check_distribution(dl)
            assert mutual_information(du) + mutual_information(dl) <= 2 * mi_in + 1e-12
    assert mutual_information(up[1]) >= mutual_information(up[0]) - 1e-12


def test_lut_lower_table_structure():
    rng = np.random.default_rng(5)
    pa = random_message_dist(rng, 3)
    params, _ = evolve_lower(pa, pa, "lut")
    S = 8
    t = params.table.reshape(2, S, S)
    # u0 = 1 mirrors ta; with identical inputs the table is odd in (ta, tb) jointly
    assert np.array_equal(t[1], t[0][::-1])
    assert np.array_equal(t[0], -t[0][::-1, ::-1])


def test_channel_quantizer():
    cq, d = design_channel_quantizer(0.9, 3)
    assert cq.thresholds.size == 3 and np.all(np.diff(cq.thresholds) > 0)
    assert np.all(np.diff(cq.levels) >= 0)
    assert cq(np.array([-100.0, -1e-3, 0.0, 1e-3, 100.0])).tolist() == [-4, -1, 1, 1, 4]
    check_distribution(d)


def test_message_levels_fill_empty_messages():
    d = message_joint(2, symmetric_joint(np.array([0.4, 0.0]), np.array([0.1, 0.0])))
    lv = message_levels(d)
    assert lv[0] == pytest.approx(np.log(4)) and lv[1] == lv[0]
    assert np.all(np.diff(translation_levels(d)) >= 0)


def _evolve_all(spec_w, n, ebn0, variant):
    """Every distribution produced on the way down the tree."""
    from polarquant.fa_design import VARIANTS
    from polarquant.channel import NoiseConfig

    up_kind, lo_kind = VARIANTS[variant]
    _, d0 = design_channel_quantizer(NoiseConfig(ebn0, 0.5), spec_w)
    level, out = [d0], [d0]
    for _ in range(n):
        nxt = []
        for p in level:
            du = evolve_upper_minsum(p, p) if up_kind == "minsum" else evolve_upper_lut(p, p)[1]
            nxt += [du, evolve_lower(p, p, lo_kind)[1]]
        out += nxt
        level = nxt
    return out


@pytest.mark.parametrize("variant", ["ib-ib", "ms-cd-nonuniform", "ms-cd-uniform"])
def test_evolved_distributions_are_valid(variant):
    for d in _evolve_all(3, 5, 1.0, variant):
        assert abs(d.total - 1.0) <= 1e-12
        assert d.is_odd_symmetric(1e-12)


def test_design_small_tree_and_trace():
    trace = []
    spec = design_decoder(CodeConfig.construct(16, 8), 3, 6, 1.0, "ms-cd-nonuniform", trace=trace,
                          compare_lower=True)
    assert len(spec.nodes) == 15 and spec.n == 4
    assert spec.node(3, 7).level == 3 and len(spec.node(3, 7).decision_llr) == 2
    assert spec.node(0, 0).decision_llr == ()
    assert spec.design_rate == 0.5
    for t in trace:
        by = t.lower_mi_by_kind
        assert by["lut"] >= by["cd_nonuniform"] - 1e-12 >= by["cd_uniform"] - 2e-12
        assert t.mi_lower == pytest.approx(by["cd_nonuniform"], abs=1e-12)
        assert t.mi_upper + t.mi_lower <= 2 * t.mi_in + 1e-12


@pytest.mark.parametrize("variant", ["ib-ib", "ms-ib", "ms-cd-nonuniform", "ms-cd-uniform"])
def test_spec_json_roundtrip(variant, tmp_path):
    spec = design_decoder(CodeConfig.construct(8, 4), 2, 5, 2.0, variant)
    spec.save(tmp_path / "s.json")
    back = DecoderSpec.load(tmp_path / "s.json")
    assert back.to_json() == spec.to_json()
    assert json.loads(spec.to_json())["schema_version"] == 1


def test_spec_rejects_corruption():
    spec = design_decoder(CodeConfig.construct(8, 4), 2, 6, 2.0, "ms-cd-nonuniform")
    d = json.loads(spec.to_json())
    d["nodes"][0]["lower"]["phi_a"] = [9, 1]  # decreasing translation table
    with pytest.raises(ValueError):
        DecoderSpec.from_json(json.dumps(d))
    d = json.loads(spec.to_json())
    d["schema_version"] = 99
    with pytest.raises(ValueError):
        DecoderSpec.from_json(json.dumps(d))
    validate_spec(spec)


def test_design_argument_checks():
    with pytest.raises(ValueError):
        design_decoder(8, 2, variant="ms-cd-uniform")  # rate missing
    with pytest.raises(ValueError):
        design_decoder(CodeConfig.construct(8, 4), 2, variant="nope")
    spec = design_decoder(8, 2, 6, 1.0, "ms-cd-uniform", rate=0.25)
    assert spec.design_rate == 0.25


@pytest.mark.parametrize("w,expected", [(4, (2048, 128, 80)), (3, (384, 64, 40)), (2, (64, 32, 20))])
def test_memory_footprint(w, expected):
    assert tuple(memory_footprint(k, w, 6) for k in LOWER_KINDS) == expected
    assert memory_footprint("ms-cd-uniform", w, 6) == expected[2]
    assert lower_operation_count("cd_nonuniform", w) == w
    assert lower_operation_count("ib-ib", w) == 0


def test_lut_upper_tie_signs():
    pa = message_joint(2, symmetric_joint(np.array([0.25, 0.25]), np.array([0.0, 0.0])))
    with pytest.warns(RuntimeWarning, match="distinct magnitudes"):
        table, d = evolve_upper_lut(pa, pa)
    t = message_alphabet(2)
    assert np.array_equal(np.sign(table), (np.sign(t)[:, None] * np.sign(t)[None, :]).ravel())
    check_distribution(d)


def test_lower_params_fields():
    rng = np.random.default_rng(7)
    pa = random_message_dist(rng, 3)
    nu, _ = evolve_lower(pa, pa, "cd_nonuniform", w_internal=6)
    un, _ = evolve_lower(pa, pa, "cd_uniform", w_internal=6)
    assert nu.thresholds.size == 3 and nu.shift is None
    assert un.shift in range(0, 5) and un.thresholds is None
    for p in (nu, un):
        assert np.all(np.diff(p.phi_a) >= 0) and p.phi_a.max() <= 31
