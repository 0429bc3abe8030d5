import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from polarquant.codec import (
    CodeConfig,
    CrcConfig,
    bit_reversal_permutation,
    build_message,
    butterfly,
    construct_information_set,
    crc_attach,
    crc_check,
    polar_encode,
)


def dense_generator(n):
    F = np.array([[1, 1], [0, 1]], dtype=np.int64)
    G = np.ones((1, 1), dtype=np.int64)
    for _ in range(n):
        G = np.kron(G, F)
    N = 1 << n
    B = np.zeros((N, N), dtype=np.int64)
    for i in range(N):
        j = int(format(i, f"0{n}b")[::-1], 2) if n else 0
        B[i, j] = 1
    return G @ B


def test_bit_reversal_n3():
    assert bit_reversal_permutation(3).tolist() == [0, 4, 2, 6, 1, 5, 3, 7]
    assert bit_reversal_permutation(0).tolist() == [0]


@pytest.mark.parametrize("n", range(0, 6))
def test_encode_matches_dense_generator(n):
    rng = np.random.default_rng(n)
    G = dense_generator(n)
    for _ in range(10):
        u = rng.integers(0, 2, 1 << n)
        assert np.array_equal(polar_encode(u, 1 << n), (G @ u) % 2)


def test_encode_n1_columns():
    # u = (1, 0) gives x = (1, 0); u = (0, 1) gives (1, 1)
    assert polar_encode([1, 0], 2).tolist() == [1, 0]
    assert polar_encode([0, 1], 2).tolist() == [1, 1]


@given(st.integers(1, 7).flatmap(lambda n: st.lists(st.integers(0, 1), min_size=1 << n, max_size=1 << n)))
def test_butterfly_is_involution(bits):
    v = np.array(bits, dtype=np.uint8)
    assert np.array_equal(butterfly(butterfly(v)), v)


def test_encode_batched_rows():
    rng = np.random.default_rng(3)
    u = rng.integers(0, 2, (5, 16))
    x = polar_encode(u, 16)
    for row_u, row_x in zip(u, x):
        assert np.array_equal(polar_encode(row_u, 16), row_x)


def test_nr5g_information_sets():
    assert construct_information_set(8, 4).tolist() == [3, 5, 6, 7]
    assert construct_information_set(16, 8).tolist() == [6, 7, 10, 11, 12, 13, 14, 15]
    assert construct_information_set(1024, 0).size == 0
    assert construct_information_set(1024, 1024).tolist() == list(range(1024))


def test_nr5g_nested():
    a = set(construct_information_set(1024, 300).tolist())
    b = set(construct_information_set(1024, 512).tolist())
    assert a < b


def test_bhattacharyya_n3():
    # z at z0=1/2: index order (0..7) .99609 .87891 .80859 .31641 .68359 .19141 .12109 .00391
    assert construct_information_set(8, 4, "bhattacharyya").tolist() == [3, 5, 6, 7]
    assert construct_information_set(8, 2, "bhattacharyya").tolist() == [6, 7]


def test_construction_rejects_bad_sizes():
    with pytest.raises(ValueError):
        construct_information_set(12, 4)
    with pytest.raises(ValueError):
        construct_information_set(8, 9)
    with pytest.raises(ValueError):
        construct_information_set(2048, 8)
    with pytest.raises(ValueError):
        construct_information_set(8, 4, "magic")


def test_code_config_frozen_mask():
    cfg = CodeConfig.construct(8, 4)
    assert cfg.frozen_mask.tolist() == [1, 1, 1, 0, 1, 0, 0, 0]
    assert cfg.rate == 0.5 and cfg.n == 3
    with pytest.raises(ValueError):
        CodeConfig(8, 2, np.array([3, 3]))


def test_build_message_scatters_payload():
    cfg = CodeConfig.construct(8, 4)
    assert build_message([1, 0, 1, 1], cfg).tolist() == [0, 0, 0, 1, 0, 0, 1, 1]


def _ascii_bits(text):
    return np.unpackbits(np.frombuffer(text.encode(), dtype=np.uint8))


def test_crc16_ccitt_check_value():
    # CRC-16/XMODEM check value for "123456789"
    r = CrcConfig().remainder(_ascii_bits("123456789"))
    assert int("".join(map(str, r)), 2) == 0x31C3


def naive_crc(bits, poly, length):
    """Long division of bits * x^length by the generator over GF(2)."""
    g = [1] + [(poly >> (length - 1 - k)) & 1 for k in range(length)]
    reg = list(bits) + [0] * length
    for i in range(len(bits)):
        if reg[i]:
            for k in range(length + 1):
                reg[i + k] ^= g[k]
    return reg[-length:]


@settings(max_examples=60)
@given(st.lists(st.integers(0, 1), min_size=1, max_size=80),
       st.sampled_from([(0x1021, 16), (0x07, 8), (0x3, 4), (0x8005, 16)]))
def test_crc_matches_long_division(bits, gen):
    poly, length = gen
    assert CrcConfig(poly, length).remainder(bits).tolist() == naive_crc(bits, poly, length)


@settings(max_examples=40)
@given(st.lists(st.lists(st.integers(0, 1), min_size=24, max_size=24), min_size=1, max_size=8),
       st.integers(0, 0xFFFF))
def test_check_many_agrees_with_scalar(rows, init):
    crc = CrcConfig(init=init)
    blocks = np.array([crc_attach(np.array(r), crc) for r in rows])
    blocks[::2, 3] ^= 1
    expect = [crc_check(b, crc) for b in blocks]
    assert crc.check_many(blocks).tolist() == expect
    assert all(expect[1::2])


def test_crc_detects_single_flips():
    crc = CrcConfig()
    rng = np.random.default_rng(0)
    block = crc_attach(rng.integers(0, 2, 40), crc)
    assert crc_check(block, crc)
    for i in range(block.size):
        bad = block.copy()
        bad[i] ^= 1
        assert not crc_check(bad, crc)


def test_crc_config_validation():
    with pytest.raises(ValueError):
        CrcConfig(0x1FFFF, 16)
    with pytest.raises(ValueError):
        CrcConfig(length=0)
