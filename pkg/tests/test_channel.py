import numpy as np
import pytest

from polarquant.channel import NoiseConfig, discretize_channel, ebn0_to_sigma, transmit
from polarquant.infoquant import BinaryJoint, mutual_information


def biawgn_capacity(sigma, order=200):
    """Gauss-Hermite evaluation of 1 - E[log2(1 + exp(-L))], L ~ N(mu, 2 mu)."""
    mu = 2.0 / sigma**2
    x, w = np.polynomial.hermite.hermgauss(order)
    L = mu + np.sqrt(2.0 * 2.0 * mu) * x
    return 1.0 - np.sum(w * np.logaddexp(0.0, -L)) / np.sqrt(np.pi) / np.log(2.0)


def test_sigma_conventions():
    assert ebn0_to_sigma(0.0, 0.5) == pytest.approx(1.0)
    assert ebn0_to_sigma(10 * np.log10(2), 0.25) == pytest.approx(1.0)
    assert NoiseConfig(0.0, 0.5).mean_llr == pytest.approx(2.0)
    with pytest.raises(ValueError):
        ebn0_to_sigma(1.0, 0.0)


def test_transmit_llr_statistics():
    rng = np.random.default_rng(5)
    noise = NoiseConfig(1.0, 0.5)
    x = np.zeros(200000, dtype=np.uint8)
    llr = transmit(x, noise, rng)
    mu = noise.mean_llr
    assert llr.mean() == pytest.approx(mu, rel=0.01)
    assert llr.var() == pytest.approx(2 * mu, rel=0.02)
    assert transmit(np.ones(10, dtype=np.uint8), 1e-6, rng).max() < 0


def test_transmit_seeded():
    a = transmit(np.zeros(8), 0.7, np.random.default_rng(1))
    b = transmit(np.zeros(8), 0.7, np.random.default_rng(1))
    assert np.array_equal(a, b)


@pytest.mark.parametrize("ebn0", [-1.0, 0.5, 3.5])
def test_fine_channel_mi_close_to_capacity(ebn0):
    noise = NoiseConfig(ebn0, 0.5)
    fc = discretize_channel(noise)
    mi = mutual_information(BinaryJoint(fc.support, fc.joint))
    cap = biawgn_capacity(noise.sigma)
    assert mi <= cap + 1e-9
    assert cap - mi < 2e-3


def test_fine_channel_structure():
    fc = discretize_channel(0.8, bin_count=200, clip_llr=10.0)
    assert fc.bin_count == 200 and fc.bin_width == pytest.approx(0.1)
    assert np.array_equal(fc.support, -fc.support[::-1])
    assert np.array_equal(fc.joint[0], fc.joint[1, ::-1])
    assert fc.joint.sum() == pytest.approx(1.0, abs=1e-14)
    assert np.all(fc.joint >= 0)
    with pytest.raises(ValueError):
        discretize_channel(0.8, bin_count=63)
