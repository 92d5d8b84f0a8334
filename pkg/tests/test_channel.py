import numpy as np
import pytest
from scipy import stats

from vmscma.channel import (
    Deployment,
    block_rng,
    complex_normal,
    draw_channel,
    snr_db_to_n0,
    superimpose,
    transmit,
)
from vmscma.codebook import assemble
from vmscma.constellation import builtin_mc_pool, pool_aipd
from vmscma.factor_graph import default_graph_4x6
from vmscma.vmm import grouped_vmm

POOL = builtin_mc_pool()


def _cbs(dep, orders=(2, 4, 16)):
    return assemble(grouped_vmm(default_graph_4x6(), orders, pool_aipd(POOL)), dep, POOL)


def test_deployment_clamps_and_sorts():
    dep = Deployment(np.array([0.5, 7.0, 2.0]), d_min=1.0, d_max=5.0)
    np.testing.assert_array_equal(dep.d, [5.0, 2.0, 1.0])
    with pytest.raises(ValueError):
        dep.d[0] = 3.0


def test_deployment_validation():
    with pytest.raises(ValueError):
        Deployment(np.array([1.0, -1.0]))
    with pytest.raises(ValueError):
        Deployment(np.ones(2), alpha=0.5)


def test_snr_conversion():
    assert snr_db_to_n0(10.0) == pytest.approx(0.1)
    assert snr_db_to_n0(0.0) == 1.0


def test_rng_streams_depend_only_on_key():
    a = block_rng(7, 1, 2).standard_normal(5)
    block_rng(7, 9, 9).standard_normal(100)
    np.testing.assert_array_equal(a, block_rng(7, 1, 2).standard_normal(5))
    assert not np.array_equal(a, block_rng(7, 2, 1).standard_normal(5))


def test_complex_normal_moments():
    z = complex_normal(block_rng(1), 100_000, var=2.0)
    assert np.mean(np.abs(z) ** 2) == pytest.approx(2.0, rel=0.02)
    assert np.var(z.real) == pytest.approx(1.0, rel=0.03)
    assert abs(np.mean(z.real * z.imag)) < 0.02


@pytest.mark.parametrize("d, expected", [(1.0, 1.0), (2.0, 0.25)])
def test_channel_power(d, expected):
    dep = Deployment(np.full(6, d))
    h = draw_channel(dep, 4, block_rng(3), trials=5000).h
    assert h.shape == (5000, 6, 4)
    assert np.mean(np.abs(h) ** 2) == pytest.approx(expected, rel=0.02)


def test_rayleigh_amplitude_distribution():
    h = draw_channel(Deployment.equal(6), 4, block_rng(11), trials=5000).h.ravel()
    # |g| for g ~ CN(0, 1) is Rayleigh with scale 1/sqrt(2)
    res = stats.kstest(np.abs(h), "rayleigh", args=(0, 1 / np.sqrt(2)))
    assert res.pvalue > 0.01


def test_noiseless_single_user():
    dep = Deployment.equal(6)
    cbs = _cbs(dep)
    h = draw_channel(dep, 4, block_rng(5)).h
    only = np.zeros_like(h)
    only[2] = h[2]
    sym = np.array([0, 1, 3, 0, 2, 1])
    y = transmit(cbs, sym, only, 0.0, block_rng(6))
    expected = only[2] * np.sqrt(cbs.powers[2]) * cbs.user_codebook(2)[:, 3]
    np.testing.assert_allclose(y, expected)


def test_linearity_in_channels():
    dep = Deployment(np.array([4.0, 3.0, 2.5, 2.0, 1.5, 1.0]))
    cbs = _cbs(dep)
    rng = block_rng(8)
    h1, h2 = draw_channel(dep, 4, rng).h, draw_channel(dep, 4, rng).h
    sym = np.array([1, 0, 2, 3, 15, 7])
    np.testing.assert_allclose(
        superimpose(cbs, sym, h1 + h2), superimpose(cbs, sym, h1) + superimpose(cbs, sym, h2), atol=1e-12
    )


def test_noise_power():
    dep = Deployment.equal(6)
    cbs = _cbs(dep)
    T = 25_000
    sym = np.zeros((T, 6), dtype=int)
    h = draw_channel(dep, 4, block_rng(1), trials=T).h
    y = transmit(cbs, sym, h, 0.3, block_rng(2))
    noise = y - superimpose(cbs, sym, h)
    assert np.mean(np.abs(noise) ** 2) == pytest.approx(0.3, rel=0.02)


def test_symbol_range_checked():
    dep = Deployment.equal(6)
    cbs = _cbs(dep)
    with pytest.raises(IndexError):
        superimpose(cbs, np.array([2, 0, 0, 0, 0, 0]), np.ones((6, 4)))
