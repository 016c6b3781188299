import numpy as np
import pytest
from hypothesis import given, strategies as st

from nsflab.lp import (DyadicSystem, besov_norm, bernstein_check, bernstein_ratio, chi, dyadic_block,
                       kernel_l1_norm, mollifier_constant, mollify, phi, sobolev_norm)


@pytest.fixture(scope="module")
def sys2():
    return DyadicSystem((64, 64))


def _mode(sys, n):
    x = np.arange(sys.shape[0]) * 2 * np.pi / sys.shape[0]
    X, _ = np.meshgrid(x, x, indexing="ij")
    return np.exp(1j * n * X)


def test_profile_support():
    r = np.linspace(0, 5, 2001)
    assert np.all(chi(r[r <= 1.1]) == 1.0) and np.all(chi(r[r >= 1.9]) == 0.0)
    # phi(2^-j xi) lives in the annulus 2^(j-1) <= |xi| <= 2^(j+1)
    p = phi(r)
    assert np.all(p[(r < 0.5) | (r > 2.0)] == 0.0) and np.all(p >= 0)


def test_partition_of_unity(sys2, rng):
    assert sys2.partition_error() <= 1e-12
    f = rng.standard_normal(sys2.shape)
    total = sum(dyadic_block(sys2, f, j) for j in sys2.blocks)
    assert np.linalg.norm(total - f) <= 1e-12 * np.linalg.norm(f)
    assert DyadicSystem((32, 32, 16)).partition_error() <= 1e-12


def test_block_examples(sys2):
    f = _mode(sys2, 4)
    for j in sys2.blocks:
        blk = dyadic_block(sys2, f, j)
        np.testing.assert_allclose(blk, f if j == 2 else 0 * f, atol=1e-13)
    c = np.full(sys2.shape, 2.5)
    np.testing.assert_allclose(dyadic_block(sys2, c, -1), c, atol=1e-13)
    with pytest.raises(ValueError):
        dyadic_block(sys2, c, sys2.J_max + 1)


def test_besov_examples(sys2, rng):
    f = _mode(sys2, 4)
    assert besov_norm(sys2, f, 1, 2, 2) == pytest.approx(4 * sys2.lp_norm(f, 2), rel=1e-12)
    assert besov_norm(sys2, np.zeros(sys2.shape), 1, 2, 2) == 0.0
    for _ in range(10):
        g = rng.standard_normal(sys2.shape)
        r = besov_norm(sys2, g, 0, 2, 2) / sys2.lp_norm(g, 2)
        assert 0.5 <= r <= 2.0


def test_bernstein_single_mode(sys2):
    f = _mode(sys2, 3)
    for j in (1, 2):
        assert bernstein_ratio(sys2, f, j, 1, 2, 2) == pytest.approx(3 / 2**j, rel=1e-12)


def test_bernstein_scale_invariance(sys2):
    rng = np.random.default_rng(3)
    a = bernstein_check(sys2, 1, 1, 2, 2, trials=10, rng=rng)
    b = bernstein_check(sys2, 3, 1, 2, 2, trials=10, rng=rng)
    assert 0 < a.ratio_min <= a.ratio_max < np.inf
    assert 0.25 <= b.ratio_max / a.ratio_max <= 4 and 0.25 <= b.ratio_min / a.ratio_min <= 4
    low = bernstein_check(sys2, 2, 1, 2, np.inf, trials=10, rng=rng, ball=True)
    assert np.isfinite(low.ratio_max)
    with pytest.raises(ValueError):
        bernstein_check(DyadicSystem((8, 8)), 6, 1, 2, 2)


@given(st.integers(0, 2**31 - 1), st.sampled_from([0, 1, 2]))
def test_besov_sobolev_equivalence(seed, s):
    sys = DyadicSystem((32, 32))
    f = np.random.default_rng(seed).standard_normal(sys.shape)
    assert 0.25 <= besov_norm(sys, f, s, 2, 2) / sobolev_norm(sys, f, s) <= 4


def test_mollify(sys2, rng):
    M = 4
    f = sys2.apply(rng.standard_normal(sys2.shape), sys2.kabs <= 2 ** (M - 1))
    np.testing.assert_allclose(mollify(sys2, f, M), f, atol=1e-12)
    assert sys2.lp_norm(mollify(sys2, _mode(sys2, 30), 2), 2) <= 1e-10
    with pytest.raises(ValueError):
        mollify(sys2, f, -1)
    g = rng.standard_normal(sys2.shape)
    C = mollifier_constant(sys2, g, range(2, 7))
    assert 0 < C < 10


def test_low_pass_bounds(sys2):
    assert np.max(np.abs(sys2.low_pass(3))) <= 1.0
    norms = [kernel_l1_norm(sys2, j) for j in range(1, 4)]
    assert max(norms) / min(norms) <= 1.2
