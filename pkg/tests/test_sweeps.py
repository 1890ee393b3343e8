import numpy as np
import pytest

from varhardy.sweeps import (
    HAVE_COMPILED,
    decaying_max_sweep_1d,
    decaying_max_sweep_1d_py,
    decaying_max_sweep_2d,
)


def _brute(g, w):
    n = len(g)
    return np.array([max(g[k] * w[abs(i - k)] for k in range(n)) for i in range(n)])


@pytest.mark.parametrize("n", [1, 7, 64, 257])
def test_fallback_matches_brute_force(n):
    rng = np.random.default_rng(n)
    g = np.abs(rng.normal(size=n))
    g[: n // 3] = 0.0
    w = np.exp(-0.05 * np.arange(n) ** 1.2)
    assert np.array_equal(decaying_max_sweep_1d_py(g, w), _brute(g, w))


@pytest.mark.skipif(not HAVE_COMPILED, reason="extension not built")
@pytest.mark.parametrize("n", [1, 7, 64, 257])
def test_compiled_matches_brute_force(n):
    from varhardy._sweep import decaying_max_sweep

    rng = np.random.default_rng(n)
    g = np.abs(rng.normal(size=n))
    w = 1.0 / (1.0 + np.arange(n, dtype=float)) ** 2
    assert np.array_equal(decaying_max_sweep(np.ascontiguousarray(g), np.ascontiguousarray(w)), _brute(g, w))


@pytest.mark.skipif(not HAVE_COMPILED, reason="extension not built")
def test_compiled_and_fallback_bit_identical():
    from varhardy._sweep import decaying_max_sweep

    rng = np.random.default_rng(0)
    for trial in range(5):
        n = int(rng.integers(10, 3000))
        g = np.abs(rng.normal(size=n)) * rng.integers(0, 2, size=n)
        w = np.sort(np.abs(rng.normal(size=n)))[::-1].copy()
        a = decaying_max_sweep(np.ascontiguousarray(g), np.ascontiguousarray(w))
        b = decaying_max_sweep_1d_py(g, w)
        assert np.array_equal(a, b)


def test_dispatch_validates_weights():
    g = np.ones(8)
    with pytest.raises(ValueError):
        decaying_max_sweep_1d(g, np.arange(8.0))  # increasing
    with pytest.raises(ValueError):
        decaying_max_sweep_1d(g, -np.ones(8))


def test_2d_matches_brute_force():
    rng = np.random.default_rng(1)
    m = 24
    g = np.abs(rng.normal(size=(m, m)))
    fn = lambda d: 1.0 / (1.0 + 0.4 * d) ** 3
    got = decaying_max_sweep_2d(g, fn)
    want = np.zeros_like(g)
    for i in range(m):
        for j in range(m):
            di = np.abs(np.arange(m) - i)[:, None]
            dj = np.abs(np.arange(m) - j)[None, :]
            want[i, j] = np.max(g * fn(np.hypot(di, dj)))
    assert np.array_equal(got, want)
