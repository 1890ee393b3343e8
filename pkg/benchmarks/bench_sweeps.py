"""Benchmark the compiled decaying-max sweep against the numpy fallback.

The sweep is the hot loop of the tangential maximal function: per dilation
level, out[i] = max_k g[k] w[|i-k|].  Run after installing the package;
force the fallback inside one process via VARHARDY_NO_EXT=1 or compare both
paths here directly.

    python3 benchmarks/bench_sweeps.py
"""

import time

import numpy as np

from varhardy.sweeps import HAVE_COMPILED, decaying_max_sweep_1d_py

try:
    from varhardy._sweep import decaying_max_sweep as compiled_sweep
except ImportError:
    compiled_sweep = None


def tangential_weights(n: int, h: float, level: int, A: float = 4.0, B: float = 2.0) -> np.ndarray:
    dist = np.arange(n) * h
    return 1.0 / ((1.0 + dist / 2.0**-level) ** A * np.exp2(B * dist))


def localized_signal(n: int, kind: str, rng) -> np.ndarray:
    x = np.linspace(-8, 8, n)
    if kind == "bump":
        return np.exp(-8 * x**2) * (1 + 0.5 * np.sin(5 * x))
    if kind == "noise":
        return np.abs(rng.normal(size=n))
    if kind == "sparse":
        out = np.zeros(n)
        out[rng.integers(0, n, size=max(4, n // 200))] = np.abs(rng.normal(size=max(4, n // 200)))
        return out
    raise ValueError(kind)


def time_one(fn, g, w, repeats=3):
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn(g, w)
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    rng = np.random.default_rng(0)
    print(f"compiled extension available: {HAVE_COMPILED}")
    header = f"{'n':>7} {'signal':>8} {'level':>5} {'fallback':>12} {'compiled':>12} {'speedup':>8}"
    print(header)
    print("-" * len(header))
    for n in (2048, 8192, 16384):
        h = 16.0 / n
        for kind in ("bump", "noise", "sparse"):
            g = np.ascontiguousarray(localized_signal(n, kind, rng))
            for level in (0, 5, 9):
                w = np.ascontiguousarray(tangential_weights(n, h, level))
                t_py, out_py = time_one(decaying_max_sweep_1d_py, g, w)
                if compiled_sweep is not None:
                    t_c, out_c = time_one(compiled_sweep, g, w)
                    assert np.array_equal(out_py, out_c), "paths disagree"
                    print(f"{n:>7} {kind:>8} {level:>5} {t_py * 1e3:>10.2f}ms {t_c * 1e3:>10.2f}ms {t_py / t_c:>7.1f}x")
                else:
                    print(f"{n:>7} {kind:>8} {level:>5} {t_py * 1e3:>10.2f}ms {'-':>12} {'-':>8}")


if __name__ == "__main__":
    main()
