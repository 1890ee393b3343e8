"""Weighted decaying max sweeps with a compiled fast path.

The tangential maximal function needs, per dilation level, the full sweep
out[i] = max_k g[k] * w[|i-k|] with a nonincreasing weight table w.  That
brute-force loop dominates runtime, so a Cython kernel handles the 1-d case
when the extension built; a vectorized numpy fallback (also the only 2-d
path) is selected at import otherwise.  Set VARHARDY_NO_EXT=1 to force the
fallback.
"""

from __future__ import annotations

import os

import numpy as np

try:
    if os.environ.get("VARHARDY_NO_EXT"):
        raise ImportError("extension disabled by VARHARDY_NO_EXT")
    from ._sweep import decaying_max_sweep as _compiled_sweep

    HAVE_COMPILED = True
except ImportError:
    _compiled_sweep = None
    HAVE_COMPILED = False


def _check_weights(w: np.ndarray) -> np.ndarray:
    w = np.ascontiguousarray(w, dtype=float)
    if np.any(w < 0) or np.any(np.diff(w) > 1e-15):
        raise ValueError("weight table must be nonnegative and nonincreasing")
    return w


def decaying_max_sweep_1d_py(g: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Pure-numpy sweep: offsets in increasing distance with per-point pruning."""
    g = np.asarray(g, dtype=float)
    n = g.shape[0]
    out = g * w[0]
    if n <= 1:
        return out
    pref = np.maximum.accumulate(g)
    suf = np.maximum.accumulate(g[::-1])[::-1]
    for d in range(1, n):
        wd = w[d]
        if wd <= 0.0:
            break
        # best achievable from offsets >= d at every point
        bound = np.zeros(n)
        bound[d:] = pref[:-d]
        bound[:-d] = np.maximum(bound[:-d], suf[d:])
        if np.all(bound * wd <= out):
            break
        out[d:] = np.maximum(out[d:], g[:-d] * wd)
        out[:-d] = np.maximum(out[:-d], g[d:] * wd)
    return out


def decaying_max_sweep_1d(g: np.ndarray, w: np.ndarray) -> np.ndarray:
    """out[i] = max_k g[k] * w[|i-k|]; w nonincreasing, len(w) >= len(g)."""
    w = _check_weights(w)
    g = np.ascontiguousarray(g, dtype=float)
    if HAVE_COMPILED:
        return _compiled_sweep(g, w)
    return decaying_max_sweep_1d_py(g, w)


def decaying_max_sweep_2d(g: np.ndarray, weight_fn) -> np.ndarray:
    """2-d sweep with a radially nonincreasing weight of Euclidean cell distance.

    weight_fn maps a distance in cells (float) to the weight; it must be
    nonincreasing.  Offsets are visited in Chebyshev rings and pruned once a
    whole ring cannot beat the current global minimum.
    """
    g = np.asarray(g, dtype=float)
    m0, m1 = g.shape
    out = g * float(weight_fn(0.0))
    gmax = float(np.max(g)) if g.size else 0.0
    for ring in range(1, max(m0, m1)):
        # Euclidean distance on the ring is >= the Chebyshev radius
        if float(weight_fn(float(ring))) * gmax <= float(np.min(out)):
            break
        for dx, dy in _ring_offsets(ring):
            wd = float(weight_fn(float(np.hypot(dx, dy))))
            if wd * gmax <= 0.0:
                continue
            src = g[
                max(0, -dx) : m0 - max(0, dx),
                max(0, -dy) : m1 - max(0, dy),
            ]
            tgt = out[
                max(0, dx) : m0 - max(0, -dx),
                max(0, dy) : m1 - max(0, -dy),
            ]
            np.maximum(tgt, src * wd, out=tgt)
    return out


def _ring_offsets(r: int) -> list[tuple[int, int]]:
    offs = []
    for dx in range(-r, r + 1):
        for dy in range(-r, r + 1):
            if max(abs(dx), abs(dy)) == r:
                offs.append((dx, dy))
    return offs
