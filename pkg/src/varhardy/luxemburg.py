"""Modular and Luxemburg norm of variable-exponent Lebesgue spaces.

The modular rho(f, lam) = integral of (|f|/lam)^p(x) is strictly decreasing
in lam for f != 0, so the norm (the infimal lam with rho <= 1) is found by
bisection on the residual rho - 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError
from .exponent import ExponentField
from .grid import GridFunction, lq_norm, same_grid

DEFAULT_TOL = 1e-10
MAX_ITER = 200
_LOG_OVERFLOW = 700.0


@dataclass
class NormResult:
    """Luxemburg norm value with the bisection diagnostics."""

    value: float
    residual: float
    iterations: int
    converged: bool = True
    overflow_seen: bool = False

    def __float__(self):
        return self.value


def modular(f: GridFunction, p: ExponentField, lam: float) -> float:
    """Quadrature value of the modular at height lam; overflow clamps to +inf."""
    if lam <= 0:
        raise ValueError(f"height must be positive, got {lam}")
    if f.grid != p.grid:
        raise InvalidInputError("function and exponent live on different grids")
    return _modular_from_samples(np.abs(f.values).ravel(), p.values.ravel(), lam, f.grid.h**f.grid.n)


def _modular_from_samples(absf: np.ndarray, pv: np.ndarray, lam: float, cell: float) -> float:
    nz = absf > 0.0
    if not np.any(nz):
        return 0.0
    a = absf[nz]
    q = pv[nz]
    # evaluate in log space: exponent-magnitude products past 700 overflow double
    e = q * (np.log(a) - math.log(lam))
    top = float(np.max(e))
    if top > _LOG_OVERFLOW:
        return math.inf
    return float(np.sum(np.exp(e)) * cell)


def luxemburg_norm(
    f: GridFunction, p: ExponentField, tol: float = DEFAULT_TOL, max_iter: int = MAX_ITER
) -> NormResult:
    """Bisection for the infimal lam with modular(f, lam) <= 1.

    Terminates when |modular - 1| <= tol; on hitting the iteration cap the
    best bracket midpoint is returned with converged=False.
    """
    if tol <= 0:
        raise ValueError("tolerance must be positive")
    if f.grid != p.grid:
        raise InvalidInputError("function and exponent live on different grids")
    if not np.all(np.isfinite(f.values)):
        raise InvalidInputError("non-finite samples")
    absf = np.abs(f.values).ravel()
    if not np.any(absf > 0):
        return NormResult(0.0, 0.0, 0, True)
    pv = p.values.ravel()
    cell = f.grid.h**f.grid.n
    sup = float(np.max(absf))
    measure = cell * float(np.count_nonzero(absf))

    overflow = False

    def mod(lam: float) -> float:
        nonlocal overflow
        v = _modular_from_samples(absf, pv, lam, cell)
        if v == math.inf:
            overflow = True
        return v

    iters = 0
    hi = sup * (measure + 1.0)
    while mod(hi) > 1.0 and iters < max_iter:
        hi *= 4.0
        iters += 1
    lo = min(hi / 4.0, sup * min(1.0, cell) ** (1.0 / p.p_minus))
    while mod(lo) <= 1.0 and iters < max_iter:
        lo /= 4.0
        iters += 1

    value = 0.5 * (lo + hi)
    residual = math.inf
    while iters < max_iter:
        iters += 1
        value = 0.5 * (lo + hi)
        m = mod(value)
        residual = abs(m - 1.0)
        if residual <= tol:
            return NormResult(value, residual, iters, True, overflow)
        if m > 1.0:
            lo = value
        else:
            hi = value
        if hi - lo <= 1e-17 * value:
            # bracket exhausted below the residual tolerance (modular jump)
            return NormResult(value, residual, iters, True, overflow)
    return NormResult(0.5 * (lo + hi), residual, iters, False, overflow)


def norm_value(f: GridFunction, p: ExponentField, tol: float = DEFAULT_TOL) -> float:
    return luxemburg_norm(f, p, tol).value


def holder_pairing(
    f: GridFunction, g: GridFunction, p1: ExponentField, p2: ExponentField
) -> tuple[float, float]:
    """Both sides of the product-norm inequality.

    Returns (lhs, rhs) with lhs = ||f g|| in the combined exponent
    1/p = 1/p1 + 1/p2 and rhs = ||f||_{p1} ||g||_{p2}; the caller owns the
    comparison constant.
    """
    grid = same_grid(f, g)
    if p1.grid != grid or p2.grid != grid:
        raise InvalidInputError("incompatible grids")
    inv = 1.0 / p1.values + 1.0 / p2.values
    p = ExponentField(grid, 1.0 / inv, 1.0 / (1.0 / p1.p_infinity + 1.0 / p2.p_infinity))
    prod = GridFunction(grid, f.values * g.values)
    lhs = norm_value(prod, p)
    rhs = norm_value(f, p1) * norm_value(g, p2)
    return lhs, rhs


# ---------------------------------------------------------------------------
# executable forms of the classical norm inequalities


def power_triangle_sides(
    f: GridFunction, g: GridFunction, p: ExponentField
) -> tuple[float, float]:
    """(||f+g||^s, ||f||^s + ||g||^s) with s = min(inf p, 1)."""
    grid = same_grid(f, g)
    s = p.p_lower
    both = GridFunction(grid, f.values + g.values)
    lhs = norm_value(both, p) ** s
    rhs = norm_value(f, p) ** s + norm_value(g, p) ** s
    return lhs, rhs


def indicator_bound_sides(mask: np.ndarray, p: ExponentField) -> tuple[float, float]:
    """(||chi_E||, |E| + 1) for a cell-union set E; meaningful for inf p >= 1."""
    f = GridFunction(p.grid, mask.astype(float))
    measure = float(np.count_nonzero(mask)) * p.grid.h**p.grid.n
    return norm_value(f, p), measure + 1.0


def batch_indicator_norms(
    p: ExponentField, windows: list[tuple[slice, ...]], tol: float = DEFAULT_TOL
) -> np.ndarray:
    """Luxemburg norms of cell-window indicators, bisected jointly.

    All windows are independent; the bisection is vectorized across them.
    """
    cell = p.grid.h**p.grid.n
    pv = p.values
    plists = [pv[w].ravel() for w in windows]
    sizes = np.array([len(x) for x in plists], dtype=float)
    out = np.zeros(len(windows))
    live = sizes > 0
    if not np.any(live):
        return out
    idx = np.nonzero(live)[0]
    flat = np.concatenate([plists[i] for i in idx])
    bounds = np.cumsum([0] + [len(plists[i]) for i in idx])
    measures = sizes[idx] * cell

    def mod(lams: np.ndarray) -> np.ndarray:
        # modular of chi_W / lam per window, computed on the packed samples
        lam_per = np.repeat(lams, np.diff(bounds))
        terms = np.exp(-flat * np.log(lam_per))
        return np.add.reduceat(terms, bounds[:-1]) * cell

    hi = measures + 1.0
    lo = np.minimum(hi / 2.0, np.full_like(hi, min(1.0, cell)))
    for _ in range(80):
        bad = mod(hi) > 1.0
        if not np.any(bad):
            break
        hi[bad] *= 4.0
    for _ in range(80):
        bad = mod(lo) <= 1.0
        if not np.any(bad):
            break
        lo[bad] /= 4.0
    vals = 0.5 * (lo + hi)
    for _ in range(MAX_ITER):
        vals = 0.5 * (lo + hi)
        m = mod(vals)
        res = np.abs(m - 1.0)
        if np.all(res <= tol):
            break
        grow = m > 1.0
        lo = np.where(grow, vals, lo)
        hi = np.where(grow, hi, vals)
    out[idx] = vals
    return out


def constant_norm(f: GridFunction, p0: float) -> float:
    """Classical L^p0 norm; the constant-exponent consistency oracle."""
    return lq_norm(f, p0)
