"""Dual-side seminorms: oscillation, Lipschitz, Carleson-measure, and family forms.

All cube suprema run over the documented enumeration: lattice-aligned
dyadic cubes inside the box from cell size up to side 2L, plus their
half-shifted copies.  Small cubes (|Q| < 1) score polynomial-corrected
oscillation; large cubes score plain size.  The family-type norms are
honest lower-bound estimators driven by caller families plus greedy
library families built from the top single-cube scores.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .atoms import AtomicDecomposition, synthesize
from .errors import DegenerateCubeError, GridError, RegimeError
from .exponent import ExponentField, atom_moment_degree
from .grid import Cube, Grid, GridFunction
from .littlewood_paley import FilterBank
from .luxemburg import luxemburg_norm


@dataclass
class CubeFamily:
    cubes: list[Cube]
    weights: np.ndarray
    label: str = ""

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        if len(self.cubes) != self.weights.size:
            raise ValueError("weight count does not match cube count")
        if np.any(self.weights < 0):
            raise ValueError("weights must be nonnegative")


@dataclass
class DualNormResult:
    value: float
    small_term: float
    large_term: float
    argmax_small: dict | None = None
    argmax_large: dict | None = None
    skipped_small: int = 0
    meta: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# cube enumeration as reshaped views


def _level_sides(grid: Grid) -> list[int]:
    """Cube sides in cells, from single cells up to the whole box."""
    out = []
    s = 1
    while s <= grid.m:
        out.append(s)
        s *= 2
    return out


def _views(values: np.ndarray, grid: Grid, s: int, shifted: bool) -> tuple[np.ndarray, list]:
    """(num_cubes, cells) view of every side-s cube; optionally half-shifted.

    Returns the stacked values and the per-cube lower-corner cell indices.
    """
    m = grid.m
    if shifted and (s < 2 or s > m - s // 2):
        return np.zeros((0, s**grid.n)), []
    off = s // 2 if shifted else 0
    count = (m - off) // s
    if count == 0:
        return np.zeros((0, s**grid.n)), []
    if grid.n == 1:
        block = values[off : off + count * s].reshape(count, s)
        corners = [(off + i * s,) for i in range(count)]
        return block, corners
    block = values[off : off + count * s, off : off + count * s]
    block = block.reshape(count, s, count, s).transpose(0, 2, 1, 3).reshape(count * count, s * s)
    corners = [(off + i * s, off + j * s) for i in range(count) for j in range(count)]
    return block, corners


def _indicator_norms_rows(p_rows: np.ndarray, cell: float, tol: float = 1e-10) -> np.ndarray:
    """Vectorized Luxemburg norms of the indicator of each row's cell set."""
    count, cells = p_rows.shape
    if count == 0:
        return np.zeros(0)
    measure = cells * cell
    hi = np.full(count, measure + 1.0)
    lo = np.full(count, min(1.0, cell))

    def mod(lams):
        return np.sum(np.exp(-p_rows * np.log(lams)[:, None]), axis=1) * cell

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
    for _ in range(200):
        vals = 0.5 * (lo + hi)
        m = mod(vals)
        if np.all(np.abs(m - 1.0) <= tol):
            break
        grow = m > 1.0
        lo = np.where(grow, vals, lo)
        hi = np.where(grow, hi, vals)
    return vals


def _local_monomials(grid: Grid, s: int, d: int) -> np.ndarray:
    """Centered, cube-scaled monomial columns on a side-s cube's local cells."""
    u = ((np.arange(s) + 0.5) / s) * 2.0 - 1.0
    if grid.n == 1:
        return np.stack([u**a for a in range(d + 1)], axis=1)
    cols = []
    for a in range(d + 1):
        for b in range(d + 1 - a):
            cols.append(np.outer(u**a, u**b).ravel())
    return np.stack(cols, axis=1)


def _cached_indicator_norms(p: ExponentField, grid: Grid, s: int, shifted: bool) -> np.ndarray:
    cache = p.__dict__.setdefault("_indicator_norm_cache", {})
    key = (grid.J, grid.L, grid.n, s, shifted)
    if key not in cache:
        prows, _ = _views(p.values, grid, s, shifted)
        cache[key] = _indicator_norms_rows(prows, grid.h**grid.n)
    return cache[key]


def _cube_from_corner(grid: Grid, corner, s: int) -> Cube:
    side = s * grid.h
    center = tuple(-grid.L + (c + s / 2.0) * grid.h for c in corner)
    return Cube(center=center, side=side)


def _oscillation_rows(rows: np.ndarray, V: np.ndarray, qp: float) -> np.ndarray:
    """(mean |row - proj(row)|^(q')) ^ (1/q') per row for the shared basis V."""
    pinv = np.linalg.pinv(V)
    coeffs = rows @ pinv.T
    resid = rows - coeffs @ V.T
    return np.mean(np.abs(resid) ** qp, axis=1) ** (1.0 / qp)


def _size_rows(rows: np.ndarray, qp: float) -> np.ndarray:
    return np.mean(np.abs(rows) ** qp, axis=1) ** (1.0 / qp)


def bmo_norm(
    g: GridFunction,
    p: ExponentField,
    q: float = 2.0,
    d: int | None = None,
    extra_cubes: list[Cube] | None = None,
) -> DualNormResult:
    """Oscillation seminorm: polynomial-corrected averages on small cubes plus
    plain averages on large cubes, each scaled by |Q| / ||chi_Q||.

    Requires sup p <= 1 (the family-type variant covers sup p > 1).
    """
    return _two_regime_norm(g, p, q, d, extra_cubes, kind="bmo")


def lip_norm(g: GridFunction, p: ExponentField) -> DualNormResult:
    """Lipschitz-type seminorm: sup oscillation on small cubes, sup on large."""
    return _two_regime_norm(g, p, q=2.0, d=0, extra_cubes=None, kind="lip")


def _two_regime_norm(g, p, q, d, extra_cubes, kind) -> DualNormResult:
    grid = g.grid
    if p.grid != grid:
        raise GridError("function and exponent live on different grids")
    if p.p_plus > 1.0 + 1e-12:
        raise RegimeError("this seminorm needs sup p <= 1; use the family-type variant")
    if not (1.0 < q < math.inf):
        raise ValueError(f"q must lie in (1, inf), got {q}")
    qp = q / (q - 1.0)
    if d is None:
        d = atom_moment_degree(p, grid.n)
    cell = grid.h**grid.n
    small_best, large_best = 0.0, 0.0
    arg_small, arg_large = None, None
    skipped = 0
    for s in _level_sides(grid):
        side = s * grid.h
        measure = side**grid.n
        V = _local_monomials(grid, s, d) if measure < 1.0 and kind == "bmo" else None
        if V is not None and V.shape[0] < V.shape[1]:
            skipped += _count_cubes(grid, s)
            continue
        for shifted in (False, True):
            rows, corners = _views(g.values, grid, s, shifted)
            if not len(corners):
                continue
            norms = _cached_indicator_norms(p, grid, s, shifted)
            if measure < 1.0:
                if kind == "bmo":
                    osc = _oscillation_rows(rows, V, qp)
                else:
                    osc = rows.max(axis=1) - rows.min(axis=1)
                scores = measure / norms * osc
                k = int(np.argmax(scores)) if scores.size else 0
                if scores.size and scores[k] > small_best:
                    small_best = float(scores[k])
                    arg_small = {"corner": corners[k], "side": side, "shifted": shifted}
            else:
                if kind == "bmo":
                    sz = _size_rows(rows, qp)
                else:
                    sz = np.abs(rows).max(axis=1)
                scores = measure / norms * sz
                k = int(np.argmax(scores)) if scores.size else 0
                if scores.size and scores[k] > large_best:
                    large_best = float(scores[k])
                    arg_large = {"corner": corners[k], "side": side, "shifted": shifted}
    if extra_cubes:
        for cube in extra_cubes:
            regime, score = _single_cube_score(g, p, cube, q, d, kind)
            if regime == "small" and score > small_best:
                small_best, arg_small = score, {"cube": cube}
            elif regime == "large" and score > large_best:
                large_best, arg_large = score, {"cube": cube}
    return DualNormResult(
        value=small_best + large_best,
        small_term=small_best,
        large_term=large_best,
        argmax_small=arg_small,
        argmax_large=arg_large,
        skipped_small=skipped,
        meta={"q": q, "d": d, "kind": kind},
    )


def _count_cubes(grid: Grid, s: int) -> int:
    c = grid.m // s
    cs = max(0, (grid.m - s // 2) // s) if s >= 2 else 0
    return c**grid.n + cs**grid.n


def _single_cube_score(g, p, cube: Cube, q, d, kind) -> tuple[str, float]:
    """Score one explicit cube with grid-measure semantics (clipped at the box)."""
    grid = g.grid
    qp = q / (q - 1.0)
    w = cube.cell_window(grid)
    vals = g.values[w].ravel()
    if vals.size == 0:
        return "small", 0.0
    measure = vals.size * grid.h**grid.n
    norm = luxemburg_norm(_window_indicator(grid, w), p).value
    if measure < 1.0:
        if kind == "bmo":
            V = _window_monomials(grid, w, cube, d)
            if V.shape[0] < V.shape[1]:
                raise DegenerateCubeError(f"cube {cube} has too few cells for degree {d}")
            coeffs, *_ = np.linalg.lstsq(V, vals, rcond=None)
            resid = vals - V @ coeffs
            osc = float(np.mean(np.abs(resid) ** qp) ** (1.0 / qp))
        else:
            osc = float(vals.max() - vals.min())
        return "small", measure / norm * osc
    if kind == "bmo":
        sz = float(np.mean(np.abs(vals) ** qp) ** (1.0 / qp))
    else:
        sz = float(np.max(np.abs(vals)))
    return "large", measure / norm * sz


def _window_indicator(grid: Grid, window) -> GridFunction:
    out = np.zeros(grid.shape)
    out[window] = 1.0
    return GridFunction(grid, out)


def _window_monomials(grid: Grid, window, cube: Cube, d: int) -> np.ndarray:
    axes = [(grid.axis[s] - c) / (cube.side / 2.0) for s, c in zip(window, cube.center)]
    if grid.n == 1:
        return np.stack([axes[0] ** a for a in range(d + 1)], axis=1)
    cols = []
    for a in range(d + 1):
        for b in range(d + 1 - a):
            cols.append(np.outer(axes[0] ** a, axes[1] ** b).ravel())
    return np.stack(cols, axis=1)


def project_on_cube(g: GridFunction, cube: Cube, d: int):
    """Unweighted least-squares polynomial on the cube's cells.

    The residual is orthogonal to every monomial through degree d on the
    cube; under-determined cubes raise.
    """
    from .czdecomp import PolynomialProjection

    grid = g.grid
    w = cube.cell_window(grid)
    vals = g.values[w].ravel()
    if vals.size == 0:
        raise DegenerateCubeError(f"cube {cube} misses the grid")
    V = _window_monomials(grid, w, cube, d)
    if V.shape[0] < V.shape[1]:
        raise DegenerateCubeError(
            f"cube {cube} carries {V.shape[0]} cells; degree {d} needs {V.shape[1]}"
        )
    coeffs, *_ = np.linalg.lstsq(V, vals, rcond=None)
    return PolynomialProjection(d, coeffs, cube.center, cube.side / 2.0, weight_id=f"cube@{cube.center}")


# ---------------------------------------------------------------------------
# Carleson-measure form


def cmo_norm(g: GridFunction, p: ExponentField, bank: FilterBank) -> DualNormResult:
    """Carleson-measure seminorm over dyadic cubes with band analyzers.

    Analyzer coefficients at level j come from the bank's level-j multiplier
    (the low-pass at level zero) sampled at cube corners; each dyadic cube P
    aggregates the squared coefficients of its descendants.
    """
    grid = g.grid
    if p.p_plus > 1.0 + 1e-12:
        raise RegimeError("carleson-measure seminorm needs sup p <= 1")
    cell = grid.h**grid.n
    levels = bank.J_max
    # per-level squared coefficients |<g, analyzer_Q>|^2 = |Q| val(corner)^2
    sq = []
    for j in range(levels + 1):
        conv = bank.apply_level(g, j)
        cells = 2 ** (grid.J - j)
        measure = (cells * grid.h) ** grid.n
        if grid.n == 1:
            corner = conv[::cells]
        else:
            corner = conv[::cells, ::cells]
        sq.append(measure * corner**2)
    # bottom-up aggregation: agg[j][k] = sum of sq over descendants of Q_{jk}
    agg = [None] * (levels + 1)
    agg[levels] = sq[levels]
    for j in range(levels - 1, -1, -1):
        child = agg[j + 1]
        if grid.n == 1:
            folded = child.reshape(-1, 2).sum(axis=1)
        else:
            mm = child.shape[0]
            folded = child.reshape(mm // 2, 2, mm // 2, 2).sum(axis=(1, 3))
        agg[j] = sq[j] + folded
    best, arg = 0.0, None
    for j in range(levels + 1):
        cells = 2 ** (grid.J - j)
        measure = (cells * grid.h) ** grid.n
        norms = _cached_indicator_norms(p, grid, cells, False)
        _, corners = _views(p.values, grid, cells, False)
        scores = np.sqrt(measure * agg[j].ravel()) / norms
        k = int(np.argmax(scores)) if scores.size else 0
        if scores.size and scores[k] > best:
            best = float(scores[k])
            arg = {"corner": corners[k], "side": cells * grid.h}
    return DualNormResult(
        value=best, small_term=best, large_term=0.0, argmax_small=arg,
        meta={"kind": "cmo", "levels": levels},
    )


# ---------------------------------------------------------------------------
# family-type norms


def tilde_bmo_norm(
    g: GridFunction,
    p: ExponentField,
    q: float = 2.0,
    d: int | None = None,
    families: list[CubeFamily] | None = None,
    library_size: int = 8,
) -> DualNormResult:
    """Family-weighted oscillation norm; a lower-bound estimator.

    Each family scores sum_j w_j |Q_j| (regime integrand) divided by the
    norm of sum_j w_j chi_Qj; supplied families are split by cube regime and
    augmented with greedy families built from the top single-cube scores.
    The true supremum ranges over all finite families, so the reported value
    is a certified lower bound, with the maximizing family identified.
    """
    grid = g.grid
    if not (1.0 < q < math.inf):
        raise ValueError(f"q must lie in (1, inf), got {q}")
    if d is None:
        d = atom_moment_degree(p, grid.n)
    families = list(families or [])
    families.extend(_greedy_families(g, p, q, d, library_size))
    small_best, large_best = 0.0, 0.0
    arg_small, arg_large = None, None
    for fam in families:
        if np.all(fam.weights == 0):
            raise ValueError(f"degenerate family {fam.label}: all weights vanish")
        small_idx = [i for i, c in enumerate(fam.cubes) if _grid_measure(grid, c) < 1.0]
        large_idx = [i for i, c in enumerate(fam.cubes) if _grid_measure(grid, c) >= 1.0]
        for idx, regime in ((small_idx, "small"), (large_idx, "large")):
            if not idx:
                continue
            score = _family_score(g, p, fam, idx, q, d, regime)
            if regime == "small" and score > small_best:
                small_best, arg_small = score, {"family": fam.label, "cubes": len(idx)}
            elif regime == "large" and score > large_best:
                large_best, arg_large = score, {"family": fam.label, "cubes": len(idx)}
    return DualNormResult(
        value=small_best + large_best,
        small_term=small_best,
        large_term=large_best,
        argmax_small=arg_small,
        argmax_large=arg_large,
        meta={"kind": "tilde-bmo", "q": q, "d": d, "families": len(families)},
    )


def _grid_measure(grid: Grid, cube: Cube) -> float:
    w = cube.cell_window(grid)
    cells = 1
    for s in w:
        cells *= max(0, s.stop - s.start)
    return cells * grid.h**grid.n


def _family_score(g, p, fam: CubeFamily, idx, q, d, regime) -> float:
    grid = g.grid
    qp = q / (q - 1.0)
    stacked = np.zeros(grid.shape)
    total = 0.0
    for i in idx:
        cube, wgt = fam.cubes[i], fam.weights[i]
        if wgt == 0:
            continue
        win = cube.cell_window(grid)
        vals = g.values[win].ravel()
        if vals.size == 0:
            continue
        measure = vals.size * grid.h**grid.n
        if regime == "small":
            V = _window_monomials(grid, win, cube, d)
            if V.shape[0] < V.shape[1]:
                raise DegenerateCubeError(f"family cube {cube} under-determines degree {d}")
            coeffs, *_ = np.linalg.lstsq(V, vals, rcond=None)
            integrand = float(np.mean(np.abs(vals - V @ coeffs) ** qp) ** (1.0 / qp))
        else:
            integrand = float(np.mean(np.abs(vals) ** qp) ** (1.0 / qp))
        total += wgt * measure * integrand
        stacked[win] += wgt
    if total == 0.0:
        return 0.0
    denom = luxemburg_norm(GridFunction(grid, stacked), p).value
    if denom == 0.0:
        raise ValueError("family indicator sum has zero norm")
    return total / denom


def _greedy_families(g, p, q, d, k: int) -> list[CubeFamily]:
    """Families assembled from the top-k single-cube oscillation scores."""
    if k <= 0:
        return []
    grid = g.grid
    qp = q / (q - 1.0)
    cell = grid.h**grid.n
    scored: list[tuple[float, Cube]] = []
    for s in _level_sides(grid):
        side = s * grid.h
        measure = side**grid.n
        small = measure < 1.0
        V = _local_monomials(grid, s, d) if small else None
        if small and V.shape[0] < V.shape[1]:
            continue
        for shifted in (False, True):
            rows, corners = _views(g.values, grid, s, shifted)
            if not len(corners):
                continue
            norms = _cached_indicator_norms(p, grid, s, shifted)
            vals = _oscillation_rows(rows, V, qp) if small else _size_rows(rows, qp)
            scores = measure / norms * vals
            for i in np.argsort(scores)[-2:]:
                scored.append((float(scores[i]), _cube_from_corner(grid, corners[i], s)))
    scored.sort(key=lambda t: -t[0])
    top = [c for _, c in scored[:k]]
    fams = [CubeFamily([c], np.ones(1), label=f"top{i}") for i, c in enumerate(top)]
    if len(top) > 1:
        fams.append(CubeFamily(top, np.ones(len(top)), label="top-k-uniform"))
        inv = np.array([1.0 / max(_grid_measure(grid, c), 1e-300) for c in top])
        fams.append(CubeFamily(top, inv, label="top-k-inverse-measure"))
    return fams


# ---------------------------------------------------------------------------
# pairing bound


def duality_pairing(
    dec: AtomicDecomposition,
    g: GridFunction,
    p: ExponentField,
    q: float = 2.0,
) -> tuple[float, float, float]:
    """Integral pairing of a finite decomposition against g, with its bound.

    Returns (pairing, bound, ratio) where the bound is the weighted sum of
    indicator norms times the oscillation seminorm of g (whose cube
    enumeration is extended by the decomposition's own cubes).
    """
    grid = g.grid
    if p.p_plus > 1.0 + 1e-12:
        raise RegimeError("the pairing bound needs sup p <= 1")
    synth = synthesize(dec)
    pairing = float(np.sum(synth.values * g.values) * grid.h**grid.n)
    d_min = min((a.d for a in dec.atoms), default=atom_moment_degree(p, grid.n))
    dual = bmo_norm(g, p, q=q, d=d_min, extra_cubes=[a.cube for a in dec.atoms])
    weight = 0.0
    for lam, atom in zip(dec.coefficients, dec.atoms):
        w = atom.cube.cell_window(grid)
        norm = luxemburg_norm(_window_indicator(grid, w), p).value
        weight += lam * norm
    bound = weight * dual.value
    ratio = abs(pairing) / bound if bound > 0 else math.inf
    return pairing, bound, ratio
