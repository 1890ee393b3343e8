"""Calderon-Zygmund machinery on cell masks.

Whitney cubes of a level set, subordinate partitions of unity, weighted
polynomial projections, the good/bad splitting at a height, and the full
multi-height atomization with its finite truncation.  All sets are cell
unions; distances use the chessboard metric between cell centers, and the
finest cells are accepted unconditionally (the finite-grid truncation of
the unbounded refinement near the boundary).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import distance_transform_cdt

from .atoms import Atom, AtomicDecomposition, validate_atom
from .errors import (
    BudgetInfeasibleError,
    ConstructionError,
    DegreeError,
    GridError,
    IllConditionedError,
)
from .exponent import ExponentField, atom_moment_degree
from .grid import Cube, Grid, GridFunction, lq_norm
from .luxemburg import luxemburg_norm
from .maximal import MaximalResult, TestFunctionDictionary, default_dictionary, grand_maximal

MAX_WHITNEY_SIDE = 2.0
TELESCOPE_TOL = 1e-10
MAX_LEVELS = 256


def _dilation_a(n: int) -> float:
    return 1.0 + 2.0 ** -(11 + n)


def _dilation_b(n: int) -> float:
    return 1.0 + 2.0 ** -(10 + n)


@dataclass
class WhitneyDecomposition:
    grid: Grid
    omega: np.ndarray  # boolean cell mask
    cubes: list[Cube]
    a: float
    b: float
    max_star_overlap: int
    boundary_layer_cubes: int  # finest cells accepted without the distance test

    def starred(self, i: int) -> Cube:
        return self.cubes[i].dilate(self.a)


@dataclass
class PartitionOfUnity:
    grid: Grid
    values: list[np.ndarray]  # one per whitney cube, dense

    def eta(self, i: int) -> GridFunction:
        return GridFunction(self.grid, self.values[i].copy())

    def total(self) -> np.ndarray:
        out = np.zeros(self.grid.shape)
        for v in self.values:
            out += v
        return out


@dataclass
class PolynomialProjection:
    """Least-squares polynomial in a cube-centered, cube-scaled monomial basis."""

    degree: int
    coeffs: np.ndarray  # one per multi-index from _multi_indices
    center: tuple[float, ...]
    scale: float
    weight_id: str = ""

    def evaluate(self, grid: Grid) -> np.ndarray:
        return self.evaluate_window(grid, tuple(slice(0, m) for m in grid.shape))

    def evaluate_window(self, grid: Grid, window) -> np.ndarray:
        axes = [(grid.axis[w] - c) / self.scale for w, c in zip(window, self.center)]
        idx = _multi_indices(grid.n, self.degree)
        if grid.n == 1:
            out = np.zeros(axes[0].shape)
            for coef, (a,) in zip(self.coeffs, idx):
                out += coef * axes[0] ** a
            return out
        out = np.zeros((axes[0].size, axes[1].size))
        for coef, (a, b) in zip(self.coeffs, idx):
            out += coef * np.outer(axes[0] ** a, axes[1] ** b)
        return out


@dataclass
class CZDecomposition:
    good: GridFunction
    bad: list[GridFunction]
    whitney: WhitneyDecomposition
    pou: PartitionOfUnity
    projections: list[PolynomialProjection | None]
    height: float

    def bad_sum(self) -> np.ndarray:
        out = np.zeros(self.good.grid.shape)
        for b in self.bad:
            out += b.values
        return out


def _multi_indices(n: int, d: int) -> list[tuple[int, ...]]:
    if n == 1:
        return [(k,) for k in range(d + 1)]
    return [(a, b) for a in range(d + 1) for b in range(d + 1 - a)]


# ---------------------------------------------------------------------------
# Whitney decomposition


def whitney(omega: np.ndarray, grid: Grid) -> WhitneyDecomposition:
    """Maximal dyadic cubes inside the cell mask, sides capped at 2.

    A cube is accepted when it lies in the mask and b * side does not exceed
    the chessboard center distance from the cube to the complement; finest
    cells are accepted whenever they lie in the mask.
    """
    omega = np.asarray(omega, dtype=bool)
    if omega.shape != grid.shape:
        raise GridError("mask shape does not match the grid")
    n = grid.n
    a, b = _dilation_a(n), _dilation_b(n)
    cubes: list[Cube] = []
    boundary = 0
    if not np.any(omega):
        return WhitneyDecomposition(grid, omega, [], a, b, 0, 0)
    if np.all(omega):
        dist = np.full(grid.shape, float(grid.m))
    else:
        dist = distance_transform_cdt(omega, metric="chessboard").astype(float)
    h = grid.h
    side_cells = int(round(min(MAX_WHITNEY_SIDE, 2.0 * grid.L) / h))
    m = grid.m
    stack = []
    for idx in np.ndindex(*(m // side_cells,) * n):
        stack.append((tuple(i * side_cells for i in idx), side_cells))
    while stack:
        corner, w = stack.pop()
        win = tuple(slice(c, c + w) for c in corner)
        block = omega[win]
        if not np.any(block):
            continue
        if np.all(block):
            side = w * h
            fits = b * side <= float(np.min(dist[win])) * h + 1e-12
            if w == 1 or fits:
                if not fits:
                    boundary += 1
                center = tuple(-grid.L + (c + w / 2.0) * h for c in corner)
                level = int(round(math.log2(1.0 / side))) if side <= 1.0 else -int(round(math.log2(side)))
                cubes.append(Cube(center=center, side=side, level=level))
                continue
        if w == 1:
            continue
        half = w // 2
        for off in np.ndindex(*(2,) * n):
            stack.append((tuple(c + o * half for c, o in zip(corner, off)), half))
    cubes.sort(key=lambda q: (q.side, q.center))
    # bounded overlap of the dilated cubes
    counts = np.zeros(grid.shape, dtype=np.int32)
    for q in cubes:
        counts[q.dilate(a).center_window(grid)] += 1
    dec = WhitneyDecomposition(
        grid, omega, cubes, a, b, int(counts.max()) if cubes else 0, boundary
    )
    _check_whitney(dec)
    return dec


def _check_whitney(dec: WhitneyDecomposition) -> None:
    grid = dec.grid
    paint = np.zeros(grid.shape, dtype=np.int32)
    for q in dec.cubes:
        paint[q.cell_window(grid)] += 1
    if not np.array_equal(paint > 0, dec.omega):
        raise ConstructionError("whitney cubes do not tile the mask exactly")
    if np.any(paint > 1):
        raise ConstructionError("whitney cubes overlap")
    for q in dec.cubes:
        w = q.dilate(dec.a).center_window(grid)
        if not np.all(dec.omega[w]):
            raise ConstructionError("a dilated whitney cube escapes the mask")


# ---------------------------------------------------------------------------
# partition of unity


def _smoothstep(v: np.ndarray) -> np.ndarray:
    v = np.clip(v, 0.0, 1.0)
    out = np.zeros_like(v)
    mid = (v > 0) & (v < 1)
    t = v[mid]
    with np.errstate(over="ignore", under="ignore"):
        e0 = np.exp(-1.0 / t)
        e1 = np.exp(-1.0 / (1.0 - t))
    out[mid] = e0 / (e0 + e1)
    out[v >= 1] = 1.0
    return out


def partition_of_unity(dec: WhitneyDecomposition) -> PartitionOfUnity:
    """Bumps equal to 1 on each cube, supported in the dilated cube, normalized on the mask."""
    grid = dec.grid
    bumps = []
    total = np.zeros(grid.shape)
    for q in dec.cubes:
        beta = np.zeros(grid.shape)
        star = q.dilate(dec.a)
        w = star.center_window(grid)
        half_in = q.side / 2.0
        half_out = star.side / 2.0
        axes = [np.abs(grid.axis[s] - c) for s, c in zip(w, q.center)]
        dinf = axes[0] if grid.n == 1 else np.maximum(axes[0][:, None], axes[1][None, :])
        beta[w] = _smoothstep((half_out - dinf) / max(half_out - half_in, 1e-300))
        bumps.append(beta)
        total += beta
    uncovered = dec.omega & ~(total > 0)
    if np.any(uncovered):
        raise ConstructionError("a mask cell is covered by no bump")
    values = []
    safe_total = np.where(total > 0, total, 1.0)
    for beta in bumps:
        eta = np.where(dec.omega, beta / safe_total, 0.0)
        values.append(eta)
    return PartitionOfUnity(grid, values)


# ---------------------------------------------------------------------------
# weighted polynomial projection


def project_weighted(
    f: GridFunction,
    eta: GridFunction,
    d: int,
    center: tuple | None = None,
    scale: float | None = None,
    allow_degenerate: bool = False,
    weight_id: str = "",
) -> PolynomialProjection:
    """Least-squares polynomial of degree d in the weighted inner product.

    The residual f - P is orthogonal to every monomial through degree d
    against the weight; rank-deficient weights keep that orthogonality via
    the minimum-norm solve but raise unless allow_degenerate is set.
    """
    grid = f.grid
    w = eta.values
    if np.any(w < 0):
        raise ValueError("weights must be nonnegative")
    tot = float(np.sum(w))
    if tot <= 0:
        raise ValueError("weight has no mass")
    nz = np.nonzero(w)
    if center is None or scale is None:
        lo = [grid.axis[np.min(ix)] for ix in nz]
        hi = [grid.axis[np.max(ix)] for ix in nz]
        center = tuple((a + b) / 2.0 for a, b in zip(lo, hi))
        scale = max(max((b - a) / 2.0 for a, b in zip(lo, hi)), grid.h)
    cols = []
    pts = [grid.axis[ix] for ix in nz]
    for alpha in _multi_indices(grid.n, d):
        col = np.ones(len(nz[0]))
        for ax_pts, c, a in zip(pts, center, alpha):
            col *= ((ax_pts - c) / scale) ** a
        cols.append(col)
    V = np.stack(cols, axis=1)
    sw = np.sqrt(w[nz])
    A = V * sw[:, None]
    rhs = f.values[nz] * sw
    if not allow_degenerate:
        gram = A.T @ A
        cond = float(np.linalg.cond(gram))
        if not np.isfinite(cond) or cond > 1e12:
            raise IllConditionedError(f"projection weight is degenerate (cond={cond:.3g})")
    coeffs, *_ = np.linalg.lstsq(A, rhs, rcond=None)
    return PolynomialProjection(d, coeffs, tuple(center), float(scale), weight_id)


# ---------------------------------------------------------------------------
# single-height decomposition


def cz_decompose(
    f: GridFunction,
    gmax: MaximalResult | GridFunction,
    height: float,
    p: ExponentField,
    d: int | None = None,
) -> CZDecomposition:
    """Split f into a part bounded at the height plus cube-local pieces.

    The bad pieces live on dilated Whitney cubes of the super-level set;
    on cubes of side below one they are polynomially corrected so their
    moments through degree d vanish.
    """
    if height <= 0:
        raise ValueError("height must be positive")
    need = atom_moment_degree(p, f.grid.n)
    if d is None:
        d = need
    if d < need:
        raise DegreeError(f"degree {d} below required {need}")
    gv = gmax.values.values if isinstance(gmax, MaximalResult) else gmax.values
    omega = gv > height
    return _cz_from_mask(f, omega, height, d)


def _cz_from_mask(f: GridFunction, omega: np.ndarray, height: float, d: int) -> CZDecomposition:
    grid = f.grid
    dec = whitney(omega, grid)
    pou = partition_of_unity(dec)
    bad, projections = [], []
    for q, eta in zip(dec.cubes, pou.values):
        eta_f = GridFunction(grid, eta)
        if q.side < 1.0:
            proj = project_weighted(
                f, eta_f, d, center=q.center, scale=q.side / 2.0, allow_degenerate=True,
                weight_id=f"whitney@{q.center}/{q.side}",
            )
            w = q.dilate(dec.a).center_window(grid)
            vals = np.zeros(grid.shape)
            vals[w] = (f.values[w] - proj.evaluate_window(grid, w)) * eta[w]
            projections.append(proj)
        else:
            vals = f.values * eta
            projections.append(None)
        bad.append(GridFunction(grid, vals))
    good = np.array(f.values, copy=True)
    for bfn in bad:
        good = good - bfn.values
    return CZDecomposition(GridFunction(grid, good), bad, dec, pou, projections, height)


# ---------------------------------------------------------------------------
# multi-height atomization


@dataclass
class _Level:
    k: int
    mask: np.ndarray
    cz: CZDecomposition


def _level_range(gv: np.ndarray) -> tuple[int, int]:
    pos = gv[gv > 0]
    if pos.size == 0:
        return 0, -1
    k_min = int(math.floor(math.log2(float(np.min(pos))))) - 1
    k_max = int(math.ceil(math.log2(float(np.max(gv)))))
    # heights 40 dyadic levels under the top carry relative weight ~1e-12,
    # far below every tolerance; whatever sits under the bottom height goes
    # to the exact floor tiling
    k_min = max(k_min, k_max - 40)
    if k_max - k_min > MAX_LEVELS:
        raise ConstructionError(
            f"height range [{k_min}, {k_max}] too wide; the maximal function has "
            "a dynamic range the atomizer will not sweep"
        )
    return k_min, k_max


def atomize(
    f: GridFunction,
    p: ExponentField,
    q: float = math.inf,
    d: int | None = None,
    bank=None,
    dictionary: TestFunctionDictionary | None = None,
) -> AtomicDecomposition:
    """Constructive atomic decomposition driven by grand-maximal level sets.

    Runs the cube decomposition at every dyadic height that the grand
    maximal function attains, forms the telescoped cube-local differences
    with their polynomial corrections, and normalizes everything by a single
    constant so every piece passes validation.  Reconstruction is exact up
    to accumulation error; any residual below the bottom height is emitted
    as unit-cube atoms.
    """
    grid = f.grid
    n = grid.n
    need = atom_moment_degree(p, n)
    if d is None:
        d = need
    if d < need:
        raise DegreeError(f"degree {d} below required {need}")
    if dictionary is None:
        dictionary = default_dictionary(n, box_halfwidth=grid.L)
    gm = grand_maximal(f, dictionary, mode="vertical")
    gv = np.array(gm.values.values, copy=True)
    if np.any(gv > 0):
        # convolution rounding leaves a noise floor far from the support;
        # values there are not level-set structure
        gv[gv <= 1e-15 * float(np.max(gv))] = 0.0
    k_min, k_max = _level_range(gv)
    if k_max < k_min:
        return AtomicDecomposition([], np.zeros(0), "czd", {"note": "zero maximal function"})

    levels: list[_Level] = []
    prev: _Level | None = None
    for k in range(k_min, k_max + 1):
        mask = gv > 2.0**k
        if prev is not None and np.any(mask & ~prev.mask):
            raise ConstructionError("level sets are not nested")
        if prev is not None and np.array_equal(mask, prev.mask):
            cz = prev.cz  # identical mask: the cube decomposition is reusable
        else:
            cz = _cz_from_mask(f, mask, 2.0**k, d)
        prev = _Level(k, mask, cz)
        levels.append(prev)

    pieces: list[tuple[int, int, Cube, np.ndarray]] = []  # (k, i, cube, values)
    geometry = {"max_side_ratio": 0.0, "max_pair_count": 0, "lemma_pairs": 0}
    cancel_residuals: list[float] = []
    lemma_poly_sup: float = 0.0
    piece_dust = 1e-13 * max(1.0, float(np.max(np.abs(f.values))))
    dust_field = np.zeros(grid.shape)

    for lo, hi in zip(levels[:-1], levels[1:]):
        k = lo.k
        czk, czk1 = lo.cz, hi.cz
        bad_sum_next = czk1.bad_sum()
        # correction polynomials against the next level's small cubes
        small_next = [
            j for j, qc in enumerate(czk1.whitney.cubes) if qc.measure < 1.0
        ]
        corr_by_i: dict[int, np.ndarray] = {}
        corr_total = np.zeros(grid.shape)
        for j in small_next:
            qj = czk1.whitney.cubes[j]
            eta_j = czk1.pou.values[j]
            wj = qj.dilate(czk1.whitney.a).center_window(grid)
            pj_vals = czk1.projections[j].evaluate_window(grid, wj)
            star_j = qj.dilate(czk1.whitney.a)
            for i, qi in enumerate(czk.whitney.cubes):
                star_i = qi.dilate(czk.whitney.a)
                if not star_i.intersects(star_j):
                    continue
                geometry["lemma_pairs"] += 1
                ratio = qj.side / qi.side
                geometry["max_side_ratio"] = max(geometry["max_side_ratio"], ratio)
                if qj.side > 2.0**4 * math.sqrt(n) * qi.side + 1e-12:
                    raise ConstructionError(
                        f"intersecting cubes at heights 2^{k},2^{k + 1} break the "
                        f"side comparison: {qj.side} vs {qi.side}"
                    )
                eta_i_w = czk.pou.values[i][wj]
                if not np.any(eta_i_w > 0):
                    continue
                target = (f.values[wj] - pj_vals) * eta_i_w
                pij = _project_window(grid, wj, target, eta_j[wj], d, qj)
                term = np.zeros(grid.shape)
                term[wj] = pij * eta_j[wj]
                lemma_poly_sup = max(lemma_poly_sup, float(np.max(np.abs(term))) / 2.0 ** (k + 1))
                corr_by_i.setdefault(i, np.zeros(grid.shape))
                corr_by_i[i] += term
                corr_total += term
        scale = max(1.0, float(np.max(np.abs(f.values))))
        cancel = float(np.max(np.abs(corr_total))) / scale
        cancel_residuals.append(cancel)
        if cancel > TELESCOPE_TOL:
            raise ConstructionError(
                f"correction polynomials fail to cancel at height 2^{k} (residual {cancel:.3g})"
            )
        # per-cube pieces of the telescoped difference
        pair_counts: dict[int, int] = {}
        for j in small_next:
            star_j = czk1.whitney.cubes[j].dilate(czk1.whitney.a)
            cnt = sum(
                1
                for qi in czk.whitney.cubes
                if qi.dilate(czk.whitney.a).intersects(star_j)
            )
            pair_counts[j] = cnt
        if pair_counts:
            geometry["max_pair_count"] = max(
                geometry["max_pair_count"], max(pair_counts.values())
            )
        for i, qi in enumerate(czk.whitney.cubes):
            vals = czk.bad[i].values - czk.pou.values[i] * bad_sum_next
            if i in corr_by_i:
                vals = vals + corr_by_i[i]
            if not np.any(vals != 0):
                continue
            if float(np.max(np.abs(vals))) <= piece_dust:
                # telescoping that cancels exactly in the continuum leaves
                # rounding residue; route it to the moment-free unit tiles
                dust_field += vals
                continue
            tilde = qi.dilate(czk.whitney.a * 2.0**6 * n)
            outside = np.ones(grid.shape, dtype=bool)
            outside[tilde.cell_window(grid)] = False
            if np.any(np.abs(vals[outside]) > 0):
                raise ConstructionError(
                    f"piece at height 2^{k} escapes its enlarged cube {tilde}"
                )
            pieces.append((k, i, tilde, vals))

    # residual below the bottom height plus collected dust: unit-cube tiling
    floor_vals = levels[0].cz.good.values + dust_field
    floor_vals[np.abs(floor_vals) <= piece_dust] = 0.0
    floor_pieces = _unit_tiling_pieces(grid, floor_vals)

    if not pieces and not floor_pieces:
        return AtomicDecomposition([], np.zeros(0), "czd", {"note": "nothing to atomize"})

    # single normalization constant across the telescoped pieces
    C = 0.0
    for k, _, cube, vals in pieces:
        nrm = _window_lq(grid, vals, q)
        C = max(C, nrm / (2.0**k * cube.measure ** _inv(q)))
    C = C if C > 0 else 1.0

    atoms, lams, tags = [], [], []
    for k, i, cube, vals in pieces:
        lam = C * 2.0**k
        atoms.append(Atom(cube=cube, samples=GridFunction(grid, vals / lam), q=q, d=d))
        lams.append(lam)
        tags.append((k, i))
    for cube, vals in floor_pieces:
        nrm = _window_lq(grid, vals, q)
        lam = nrm / cube.measure ** _inv(q)
        atoms.append(Atom(cube=cube, samples=GridFunction(grid, vals / lam), q=q, d=d))
        lams.append(lam)
        tags.append(None)

    dec = AtomicDecomposition(
        atoms,
        np.asarray(lams),
        "czd",
        {
            "k_range": [k_min, k_max],
            "normalization_constant": C,
            "floor_atoms": len(floor_pieces),
            "geometry": geometry,
            "cancel_residuals_max": max(cancel_residuals) if cancel_residuals else 0.0,
            "correction_sup_over_height": lemma_poly_sup,
            "grand_maximal": gm.params,
        },
    )
    dec.report["order_tags"] = tags
    for a in dec.atoms:
        rep = validate_atom(a, p)
        if not rep.passed:
            raise ConstructionError(
                f"constructed atom fails validation: support={rep.support_violations} "
                f"size={rep.size_ratio:.6g} moment={rep.max_moment_residual:.3g}"
            )
    return dec


def _inv(q: float) -> float:
    return 0.0 if q == math.inf else 1.0 / q


def _window_lq(grid: Grid, vals: np.ndarray, q: float) -> float:
    if q == math.inf:
        return float(np.max(np.abs(vals)))
    return float((np.sum(np.abs(vals) ** q) * grid.h**grid.n) ** (1.0 / q))


def _project_window(grid: Grid, window, target: np.ndarray, weight: np.ndarray, d: int, cube: Cube) -> np.ndarray:
    """Projection of target onto polynomials against the weight, on a window."""
    nzw = weight > 0
    if not np.any(nzw):
        return np.zeros_like(target)
    axes = [grid.axis[s] for s in window]
    idx = _multi_indices(grid.n, d)
    if grid.n == 1:
        u = (axes[0] - cube.center[0]) / (cube.side / 2.0)
        cols = [u**a for (a,) in idx]
        V = np.stack(cols, axis=1)
    else:
        ux = (axes[0] - cube.center[0]) / (cube.side / 2.0)
        uy = (axes[1] - cube.center[1]) / (cube.side / 2.0)
        cols = [np.outer(ux**a, uy**b).ravel() for (a, b) in idx]
        V = np.stack(cols, axis=1)
    wflat = weight.ravel()
    tflat = target.ravel()
    sw = np.sqrt(wflat)
    A = V * sw[:, None]
    coeffs, *_ = np.linalg.lstsq(A, tflat * sw, rcond=None)
    return (V @ coeffs).reshape(target.shape)


def _unit_tiling_pieces(grid: Grid, vals: np.ndarray) -> list[tuple[Cube, np.ndarray]]:
    """Split values over the side-1 cube tiling of the box; drop empty tiles."""
    if not np.any(vals != 0):
        return []
    cells = int(round(1.0 / grid.h))
    tiles = grid.m // cells
    out = []
    for idx in np.ndindex(*(tiles,) * grid.n):
        win = tuple(slice(i * cells, (i + 1) * cells) for i in idx)
        block = vals[win]
        if not np.any(block != 0):
            continue
        piece = np.zeros(grid.shape)
        piece[win] = block
        center = tuple(-grid.L + (i + 0.5) * 1.0 for i in idx)
        out.append((Cube(center=center, side=1.0), piece))
    return out


# ---------------------------------------------------------------------------
# finite atomization


def finite_atomize(
    f: GridFunction,
    p: ExponentField,
    q: float,
    eps: float,
    d: int | None = None,
    bank=None,
    dictionary: TestFunctionDictionary | None = None,
) -> AtomicDecomposition:
    """Truncate the constructive decomposition and absorb the tail exactly.

    Pieces are ordered by |height index| + cube rank and cut at the first
    point where the tail norm drops under eps * |box|^(1/q) / ||chi_box||;
    the remainder is split over the unit-cube tiling, each tile normalized
    into a valid atom, so reconstruction is exact to accumulation error.
    """
    if not (0 < eps < math.inf):
        raise ValueError("remainder budget must be positive")
    if q == math.inf or q <= max(1.0, p.p_plus):
        raise ValueError(f"size exponent must satisfy max(1, sup p) < q < inf, got {q}")
    grid = f.grid
    margin = int(round(0.5 / grid.h))
    if grid.n == 1:
        edge = np.concatenate([f.values[:margin], f.values[-margin:]])
    else:
        edge = np.concatenate(
            [f.values[:margin].ravel(), f.values[-margin:].ravel(),
             f.values[:, :margin].ravel(), f.values[:, -margin:].ravel()]
        )
    if np.any(edge != 0):
        raise GridError("finite atomization needs support inside the box interior")

    dec = atomize(f, p, q=q, d=d, bank=bank, dictionary=dictionary)
    tags = dec.report.get("order_tags", [None] * len(dec))
    czd_order = [
        (abs(t[0]), t[1], idx) for idx, t in enumerate(tags) if t is not None
    ]
    czd_order.sort()

    box = Cube(center=(0.0,) * grid.n, side=2.0 * grid.L)
    chi_box = luxemburg_norm(box.indicator(grid), p).value
    threshold = eps * box.measure ** (1.0 / q) / chi_box

    running = np.zeros(grid.shape)
    cut = 0
    resid_norm = _window_lq(grid, f.values, q)
    if resid_norm >= threshold:
        for count, (_, _, idx) in enumerate(czd_order, start=1):
            running += dec.coefficients[idx] * dec.atoms[idx].samples.values
            resid_norm = _window_lq(grid, f.values - running, q)
            if resid_norm < threshold:
                cut = count
                break
        else:
            raise BudgetInfeasibleError(
                f"tail norm {resid_norm:.3g} never drops below the budget threshold {threshold:.3g}"
            )
    kept = [idx for (_, _, idx) in czd_order[:cut]]

    dd = atom_moment_degree(p, grid.n) if d is None else d
    atoms = [dec.atoms[i] for i in kept]
    lams = [float(dec.coefficients[i]) for i in kept]
    remainder = f.values - running
    tiles = _unit_tiling_pieces(grid, remainder)
    for cube, vals in tiles:
        nrm = _window_lq(grid, vals, q)
        lam = nrm / cube.measure ** (1.0 / q)
        atoms.append(Atom(cube=cube, samples=GridFunction(grid, vals / lam), q=q, d=dd))
        lams.append(lam)
    out = AtomicDecomposition(
        atoms,
        np.asarray(lams),
        "finite",
        {
            "eps": eps,
            "threshold": threshold,
            "kept_pieces": cut,
            "remainder_tiles": len(tiles),
            "remainder_norm": resid_norm,
        },
    )
    for a in out.atoms:
        rep = validate_atom(a, p)
        if not rep.passed:
            raise ConstructionError("finite decomposition produced an invalid atom")
    return out
