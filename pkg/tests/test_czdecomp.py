import math

import numpy as np
import pytest

from varhardy.atoms import synthesize, validate_atom
from varhardy.czdecomp import (
    atomize,
    cz_decompose,
    finite_atomize,
    partition_of_unity,
    project_weighted,
    whitney,
)
from varhardy.errors import BudgetInfeasibleError, GridError, IllConditionedError
from varhardy.exponent import build_exponent
from varhardy.grid import Cube, GridFunction, lq_norm, make_grid
from varhardy.maximal import default_dictionary, grand_maximal


@pytest.fixture(scope="module")
def dict9():
    return default_dictionary(1, box_halfwidth=8.0)


def test_whitney_interval(grid9):
    omega = (grid9.axis > 0) & (grid9.axis < 1)
    w = whitney(omega, grid9)
    paint = np.zeros(grid9.shape, dtype=int)
    for q in w.cubes:
        paint[q.cell_window(grid9)] += 1
    assert np.array_equal(paint > 0, omega)
    assert np.max(paint) == 1
    sides = sorted(set(q.side for q in w.cubes))
    assert sides[0] == grid9.h  # shrinks to cells at the endpoints
    assert sides[-1] <= 0.5
    for q in w.cubes:
        star = q.dilate(w.a).center_window(grid9)
        assert np.all(omega[star])


def test_whitney_empty_and_full(grid9):
    assert whitney(np.zeros(grid9.shape, bool), grid9).cubes == []
    wf = whitney(np.ones(grid9.shape, bool), grid9)
    assert all(q.side == 2.0 for q in wf.cubes)
    assert len(wf.cubes) == 8


def test_whitney_greedy_oracle():
    # independent greedy top-down subdivision at a coarse level
    g = make_grid(1, 8, 6)
    omega = (g.axis > 0) & (g.axis < 1)
    w = whitney(omega, g)
    got = sorted((q.side, q.center[0]) for q in w.cubes)

    from scipy.ndimage import distance_transform_cdt

    dist = distance_transform_cdt(omega, metric="chessboard").astype(float)
    b = w.b
    accepted = []

    def recurse(i0, cells):
        block = omega[i0 : i0 + cells]
        if not block.any():
            return
        if block.all():
            side = cells * g.h
            if cells == 1 or b * side <= dist[i0 : i0 + cells].min() * g.h + 1e-12:
                accepted.append((side, -g.L + (i0 + cells / 2.0) * g.h))
                return
        if cells == 1:
            return
        recurse(i0, cells // 2)
        recurse(i0 + cells // 2, cells // 2)

    top = int(round(2.0 / g.h))
    for start in range(0, g.m, top):
        recurse(start, top)
    assert got == sorted(accepted)


def test_partition_of_unity(grid9):
    omega = (np.abs(grid9.axis) < 2.5) | (grid9.axis > 5)
    w = whitney(omega, grid9)
    pou = partition_of_unity(w)
    tot = pou.total()
    assert np.max(np.abs(tot[omega] - 1.0)) <= 1e-12
    assert np.all(tot[~omega] == 0.0)
    for v in pou.values:
        assert np.all(v >= 0) and np.all(v <= 1 + 1e-12)


def test_partition_gradient_scaling(grid9):
    omega = (grid9.axis > 0) & (grid9.axis < 1)
    w = whitney(omega, grid9)
    pou = partition_of_unity(w)
    consts = []
    for q, v in zip(w.cubes, pou.values):
        grad = np.abs(np.diff(v)) / grid9.h
        consts.append(np.max(grad) * q.side)
    # the bump margin is (a-1)/2 of the side, so the slope constant is
    # bounded by ~2 smoothstep slopes over that margin
    assert max(consts) <= 4.0 / (w.a - 1.0)


def test_project_weighted_fixes_polynomials(grid9):
    f = GridFunction.from_callable(grid9, lambda x: 1.0 - 0.5 * x + 0.25 * x**2)
    eta = Cube(center=(0.5,), side=1.0).indicator(grid9)
    proj = project_weighted(f, eta, 2)
    w = Cube(center=(0.5,), side=1.0).cell_window(grid9)
    assert np.max(np.abs(proj.evaluate_window(grid9, w) - f.values[w])) <= 1e-10


def test_project_weighted_degree_zero_is_mean(grid9, gauss_9):
    eta = Cube(center=(0.5,), side=1.0).indicator(grid9)
    proj = project_weighted(gauss_9, eta, 0)
    want = np.sum(gauss_9.values * eta.values) / np.sum(eta.values)
    assert proj.coeffs[0] == pytest.approx(want, rel=1e-12)


def test_project_weighted_qr_oracle(grid9):
    f = GridFunction.from_callable(grid9, lambda x: x**3)
    cube = Cube(center=(0.5,), side=1.0)
    eta = cube.indicator(grid9)
    proj = project_weighted(f, eta, 2, center=cube.center, scale=cube.side / 2.0)
    w = cube.cell_window(grid9)
    u = (grid9.axis[w[0]] - 0.5) / 0.5
    V = np.stack([u**a for a in range(3)], axis=1)
    qr_coeffs, *_ = np.linalg.lstsq(V, f.values[w[0]], rcond=None)
    assert np.max(np.abs(proj.coeffs - qr_coeffs)) <= 1e-10
    resid = f.values[w[0]] - V @ proj.coeffs
    for a in range(3):
        assert abs(np.sum(resid * u**a) * grid9.h) <= 1e-10


def test_project_weighted_degenerate_raises(grid9):
    eta_vals = np.zeros(grid9.shape)
    eta_vals[100] = 1.0
    with pytest.raises(IllConditionedError):
        project_weighted(GridFunction.from_callable(grid9, lambda x: x), GridFunction(grid9, eta_vals), 1)


def test_cz_trivial_height(grid9, plog_9, gauss_9, dict9):
    gm = grand_maximal(gauss_9, dict9, "vertical")
    top = float(np.max(gm.values.values))
    cz = cz_decompose(gauss_9, gm, 2.0 * top, plog_9)
    assert cz.bad == []
    assert np.array_equal(cz.good.values, gauss_9.values)


def test_cz_exactness_and_supports(grid9, plog_9, gauss_9, dict9):
    gm = grand_maximal(gauss_9, dict9, "vertical")
    top = float(np.max(gm.values.values))
    for frac in (0.5, 0.1, 0.01):
        cz = cz_decompose(gauss_9, gm, frac * top, plog_9)
        recon = cz.good.values + cz.bad_sum()
        assert np.max(np.abs(recon - gauss_9.values)) <= 1e-12 * max(1.0, np.max(np.abs(gauss_9.values)))
        for q, b in zip(cz.whitney.cubes, cz.bad):
            star = q.dilate(cz.whitney.a)
            outside = ~star.mask(grid9)
            assert not np.any(b.values[outside] != 0.0)


def test_cz_small_cube_moments(grid9, plog_9, dict9):
    f = GridFunction.from_callable(grid9, lambda x: np.exp(-2 * (x - 1.5) ** 2) * (1 + np.sin(4 * x)))
    gm = grand_maximal(f, dict9, "vertical")
    cz = cz_decompose(f, gm, 0.3 * float(np.max(gm.values.values)), plog_9, d=1)
    dust = 1e-13 * float(np.max(np.abs(f.values)))
    found_small = False
    for q, b in zip(cz.whitney.cubes, cz.bad):
        sup = float(np.max(np.abs(b.values)))
        if q.side >= 1.0 or sup <= dust:
            continue
        found_small = True
        for a in range(2):
            mom = np.sum(b.values * (grid9.axis - q.center[0]) ** a) * grid9.h
            assert abs(mom) <= 1e-8 * sup
    assert found_small


def test_cz_good_part_height_sweep(grid9, plog_9, dict9):
    f = GridFunction.from_callable(grid9, lambda x: np.exp(-2 * x**2) + 0.3 * np.sin(3 * x) * np.exp(-(x - 2) ** 2))
    gm = grand_maximal(f, dict9, "vertical")
    top = float(np.max(gm.values.values))
    consts = []
    for k in range(1, 5):
        lam = top * 2.0**-k
        cz = cz_decompose(f, gm, lam, plog_9)
        consts.append(np.max(np.abs(cz.good.values)) / lam)
    assert max(consts) < 2000.0


def test_atomize_reconstruction_and_validation(grid9, plog_9, dict9):
    f = GridFunction.from_callable(grid9, lambda x: np.exp(-8 * x**2) * (1 + 0.5 * np.cos(5 * x)))
    dec = atomize(f, plog_9, dictionary=dict9)
    rec = synthesize(dec)
    rel = lq_norm(GridFunction(grid9, rec.values - f.values), 2.0) / lq_norm(f, 2.0)
    assert rel <= 1e-6
    for a in dec.atoms:
        assert validate_atom(a, plog_9).passed
    geo = dec.report["geometry"]
    assert geo["max_side_ratio"] <= 16.0 * math.sqrt(1)
    assert dec.report["cancel_residuals_max"] <= 1e-10


def test_atomize_zero(grid9, plog_9, dict9):
    dec = atomize(GridFunction.zeros(grid9), plog_9, dictionary=dict9)
    assert len(dec) == 0


def test_atomize_coefficient_bound_stability(plog_9, dict9, grid9):
    from varhardy.atoms import coefficient_norm
    from varhardy.littlewood_paley import build_filter_bank, hp_norm

    ratios = {}
    for J in (8, 9):
        g = make_grid(1, 8, J)
        p = build_exponent({"kind": "logfamily", "p_inf": 1.8, "c": 0.4}, g)
        bank = build_filter_bank(g)
        f = GridFunction.from_callable(g, lambda x: np.exp(-8 * x**2) * (1 + 0.5 * np.cos(5 * x)))
        dec = atomize(f, p)
        ratios[J] = coefficient_norm(dec, p, 1.0) / hp_norm(f, p, bank)
    drift = abs(ratios[9] - ratios[8]) / ratios[8]
    assert np.isfinite(ratios[8]) and np.isfinite(ratios[9])
    assert drift < 0.25


def test_finite_atomize_exact(grid9, plog_9):
    def fn(x):
        return np.where((x >= -1) & (x < -0.5), 1.0, 0.0) - np.where((x >= -0.5) & (x < 0), 1.0, 0.0)

    f = GridFunction.from_callable(grid9, fn)
    dec = finite_atomize(f, plog_9, q=4.0, eps=0.1)
    assert len(dec) < 500
    rec = synthesize(dec)
    assert np.max(np.abs(rec.values - f.values)) <= 1e-12
    for a in dec.atoms:
        rep = validate_atom(a, plog_9)
        assert rep.passed
    # remainder tiles sit on unit cubes
    tiles = [a for a, t in zip(dec.atoms, range(len(dec))) if a.cube.side == 1.0]
    for a in tiles:
        assert 1.0 <= a.cube.side < 2.0


def test_finite_atomize_needs_interior_support(grid9, plog_9):
    f = GridFunction(grid9, np.ones(grid9.shape))
    with pytest.raises(GridError):
        finite_atomize(f, plog_9, q=4.0, eps=0.1)


def test_finite_atomize_budget_infeasible(grid9, plog_9):
    def fn(x):
        return np.where((x >= -1) & (x < 0), np.sin(8 * x), 0.0)

    f = GridFunction.from_callable(grid9, fn)
    with pytest.raises(BudgetInfeasibleError):
        finite_atomize(f, plog_9, q=4.0, eps=1e-18)


def test_finite_atomize_rejects_bad_q(grid9, plog_9):
    f = GridFunction.zeros(grid9)
    with pytest.raises(ValueError):
        finite_atomize(f, plog_9, q=math.inf, eps=0.1)
    with pytest.raises(ValueError):
        finite_atomize(f, plog_9, q=1.0, eps=0.1)
