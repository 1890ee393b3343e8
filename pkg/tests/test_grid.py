import json
import math

import numpy as np
import pytest

from varhardy.errors import FileFormatError, GridError, UnderResolvedError
from varhardy.grid import (
    Cube,
    GridFunction,
    convolve_scaled,
    integrate,
    lq_norm,
    make_grid,
    read_gf,
    write_gf,
)
from varhardy.profiles import bump, standard_mollifier


def test_make_grid_point_counts():
    assert make_grid(1, 8, 9).size == 8192
    assert make_grid(1, 8, 9).h == 2.0**-9
    g = make_grid(1, 1, 0)
    assert g.size == 2 and g.h == 1.0
    g2 = make_grid(2, 4, 5)
    assert g2.shape == (256, 256)


def test_make_grid_rejects_bad_parameters():
    with pytest.raises(GridError):
        make_grid(3, 8, 9)
    with pytest.raises(GridError):
        make_grid(1, 0.3, 0)  # 0.6 cells: not integral
    with pytest.raises(GridError):
        make_grid(1, 8, -1)


def test_integrate_constant_and_indicator(grid9):
    one = GridFunction(grid9, np.ones(grid9.shape))
    assert integrate(one) == pytest.approx(16.0, abs=0)
    chi = Cube(center=(0.5,), side=1.0).indicator(grid9)
    assert integrate(chi) == pytest.approx(1.0, abs=grid9.h)
    odd = GridFunction.from_callable(grid9, lambda x: x)
    assert integrate(odd) == pytest.approx(0.0, abs=1e-12)


def test_integrate_linear(grid9, gauss_9):
    g2 = GridFunction.from_callable(grid9, lambda x: np.sin(x))
    a, b = 2.7, -1.3
    combo = GridFunction(grid9, a * gauss_9.values + b * g2.values)
    lhs = integrate(combo)
    rhs = a * integrate(gauss_9) + b * integrate(g2)
    assert lhs == pytest.approx(rhs, rel=1e-12)


def test_convolution_normalization(grid9):
    one = GridFunction(grid9, np.ones(grid9.shape))
    psi = standard_mollifier()
    for t in (1.0, 0.5):
        c = convolve_scaled(one, psi, t)
        interior = slice(grid9.m // 4, 3 * grid9.m // 4)
        assert np.max(np.abs(c.values[interior] - 1.0)) <= 1e-10


def test_convolution_approximate_identity(grid9, gauss_9):
    psi = standard_mollifier()
    errs = []
    for t in (2.0**-3, 2.0**-4):
        c = convolve_scaled(gauss_9, psi, t)
        errs.append(np.max(np.abs(c.values - gauss_9.values)))
    assert errs[1] < errs[0]


def test_convolution_against_direct_quadrature(grid7):
    # independent O(N^2) sum with the same cell-averaged kernel samples
    f = GridFunction.from_callable(grid7, lambda x: np.exp(-2 * x**2) * (1 + 0.3 * np.sin(3 * x)))
    psi = standard_mollifier()
    t = 0.5
    got = convolve_scaled(f, psi, t)
    h = grid7.h
    halfw = int(math.ceil(t * psi.support_radius / h + 0.5))
    from varhardy.grid import _cell_averaged_kernel_1d

    kern = _cell_averaged_kernel_1d(psi, t, h, halfw) / t
    m = grid7.m
    want = np.zeros(m)
    for i in range(m):
        for d in range(-halfw, halfw + 1):
            j = i - d
            if 0 <= j < m:
                want[i] += kern[d + halfw] * f.values[j] * h
    assert np.max(np.abs(got.values - want)) <= 1e-10


def test_convolution_under_resolution(grid9):
    one = GridFunction(grid9, np.ones(grid9.shape))
    with pytest.raises(UnderResolvedError):
        convolve_scaled(one, standard_mollifier(), 2.0**-9)


def test_convolution_linearity_and_translation(grid9):
    psi = standard_mollifier()
    f = GridFunction.from_callable(grid9, lambda x: np.exp(-8 * (x - 1) ** 2))
    g = GridFunction.from_callable(grid9, lambda x: np.exp(-2 * x**2))
    combo = GridFunction(grid9, 2 * f.values - 0.5 * g.values)
    lhs = convolve_scaled(combo, psi, 0.25).values
    rhs = 2 * convolve_scaled(f, psi, 0.25).values - 0.5 * convolve_scaled(g, psi, 0.25).values
    assert np.max(np.abs(lhs - rhs)) <= 1e-13
    # lattice translation commutes away from the boundary
    shift = 64
    ft = GridFunction(grid9, np.roll(f.values, shift))
    a = convolve_scaled(ft, psi, 0.25).values
    b = np.roll(convolve_scaled(f, psi, 0.25).values, shift)
    interior = slice(grid9.m // 4, 3 * grid9.m // 4)
    assert np.max(np.abs(a[interior] - b[interior])) <= 1e-12


def test_dyadic_children_partition(grid9):
    q = Cube.dyadic(1, (-3,))
    kids = q.children()
    assert len(kids) == 2
    paint = sum(k.mask(grid9).astype(int) for k in kids)
    assert np.array_equal(paint, q.mask(grid9).astype(int))


def test_dyadic_children_partition_2d(grid2d):
    q = Cube.dyadic(1, (0, -1))
    kids = q.children()
    assert len(kids) == 4
    paint = sum(k.mask(grid2d).astype(int) for k in kids)
    assert np.array_equal(paint, q.mask(grid2d).astype(int))


def test_cube_dilate():
    q = Cube.dyadic(2, (3,))
    d = q.dilate(3.0)
    assert d.center == q.center
    assert d.side == pytest.approx(3 * q.side)


def test_gf_roundtrip(tmp_path, grid7):
    f = GridFunction.from_callable(grid7, lambda x: np.sin(x) * np.exp(-x**2))
    path = tmp_path / "f.gf"
    write_gf(path, f)
    g = read_gf(path)
    assert g.grid == grid7
    assert np.array_equal(g.values, f.values)


def test_gf_rejects_malformed(tmp_path, grid7):
    path = tmp_path / "bad.gf"
    path.write_text(json.dumps({"version": 1, "n": 1, "L": 8, "J": 7, "data": [1.0, 2.0]}))
    with pytest.raises(FileFormatError, match="data"):
        read_gf(path)
    path.write_text(json.dumps({"version": 1, "n": 1, "L": 8}))
    with pytest.raises(FileFormatError, match="J"):
        read_gf(path)


def test_lq_norm_inf(grid7):
    f = GridFunction.from_callable(grid7, lambda x: np.sin(x))
    assert lq_norm(f, math.inf) == np.max(np.abs(f.values))
