"""Two-dimensional paths: geometry, maximal sweeps, bank, and atomization."""

import numpy as np
import pytest

from varhardy.atoms import synthesize, validate_atom
from varhardy.czdecomp import atomize, partition_of_unity, whitney
from varhardy.exponent import build_exponent
from varhardy.grid import GridFunction, lq_norm, make_grid
from varhardy.littlewood_paley import build_filter_bank, hp_norm
from varhardy.luxemburg import luxemburg_norm
from varhardy.maximal import (
    build_dictionary,
    grand_maximal,
    hl_maximal,
    local_nontangential_maximal,
    local_vertical_maximal,
    peetre_maximal,
)


@pytest.fixture(scope="module")
def g2():
    return make_grid(2, 2, 4)


@pytest.fixture(scope="module")
def p2d(g2):
    return build_exponent({"kind": "logfamily", "p_inf": 1.8, "c": 0.4}, g2)


@pytest.fixture(scope="module")
def blob(g2):
    return GridFunction.from_callable(g2, lambda x, y: np.exp(-4 * (x**2 + y**2)))


def test_whitney_disk(g2):
    pts = g2.points()
    omega = np.hypot(pts[..., 0], pts[..., 1]) < 1.2
    w = whitney(omega, g2)
    paint = np.zeros(g2.shape, int)
    for q in w.cubes:
        paint[q.cell_window(g2)] += 1
    assert np.array_equal(paint > 0, omega)
    assert np.max(paint) == 1
    pou = partition_of_unity(w)
    tot = pou.total()
    assert np.max(np.abs(tot[omega] - 1.0)) <= 1e-12
    assert np.all(tot[~omega] == 0.0)


def test_maximal_basics(g2, blob):
    one = GridFunction(g2, np.ones(g2.shape))
    mid = g2.m // 2
    assert np.allclose(hl_maximal(one).values.values, 1.0)
    assert abs(local_vertical_maximal(one).values.values[mid, mid] - 1.0) <= 1e-12
    v = local_vertical_maximal(blob)
    nt = local_nontangential_maximal(blob)
    pe = peetre_maximal(blob)
    assert np.all(nt.values.values >= v.values.values - 1e-12)
    assert np.all(pe.values.values >= v.values.values - 1e-12)


def test_grand_ordering_2d(g2, blob):
    d = build_dictionary(N=3, R=2.0 ** (3 * 12), n=2, box_halfwidth=2.0)
    g0 = grand_maximal(blob, d, "vertical", R=1.0)
    gN = grand_maximal(blob, d, "vertical")
    assert np.all(g0.values.values <= gN.values.values + 1e-15)


def test_bank_and_hp_2d(g2, p2d, blob):
    bank = build_filter_bank(g2)
    assert bank.unity_residual() <= 1e-12
    rng = np.random.default_rng(0)
    f = bank.band_limit(GridFunction(g2, rng.normal(size=g2.shape)))
    pieces = bank.apply_all(f)
    lhs = sum(lq_norm(GridFunction(g2, p_), 2.0) ** 2 for p_ in pieces)
    assert lhs == pytest.approx(lq_norm(f, 2.0) ** 2, rel=1e-10)
    assert hp_norm(blob, p2d, bank) > 0


def test_atomize_2d(p2d, blob):
    d = build_dictionary(N=3, R=2.0 ** (3 * 12), n=2, box_halfwidth=2.0)
    dec = atomize(blob, p2d, dictionary=d)
    rec = synthesize(dec)
    rel = lq_norm(GridFunction(blob.grid, rec.values - blob.values), 2.0) / lq_norm(blob, 2.0)
    assert rel <= 1e-6
    for a in dec.atoms[:50]:
        assert validate_atom(a, p2d).passed
