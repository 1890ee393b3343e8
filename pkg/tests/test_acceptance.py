"""Acceptance gate: every shipping criterion at its stated tolerance.

Each test prints one PASS line (visible with -s or in failure output); the
whole module runs on the default desk setup n=1, L=8, J=9 with one-level
refinements where stability is asserted.
"""

import math
import time

import numpy as np
import pytest

from varhardy.atoms import AtomicDecomposition, coefficient_norm, synthesize, validate_atom
from varhardy.czdecomp import atomize, cz_decompose, finite_atomize
from varhardy.duals import bmo_norm, cmo_norm, duality_pairing, lip_norm
from varhardy.exponent import build_exponent, sobolev_shift
from varhardy.families import materialize, seeded_atoms, standard20
from varhardy.grid import Cube, GridFunction, lq_norm, make_grid
from varhardy.littlewood_paley import build_filter_bank, hp_norm, square_function
from varhardy.luxemburg import (
    batch_indicator_norms,
    holder_pairing,
    indicator_bound_sides,
    luxemburg_norm,
    power_triangle_sides,
)
from varhardy.maximal import (
    default_dictionary,
    grand_maximal,
    local_nontangential_maximal,
    local_vertical_maximal,
    peetre_maximal,
)
from varhardy.operators import (
    apply_corrected,
    apply_operator,
    boundedness_experiment,
    local_fractional,
    modulated_hilbert_kernel,
    sobolev_pair,
)
from varhardy.profiles import bump

LOG_FAMILY = {"kind": "logfamily", "p_inf": 1.8, "c": 0.4}
DUAL_FAMILY = {"kind": "logfamily", "p_inf": 0.8, "c": 0.15}


@pytest.fixture(scope="module")
def setup9():
    grid = make_grid(1, 8, 9)
    return {
        "grid": grid,
        "plog": build_exponent(LOG_FAMILY, grid),
        "pdual": build_exponent(DUAL_FAMILY, grid),
        "bank": build_filter_bank(grid),
        "family": materialize(standard20(), grid),
        "dict": default_dictionary(1, box_halfwidth=8.0),
    }


@pytest.fixture(scope="module")
def setup10():
    grid = make_grid(1, 8, 10)
    return {
        "grid": grid,
        "plog": build_exponent(LOG_FAMILY, grid),
        "pdual": build_exponent(DUAL_FAMILY, grid),
        "bank": build_filter_bank(grid),
        "family": materialize(standard20(), grid),
        "dict": default_dictionary(1, box_halfwidth=8.0),
    }


def _ok(name: str, detail: str = ""):
    print(f"[acceptance] {name}: PASS {detail}")


def _seeded_smooth(grid, rng):
    c = rng.uniform(-5, 5)
    w = rng.uniform(0.2, 2.0)
    amp = rng.uniform(0.3, 3.0)
    k = rng.uniform(0.0, 6.0)
    return GridFunction.from_callable(
        grid, lambda x: amp * np.exp(-((x - c) / w) ** 2) * (1 + 0.5 * np.sin(k * x))
    )


def test_criterion_01_luxemburg_correctness(setup9):
    grid = setup9["grid"]
    rng = np.random.default_rng(101)
    worst_time = 0.0
    for trial in range(50):
        f = _seeded_smooth(grid, rng)
        p0 = rng.uniform(0.6, 4.0)
        p = build_exponent(p0, grid)
        t0 = time.perf_counter()
        val = luxemburg_norm(f, p).value
        worst_time = max(worst_time, time.perf_counter() - t0)
        assert val == pytest.approx(lq_norm(f, p0), rel=1e-8)
    grid12 = make_grid(1, 8, 12)
    p12 = build_exponent(LOG_FAMILY, grid12)
    for trial in range(20):
        c = rng.uniform(-5, 5)
        w = rng.uniform(0.3, 2.0)
        amp = rng.uniform(0.3, 3.0)
        fn = lambda x, c=c, w=w, amp=amp: amp * np.exp(-((x - c) / w) ** 2)
        t0 = time.perf_counter()
        v9 = luxemburg_norm(GridFunction.from_callable(grid, fn), setup9["plog"]).value
        worst_time = max(worst_time, time.perf_counter() - t0)
        v12 = luxemburg_norm(GridFunction.from_callable(grid12, fn), p12).value
        assert v9 == pytest.approx(v12, rel=1e-6)
    assert worst_time < 1.0
    _ok("criterion 1 (norm correctness)", f"slowest norm {worst_time * 1e3:.1f} ms")


def test_criterion_02_inequality_suite(setup9):
    grid = setup9["grid"]
    rng = np.random.default_rng(202)
    # product-norm inequality with its analytic constant 2^(1/inf p)
    for _ in range(100):
        p1 = build_exponent(float(rng.uniform(1.2, 3.0)), grid)
        p2 = build_exponent({"kind": "logfamily", "p_inf": float(rng.uniform(1.5, 3.0)), "c": 0.3}, grid)
        f = _seeded_smooth(grid, rng)
        g = _seeded_smooth(grid, rng)
        lhs, rhs = holder_pairing(f, g, p1, p2)
        p_comb_min = 1.0 / (1.0 / p1.p_minus + 1.0 / p2.p_minus)
        assert lhs <= 2.0 ** (1.0 / p_comb_min) * rhs * (1 + 1e-8) + 1e-8
    # power triangle inequality
    psub = build_exponent(DUAL_FAMILY, grid)
    for _ in range(100):
        f = _seeded_smooth(grid, rng)
        g = _seeded_smooth(grid, rng)
        lhs, rhs = power_triangle_sides(f, g, psub)
        assert lhs <= rhs + 1e-8
    # indicator norm bound (inf p >= 1)
    pind = build_exponent({"kind": "logfamily", "p_inf": 1.2, "c": 0.4}, grid)
    for _ in range(100):
        mask = rng.random(grid.shape) < rng.uniform(0.02, 0.95)
        lhs, rhs = indicator_bound_sides(mask, pind)
        assert lhs <= rhs + 1e-8
    # indicator-norm asymptotic brackets, stable under refinement
    spreads = {}
    for J in (9, 10):
        g9 = make_grid(1, 8, J)
        p = build_exponent(LOG_FAMILY, g9)
        small, large = [], []
        rngc = np.random.default_rng(7)
        for _ in range(60):
            j = int(rngc.integers(0, 6))
            side = 2.0**-j if j > 0 else 1.0
            k = int(rngc.integers(0, int(16 / side)))
            cube = Cube(center=(-8.0 + (k + 0.5) * side,), side=side)
            n = batch_indicator_norms(p, [cube.cell_window(g9)])[0]
            i = int(np.argmin(np.abs(g9.axis - cube.center[0])))
            small.append(n / cube.measure ** (1.0 / p.values[i]))
        for side in (1.0, 2.0, 4.0, 8.0, 16.0):
            cube = Cube(center=(0.0,), side=side)
            n = batch_indicator_norms(p, [cube.cell_window(g9)])[0]
            large.append(n / cube.measure ** (1.0 / p.p_infinity))
        spreads[J] = (max(small) / min(small), max(large) / min(large))
    for a, b in zip(spreads[9], spreads[10]):
        assert abs(b / a - 1.0) < 0.2
    _ok("criterion 2 (classical inequalities)", f"bracket spreads {spreads[9][0]:.3f}/{spreads[9][1]:.3f}")


def test_criterion_03_filter_bank(setup9):
    bank = setup9["bank"]
    assert bank.unity_residual() <= 1e-12
    rng = np.random.default_rng(33)
    for _ in range(5):
        f = bank.band_limit(GridFunction(setup9["grid"], rng.normal(size=setup9["grid"].shape)))
        pieces = bank.apply_all(f)
        lhs = sum(lq_norm(GridFunction(setup9["grid"], p_), 2.0) ** 2 for p_ in pieces)
        rhs = lq_norm(f, 2.0) ** 2
        assert lhs == pytest.approx(rhs, rel=1e-10)
    _ok("criterion 3 (filter bank)", f"unity residual {bank.unity_residual():.2e}")


def _maximal_norm_rows(setup):
    grid, p, fam, d = setup["grid"], setup["plog"], setup["family"], setup["dict"]
    psi = bump(0.5).normalized()
    rows = []
    for f in fam:
        rows.append([
            luxemburg_norm(grand_maximal(f, d, "vertical").values, p).value,
            luxemburg_norm(grand_maximal(f, d, "vertical", R=1.0).values, p).value,
            luxemburg_norm(grand_maximal(f, d, "nontangential").values, p).value,
            luxemburg_norm(grand_maximal(f, d, "nontangential", R=1.0).values, p).value,
            luxemburg_norm(local_vertical_maximal(f, psi).values, p).value,
            luxemburg_norm(local_nontangential_maximal(f, psi).values, p).value,
            luxemburg_norm(peetre_maximal(f, psi).values, p).value,
        ])
    return np.asarray(rows)


def _pair_spreads(rows):
    k = rows.shape[1]
    out = np.zeros((k, k))
    for i in range(k):
        for j in range(k):
            r = rows[:, i] / rows[:, j]
            out[i, j] = np.max(r) / np.min(r)
    return out


def test_criterion_04_equivalence_matrix(setup9, setup10):
    rows9 = _maximal_norm_rows(setup9)
    assert np.all(np.isfinite(rows9)) and np.all(rows9 > 0)
    rows10 = _maximal_norm_rows(setup10)
    s9, s10 = _pair_spreads(rows9), _pair_spreads(rows10)
    drift = np.max(np.abs(s10 / s9 - 1.0))
    assert drift < 0.2
    doubled = dict(setup9)
    doubled["dict"] = default_dictionary(1, doubled=True, box_halfwidth=8.0)
    rows9d = _maximal_norm_rows(doubled)
    drift_d = np.max(np.abs(_pair_spreads(rows9d) / s9 - 1.0))
    assert drift_d < 0.3
    # the two-term quasi-norm stays inside a finite bracket against each
    hp_vals = np.asarray([hp_norm(f, setup9["plog"], setup9["bank"]) for f in setup9["family"]])
    for col in range(rows9.shape[1]):
        r = rows9[:, col] / hp_vals
        assert np.all(np.isfinite(r)) and np.min(r) > 0
    _ok("criterion 4 (equivalence matrix)", f"refine drift {drift:.3f}, dictionary drift {drift_d:.3f}")


def test_criterion_05_cz_exactness(setup9):
    grid, p, fam, d = setup9["grid"], setup9["plog"], setup9["family"], setup9["dict"]
    checked_small = 0
    for f in fam[:10]:
        gm = grand_maximal(f, d, "vertical")
        top = float(np.max(gm.values.values))
        if top == 0.0:
            continue
        dust = 1e-13 * float(np.max(np.abs(f.values)))
        for frac in (0.5, 0.05):
            cz = cz_decompose(f, gm, frac * top, p)
            recon = cz.good.values + cz.bad_sum()
            assert np.max(np.abs(recon - f.values)) <= 1e-12 * max(1.0, np.max(np.abs(f.values)))
            for q, b in zip(cz.whitney.cubes, cz.bad):
                star = q.dilate(cz.whitney.a)
                outside = ~star.mask(grid)
                assert not np.any(b.values[outside] != 0.0)
                sup = float(np.max(np.abs(b.values)))
                if q.side < 1.0 and sup > dust:
                    mom = np.sum(b.values) * grid.h
                    assert abs(mom) <= 1e-8 * sup
                    checked_small += 1
    assert checked_small > 0
    _ok("criterion 5 (cube decomposition exactness)", f"{checked_small} small-cube moment checks")


def test_criterion_06_atomization(setup9, setup10):
    ratios = {}
    worst_time = 0.0
    for setup, J in ((setup9, 9), (setup10, 10)):
        grid, p, bank = setup["grid"], setup["plog"], setup["bank"]
        vals = []
        for f in setup["family"]:
            t0 = time.perf_counter()
            dec = atomize(f, p, dictionary=setup["dict"])
            dt = time.perf_counter() - t0
            if J == 9:
                worst_time = max(worst_time, dt)
            rec = synthesize(dec)
            rel = lq_norm(GridFunction(grid, rec.values - f.values), 2.0) / lq_norm(f, 2.0)
            assert rel <= 1e-6
            for a in dec.atoms:
                assert validate_atom(a, p).passed
            vals.append(coefficient_norm(dec, p, 1.0) / hp_norm(f, p, bank))
        vals = np.asarray(vals)
        assert np.all(np.isfinite(vals))
        ratios[J] = np.max(vals) / np.min(vals)
    assert worst_time < 60.0
    drift = abs(ratios[10] / ratios[9] - 1.0)
    assert drift < 0.2
    _ok("criterion 6 (atomization)", f"slowest member {worst_time:.1f} s, ratio drift {drift:.3f}")


def test_criterion_07_finite_atomization(setup9, setup10):
    brackets = {}
    for setup, J in ((setup9, 9), (setup10, 10)):
        grid, p, bank = setup["grid"], setup["plog"], setup["bank"]
        members = [r for r in standard20() if r.compact_support][:6]
        vals = []
        for rec in members:
            f = rec(grid)
            dec = finite_atomize(f, p, q=4.0, eps=0.05)
            assert len(dec) < 10000
            out = synthesize(dec)
            assert np.max(np.abs(out.values - f.values)) <= 1e-12 * max(1.0, np.max(np.abs(f.values)))
            vals.append(coefficient_norm(dec, p, 1.0) / hp_norm(f, p, bank))
        vals = np.asarray(vals)
        assert np.all(np.isfinite(vals))
        brackets[J] = np.max(vals) / np.min(vals)
    drift = abs(brackets[10] / brackets[9] - 1.0)
    assert drift < 0.35
    _ok("criterion 7 (finite atomization)", f"bracket {brackets[9]:.3g}, drift {drift:.3f}")


def test_criterion_08_duality(setup9):
    grid, p = setup9["grid"], setup9["pdual"]
    rng = np.random.default_rng(808)
    worst = 0.0
    trials = 0
    for gi in range(10):
        g = _seeded_smooth(grid, rng)
        for di in range(10):
            atoms = seeded_atoms(grid, 1000 + 10 * gi + di, 4, d=0, q=4.0)
            dec = AtomicDecomposition(atoms, rng.uniform(0.1, 2.0, size=len(atoms)))
            _, _, ratio = duality_pairing(dec, g, p, q=4.0)
            worst = max(worst, ratio)
            trials += 1
    assert trials == 100
    assert worst <= 1.0 + 1e-6
    # constant-pairing cancellation on small-cube atoms
    gconst = GridFunction(grid, np.full(grid.shape, 3.0))
    for seed in range(5):
        atoms = [a for a in seeded_atoms(grid, 2000 + seed, 6, d=0, q=4.0) if a.cube.measure < 1.0]
        dec = AtomicDecomposition(atoms, np.ones(len(atoms)))
        pairing, _, _ = duality_pairing(dec, gconst, p, q=4.0)
        scale = 3.0 * sum(lq_norm(a.samples, 1.0) for a in atoms)
        assert abs(pairing) <= 1e-10 * max(scale, 1e-300)
    _ok("criterion 8 (duality pairing)", f"worst ratio {worst:.9f} over {trials} trials")


def test_criterion_09_dual_norm_brackets(setup9, setup10):
    spreads = {}
    for setup, J in ((setup9, 9), (setup10, 10)):
        grid, p, bank = setup["grid"], setup["pdual"], setup["bank"]
        rows = []
        for f in setup["family"]:
            rows.append([
                bmo_norm(f, p, q=2.0, d=0).value,
                lip_norm(f, p).value,
                cmo_norm(f, p, bank).value,
            ])
        rows = np.asarray(rows)
        assert np.all(np.isfinite(rows)) and np.all(rows > 0)
        spreads[J] = _pair_spreads(rows)
    drift = np.max(np.abs(spreads[10] / spreads[9] - 1.0))
    assert drift < 0.2
    _ok("criterion 9 (dual seminorm brackets)", f"drift {drift:.3f}")


def test_criterion_10_operators(setup9, setup10):
    # exact support containment for the fractional integral
    grid = setup9["grid"]
    chi = Cube(center=(0.125,), side=0.25).indicator(grid)
    out = local_fractional(chi, 0.5)
    outside = (grid.axis < -1.0 - grid.h) | (grid.axis > 1.25 + grid.h)
    assert np.all(out.values[outside] == 0.0)

    frac_ratios = {}
    corr = {}
    for setup, J in ((setup9, 9), (setup10, 10)):
        g, bank = setup["grid"], setup["bank"]
        pfrac = build_exponent({"kind": "logfamily", "p_inf": 1.3, "c": 0.3}, g)
        qfrac = sobolev_pair(pfrac, 0.5)
        fam = [a.samples for a in seeded_atoms(g, 31, 10, d=0)]
        rep = boundedness_experiment(lambda f: local_fractional(f, 0.5), fam, pfrac, "Lp",
                                     bank=bank, p_out=qfrac)
        assert math.isfinite(rep.max_ratio)
        frac_ratios[J] = rep.max_ratio

        p = setup["plog"]
        spec = modulated_hilbert_kernel()
        cspec = spec.corrected()
        atoms = [a for a in seeded_atoms(g, 23, 16, d=0) if a.cube.measure < 1.0][:8]
        plain = boundedness_experiment(lambda a: apply_operator(spec, a.samples), atoms, p, "hp", bank=bank)
        fixed = boundedness_experiment(lambda a: apply_corrected(cspec, a), atoms, p, "hp", bank=bank)
        assert math.isfinite(plain.max_ratio) and math.isfinite(fixed.max_ratio)
        assert fixed.max_ratio < plain.max_ratio
        corr[J] = (plain.max_ratio, fixed.max_ratio)
    assert abs(frac_ratios[10] / frac_ratios[9] - 1.0) < 0.2
    assert abs(corr[10][1] / corr[9][1] - 1.0) < 0.2
    _ok(
        "criterion 10 (operators)",
        f"fractional ratio {frac_ratios[9]:.3g}; corrected {corr[9][1]:.3g} < plain {corr[9][0]:.3g}",
    )
