import math

import numpy as np
import pytest

from varhardy.errors import ConjugateUndefinedError, InvalidExponentError, ShiftUndefinedError
from varhardy.exponent import (
    atom_moment_degree,
    build_exponent,
    conjugate,
    log_holder_constants,
    read_pspec,
    sobolev_shift,
    write_pspec,
)
from varhardy.grid import make_grid


def test_constant_exponent(grid9):
    p = build_exponent(2.0, grid9)
    assert p.p_minus == p.p_plus == p.p_infinity == 2.0
    assert p.p_lower == 1.0


def test_log_family_summary(grid9):
    p = build_exponent({"kind": "logfamily", "p_inf": 1.8, "c": 0.4}, grid9)
    # max at the lattice points closest to the origin, min at the edge
    assert p.p_plus == pytest.approx(2.2, abs=1e-3)
    edge = 1.8 + 0.4 / math.log(math.e + abs(grid9.axis).max())
    assert p.p_minus == pytest.approx(edge, rel=1e-12)
    assert p.p_infinity == 1.8


def test_invalid_samples(grid7):
    with pytest.raises(InvalidExponentError):
        build_exponent({"kind": "samples", "values": np.zeros(grid7.size), "p_inf": 1.0}, grid7)
    with pytest.raises(InvalidExponentError):
        build_exponent({"kind": "samples", "values": np.full(grid7.size, -2.0)}, grid7)


def test_log_holder_constant_exponent(grid7):
    p = build_exponent(1.7, grid7)
    rep = log_holder_constants(p, 500)
    assert rep.c_local == 0.0
    assert rep.c_decay == 0.0


def test_log_holder_family_stable_under_refinement():
    vals = []
    for J in (7, 8):
        g = make_grid(1, 8, J)
        p = build_exponent({"kind": "logfamily", "p_inf": 1.8, "c": 0.4}, g)
        rep = log_holder_constants(p, 4000, seed=1)
        vals.append((rep.c_local, rep.c_decay))
    for a, b in zip(vals[0], vals[1]):
        assert abs(a - b) / max(abs(b), 1e-12) < 0.05


def test_log_holder_step_diverges():
    prev = 0.0
    for J in (6, 8, 10):
        g = make_grid(1, 8, J)
        vals = np.where(g.axis < 0.0, 1.5, 2.0)
        p = build_exponent({"kind": "samples", "values": vals, "p_inf": 2.0}, g)
        rep = log_holder_constants(p, 2000, seed=0)
        assert rep.c_local > prev
        prev = rep.c_local
    # the nearest-neighbor pair across the jump scales like log(1/h)
    assert prev > 3.0


def test_conjugate(grid7):
    p2 = build_exponent(2.0, grid7)
    assert np.allclose(conjugate(p2).values, 2.0)
    p4 = build_exponent(4.0, grid7)
    assert np.allclose(conjugate(p4).values, 4.0 / 3.0)
    with pytest.raises(ConjugateUndefinedError):
        conjugate(build_exponent(1.0, grid7))


def test_conjugate_involution(grid7):
    p = build_exponent({"kind": "logfamily", "p_inf": 1.8, "c": 0.4}, grid7)
    back = conjugate(conjugate(p))
    assert np.max(np.abs(back.values - p.values)) <= 1e-14


def test_sobolev_shift(grid7):
    p1 = build_exponent(1.0, grid7)
    q = sobolev_shift(p1, 0.5)
    assert np.allclose(q.values, 2.0)
    p23 = build_exponent(2.0 / 3.0, grid7)
    assert np.allclose(sobolev_shift(p23, 0.5).values, 1.0)
    with pytest.raises(ShiftUndefinedError):
        sobolev_shift(build_exponent(2.0, grid7), 0.5)


def test_sobolev_shift_increases(grid7):
    p = build_exponent({"kind": "logfamily", "p_inf": 1.1, "c": 0.2}, grid7)
    q = sobolev_shift(p, 0.25)
    assert np.all(q.values > p.values)


def test_atom_moment_degree_values():
    assert atom_moment_degree(1.0, 1) == 0
    assert atom_moment_degree(0.4, 1) == 1
    # smallest d with 0.3 * (3 + d) > 2 is d = 4
    assert atom_moment_degree(0.3, 2) == 4
    brute = min(d for d in range(20) if 0.3 * (2 + d + 1) > 2)
    assert atom_moment_degree(0.3, 2) == brute


def test_atom_moment_degree_monotone():
    degrees = [atom_moment_degree(p, 1) for p in (0.2, 0.35, 0.5, 0.8, 1.2)]
    assert degrees == sorted(degrees, reverse=True)


def test_pspec_roundtrip(tmp_path):
    spec = {"kind": "logfamily", "p_inf": 1.8, "c": 0.4}
    path = tmp_path / "p.pspec"
    write_pspec(path, spec)
    assert read_pspec(path) == spec
