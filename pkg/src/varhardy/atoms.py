"""Atoms with cube-local support, size control, and small-cube moments.

An atom is a grid function supported in a cube, with L^q size bounded by
|Q|^(1/q) and, when |Q| < 1, vanishing moments through a fixed degree.
Decompositions bundle atoms with nonnegative coefficients; synthesis and
the coefficient norms live here.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import DegreeError, FileFormatError, GridError
from .exponent import ExponentField, atom_moment_degree
from .grid import Cube, Grid, GridFunction, lq_norm, read_gf
from .luxemburg import luxemburg_norm

MOMENT_TOL = 1e-8
SIZE_TOL = 1e-12
ATOMS_FORMAT_VERSION = 1


@dataclass
class Atom:
    """Cube-supported sample function with size exponent q and moment degree d."""

    cube: Cube
    samples: GridFunction
    q: float = math.inf
    d: int = 0

    def __post_init__(self):
        if not (self.q > 1):
            raise ValueError(f"size exponent must lie in (1, inf], got {self.q}")

    @property
    def grid(self) -> Grid:
        return self.samples.grid


@dataclass
class ValidationReport:
    passed: bool
    support_violations: int
    size_ratio: float
    max_moment_residual: float
    moments_checked: bool
    notes: dict = field(default_factory=dict)


@dataclass
class AtomicDecomposition:
    atoms: list[Atom]
    coefficients: np.ndarray
    provenance: str = "manual"
    report: dict = field(default_factory=dict)

    def __post_init__(self):
        self.coefficients = np.asarray(self.coefficients, dtype=float)
        if len(self.atoms) != self.coefficients.size:
            raise ValueError("coefficient count does not match atom count")
        if np.any(self.coefficients < 0):
            raise ValueError("coefficients must be nonnegative")

    def __len__(self):
        return len(self.atoms)

    @property
    def grid(self) -> Grid:
        if not self.atoms:
            raise GridError("empty decomposition has no grid")
        return self.atoms[0].grid


def validate_atom(a: Atom, p: ExponentField, moment_tol: float = MOMENT_TOL) -> ValidationReport:
    """Check support, size, and (small cubes only) normalized moment residuals.

    Moment residuals about the cube center are scaled by
    ||a||_q |Q|^(1 + |alpha|/n - 1/q'), making the tolerance scale-free.
    """
    grid = a.grid
    need_d = atom_moment_degree(p, grid.n)
    if a.d < need_d:
        raise DegreeError(f"atom degree {a.d} below required degree {need_d}")
    mask = a.cube.mask(grid)
    outside = np.abs(a.samples.values) > 0
    outside &= ~mask
    support_violations = int(np.count_nonzero(outside))

    measure = a.cube.measure
    anorm = lq_norm(a.samples, a.q)
    bound = 1.0 if a.q == math.inf else measure ** (1.0 / a.q)
    size_ratio = anorm / bound if bound > 0 else math.inf

    max_resid = 0.0
    check_moments = measure < 1.0
    if check_moments and anorm > 0:
        qp = 1.0 if a.q == math.inf else a.q / (a.q - 1.0)
        for alpha in _multi_indices(grid.n, a.d):
            mono = _centered_monomial(grid, a.cube.center, alpha)
            mom = float(np.sum(a.samples.values * mono) * grid.h**grid.n)
            scale = anorm * measure ** (1.0 + sum(alpha) / grid.n - 1.0 / qp)
            max_resid = max(max_resid, abs(mom) / scale)
    passed = support_violations == 0 and size_ratio <= 1.0 + SIZE_TOL and (
        not check_moments or max_resid <= moment_tol
    )
    return ValidationReport(
        passed=passed,
        support_violations=support_violations,
        size_ratio=size_ratio,
        max_moment_residual=max_resid,
        moments_checked=check_moments,
        notes={"required_degree": need_d, "cube_measure": measure},
    )


def _multi_indices(n: int, d: int) -> list[tuple[int, ...]]:
    if n == 1:
        return [(k,) for k in range(d + 1)]
    return [(a, b) for a in range(d + 1) for b in range(d + 1 - a)]


def _centered_monomial(grid: Grid, center, alpha) -> np.ndarray:
    if grid.n == 1:
        return (grid.axis - center[0]) ** alpha[0]
    ax = grid.axis
    x = (ax - center[0])[:, None] ** alpha[0]
    y = (ax - center[1])[None, :] ** alpha[1]
    return x * y


def synthesize(dec: AtomicDecomposition) -> GridFunction:
    """Pointwise sum of coefficient * atom in descending-coefficient order."""
    if not dec.atoms:
        raise GridError("cannot synthesize an empty decomposition without a grid")
    grid = dec.grid
    out = np.zeros(grid.shape)
    order = sorted(range(len(dec.atoms)), key=lambda i: (-dec.coefficients[i], i))
    for i in order:
        if dec.atoms[i].grid != grid:
            raise GridError("atoms live on different grids")
        out += dec.coefficients[i] * dec.atoms[i].samples.values
    return GridFunction(grid, out)


def synthesize_or_zero(dec: AtomicDecomposition, grid: Grid) -> GridFunction:
    return synthesize(dec) if dec.atoms else GridFunction.zeros(grid)


def coefficient_norm(
    dec: AtomicDecomposition, p: ExponentField, s: float = 1.0, tol: float = 1e-10
) -> float:
    """Luxemburg norm of (sum_j (coef_j chi_Qj)^s)^(1/s)."""
    if s <= 0:
        raise ValueError(f"aggregation exponent must be positive, got {s}")
    grid = p.grid
    acc = np.zeros(grid.shape)
    for lam, atom in zip(dec.coefficients, dec.atoms):
        if lam == 0:
            continue
        w = atom.cube.cell_window(grid)
        acc[w] += lam**s
    agg = GridFunction(grid, acc ** (1.0 / s))
    return luxemburg_norm(agg, p, tol).value


# ---------------------------------------------------------------------------
# .atoms serialization: JSON metadata plus a shared sample payload


def write_atoms(path, dec: AtomicDecomposition, payload_path=None) -> None:
    """Write atom metadata with data refs into a shared stacked .gf payload."""
    if payload_path is None:
        payload_path = str(path) + ".gf"
    grid = dec.grid
    flat = np.stack([a.samples.values.ravel() for a in dec.atoms]) if dec.atoms else np.zeros((0, grid.size))
    payload = {
        "version": ATOMS_FORMAT_VERSION,
        "n": grid.n,
        "L": grid.L,
        "J": grid.J,
        "count": len(dec.atoms),
        "data": [format(v, ".17g") for v in flat.ravel()],
    }
    with open(payload_path, "w") as fh:
        head = json.dumps({k: payload[k] for k in ("version", "n", "L", "J", "count")})[:-1]
        fh.write(head)
        fh.write(', "data": [')
        fh.write(", ".join(payload["data"]))
        fh.write("]}")
    meta = {
        "version": ATOMS_FORMAT_VERSION,
        "payload": os.path.basename(payload_path),
        "provenance": dec.provenance,
        "grid": {"n": grid.n, "L": grid.L, "J": grid.J},
        "atoms": [
            {
                "cube": {"center": list(a.cube.center), "side": a.cube.side},
                "lambda": float(lam),
                "q": "inf" if a.q == math.inf else a.q,
                "d": a.d,
                "data_ref": i,
            }
            for i, (lam, a) in enumerate(zip(dec.coefficients, dec.atoms))
        ],
        "report": dec.report,
    }
    with open(path, "w") as fh:
        json.dump(meta, fh, sort_keys=True)


def read_atoms(path) -> AtomicDecomposition:
    with open(path) as fh:
        try:
            meta = json.load(fh)
        except json.JSONDecodeError as e:
            raise FileFormatError(f"{path}: not valid JSON ({e})") from e
    for key in ("payload", "grid", "atoms"):
        if key not in meta:
            raise FileFormatError(f"{path}: missing field '{key}'")
    gspec = meta["grid"]
    from .grid import make_grid

    grid = make_grid(gspec["n"], gspec["L"], gspec["J"])
    payload_path = os.path.join(os.path.dirname(os.path.abspath(path)), meta["payload"])
    with open(payload_path) as fh:
        payload = json.load(fh)
    data = np.asarray(payload["data"], dtype=float)
    count = int(payload.get("count", len(meta["atoms"])))
    if data.size != count * grid.size:
        raise FileFormatError(f"{payload_path}: field 'data' has wrong length for {count} atoms")
    stack = data.reshape(count, *grid.shape)
    atoms, lams = [], []
    for rec in meta["atoms"]:
        q = math.inf if rec["q"] == "inf" else float(rec["q"])
        cube = Cube(center=tuple(rec["cube"]["center"]), side=float(rec["cube"]["side"]))
        ref = int(rec["data_ref"])
        if not (0 <= ref < count):
            raise FileFormatError(f"{path}: field 'data_ref' {ref} out of range")
        atoms.append(Atom(cube=cube, samples=GridFunction(grid, stack[ref].copy()), q=q, d=int(rec["d"])))
        lams.append(float(rec["lambda"]))
    return AtomicDecomposition(
        atoms=atoms,
        coefficients=np.asarray(lams),
        provenance=meta.get("provenance", "manual"),
        report=meta.get("report", {}),
    )
