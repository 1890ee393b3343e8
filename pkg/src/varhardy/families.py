"""Deterministic test-function families.

Every member is a recipe (label plus closed-form builder), so the same
family can be materialized on any grid; refinement studies re-sample the
identical functions one level finer.  Seeds only enter through the recipe
parameters, making outputs byte-reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .atoms import Atom
from .errors import GridError
from .grid import Cube, Grid, GridFunction
from .profiles import bump, plateau

STANDARD_SEED = 7


@dataclass(frozen=True)
class Recipe:
    label: str
    build: object  # Grid -> GridFunction
    compact_support: bool = True

    def __call__(self, grid: Grid) -> GridFunction:
        return self.build(grid)


def _gauss(sigma: float, c: float) -> Recipe:
    return Recipe(
        f"gauss(s={sigma},c={c})",
        lambda grid: GridFunction.from_callable(grid, lambda x: np.exp(-((x - c) ** 2) / (2 * sigma**2))),
        compact_support=False,
    )


def _haar(side: float, corner: float) -> Recipe:
    def build(grid: Grid) -> GridFunction:
        def fn(x):
            mid = corner + side / 2.0
            return np.where((x >= corner) & (x < mid), 1.0, 0.0) - np.where(
                (x >= mid) & (x < corner + side), 1.0, 0.0
            )

        return GridFunction.from_callable(grid, fn)

    return Recipe(f"haar(side={side},corner={corner})", build)


def _windowed_trig(seed: int, terms: int, omega_max: float) -> Recipe:
    rng = np.random.default_rng(seed)
    amps = rng.normal(size=terms) / math.sqrt(terms)
    omegas = rng.uniform(0.5, omega_max, size=terms)
    phases = rng.uniform(0, 2 * math.pi, size=terms)
    win = plateau(6.0, 7.5)

    def build(grid: Grid) -> GridFunction:
        def fn(x):
            acc = np.zeros_like(x)
            for a, w, ph in zip(amps, omegas, phases):
                acc += a * np.cos(w * x + ph)
            return acc * win(x)

        return GridFunction.from_callable(grid, fn)

    return Recipe(f"trig(seed={seed},K={terms},W={omega_max})", build)


def _poly_bump(degree: int, radius: float, c: float) -> Recipe:
    from .profiles import poly_bump

    prof = poly_bump(degree, radius)
    return Recipe(
        f"polybump(d={degree},r={radius},c={c})",
        lambda grid: GridFunction.from_callable(grid, lambda x: prof(x - c)),
    )


def _bump_difference(t1: float, t2: float, c: float) -> Recipe:
    b = bump(0.5).normalized()

    def build(grid: Grid) -> GridFunction:
        return GridFunction.from_callable(
            grid, lambda x: b((x - c) / t1) / t1 - b((x - c) / t2) / t2
        )

    return Recipe(f"bumpdiff(t1={t1},t2={t2},c={c})", build)


def _plateau_fn(inner: float, outer: float, c: float) -> Recipe:
    prof = plateau(inner, outer)
    return Recipe(
        f"plateau({inner},{outer},c={c})",
        lambda grid: GridFunction.from_callable(grid, lambda x: prof(x - c)),
    )


def _wave_packet(freq: float, radius: float, c: float) -> Recipe:
    env = bump(radius)

    def build(grid: Grid) -> GridFunction:
        return GridFunction.from_callable(grid, lambda x: np.sin(freq * (x - c)) * env(x - c) / env(0.0))

    return Recipe(f"packet(f={freq},r={radius},c={c})", build)


def _tent(width: float, c: float) -> Recipe:
    return Recipe(
        f"tent(w={width},c={c})",
        lambda grid: GridFunction.from_callable(
            grid, lambda x: np.maximum(0.0, 1.0 - np.abs(x - c) / width)
        ),
    )


def _mixture(seed: int) -> Recipe:
    g = _gauss(0.7, -0.5)
    h = _haar(0.25, 2.0)
    w = _wave_packet(5.0, 1.5, -3.0)

    def build(grid: Grid) -> GridFunction:
        return GridFunction(
            grid, g(grid).values + 0.5 * h(grid).values + 0.25 * w(grid).values
        )

    return Recipe(f"mixture(seed={seed})", build, compact_support=False)


def standard20(seed: int = STANDARD_SEED) -> list[Recipe]:
    """The fixed 20-member family: smooth bumps, jump atoms at five scales,
    windowed trigonometric noise, mean-zero differences, and mixtures."""
    rng = np.random.default_rng(seed)
    offsets = rng.uniform(-1.0, 1.0, size=8)
    return [
        _gauss(0.5, 0.0),
        _gauss(1.0, -2.0),
        _gauss(0.125, 1.5),
        _haar(1.0, float(round(offsets[0] * 4) / 4)),
        _haar(0.5, 1.0),
        _haar(0.25, -2.0),
        _haar(0.125, 0.5),
        _haar(0.0625, -0.25),
        _windowed_trig(seed + 1, 12, 8.0),
        _windowed_trig(seed + 2, 8, 24.0),
        _windowed_trig(seed + 3, 20, 4.0),
        _poly_bump(1, 1.5, -1.0),
        _poly_bump(2, 2.0, 0.5),
        _poly_bump(3, 1.0, 3.0),
        _bump_difference(0.5, 0.25, float(round(offsets[1] * 8) / 8)),
        _bump_difference(1.0, 0.125, -4.0),
        _plateau_fn(1.0, 2.0, 0.0),
        _wave_packet(3.0, 2.0, 1.0),
        _mixture(seed),
        _tent(0.75, -1.5),
    ]


def random_family(seed: int, count: int = 10) -> list[Recipe]:
    """Seeded smooth random members: windowed trig plus random bumps."""
    rng = np.random.default_rng(seed)
    out = []
    for i in range(count):
        kind = int(rng.integers(0, 3))
        if kind == 0:
            out.append(_windowed_trig(int(rng.integers(0, 1 << 31)), int(rng.integers(4, 24)), float(rng.uniform(2, 20))))
        elif kind == 1:
            out.append(_gauss(float(rng.uniform(0.1, 1.5)), float(rng.uniform(-4, 4))))
        else:
            out.append(_poly_bump(int(rng.integers(0, 4)), float(rng.uniform(0.5, 2.5)), float(rng.uniform(-4, 4))))
    return out


# ---------------------------------------------------------------------------
# seeded atoms


def seeded_atom(grid: Grid, rng: np.random.Generator, d: int, q: float = math.inf) -> Atom:
    """A valid atom on a random dyadic cube: random smooth samples projected
    against the monomials through degree d, then size-normalized."""
    j = int(rng.integers(0, 5))
    side = 2.0**-j
    max_k = int(2 * grid.L / side) - 1
    k = int(rng.integers(0, max_k + 1))
    corner = -grid.L + k * side
    cube = Cube(center=(corner + side / 2.0,), side=side)
    w = cube.cell_window(grid)
    cells = w[0].stop - w[0].start
    u = np.linspace(-1, 1, cells)
    raw = np.zeros(cells)
    for m in range(1, 4):
        raw += rng.normal() * np.sin(math.pi * m * (u + 1) / 2.0)
    if cube.measure < 1.0:
        V = np.stack([u**a for a in range(d + 1)], axis=1)
        coeffs, *_ = np.linalg.lstsq(V, raw, rcond=None)
        raw = raw - V @ coeffs
    vals = np.zeros(grid.shape)
    vals[w] = raw
    f = GridFunction(grid, vals)
    from .grid import lq_norm

    nrm = lq_norm(f, q)
    if nrm == 0:
        vals[w] = 1.0 if cube.measure >= 1.0 else 0.0
        f = GridFunction(grid, vals)
        nrm = lq_norm(f, q) or 1.0
    bound = 1.0 if q == math.inf else cube.measure ** (1.0 / q)
    return Atom(cube=cube, samples=GridFunction(grid, vals * (bound / nrm)), q=q, d=d)


def seeded_atoms(grid: Grid, seed: int, count: int, d: int, q: float = math.inf) -> list[Atom]:
    rng = np.random.default_rng(seed)
    return [seeded_atom(grid, rng, d, q) for _ in range(count)]


def materialize(recipes: list[Recipe], grid: Grid) -> list[GridFunction]:
    return [r(grid) for r in recipes]


def get_family(name: str, seed: int = STANDARD_SEED) -> list[Recipe]:
    if name == "standard20":
        return standard20(seed)
    if name == "random":
        return random_family(seed)
    raise GridError(f"unknown family {name!r}; known: standard20, random, atoms")
