"""Uniform dyadic grids on truncated boxes.

Everything downstream works on samples of real functions taken at the cell
centers of a uniform lattice on [-L, L]^n with spacing h = 2^-J.  Integrals
are midpoint sums, convolutions are zero-padded FFT convolutions, and cubes
are snapped outward to whole cells when they are not lattice aligned.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import fftconvolve

from .errors import FileFormatError, GridError, InvalidInputError, UnderResolvedError

GF_FORMAT_VERSION = 1


@dataclass(frozen=True)
class Grid:
    """Cell-centered lattice on [-L, L]^n with spacing h = 2^-J."""

    n: int
    L: float
    J: int

    @property
    def h(self) -> float:
        return 2.0 ** (-self.J)

    @property
    def m(self) -> int:
        """Number of cells per axis."""
        return int(round(2.0 * self.L / self.h))

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.m,) * self.n

    @property
    def size(self) -> int:
        return self.m**self.n

    @property
    def axis(self) -> np.ndarray:
        """Cell-center coordinates along one axis."""
        return -self.L + (np.arange(self.m) + 0.5) * self.h

    def points(self) -> np.ndarray:
        """Lattice points, shape (m,) for n=1 and (m, m, 2) for n=2."""
        ax = self.axis
        if self.n == 1:
            return ax
        x, y = np.meshgrid(ax, ax, indexing="ij")
        return np.stack([x, y], axis=-1)

    def radii(self) -> np.ndarray:
        """Euclidean distance of each lattice point from the origin."""
        ax = self.axis
        if self.n == 1:
            return np.abs(ax)
        x, y = np.meshgrid(ax, ax, indexing="ij")
        return np.hypot(x, y)

    def refine(self, extra_levels: int = 1) -> "Grid":
        return make_grid(self.n, self.L, self.J + extra_levels)


def make_grid(n: int, L: float, J: int) -> Grid:
    """Build a grid, rejecting parameters that do not tile the box exactly."""
    if n not in (1, 2):
        raise GridError(f"dimension must be 1 or 2, got {n}")
    if not (L > 0) or not math.isfinite(L):
        raise GridError(f"half-width must be positive and finite, got {L}")
    if J < 0 or J != int(J):
        raise GridError(f"resolution level must be a nonnegative integer, got {J}")
    cells = 2.0 * L * 2.0**J
    if abs(cells - round(cells)) > 1e-9 or round(cells) < 1:
        raise GridError(f"2*L*2^J = {cells} is not a positive integer; the lattice must tile the box")
    return Grid(n=int(n), L=float(L), J=int(J))


@dataclass
class GridFunction:
    """Real samples, one per lattice point, in row-major axis order."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.grid.shape:
            if self.values.size == self.grid.size:
                self.values = self.values.reshape(self.grid.shape)
            else:
                raise GridError(
                    f"sample count {self.values.size} does not match lattice size {self.grid.size}"
                )
        if not np.all(np.isfinite(self.values)):
            raise InvalidInputError("grid function samples must be finite")

    @classmethod
    def from_callable(cls, grid: Grid, fn) -> "GridFunction":
        if grid.n == 1:
            vals = fn(grid.axis)
        else:
            ax = grid.axis
            x, y = np.meshgrid(ax, ax, indexing="ij")
            vals = fn(x, y)
        return cls(grid, np.broadcast_to(np.asarray(vals, dtype=float), grid.shape).copy())

    @classmethod
    def zeros(cls, grid: Grid) -> "GridFunction":
        return cls(grid, np.zeros(grid.shape))

    def copy(self) -> "GridFunction":
        return GridFunction(self.grid, self.values.copy())


def same_grid(*fns) -> Grid:
    g = fns[0].grid
    for f in fns[1:]:
        if f.grid != g:
            raise GridError("grid functions live on different grids")
    return g


def integrate(f: GridFunction) -> float:
    """Midpoint quadrature: sum of samples times cell measure."""
    return float(np.sum(f.values) * f.grid.h**f.grid.n)


def lq_norm(f: GridFunction, q: float) -> float:
    """Quadrature L^q norm; q = inf gives the sample sup."""
    if q == math.inf:
        return float(np.max(np.abs(f.values))) if f.values.size else 0.0
    if q <= 0:
        raise ValueError(f"q must be positive, got {q}")
    return float((np.sum(np.abs(f.values) ** q) * f.grid.h**f.grid.n) ** (1.0 / q))


# ---------------------------------------------------------------------------
# cubes


@dataclass(frozen=True)
class Cube:
    """Axis-aligned closed cube; dyadic cubes carry their (level, index) tag."""

    center: tuple[float, ...]
    side: float
    level: int | None = None
    index: tuple[int, ...] = field(default=None)

    @classmethod
    def dyadic(cls, j: int, k, n: int | None = None) -> "Cube":
        """Dyadic cube [2^-j k, 2^-j (k+1)]^n with lower-left corner 2^-j k."""
        k = tuple(int(v) for v in (k if np.iterable(k) else (k,)))
        if n is not None and len(k) != n:
            raise GridError(f"index length {len(k)} does not match dimension {n}")
        side = 2.0 ** (-j)
        center = tuple(side * (v + 0.5) for v in k)
        return cls(center=center, side=side, level=int(j), index=k)

    @property
    def n(self) -> int:
        return len(self.center)

    @property
    def corner(self) -> tuple[float, ...]:
        """Lower-left corner."""
        return tuple(c - self.side / 2.0 for c in self.center)

    @property
    def measure(self) -> float:
        return self.side**self.n

    def dilate(self, lam: float) -> "Cube":
        """Cube with the same center and side lam * side."""
        return Cube(center=self.center, side=lam * self.side)

    def children(self) -> list["Cube"]:
        """The 2^n dyadic children; exact partition of a dyadic parent."""
        if self.level is None or self.index is None:
            raise GridError("children are only defined for dyadic cubes")
        j, k = self.level, self.index
        out = []
        for off in np.ndindex(*(2,) * self.n):
            out.append(Cube.dyadic(j + 1, tuple(2 * v + o for v, o in zip(k, off))))
        return out

    def cell_window(self, grid: Grid) -> tuple[slice, ...]:
        """Index slices of the cells covering the cube, snapped outward.

        A cell belongs to the window when it intersects the closed cube on a
        set of positive measure; for lattice-aligned cubes this is exact.
        """
        h = grid.h
        eps = 1e-9 * h
        slices = []
        for c in self.center:
            lo = c - self.side / 2.0
            hi = c + self.side / 2.0
            i0 = int(math.floor((lo + grid.L) / h + eps))
            i1 = int(math.ceil((hi + grid.L) / h - eps))
            i0 = max(i0, 0)
            i1 = min(i1, grid.m)
            if i1 <= i0:
                return tuple(slice(0, 0) for _ in self.center)
            slices.append(slice(i0, i1))
        return tuple(slices)

    def center_window(self, grid: Grid) -> tuple[slice, ...]:
        """Index slices of the cells whose centers lie in the closed cube.

        This is the support semantics for bump functions evaluated at cell
        centers; it never exceeds the snapped window.
        """
        h = grid.h
        eps = 1e-9 * h
        slices = []
        for c in self.center:
            lo = c - self.side / 2.0
            hi = c + self.side / 2.0
            # first cell center -L + (i + 1/2) h >= lo
            i0 = int(math.ceil((lo + grid.L) / h - 0.5 - eps))
            i1 = int(math.floor((hi + grid.L) / h - 0.5 + eps)) + 1
            i0 = max(i0, 0)
            i1 = min(i1, grid.m)
            if i1 <= i0:
                return tuple(slice(0, 0) for _ in self.center)
            slices.append(slice(i0, i1))
        return tuple(slices)

    def mask(self, grid: Grid) -> np.ndarray:
        out = np.zeros(grid.shape, dtype=bool)
        w = self.cell_window(grid)
        out[w] = True
        return out

    def grid_measure(self, grid: Grid) -> float:
        """Measure of the snapped cell union actually used for indicators."""
        w = self.cell_window(grid)
        cells = 1
        for s in w:
            cells *= max(0, s.stop - s.start)
        return cells * grid.h**grid.n

    def indicator(self, grid: Grid) -> GridFunction:
        return GridFunction(grid, self.mask(grid).astype(float))

    def intersects(self, other: "Cube") -> bool:
        for a, b in zip(self.center, other.center):
            if abs(a - b) > (self.side + other.side) / 2.0 + 1e-12:
                return False
        return True

    def contains_cube(self, other: "Cube") -> bool:
        for a, b in zip(self.center, other.center):
            if abs(a - b) > (self.side - other.side) / 2.0 + 1e-12:
                return False
        return True


# ---------------------------------------------------------------------------
# scaled convolution


def convolve_scaled(f: GridFunction, psi, t: float) -> GridFunction:
    """Zero-extension convolution of f with the L^1-rescaled dilate of psi.

    The dilate at scale t > 0 is t^-n psi(x / t).  When psi is a closed-form
    profile the discrete kernel takes exact cell averages of the rescaled
    form (so the kernel mass matches the continuum integral at every
    resolved scale); grid-function kernels are linearly interpolated.
    Scales with fewer than 4 samples across the support are rejected.
    """
    if not (t > 0):
        raise ValueError(f"scale must be positive, got {t}")
    grid = f.grid
    h = grid.h
    radius = _profile_radius(psi)
    if 2.0 * t * radius / h < 4.0 - 1e-12:
        raise UnderResolvedError(
            f"scale t={t} leaves {2 * t * radius / h:.2f} samples across the support; need >= 4"
        )
    halfw = int(math.ceil(t * radius / h + 0.5))
    halfw = min(halfw, grid.m - 1)
    if isinstance(psi, GridFunction):
        offsets = np.arange(-halfw, halfw + 1) * h
        if grid.n == 1:
            kern = _profile_values(psi, offsets / t) / t
        else:
            ox, oy = np.meshgrid(offsets, offsets, indexing="ij")
            kern = _profile_values_2d(psi, ox / t, oy / t) / t**2
    else:
        # the 2-d dilate is the tensor product of the 1-d dilates
        k1 = _cell_averaged_kernel_1d(psi, t, h, halfw) / t
        kern = k1 if grid.n == 1 else np.outer(k1, k1)
    out = fftconvolve(f.values, kern, mode="same") * h**grid.n
    return GridFunction(grid, out)


def _cell_averaged_kernel_1d(psi, t: float, h: float, halfw: int) -> np.ndarray:
    """Cell averages of the 1-d factor u -> psi(u / t), one per offset cell."""
    span = 2 * halfw + 1
    # enough sub-samples that the within-cell midpoint error is ~1e-12
    q = max(1, int(math.ceil(1024.0 * h / (2.0 * t * psi.support_radius)))) | 1
    sub = (np.arange(q) + 0.5) / q - 0.5
    pos = (np.arange(-halfw, halfw + 1)[:, None] + sub[None, :]) * h
    return np.asarray(psi(pos.ravel() / t), dtype=float).reshape(span, q).mean(axis=1)


def _profile_radius(psi) -> float:
    if isinstance(psi, GridFunction):
        nz = np.nonzero(psi.values)
        if len(nz[0]) == 0:
            return psi.grid.h
        ax = psi.grid.axis
        r = 0.0
        for d in range(psi.grid.n):
            r = max(r, float(np.max(np.abs(ax[nz[d]]))) + psi.grid.h / 2)
        return r
    return float(psi.support_radius)


def _profile_values(psi, u: np.ndarray) -> np.ndarray:
    if isinstance(psi, GridFunction):
        if psi.grid.n != 1:
            raise GridError("1-d kernel requested from a 2-d grid function")
        return np.interp(u, psi.grid.axis, psi.values, left=0.0, right=0.0)
    return psi(u)


def _profile_values_2d(psi, ux: np.ndarray, uy: np.ndarray) -> np.ndarray:
    if isinstance(psi, GridFunction):
        from scipy.interpolate import RegularGridInterpolator

        ax = psi.grid.axis
        interp = RegularGridInterpolator(
            (ax, ax), psi.values, bounds_error=False, fill_value=0.0
        )
        pts = np.stack([ux.ravel(), uy.ravel()], axis=-1)
        return interp(pts).reshape(ux.shape)
    return psi.values_2d(ux, uy)


# ---------------------------------------------------------------------------
# .gf serialization


def write_gf(path, f: GridFunction) -> None:
    """Write the .gf JSON format with 17-significant-digit floats."""
    data = [format(v, ".17g") for v in np.asarray(f.values, dtype=float).ravel()]
    obj = {
        "version": GF_FORMAT_VERSION,
        "n": f.grid.n,
        "L": f.grid.L,
        "J": f.grid.J,
        "data": data,
    }
    with open(path, "w") as fh:
        # data floats are pre-formatted strings; strip the quotes for valid JSON numbers
        head = json.dumps({k: obj[k] for k in ("version", "n", "L", "J")})[:-1]
        fh.write(head)
        fh.write(', "data": [')
        fh.write(", ".join(data))
        fh.write("]}")


def read_gf(path, expect_grid: Grid | None = None) -> GridFunction:
    with open(path) as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as e:
            raise FileFormatError(f"{path}: not valid JSON ({e})") from e
    for key in ("version", "n", "L", "J", "data"):
        if key not in obj:
            raise FileFormatError(f"{path}: missing field '{key}'")
    if obj["version"] != GF_FORMAT_VERSION:
        raise FileFormatError(f"{path}: unsupported version field {obj['version']}")
    grid = make_grid(obj["n"], obj["L"], obj["J"])
    if expect_grid is not None and grid != expect_grid:
        raise FileFormatError(f"{path}: grid header does not match expected grid")
    data = np.asarray(obj["data"], dtype=float)
    if data.size != grid.size:
        raise FileFormatError(
            f"{path}: field 'data' has {data.size} values, lattice needs {grid.size}"
        )
    return GridFunction(grid, data)
