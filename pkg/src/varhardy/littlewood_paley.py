"""Fourier filter bank with an exact dyadic partition of unity of squares.

The band filter is built from a smooth window on the annulus (1/2, 2] via
the quotient trick: |phi_hat|^2 = theta^2 / sum_k theta(2^-k .)^2, and the
low-pass square is defined as the complement, so the unity condition holds
to rounding on every represented frequency up to 2^J_max.  Filters act as
DFT multipliers (periodic extension of the box).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConstructionError, GridError
from .exponent import ExponentField
from .grid import Grid, GridFunction
from .luxemburg import NormResult, luxemburg_norm

UNITY_TOL = 1e-12


def _theta_sq(r: np.ndarray) -> np.ndarray:
    """Square of the smooth window supported on (1/2, 2)."""
    out = np.zeros_like(r)
    inside = (r > 0.5) & (r < 2.0)
    ri = r[inside]
    out[inside] = np.exp(2.0 / ((ri - 0.5) * (ri - 2.0)))
    return out


def _phi_hat_sq(r: np.ndarray) -> np.ndarray:
    """theta^2 / sum_k theta(2^-k r)^2, supported on (1/2, 2]."""
    out = np.zeros_like(r)
    pos = r > 0
    rp = r[pos]
    k0 = np.floor(np.log2(rp))
    denom = np.zeros_like(rp)
    for dk in (-1.0, 0.0, 1.0):
        denom += _theta_sq(rp * 2.0 ** -(k0 + dk))
    num = _theta_sq(rp)
    vals = np.where(denom > 0, num / np.maximum(denom, 1e-300), 0.0)
    # hard support mask, closed at 2 (the window itself vanishes there)
    vals[(rp <= 0.5) | (rp > 2.0)] = 0.0
    out[pos] = vals
    return out


@dataclass
class FilterBank:
    """Radial multipliers: low-pass Phi_hat and band dilates phi_hat(2^-j .)."""

    grid: Grid
    J_max: int
    Phi_hat: np.ndarray
    phi_hat_levels: list  # j = 1..J_max
    xi_radius: np.ndarray

    def level(self, j: int) -> np.ndarray:
        """Multiplier at level j, with the low-pass playing level zero."""
        if j == 0:
            return self.Phi_hat
        return self.phi_hat_levels[j - 1]

    def apply_level(self, f: GridFunction, j: int) -> np.ndarray:
        spec = np.fft.fftn(f.values)
        return np.fft.ifftn(spec * self.level(j)).real

    def apply_all(self, f: GridFunction) -> list[np.ndarray]:
        spec = np.fft.fftn(f.values)
        return [np.fft.ifftn(spec * self.level(j)).real for j in range(self.J_max + 1)]

    def band_limit(self, f: GridFunction) -> GridFunction:
        """Project f onto the represented band |xi| <= 2^J_max."""
        spec = np.fft.fftn(f.values)
        spec[self.xi_radius > 2.0**self.J_max] = 0.0
        return GridFunction(self.grid, np.fft.ifftn(spec).real)

    def unity_residual(self) -> float:
        total = self.Phi_hat**2
        for lvl in self.phi_hat_levels:
            total = total + lvl**2
        inband = self.xi_radius <= 2.0**self.J_max
        return float(np.max(np.abs(total[inband] - 1.0)))


def build_filter_bank(grid: Grid, J_max: int | None = None) -> FilterBank:
    """Construct the filter pair on the grid's frequency lattice.

    J_max defaults to the grid level J and may not exceed it (Nyquist).
    The low-pass value at frequency zero is normalized to 1.
    """
    if J_max is None:
        J_max = grid.J
    if J_max > grid.J:
        raise GridError(f"J_max={J_max} exceeds the grid level {grid.J}")
    if J_max < 1:
        raise GridError("need at least one band level")
    freqs = 2.0 * math.pi * np.fft.fftfreq(grid.m, d=grid.h)
    if grid.n == 1:
        radius = np.abs(freqs)
    else:
        fx, fy = np.meshgrid(freqs, freqs, indexing="ij")
        radius = np.hypot(fx, fy)
    levels = []
    total = np.zeros_like(radius)
    for j in range(1, J_max + 1):
        sq = _phi_hat_sq(radius * 2.0**-j)
        levels.append(np.sqrt(sq))
        total += sq
    phi0_sq = np.where(radius <= 2.0, np.clip(1.0 - total, 0.0, None), 0.0)
    bank = FilterBank(
        grid=grid,
        J_max=int(J_max),
        Phi_hat=np.sqrt(phi0_sq),
        phi_hat_levels=levels,
        xi_radius=radius,
    )
    res = bank.unity_residual()
    if res > UNITY_TOL:
        raise ConstructionError(f"partition-of-unity residual {res} exceeds {UNITY_TOL}")
    return bank


def square_function(f: GridFunction, bank: FilterBank) -> GridFunction:
    """sqrt(sum over levels 0..J_max of |filter_j * f|^2)."""
    acc = np.zeros(f.grid.shape)
    for piece in bank.apply_all(f):
        acc += piece**2
    return GridFunction(f.grid, np.sqrt(acc))


def discrete_square_function(f: GridFunction, bank: FilterBank) -> GridFunction:
    """Square function sampled at dyadic-cube corners, constant on each cube.

    Corners 2^-j k are cell boundaries on the cell-centered lattice; the
    corner sample is taken at the first cell center inside the cube.
    """
    grid = f.grid
    acc = np.zeros(grid.shape)
    pieces = bank.apply_all(f)
    for j, piece in enumerate(pieces):
        cells = 2 ** (grid.J - j)  # cells per cube side at level j
        if round(grid.L * 2.0**j) != grid.L * 2.0**j:
            raise GridError(f"box corner -L is not a level-{j} dyadic corner")
        if grid.n == 1:
            corner = piece[::cells]
            acc += np.repeat(corner**2, cells)
        else:
            corner = piece[::cells, ::cells]
            acc += np.repeat(np.repeat(corner**2, cells, axis=0), cells, axis=1)
    return GridFunction(grid, np.sqrt(acc))


def hp_norm(
    f: GridFunction, p: ExponentField, bank: FilterBank, tol: float = 1e-10
) -> float:
    """Two-term local Hardy quasi-norm: low-pass norm plus band square-function norm."""
    pieces = bank.apply_all(f)
    low = GridFunction(f.grid, np.abs(pieces[0]))
    acc = np.zeros(f.grid.shape)
    for piece in pieces[1:]:
        acc += piece**2
    high = GridFunction(f.grid, np.sqrt(acc))
    return luxemburg_norm(low, p, tol).value + luxemburg_norm(high, p, tol).value


def hp_norm_result(
    f: GridFunction, p: ExponentField, bank: FilterBank, tol: float = 1e-10
) -> tuple[float, NormResult, NormResult]:
    pieces = bank.apply_all(f)
    low = GridFunction(f.grid, np.abs(pieces[0]))
    acc = np.zeros(f.grid.shape)
    for piece in pieces[1:]:
        acc += piece**2
    high = GridFunction(f.grid, np.sqrt(acc))
    a = luxemburg_norm(low, p, tol)
    b = luxemburg_norm(high, p, tol)
    return a.value + b.value, a, b
