"""Local maximal operators over scales below one.

Covers the uncentered window maximal function, the single-kernel local
vertical / non-tangential / tangential (Peetre-type) maximal functions, and
their grand versions taken over a finite dictionary of derivative-normalized
test functions.  Suprema over continuous scale ranges are evaluated on the
documented dyadic-plus-midpoint scale set.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.ndimage import maximum_filter, maximum_filter1d

from .errors import GridError, UnderResolvedError
from .grid import Grid, GridFunction, convolve_scaled
from .profiles import Profile, poly_bump, standard_mollifier
from .sweeps import decaying_max_sweep_1d, decaying_max_sweep_2d

DEFAULT_N = 5
LARGE_RADIUS = {1: 2.0 ** (3 * (10 + 1)), 2: 2.0 ** (3 * (10 + 2))}
NORMALIZATION_SLACK = 1e-6


@dataclass
class MaximalResult:
    """Nonnegative maximal-function samples plus the parameters that made them."""

    values: GridFunction
    tag: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if np.any(self.values.values < 0):
            raise ValueError("maximal function values must be nonnegative")


@dataclass(frozen=True)
class DictionaryMember:
    profile: Profile
    nominal_radius: float  # Euclidean support radius in R^n
    derivative_sup: float  # max over |alpha| <= N+1 after scaling
    integral: float


@dataclass(frozen=True)
class TestFunctionDictionary:
    """Finite stand-in for the derivative-normalized test class.

    Members are polynomial-times-bump shapes scaled so the largest
    derivative sup through order N+1 equals 1 - 1e-6; each has nonzero
    integral and support inside the Euclidean ball of its nominal radius.
    """

    members: tuple[DictionaryMember, ...]
    N: int
    R: float
    n: int
    label: str

    def restrict(self, radius: float) -> tuple[DictionaryMember, ...]:
        kept = tuple(m for m in self.members if m.nominal_radius <= radius * (1 + 1e-12))
        if not kept:
            raise ValueError(f"no dictionary members with support radius <= {radius}")
        return kept

    def validate(self, tol: float = NORMALIZATION_SLACK) -> None:
        for m in self.members:
            if m.derivative_sup > 1.0 + tol:
                raise ValueError(f"member {m.profile.label} breaks the derivative bound")
            if abs(m.integral) < 1e-12:
                raise ValueError(f"member {m.profile.label} has vanishing integral")


# sup |d^m/du^m (1 + u^deg) exp(1/(u^2 - 1))| on (-1, 1), m = 0..6, frozen from
# the symbolic derivatives (see test_maximal for the regeneration check);
# radius r rescales the order-m sup by r^-m exactly
_FROZEN_BASE_SUPS = {
    0: (0.73575888234288467, 1.5968593517193059, 15.499355203495936, 372.79871485585147, 16631.291899450847, 1192652.0127863975, 162948064.325903),
    1: (0.43331625329969814, 1.3314572224103716, 14.126967556578455, 350.57305706712003, 15884.85013915407, 1171855.51977087, 159897252.85946009),
    2: (0.36787944117144233, 1.1604955776864294, 13.01053374819451, 331.06765557877407, 15206.085911735725, 1148900.6710824408, 156827561.51557925),
    3: (0.36787944117144233, 1.0412964206605198, 12.088965139643374, 313.86320201903141, 14587.607659975234, 1124483.9123469514, 153713752.95774886),
    4: (0.36787944117144233, 0.95522108255936056, 11.320380728411765, 298.63629109739622, 14022.800982843697, 1099044.9613017077, 150575364.50268894),
    5: (0.36787944117144233, 0.8923293684616288, 10.674488494978197, 285.10746358767551, 13505.74612747734, 1072909.5746647331, 147468746.01121837),
    6: (0.36787944117144233, 0.84671404253175031, 10.128788301972346, 273.07423566946375, 13032.048111256505, 1046403.565449764, 144347497.21176919),
    7: (0.36787944117144233, 0.82424866896883897, 9.6662492742494965, 262.3345148973176, 12598.763736549554, 1019785.2868963268, 141292650.89356357),
}


@lru_cache(maxsize=32)
def _base_derivative_sups(degree: int, max_order: int) -> tuple[float, ...]:
    if degree in _FROZEN_BASE_SUPS and max_order <= 6:
        return _FROZEN_BASE_SUPS[degree][: max_order + 1]
    return poly_bump(degree, 1.0).derivative_sups_1d(max_order)


def build_dictionary(
    N: int = DEFAULT_N,
    R: float = 1.0,
    n: int = 1,
    degrees: tuple[int, ...] = (0, 1, 2, 3),
    box_halfwidth: float | None = None,
) -> TestFunctionDictionary:
    """Dictionary for the given derivative order and support radius bound.

    Radii come in pairs {r/2, r}; for R above 1 the unit-radius pair is kept
    as a subset (so enlarging R never loses members) and the large radius is
    clipped to the box half-width.
    """
    radii = []
    if R <= 1.0:
        radii = [R / 2.0, R]
    else:
        big = min(R, box_halfwidth) if box_halfwidth else R
        radii = [0.5, 1.0]
        for r in (big / 2.0, big):
            if r not in radii:
                radii.append(r)
    members = []
    max_order = N + 1
    for r in radii:
        factor_r = r / math.sqrt(n)
        for deg in degrees:
            base = _base_derivative_sups(deg, max_order)
            sups = [base[m] / factor_r**m for m in range(max_order + 1)]
            if n == 1:
                worst = max(sups)
                scale = (1.0 - NORMALIZATION_SLACK) / worst
            else:
                worst = max(sups[a] * sups[b] for a in range(max_order + 1) for b in range(max_order + 1 - a))
                scale = math.sqrt((1.0 - NORMALIZATION_SLACK) / worst)
            prof = poly_bump(deg, factor_r).with_scale(scale, label=f"qbump(d={deg},r={r})")
            sup_scaled = worst * scale**n
            members.append(
                DictionaryMember(
                    profile=prof,
                    nominal_radius=r,
                    derivative_sup=sup_scaled,
                    integral=prof.integral(n),
                )
            )
    d = TestFunctionDictionary(
        members=tuple(members), N=N, R=R, n=n, label=f"polybump(N={N},R={R},n={n},deg={degrees})"
    )
    d.validate()
    return d


@lru_cache(maxsize=16)
def default_dictionary(n: int = 1, N: int = DEFAULT_N, doubled: bool = False, box_halfwidth: float = 8.0):
    degrees = (0, 1, 2, 3, 4, 5, 6, 7) if doubled else (0, 1, 2, 3)
    return build_dictionary(N=N, R=LARGE_RADIUS[n], n=n, degrees=degrees, box_halfwidth=box_halfwidth)


# ---------------------------------------------------------------------------
# scale sets


def dyadic_scales(grid: Grid) -> list[float]:
    """t = 2^-j for j = 0..J."""
    return [2.0**-j for j in range(grid.J + 1)]


def local_scale_set(grid: Grid) -> list[float]:
    """The documented stand-in for t in (0, 1): dyadic scales plus midpoints."""
    out = [2.0**-j for j in range(grid.J + 1)]
    out += [1.5 * 2.0**-j for j in range(1, grid.J + 1)]
    return sorted(out, reverse=True)


# ---------------------------------------------------------------------------
# window (Hardy-Littlewood type) maximal function


def hl_maximal(f: GridFunction) -> MaximalResult:
    """Uncentered window maximal over dyadic cubes and their half-shifts.

    The window family is every lattice-aligned dyadic cube intersecting the
    box (side h up to 2L) plus the half-shifted copies; averages use the
    zero extension, i.e. full window measure in the denominator.
    """
    grid = f.grid
    a = np.abs(f.values)
    if grid.n == 1:
        out = _hl_1d(a)
    else:
        out = _hl_2d(a)
    return MaximalResult(GridFunction(grid, out), "window-maximal", {"windows": "dyadic+half-shift"})


def _window_avg_1d(a: np.ndarray, s: int, shift: int) -> np.ndarray:
    """Per-cell average of its covering window of s cells starting at offset shift."""
    m = a.shape[-1]
    pad_lo = (-shift) % s
    pad_hi = (-(m + pad_lo)) % s
    padded = np.concatenate([np.zeros(a.shape[:-1] + (pad_lo,)), a, np.zeros(a.shape[:-1] + (pad_hi,))], axis=-1)
    k = padded.shape[-1] // s
    sums = padded.reshape(a.shape[:-1] + (k, s)).sum(axis=-1) / s
    percell = np.repeat(sums, s, axis=-1)
    return percell[..., pad_lo : pad_lo + m]


def _hl_1d(a: np.ndarray) -> np.ndarray:
    # windows of side > 2L are dominated by the full-box window (zero extension)
    m = a.shape[0]
    out = a.copy()
    s = 2
    while s <= m:
        np.maximum(out, _window_avg_1d(a, s, 0), out=out)
        np.maximum(out, _window_avg_1d(a, s, s // 2), out=out)
        s *= 2
    return out


def _hl_2d(a: np.ndarray) -> np.ndarray:
    m = a.shape[0]
    out = a.copy()
    s = 2
    while s <= m:
        for sx in (0, s // 2):
            rows = _window_avg_1d(a, s, sx)
            for sy in (0, s // 2):
                both = _window_avg_1d(rows.swapaxes(0, 1), s, sy).swapaxes(0, 1)
                np.maximum(out, both, out=out)
        s *= 2
    return out


# ---------------------------------------------------------------------------
# single-kernel local maximal functions


def _scale_convolutions(f: GridFunction, psi0: Profile, scales) -> tuple[list[tuple[float, np.ndarray]], list[float]]:
    convs, dropped = [], []
    for t in scales:
        try:
            c = convolve_scaled(f, psi0, t)
        except UnderResolvedError:
            dropped.append(t)
            continue
        convs.append((t, np.abs(c.values)))
    if not convs:
        raise UnderResolvedError("every requested scale is under-resolved on this grid")
    return convs, dropped


def local_vertical_maximal(f: GridFunction, psi0: Profile | None = None) -> MaximalResult:
    """sup over dyadic dilates of |psi_t * f| at t = 2^-j, j >= 0."""
    psi0 = psi0 or standard_mollifier()
    convs, dropped = _scale_convolutions(f, psi0, dyadic_scales(f.grid))
    out = np.maximum.reduce([c for _, c in convs])
    return MaximalResult(
        GridFunction(f.grid, out),
        "local-vertical",
        {"psi": psi0.label, "scales": [t for t, _ in convs], "dropped_scales": dropped},
    )


def local_nontangential_maximal(f: GridFunction, psi0: Profile | None = None) -> MaximalResult:
    """sup of |psi_t * f(y)| over the scale set and |x - y| < t."""
    psi0 = psi0 or standard_mollifier()
    grid = f.grid
    convs, dropped = _scale_convolutions(f, psi0, local_scale_set(grid))
    out = np.zeros(grid.shape)
    for t, c in convs:
        rr = t / grid.h  # strict |x - y| < t in cell offsets
        r = int(math.ceil(rr)) - 1
        if r <= 0:
            np.maximum(out, c, out=out)
            continue
        if grid.n == 1:
            w = maximum_filter1d(c, size=2 * r + 1, mode="constant", cval=0.0)
        else:
            w = maximum_filter(c, footprint=_disk_footprint(rr), mode="constant", cval=0.0)
        np.maximum(out, w, out=out)
    return MaximalResult(
        GridFunction(grid, out),
        "local-nontangential",
        {"psi": psi0.label, "scales": [t for t, _ in convs], "dropped_scales": dropped},
    )


@lru_cache(maxsize=64)
def _disk_footprint(rr: float) -> np.ndarray:
    r = int(math.ceil(rr)) - 1
    ii = np.arange(-r, r + 1)
    dx, dy = np.meshgrid(ii, ii, indexing="ij")
    return (dx**2 + dy**2) < rr**2


def peetre_maximal(f: GridFunction, psi0: Profile | None = None, A: float = 4.0, B: float = 2.0) -> MaximalResult:
    """Tangential maximal function with weight (1 + 2^j |y|)^-A 2^-B|y|.

    For each dyadic level the weighted sweep over all lattice offsets is the
    hot loop; it dispatches to the compiled kernel when available.
    """
    if A < 1.0 or B < 1.0:
        raise ValueError("weight orders must be >= 1")
    psi0 = psi0 or standard_mollifier()
    grid = f.grid
    h = grid.h
    out = np.zeros(grid.shape)
    dropped, used = [], []
    for j in range(grid.J + 1):
        t = 2.0**-j
        try:
            c = convolve_scaled(f, psi0, t)
        except UnderResolvedError:
            dropped.append(t)
            continue
        used.append(t)
        cv = np.abs(c.values)
        if grid.n == 1:
            dist = np.arange(grid.m) * h
            w = 1.0 / ((1.0 + dist / t) ** A * np.exp2(B * dist))
            lvl = decaying_max_sweep_1d(cv, w)
        else:
            twoj = 1.0 / t

            def wfn(dcells: float, twoj=twoj) -> float:
                d = dcells * h
                return 1.0 / ((1.0 + twoj * d) ** A * 2.0 ** (B * d))

            lvl = decaying_max_sweep_2d(cv, wfn)
        np.maximum(out, lvl, out=out)
    return MaximalResult(
        GridFunction(grid, out),
        "local-tangential",
        {"psi": psi0.label, "A": A, "B": B, "scales": used, "dropped_scales": dropped},
    )


# ---------------------------------------------------------------------------
# grand maximal functions


def grand_maximal(
    f: GridFunction,
    dictionary: TestFunctionDictionary | None = None,
    mode: str = "vertical",
    R: float | None = None,
) -> MaximalResult:
    """Pointwise max of the single-kernel maximal over dictionary members.

    R restricts to members with support radius <= R, so the radius-1
    restriction of a large dictionary is exactly the small grand maximal.
    """
    if dictionary is None:
        dictionary = default_dictionary(f.grid.n, box_halfwidth=f.grid.L)
    if mode not in ("vertical", "nontangential"):
        raise ValueError(f"mode must be vertical or nontangential, got {mode}")
    members = dictionary.restrict(R) if R is not None else dictionary.members
    if not members:
        raise ValueError("empty dictionary")
    single = local_vertical_maximal if mode == "vertical" else local_nontangential_maximal
    out = np.zeros(f.grid.shape)
    dropped = {}
    for m in members:
        r = single(f, m.profile)
        np.maximum(out, r.values.values, out=out)
        if r.params["dropped_scales"]:
            dropped[m.profile.label] = r.params["dropped_scales"]
    return MaximalResult(
        GridFunction(f.grid, out),
        f"grand-{mode}",
        {
            "dictionary": dictionary.label,
            "members": len(members),
            "R": R if R is not None else dictionary.R,
            "mode": mode,
            "dropped_scales": dropped,
        },
    )
