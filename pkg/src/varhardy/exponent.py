"""Variable exponent functions p(.) and their diagnostics.

An exponent field is a sampled function with 0 < inf p <= sup p < infinity.
The value at infinity cannot be observed on a truncated box, so it is
declared metadata, sanity-checked against boundary samples for the
closed-form families.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    ConjugateUndefinedError,
    FileFormatError,
    InvalidExponentError,
    ShiftUndefinedError,
)
from .grid import Grid, GridFunction

PSPEC_FORMAT_VERSION = 1


@dataclass
class ExponentField:
    """Samples of p(.) with summary exponents."""

    grid: Grid
    values: np.ndarray
    p_infinity: float

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.grid.shape:
            self.values = self.values.reshape(self.grid.shape)
        if not np.all(np.isfinite(self.values)) or np.any(self.values <= 0):
            raise InvalidExponentError("exponent samples must be finite and positive")
        # the limit value is declared metadata: on a truncated box it may lie
        # outside the sampled range (decaying families approach it from one side)
        if not (math.isfinite(self.p_infinity) and self.p_infinity > 0):
            raise InvalidExponentError(f"declared limit value {self.p_infinity} must be positive")

    @property
    def p_minus(self) -> float:
        return float(np.min(self.values))

    @property
    def p_plus(self) -> float:
        return float(np.max(self.values))

    @property
    def p_lower(self) -> float:
        """min(inf p, 1); the exponent appearing in the power triangle inequality."""
        return min(self.p_minus, 1.0)

    def as_grid_function(self) -> GridFunction:
        return GridFunction(self.grid, self.values.copy())

    def is_constant(self, tol: float = 0.0) -> bool:
        return self.p_plus - self.p_minus <= tol


@dataclass
class LHReport:
    """Estimated log-Holder constants over the sampled pair domain."""

    c_local: float
    c_decay: float
    worst_local: tuple
    worst_decay: tuple
    pairs_local: int
    pairs_decay: int
    pair_domain: str


def build_exponent(spec, grid: Grid) -> ExponentField:
    """Construct an exponent field from a spec dict (or a constant).

    Spec kinds:
      {"kind": "constant", "value": c}
      {"kind": "logfamily", "p_inf": a, "c": b}        -> a + b / log(e + |x|)
      {"kind": "bump", "base": a, "amp": b, "center": c, "radius": r, "p_inf": a}
      {"kind": "samples", "values": [...], "p_inf": v}
    """
    if isinstance(spec, (int, float)):
        spec = {"kind": "constant", "value": float(spec)}
    kind = spec.get("kind")
    if kind == "constant":
        v = float(spec["value"])
        vals = np.full(grid.shape, v)
        p_inf = v
    elif kind == "logfamily":
        a, b = float(spec["p_inf"]), float(spec["c"])
        r = grid.radii()
        vals = a + b / np.log(math.e + r)
        p_inf = a
        # truncation sanity: the farthest sample must sit on the declared family
        r_edge = float(np.max(r))
        edge = a + b / math.log(math.e + r_edge)
        if abs(edge - _boundary_sample(vals, grid)) > 1e-2:
            raise InvalidExponentError("boundary samples disagree with the declared limit family")
    elif kind == "bump":
        a, b = float(spec["base"]), float(spec["amp"])
        c = float(spec.get("center", 0.0))
        rad = float(spec.get("radius", 1.0))
        if grid.n == 1:
            u = (grid.axis - c) / rad
        else:
            pts = grid.points()
            u = np.hypot(pts[..., 0] - c, pts[..., 1] - c) / rad
        with np.errstate(over="ignore", under="ignore", divide="ignore", invalid="ignore"):
            prof = np.where(np.abs(u) < 1.0, np.exp(1.0 - 1.0 / np.maximum(1e-300, 1.0 - u**2)), 0.0)
        vals = a + b * np.nan_to_num(prof)
        p_inf = float(spec.get("p_inf", a))
    elif kind == "samples":
        vals = np.asarray(spec["values"], dtype=float).reshape(grid.shape)
        p_inf = float(spec.get("p_inf", np.median(vals)))
    else:
        raise InvalidExponentError(f"unknown exponent spec kind {kind!r}")
    if not np.all(np.isfinite(vals)) or np.any(vals <= 0):
        raise InvalidExponentError("exponent samples must be finite and positive")
    return ExponentField(grid, vals, p_inf)


def _boundary_sample(vals: np.ndarray, grid: Grid) -> float:
    if grid.n == 1:
        return float(vals[-1])
    return float(vals[-1, -1])


def log_holder_constants(p: ExponentField, pair_budget: int = 20000, seed: int = 0) -> LHReport:
    """Empirical log-Holder constants over seeded pairs plus nearest neighbors.

    The local clause weighs |p(x)-p(y)| by -log|x-y| over pairs with
    |x-y| <= 1/2; the decay clause weighs it by (log|x| + e) over pairs with
    |y| >= |x|.  Both are suprema over the pair set actually tested.
    """
    if pair_budget < 1:
        raise ValueError("pair budget must be >= 1")
    grid = p.grid
    pts = grid.points().reshape(-1, grid.n) if grid.n == 2 else grid.axis[:, None]
    vals = p.values.ravel()
    rng = np.random.default_rng(seed)
    m = pts.shape[0]

    # nearest-neighbor pairs along the first axis ordering
    ii = np.arange(m - 1)
    jj = ii + 1
    ri = rng.integers(0, m, size=pair_budget)
    rj = rng.integers(0, m, size=pair_budget)
    i_all = np.concatenate([ii, ri])
    j_all = np.concatenate([jj, rj])
    keep = i_all != j_all
    i_all, j_all = i_all[keep], j_all[keep]

    diff = np.abs(vals[i_all] - vals[j_all])
    dist = np.linalg.norm(pts[i_all] - pts[j_all], axis=-1)

    local_mask = (dist <= 0.5) & (dist > 0)
    c_local, worst_local = 0.0, ()
    if np.any(local_mask):
        w = diff[local_mask] * (-np.log(dist[local_mask]))
        k = int(np.argmax(w))
        c_local = float(w[k])
        sel = np.nonzero(local_mask)[0][k]
        worst_local = (tuple(pts[i_all[sel]]), tuple(pts[j_all[sel]]), c_local)

    norm_i = np.linalg.norm(pts[i_all], axis=-1)
    norm_j = np.linalg.norm(pts[j_all], axis=-1)
    # orient each pair so that |y| >= |x|
    lo = np.minimum(norm_i, norm_j)
    decay_w = diff * (np.log(np.maximum(lo, 1e-300)) + math.e)
    k = int(np.argmax(decay_w))
    c_decay = float(max(decay_w[k], 0.0))
    worst_decay = (tuple(pts[i_all[k]]), tuple(pts[j_all[k]]), c_decay)

    return LHReport(
        c_local=c_local,
        c_decay=c_decay,
        worst_local=worst_local,
        worst_decay=worst_decay,
        pairs_local=int(np.sum(local_mask)),
        pairs_decay=int(len(i_all)),
        pair_domain=f"nearest neighbors + {pair_budget} seeded pairs (seed={seed}) on the sampled box",
    )


def conjugate(p: ExponentField) -> ExponentField:
    """Pointwise conjugate exponent p/(p-1); needs inf p > 1."""
    if p.p_minus <= 1.0:
        raise ConjugateUndefinedError(f"conjugate needs inf p > 1, got {p.p_minus}")
    vals = p.values / (p.values - 1.0)
    return ExponentField(p.grid, vals, p.p_infinity / (p.p_infinity - 1.0))


def sobolev_shift(p: ExponentField, alpha: float) -> ExponentField:
    """Pointwise 1/q = 1/p - alpha/n; defined while alpha/n < 1/(sup p)."""
    n = p.grid.n
    if not (0 < alpha < n):
        raise ShiftUndefinedError(f"order must lie in (0, {n}), got {alpha}")
    if alpha / n >= 1.0 / p.p_plus - 1e-15:
        raise ShiftUndefinedError(
            f"alpha/n = {alpha / n} reaches 1/sup(p) = {1.0 / p.p_plus}; shift undefined"
        )
    inv = 1.0 / p.values - alpha / n
    vals = 1.0 / inv
    return ExponentField(p.grid, vals, 1.0 / (1.0 / p.p_infinity - alpha / n))


def atom_moment_degree(p: ExponentField | float, n: int | None = None) -> int:
    """Minimal d >= 0 with (inf p) * (n + d + 1) > n."""
    if isinstance(p, ExponentField):
        p_minus = p.p_minus
        n = p.grid.n if n is None else n
    else:
        p_minus = float(p)
        if n is None:
            raise ValueError("dimension required when passing a bare exponent value")
    d = 0
    while p_minus * (n + d + 1) <= n:
        d += 1
    return d


# ---------------------------------------------------------------------------
# .pspec serialization


def write_pspec(path, spec: dict) -> None:
    obj = dict(spec)
    obj["version"] = PSPEC_FORMAT_VERSION
    with open(path, "w") as fh:
        json.dump(obj, fh, sort_keys=True)


def read_pspec(path) -> dict:
    with open(path) as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as e:
            raise FileFormatError(f"{path}: not valid JSON ({e})") from e
    if "kind" not in obj:
        raise FileFormatError(f"{path}: missing field 'kind'")
    obj.pop("version", None)
    return obj
