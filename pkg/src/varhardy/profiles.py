"""Closed-form compactly supported test functions.

A profile is an even-support 1-d factor with hard zeros outside (-r, r); in
two dimensions it acts as the tensor product of that factor with itself.
The closed form is kept as a sympy expression so rescaled dilates are
sampled exactly and derivative sup norms can be tabulated for dictionary
normalization.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np
import sympy as sp

_U = sp.symbols("u")


@lru_cache(maxsize=512)
def _lambdified(expr_key: str):
    expr = sp.sympify(expr_key)
    return sp.lambdify(_U, expr, modules="numpy")


def _safe_eval(fn, u: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore", under="ignore", divide="ignore", invalid="ignore"):
        vals = np.asarray(fn(u), dtype=float)
    return np.nan_to_num(vals, nan=0.0, posinf=0.0, neginf=0.0)


class Profile:
    """Compactly supported closed-form factor; tensorized across axes in 2-d."""

    def __init__(self, expr, support_radius: float, label: str, scale: float = 1.0):
        self.expr = expr if isinstance(expr, sp.Expr) else sp.sympify(expr)
        self.support_radius = float(support_radius)
        self.label = label
        self.scale = float(scale)
        self._fn = _lambdified(sp.srepr(self.expr))
        self._sups: dict[int, tuple[float, ...]] = {}

    def __repr__(self):
        return f"Profile({self.label}, r={self.support_radius}, scale={self.scale:.6g})"

    def __call__(self, u: np.ndarray) -> np.ndarray:
        """1-d factor with hard zeros outside the open support."""
        u = np.asarray(u, dtype=float)
        out = np.zeros(u.shape)
        inside = np.abs(u) < self.support_radius * (1.0 - 1e-14)
        if np.any(inside):
            out[inside] = _safe_eval(self._fn, u[inside])
        return self.scale * out

    def values_2d(self, ux: np.ndarray, uy: np.ndarray) -> np.ndarray:
        return self(ux) * self(uy)

    def integral_1d(self, samples: int = 1 << 17) -> float:
        """Midpoint integral of the 1-d factor over its support."""
        r = self.support_radius
        h = 2.0 * r / samples
        u = -r + (np.arange(samples) + 0.5) * h
        return float(np.sum(self(u)) * h)

    def integral(self, n: int) -> float:
        return self.integral_1d() ** n

    def normalized(self, label: str | None = None) -> "Profile":
        """Rescale the factor to unit 1-d integral (unit integral in any dimension)."""
        total = self.integral_1d()
        if abs(total) < 1e-300:
            raise ValueError(f"profile {self.label} has zero integral; cannot normalize")
        return self.with_scale(1.0 / total, label)

    def with_scale(self, factor: float, label: str | None = None) -> "Profile":
        return Profile(self.expr, self.support_radius, label or self.label, self.scale * factor)

    def derivative_sups_1d(self, max_order: int, samples: int = 8193) -> tuple[float, ...]:
        """sup |d^m/du^m| of the 1-d factor for m = 0..max_order."""
        if max_order in self._sups:
            return self._sups[max_order]
        sups = []
        r = self.support_radius
        u = np.linspace(-r * (1 - 1e-9), r * (1 - 1e-9), samples)
        d = self.expr
        for _ in range(max_order + 1):
            vals = _safe_eval(_lambdified(sp.srepr(d)), u)
            sups.append(float(np.max(np.abs(vals))) * abs(self.scale))
            d = sp.diff(d, _U)
        out = tuple(sups)
        self._sups[max_order] = out
        return out


def _bump_expr(radius: float) -> sp.Expr:
    """The standard C-infinity bump exp(1/((u/r)^2 - 1)) on (-r, r)."""
    v = _U / sp.Float(radius)
    return sp.exp(1 / (v**2 - 1))


def bump(radius: float = 0.5, label: str | None = None) -> Profile:
    return Profile(_bump_expr(radius), radius, label or f"bump(r={radius})")


def poly_bump(degree: int, radius: float, label: str | None = None) -> Profile:
    """(1 + (u/r)^degree) times the standard bump; nonzero integral for every degree."""
    v = _U / sp.Float(radius)
    expr = (1 + v ** int(degree)) * _bump_expr(radius)
    return Profile(expr, radius, label or f"polybump(d={degree},r={radius})")


def plateau(inner: float = 0.5, outer: float = 1.0, label: str | None = None) -> Profile:
    """C-infinity cutoff: exactly 1 for |u| <= inner, 0 for |u| >= outer.

    Classic smooth-step quotient s = e(t) / (e(t) + e(1-t)) with
    e(t) = exp(-1/t) for t > 0, in t = (outer - |u|) / (outer - inner).
    """
    if not (0 < inner < outer):
        raise ValueError("need 0 < inner < outer")
    t = (sp.Float(outer) - sp.Abs(_U)) / (sp.Float(outer) - sp.Float(inner))
    e = sp.Piecewise((sp.exp(-1 / t), t > 0), (sp.Integer(0), True))
    e1 = sp.Piecewise((sp.exp(-1 / (1 - t)), t < 1), (sp.Integer(0), True))
    expr = sp.Piecewise((sp.Integer(1), t >= 1), (sp.Integer(0), t <= 0), (e / (e + e1), True))
    return Profile(expr, outer, label or f"plateau({inner},{outer})")


def standard_mollifier() -> Profile:
    """Bump on (-1/2, 1/2) with unit integral; the default smoothing kernel."""
    return bump(0.5).normalized(label="mollifier")
