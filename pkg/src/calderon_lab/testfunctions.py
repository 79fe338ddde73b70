"""Catalogue of smooth test functions with analytic derivatives.

Two families: a Gaussian and a compactly supported C-infinity bump, in one or
two variables, optionally normalized to unit mass.  Derivatives of any
requested order are generated symbolically once and cached as vectorized
callables.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np
import sympy as sp
from scipy.integrate import quad

__all__ = ["SmoothFunction", "gaussian", "bump"]

# 1-D mass of exp(-1/(1-u^2)) on (-1, 1); fixed quadrature so the constant is stable
_BUMP_MASS_1D = quad(lambda u: math.exp(-1.0 / (1.0 - u * u)), -1.0, 1.0, epsabs=1e-14)[0]


@dataclass(frozen=True)
class SmoothFunction:
    """A smooth function with symbolic derivatives, sampled vectorized."""

    name: str
    n: int
    amplitude: float
    integral: float
    grid_halfwidth: float
    _expr: sp.Expr = field(repr=False)
    _syms: tuple = field(repr=False)

    def _callable(self, beta: tuple[int, ...]):
        return _derivative_callable(self._expr, self._syms, beta)

    def values(self, points: np.ndarray) -> np.ndarray:
        return self.derivative((0,) * self.n, points)

    def derivative(self, beta, points: np.ndarray) -> np.ndarray:
        beta = tuple(int(b) for b in beta)
        fn = self._callable(beta)
        pts = np.asarray(points, dtype=float)
        # piecewise branches are evaluated everywhere before selection; the
        # out-of-support overflows are discarded by the select
        with np.errstate(all="ignore"):
            if self.n == 1:
                if pts.ndim and pts.shape[-1:] == (1,):
                    pts = pts[..., 0]
                out = fn(pts)
            else:
                out = fn(pts[..., 0], pts[..., 1])
        out = np.nan_to_num(np.asarray(out, dtype=float), nan=0.0, posinf=0.0, neginf=0.0)
        return self.amplitude * out

    def scaled(self, factor: float) -> "SmoothFunction":
        return SmoothFunction(
            self.name,
            self.n,
            self.amplitude * factor,
            self.integral * factor,
            self.grid_halfwidth,
            self._expr,
            self._syms,
        )


@lru_cache(maxsize=None)
def _derivative_callable(expr: sp.Expr, syms: tuple, beta: tuple[int, ...]):
    d = expr
    for s, b in zip(syms, beta):
        if b:
            d = sp.diff(d, s, b)
    fn = sp.lambdify(syms, d, modules="numpy")
    zero = all(b == 0 for b in beta) and expr == sp.Integer(0)
    if zero or d == sp.Integer(0):
        return lambda *args: np.zeros(np.broadcast(*args).shape) if args else 0.0
    return fn


def _symbols(n: int):
    return sp.symbols("x0") if n == 1 else sp.symbols("x0 x1")


def gaussian(n: int, unit_mass: bool = True) -> SmoothFunction:
    """exp(-|x|^2), optionally divided by pi^(n/2) for unit mass."""
    syms = _symbols(n)
    s = (syms,) if n == 1 else tuple(syms)
    expr = sp.exp(-sum(x**2 for x in s))
    amp = math.pi ** (-n / 2.0) if unit_mass else 1.0
    return SmoothFunction("gauss", n, amp, amp * math.pi ** (n / 2.0), 10.0, expr, s)


def bump(n: int, unit_mass: bool = True) -> SmoothFunction:
    """Tensor bump prod_i exp(-1/(1-x_i^2)) on (-1,1)^n, optionally unit mass."""
    syms = _symbols(n)
    s = (syms,) if n == 1 else tuple(syms)
    expr = sp.Integer(1)
    for x in s:
        expr = expr * sp.Piecewise(
            (sp.exp(-1 / (1 - x**2)), sp.Abs(x) < 1), (sp.Integer(0), True)
        )
    amp = _BUMP_MASS_1D ** (-n) if unit_mass else 1.0
    return SmoothFunction("bump", n, amp, amp * _BUMP_MASS_1D**n, 1.25, expr, s)


def from_name(name: str, n: int) -> SmoothFunction:
    if name == "gauss":
        return gaussian(n)
    if name == "bump":
        return bump(n)
    raise ValueError(f"unknown test function {name!r}; catalogue: gauss, bump")
