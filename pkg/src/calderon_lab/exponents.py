"""Variable integrability exponents, the modular and the Luxemburg norm.

An exponent function assigns to each point an integrability exponent p(x) with
0 < p_minus <= p(x) <= p_plus < infinity.  Three analytic families are
supported (constant, asymptotic decay toward a limit value, and a radial bump
interpolating two constants) so that the local and at-infinity log-Hoelder
constants are available in closed form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .grid import GridFunction

__all__ = [
    "ExponentFunction",
    "ModularValue",
    "LogHolderReport",
    "BracketExpansionError",
    "modular",
    "luxemburg_norm",
    "check_log_holder",
    "min_moment_degree",
]

_FORMS = ("constant", "asymptotic", "radial-bump")

# max of u * (-log u) on (0, 1/2], attained at u = 1/e
_ULOGU_MAX = 1.0 / math.e


class BracketExpansionError(RuntimeError):
    """Norm bisection could not bracket the unit-modular level (overflow-scale data)."""


def _smooth_step(s: np.ndarray) -> np.ndarray:
    """C-infinity step: 0 for s <= 0, 1 for s >= 1."""
    s = np.asarray(s, dtype=float)
    lo = np.clip(s, 1e-12, None)
    hi = np.clip(1.0 - s, 1e-12, None)
    a = np.where(s > 0.0, np.exp(-1.0 / lo), 0.0)
    b = np.where(s < 1.0, np.exp(-1.0 / hi), 0.0)
    return a / (a + b)


def _radii(points: np.ndarray) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    if pts.ndim <= 1:
        return np.abs(pts)
    return np.sqrt(np.sum(pts * pts, axis=-1))


@dataclass(frozen=True)
class ExponentFunction:
    """A variable exponent p(.) together with its declared regularity constants.

    ``C0`` bounds the local log-Hoelder modulus |p(x)-p(y)| * (-log|x-y|) for
    |x-y| < 1/2; ``C_inf`` bounds |p(x)-p_inf| * log(e+|x|).
    """

    form: str
    parameters: dict
    p_minus: float
    p_plus: float
    C0: float
    C_inf: float
    p_inf: float

    def __post_init__(self):
        if self.form not in _FORMS:
            raise ValueError(f"unknown exponent form {self.form!r}")
        if not (0 < self.p_minus <= self.p_plus):
            raise ValueError("need 0 < p_minus <= p_plus")

    @property
    def p_underline(self) -> float:
        return min(self.p_minus, 1.0)

    # --- constructors -----------------------------------------------------

    @classmethod
    def constant(cls, value: float) -> "ExponentFunction":
        value = float(value)
        return cls("constant", {"value": value}, value, value, 0.0, 0.0, value)

    @classmethod
    def asymptotic(cls, p_inf: float, c_inf: float) -> "ExponentFunction":
        """p(x) = p_inf + c_inf / log(e + |x|)."""
        p_inf, c_inf = float(p_inf), float(c_inf)
        lo = min(p_inf, p_inf + c_inf)
        hi = max(p_inf, p_inf + c_inf)
        if lo <= 0:
            raise ValueError("exponent must stay positive")
        # Lipschitz constant of 1/log(e+|x|) is 1/e, hence the local modulus bound.
        C0 = abs(c_inf) / math.e * _ULOGU_MAX
        return cls(
            "asymptotic", {"p_inf": p_inf, "c_inf": c_inf}, lo, hi, C0, abs(c_inf), p_inf
        )

    @classmethod
    def radial_bump(
        cls,
        p_out: float,
        p_in: float,
        center=0.0,
        radius: float = 1.0,
        smoothness: float = 0.5,
        declared_C0: float | None = None,
    ) -> "ExponentFunction":
        """Smooth interpolation from ``p_in`` inside the ball to ``p_out`` outside.

        The transition occupies the annulus radius*(1-smoothness) <= |x-c| <= radius.
        ``declared_C0`` overrides the computed local constant (used to probe the
        regularity check with an intentionally wrong declaration).
        """
        p_out, p_in, radius = float(p_out), float(p_in), float(radius)
        smoothness = float(smoothness)
        if not (0 < smoothness <= 1):
            raise ValueError("smoothness must lie in (0, 1]")
        if radius <= 0:
            raise ValueError("radius must be positive")
        center_t = tuple(float(c) for c in np.atleast_1d(center))
        lo, hi = min(p_in, p_out), max(p_in, p_out)
        if lo <= 0:
            raise ValueError("exponent must stay positive")
        width = radius * smoothness
        # Lipschitz constant of the radial profile, measured on a dense 1-D grid.
        s = np.linspace(0.0, 1.0, 20001)
        step = _smooth_step(s)
        lip = float(np.max(np.abs(np.diff(step))) / (s[1] - s[0])) * abs(p_out - p_in) / width
        C0 = 1.02 * lip * _ULOGU_MAX if declared_C0 is None else float(declared_C0)
        center_norm = math.sqrt(sum(c * c for c in center_t))
        C_inf = abs(p_in - p_out) * math.log(math.e + center_norm + radius)
        return cls(
            "radial-bump",
            {
                "p_out": p_out,
                "p_in": p_in,
                "center": list(center_t),
                "radius": radius,
                "smoothness": smoothness,
            },
            lo,
            hi,
            C0,
            C_inf,
            p_out,
        )

    # --- evaluation -------------------------------------------------------

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        """p at each point; points shaped (..., n) or (...,) for n=1."""
        if self.form == "constant":
            rho = _radii(points)
            return np.full(rho.shape, self.parameters["value"])
        if self.form == "asymptotic":
            rho = _radii(points)
            return self.parameters["p_inf"] + self.parameters["c_inf"] / np.log(math.e + rho)
        prm = self.parameters
        pts = np.asarray(points, dtype=float)
        center = np.asarray(prm["center"])
        if pts.ndim <= 1 and center.size == 1:
            rho = np.abs(pts - center[0])
        else:
            rho = np.sqrt(np.sum((pts - center) ** 2, axis=-1))
        r1 = prm["radius"]
        r0 = r1 * (1.0 - prm["smoothness"])
        denom = max(r1 - r0, 1e-300)
        s = (rho - r0) / denom
        return prm["p_in"] + (prm["p_out"] - prm["p_in"]) * _smooth_step(s)

    def __call__(self, points: np.ndarray) -> np.ndarray:
        return self.evaluate(points)

    # --- serialization ----------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "form": self.form,
            "parameters": dict(self.parameters),
            "declared_constants": {
                "p_minus": self.p_minus,
                "p_plus": self.p_plus,
                "C0": self.C0,
                "C_inf": self.C_inf,
                "p_inf": self.p_inf,
            },
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExponentFunction":
        form = d["form"]
        prm = d.get("parameters", {})
        if form == "constant":
            out = cls.constant(prm["value"])
        elif form == "asymptotic":
            out = cls.asymptotic(prm["p_inf"], prm["c_inf"])
        elif form == "radial-bump":
            out = cls.radial_bump(
                prm["p_out"],
                prm["p_in"],
                prm.get("center", 0.0),
                prm.get("radius", 1.0),
                prm.get("smoothness", 0.5),
            )
        else:
            raise ValueError(f"unknown exponent form {form!r}")
        declared = d.get("declared_constants")
        if declared:
            out = ExponentFunction(
                out.form,
                out.parameters,
                declared.get("p_minus", out.p_minus),
                declared.get("p_plus", out.p_plus),
                declared.get("C0", out.C0),
                declared.get("C_inf", out.C_inf),
                declared.get("p_inf", out.p_inf),
            )
        return out


@dataclass(frozen=True)
class ModularValue:
    """Value of the modular integral, plus the quadrature resolution used."""

    value: float
    grid_spacing: float

    def __post_init__(self):
        if not (self.value >= 0.0 or math.isinf(self.value)):
            raise ValueError("modular value must be nonnegative")


def _modular_sum(absf: np.ndarray, pvals: np.ndarray, cell_vol: float) -> float:
    mask = absf > 0.0  # 0^p := 0
    if not np.any(mask):
        return 0.0
    with np.errstate(over="ignore"):
        total = float(np.sum(absf[mask] ** pvals[mask]) * cell_vol)
    return total


def modular(f: GridFunction, p: ExponentFunction) -> ModularValue:
    """Midpoint-rule value of the modular integral of |f|^p over the box."""
    pvals = np.asarray(p.evaluate(f.domain.centers()))
    absf = np.abs(f.samples)
    cell_vol = f.domain.spacing ** f.domain.n
    return ModularValue(_modular_sum(absf, pvals, cell_vol), f.domain.spacing)


def luxemburg_norm(f: GridFunction, p: ExponentFunction, tol: float = 1e-8) -> float:
    """The norm inf{lambda > 0 : modular(f/lambda) <= 1}, by bisection.

    The map lambda -> modular(f/lambda) is strictly decreasing where positive,
    so the returned value satisfies |modular(f/lambda) - 1| <= tol for f != 0.
    Returns 0 for f == 0.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    absf = np.abs(np.asarray(f.samples, dtype=float))
    if not np.any(absf > 0):
        return 0.0
    pvals = np.asarray(p.evaluate(f.domain.centers()))
    cell_vol = f.domain.spacing ** f.domain.n

    def rho(lam: float) -> float:
        return _modular_sum(absf / lam, pvals, cell_vol)

    rho_f = rho(1.0)
    if math.isfinite(rho_f) and rho_f > 0:
        lo = rho_f ** (1.0 / p.p_plus)
        hi = rho_f ** (1.0 / p.p_minus)
        lo, hi = min(lo, hi), max(lo, hi)
    else:
        lo = hi = float(np.max(absf))
    lo = max(lo, 1e-300)
    hi = max(hi, lo)

    for _ in range(200):
        if rho(hi) <= 1.0:
            break
        hi *= 2.0
    else:
        raise BracketExpansionError("no upper bracket after 200 doublings")
    for _ in range(200):
        if rho(lo) >= 1.0:
            break
        lo *= 0.5
    else:
        raise BracketExpansionError("no lower bracket after 200 halvings")

    for _ in range(400):
        mid = 0.5 * (lo + hi)
        r = rho(mid)
        if abs(r - 1.0) <= tol:
            return mid
        if r > 1.0:
            lo = mid
        else:
            hi = mid
    # Interval collapsed to roundoff without hitting the residual tolerance;
    # the midpoint is the best representable root.
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class LogHolderReport:
    C0_observed: float
    Cinf_observed: float
    C0_declared: float
    Cinf_declared: float
    passed: bool
    close_pairs: int
    skipped_pairs: int


def check_log_holder(p: ExponentFunction, samples: np.ndarray) -> LogHolderReport:
    """Measure log-Hoelder moduli on a sample set against the declared constants.

    Pairs at distance >= 1/2 are skipped for the local test (they carry no
    information about the local modulus).  Pass allows 1% slack on both
    declared constants.
    """
    pts = np.asarray(samples, dtype=float)
    if pts.ndim == 1:
        coords = pts[:, None]
    else:
        coords = pts
    m = coords.shape[0]
    if m < 2:
        raise ValueError("need at least two sample points")
    pv = np.asarray(p.evaluate(pts))

    diff = coords[:, None, :] - coords[None, :, :]
    dist = np.sqrt(np.sum(diff * diff, axis=-1))
    iu = np.triu_indices(m, k=1)
    d = dist[iu]
    dp = np.abs(pv[:, None] - pv[None, :])[iu]
    close = (d > 0.0) & (d < 0.5)
    skipped = int(np.sum(~close))
    if np.any(close):
        C0_obs = float(np.max(dp[close] * (-np.log(d[close]))))
    else:
        C0_obs = 0.0

    rho = _radii(pts)
    Cinf_obs = float(np.max(np.abs(pv - p.p_inf) * np.log(math.e + rho)))

    ok = (C0_obs <= p.C0 * 1.01 + 1e-12) and (Cinf_obs <= p.C_inf * 1.01 + 1e-12)
    return LogHolderReport(C0_obs, Cinf_obs, p.C0, p.C_inf, ok, int(np.sum(close)), skipped)


def min_moment_degree(p: ExponentFunction, n: int) -> int:
    """Smallest l >= 0 with p_minus * (n + l + 1) > n."""
    if p.p_minus <= 0:
        raise ValueError("p_minus must be positive")
    l = 0
    while p.p_minus * (n + l + 1) <= n:
        l += 1
    return l
