"""Uniform cell-centered grids on boxes, cubes, quadrature and discrete Laplacians.

Functions are sampled at cell centers of ``[-L, L]^n`` (n = 1 or 2) and treated
as zero outside the box.  Integrals over cubes use the midpoint rule with
partial-cell weights at the cube boundary, which keeps the quadrature second
order in the grid spacing for smooth integrands.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import product
from typing import Callable, Iterable, Sequence

import numpy as np

__all__ = [
    "DomainBox",
    "GridFunction",
    "Cube",
    "Polynomial",
    "SubResolutionError",
    "multi_indices",
    "integrate",
    "eval_polynomial",
    "discrete_laplacian_power",
    "interior_mask",
    "save_grid_function",
    "load_grid_function",
]


class SubResolutionError(ValueError):
    """Raised for cubes smaller than twice the grid spacing."""


def _is_power_of_two(k: int) -> bool:
    return k >= 1 and (k & (k - 1)) == 0


@dataclass(frozen=True)
class DomainBox:
    """The box ``[-half_width, half_width]^n`` split into ``points_per_axis`` cells per axis."""

    n: int
    half_width: float
    points_per_axis: int

    def __post_init__(self):
        if self.n not in (1, 2):
            raise ValueError(f"dimension must be 1 or 2, got {self.n}")
        if self.half_width <= 0:
            raise ValueError("half_width must be positive")
        if self.points_per_axis < 16 or not _is_power_of_two(self.points_per_axis):
            raise ValueError("points_per_axis must be a power of two >= 16")

    @property
    def spacing(self) -> float:
        return 2.0 * self.half_width / self.points_per_axis

    def axis_centers(self) -> np.ndarray:
        N = self.points_per_axis
        return -self.half_width + (np.arange(N) + 0.5) * self.spacing

    def axis_edges(self) -> np.ndarray:
        N = self.points_per_axis
        return -self.half_width + np.arange(N + 1) * self.spacing

    def centers(self) -> np.ndarray:
        """Cell centers: shape (N,) for n=1, (N, N, 2) for n=2 (index-major)."""
        c = self.axis_centers()
        if self.n == 1:
            return c
        X0, X1 = np.meshgrid(c, c, indexing="ij")
        return np.stack([X0, X1], axis=-1)

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.points_per_axis,) * self.n


@dataclass(frozen=True)
class GridFunction:
    """Real samples at the cell centers of a :class:`DomainBox`."""

    domain: DomainBox
    samples: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.samples, dtype=float)
        if arr.shape != self.domain.shape:
            raise ValueError(f"samples shape {arr.shape} != grid shape {self.domain.shape}")
        arr = arr.copy()
        arr.flags.writeable = False
        object.__setattr__(self, "samples", arr)

    @classmethod
    def from_callable(cls, domain: DomainBox, fn: Callable[[np.ndarray], np.ndarray]) -> "GridFunction":
        """Sample ``fn`` at cell centers.  For n=2, ``fn`` receives an (..., 2) array."""
        vals = np.asarray(fn(domain.centers()), dtype=float)
        return cls(domain, np.broadcast_to(vals, domain.shape))

    @classmethod
    def zeros(cls, domain: DomainBox) -> "GridFunction":
        return cls(domain, np.zeros(domain.shape))

    def with_samples(self, samples: np.ndarray) -> "GridFunction":
        return GridFunction(self.domain, samples)

    def __add__(self, other: "GridFunction") -> "GridFunction":
        if other.domain != self.domain:
            raise ValueError("grid functions live on different domains")
        return GridFunction(self.domain, self.samples + other.samples)

    def __mul__(self, scalar: float) -> "GridFunction":
        return GridFunction(self.domain, self.samples * float(scalar))

    __rmul__ = __mul__


@dataclass(frozen=True)
class Cube:
    """Axis-aligned cube given by its center and side length."""

    center: tuple[float, ...]
    side: float

    def __post_init__(self):
        if self.side <= 0:
            raise ValueError("cube side must be positive")
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))

    @property
    def n(self) -> int:
        return len(self.center)

    @property
    def volume(self) -> float:
        return self.side ** self.n

    def dilate(self, delta: float) -> "Cube":
        """Concentric dilation: same center, side scaled by ``delta``."""
        return Cube(self.center, delta * self.side)

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        c = np.asarray(self.center)
        return c - 0.5 * self.side, c + 0.5 * self.side

    def contains(self, points: np.ndarray) -> np.ndarray:
        """Boolean mask for points in the closed cube.  Points shaped (..., n), or (...,) for n=1."""
        pts = np.asarray(points, dtype=float)
        if self.n == 1 and (pts.ndim == 0 or pts.shape[-1] != 1):
            pts = pts[..., None]
        lo, hi = self.bounds()
        return np.all((pts >= lo) & (pts <= hi), axis=-1)


def multi_indices(n: int, max_degree: int) -> list[tuple[int, ...]]:
    """All multi-indices of total degree <= max_degree, ordered by (degree, lexicographic)."""
    out = []
    for deg in range(max_degree + 1):
        if n == 1:
            out.append((deg,))
        else:
            for a0 in range(deg, -1, -1):
                out.append((a0, deg - a0))
    return out


@dataclass(frozen=True)
class Polynomial:
    """Polynomial in n variables with monomials centered at ``center``."""

    n: int
    coeffs: dict[tuple[int, ...], float]
    center: tuple[float, ...] = None  # type: ignore[assignment]

    def __post_init__(self):
        center = self.center if self.center is not None else (0.0,) * self.n
        object.__setattr__(self, "center", tuple(float(c) for c in center))
        clean = {}
        for alpha, c in self.coeffs.items():
            alpha = tuple(int(a) for a in alpha)
            if len(alpha) != self.n or any(a < 0 for a in alpha):
                raise ValueError(f"bad multi-index {alpha} for dimension {self.n}")
            clean[alpha] = float(c)
        object.__setattr__(self, "coeffs", clean)

    @property
    def degree(self) -> int:
        return max((sum(a) for a in self.coeffs), default=0)

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        if self.n == 1 and (pts.ndim == 0 or pts.shape[-1:] != (1,)):
            pts = pts[..., None]
        z = pts - np.asarray(self.center)
        out = np.zeros(z.shape[:-1])
        for alpha, c in self.coeffs.items():
            term = np.full(z.shape[:-1], c)
            for i, a in enumerate(alpha):
                if a:
                    term = term * z[..., i] ** a
            out += term
        return out

    def __call__(self, points: np.ndarray) -> np.ndarray:
        return self.evaluate(points)


def eval_polynomial(P: Polynomial, x) -> float:
    """Evaluate a polynomial at a single point."""
    return float(P.evaluate(np.asarray(x, dtype=float)))


def _axis_weights(domain: DomainBox, lo: float, hi: float) -> np.ndarray:
    """Per-cell overlap lengths of [lo, hi] with each cell along one axis."""
    e = domain.axis_edges()
    return np.clip(np.minimum(hi, e[1:]) - np.maximum(lo, e[:-1]), 0.0, None)


def cube_weights(domain: DomainBox, Q: Cube):
    """Quadrature weights for integrating over ``Q`` (clipped to the box).

    Returns per-axis overlap-length vectors; the full weight of a cell is the
    product across axes.
    """
    lo, hi = Q.bounds()
    ws = [_axis_weights(domain, lo[i], hi[i]) for i in range(domain.n)]
    return ws


def integrate(f: GridFunction, Q: Cube) -> float:
    """Midpoint-rule integral of ``f`` over cube ``Q``, with f := 0 outside the box."""
    domain = f.domain
    if Q.n != domain.n:
        raise ValueError("cube dimension does not match the grid")
    if Q.side < 2.0 * domain.spacing:
        raise SubResolutionError(
            f"cube side {Q.side:.4g} below twice the grid spacing {domain.spacing:.4g}"
        )
    lo, hi = Q.bounds()
    if np.any(lo >= domain.half_width) or np.any(hi <= -domain.half_width):
        raise ValueError("cube does not intersect the domain box")
    ws = cube_weights(domain, Q)
    if domain.n == 1:
        return float(ws[0] @ f.samples)
    return float(ws[0] @ f.samples @ ws[1])


def _laplacian_once(arr: np.ndarray, dx: float) -> np.ndarray:
    """Centered 2n+1-point Laplacian; boundary layer filled with nearest interior values."""
    out = np.empty_like(arr)
    if arr.ndim == 1:
        out[1:-1] = (arr[:-2] - 2.0 * arr[1:-1] + arr[2:]) / dx**2
        out[0] = out[1]
        out[-1] = out[-2]
    else:
        out[1:-1, 1:-1] = (
            arr[:-2, 1:-1] + arr[2:, 1:-1] + arr[1:-1, :-2] + arr[1:-1, 2:]
            - 4.0 * arr[1:-1, 1:-1]
        ) / dx**2
        out[0, :] = out[1, :]
        out[-1, :] = out[-2, :]
        out[:, 0] = out[:, 1]
        out[:, -1] = out[:, -2]
    return out


def discrete_laplacian_power(f: GridFunction, m: int) -> GridFunction:
    """Apply the centered second-order Laplacian stencil ``m`` times.

    The boundary layer of width ``m`` holds one-sided copies and must be
    excluded from comparisons (see :func:`interior_mask`).
    """
    if m not in (1, 2):
        raise ValueError("m must be 1 or 2")
    arr = np.asarray(f.samples, dtype=float)
    for _ in range(m):
        arr = _laplacian_once(arr, f.domain.spacing)
    return GridFunction(f.domain, arr)


def interior_mask(domain: DomainBox, width: int) -> np.ndarray:
    """Boolean mask excluding a boundary layer of ``width`` cells per side."""
    mask = np.zeros(domain.shape, dtype=bool)
    if width <= 0:
        mask[...] = True
        return mask
    if domain.n == 1:
        mask[width:-width] = True
    else:
        mask[width:-width, width:-width] = True
    return mask


def save_grid_function(f: GridFunction, path) -> None:
    """Write index-major CSV with a header recording n, half_width, points_per_axis."""
    d = f.domain
    with open(path, "w", newline="\n") as fh:
        fh.write(f"# n={d.n} half_width={d.half_width!r} points_per_axis={d.points_per_axis}\n")
        for v in f.samples.reshape(-1):
            fh.write(f"{v!r}\n")


def load_grid_function(path) -> GridFunction:
    with open(path) as fh:
        header = fh.readline().strip()
        if not header.startswith("#"):
            raise ValueError("missing grid header line")
        fields = dict(tok.split("=") for tok in header[1:].split())
        domain = DomainBox(
            n=int(fields["n"]),
            half_width=float(fields["half_width"]),
            points_per_axis=int(fields["points_per_axis"]),
        )
        vals = np.array([float(line) for line in fh if line.strip()])
    return GridFunction(domain, vals.reshape(domain.shape))
