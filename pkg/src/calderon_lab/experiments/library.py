"""Shared sample functions: a named catalogue for the utility commands and a
seeded random corpus for the property experiments."""

from __future__ import annotations

import numpy as np

from ..grid import Cube, DomainBox, GridFunction

__all__ = ["catalogue_function", "random_corpus"]


def catalogue_function(spec: dict, domain: DomainBox) -> GridFunction:
    """Build a grid function from a JSON spec.

    Kinds: indicator {lo, hi | cube}, gaussian {center, width, amplitude},
    sine {frequency, amplitude}, polynomial {coefficients (1-D only)}.
    """
    kind = spec.get("kind", "indicator")
    pts = domain.centers()
    if kind == "indicator":
        if "cube" in spec:
            Q = Cube(tuple(spec["cube"]["center"]), float(spec["cube"]["side"]))
            return GridFunction(domain, Q.contains(pts).astype(float))
        lo, hi = float(spec.get("lo", 0.0)), float(spec.get("hi", 1.0))
        if domain.n != 1:
            raise ValueError("lo/hi indicator is one-dimensional; pass a cube")
        return GridFunction(domain, ((pts >= lo) & (pts <= hi)).astype(float))
    if kind == "gaussian":
        center = np.asarray(spec.get("center", [0.0] * domain.n), dtype=float)
        width = float(spec.get("width", 1.0))
        amp = float(spec.get("amplitude", 1.0))
        if domain.n == 1:
            r2 = (pts - center[0]) ** 2
        else:
            r2 = np.sum((pts - center) ** 2, axis=-1)
        return GridFunction(domain, amp * np.exp(-r2 / width**2))
    if kind == "sine":
        freq = float(spec.get("frequency", 1.0))
        amp = float(spec.get("amplitude", 1.0))
        coord = pts if domain.n == 1 else pts[..., 0]
        return GridFunction(domain, amp * np.sin(freq * coord))
    if kind == "polynomial":
        if domain.n != 1:
            raise ValueError("polynomial catalogue entries are one-dimensional")
        coeffs = [float(c) for c in spec.get("coefficients", [0.0, 1.0])]
        vals = np.zeros_like(pts)
        for j, c in enumerate(coeffs):
            vals += c * pts**j
        return GridFunction(domain, vals)
    raise ValueError(f"unknown function kind {kind!r}")


def random_corpus(domain: DomainBox, rng: np.random.Generator, count: int) -> list[GridFunction]:
    """Random compactly supported smooth-ish functions for property checks."""
    out = []
    pts = domain.centers()
    L = domain.half_width
    for _ in range(count):
        samples = np.zeros(domain.shape)
        for _ in range(int(rng.integers(1, 4))):
            c = rng.uniform(-L / 2, L / 2, size=domain.n)
            w = rng.uniform(L / 16, L / 3)
            amp = rng.uniform(0.1, 2.0) * rng.choice([-1.0, 1.0])
            if domain.n == 1:
                r2 = (pts - c[0]) ** 2
            else:
                r2 = np.sum((pts - c) ** 2, axis=-1)
            samples += amp * np.exp(-r2 / w**2)
        out.append(GridFunction(domain, samples))
    return out
