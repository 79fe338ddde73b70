"""Construction and validation of atoms, and atomic decompositions.

An atom is supported in a cube Q, obeys the size bound
``||a||_{p0} <= |Q|^{1/p0} / ||chi_Q||_{p(.)}`` and has vanishing moments up
to a degree d.  Atoms are built as a random bump-times-polynomial profile
whose low moments are projected out through a small Gram solve, then rescaled
to sit at 90% of the size bound.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .exponents import ExponentFunction, luxemburg_norm
from .grid import (
    Cube,
    DomainBox,
    GridFunction,
    load_grid_function,
    multi_indices,
    save_grid_function,
)

__all__ = [
    "Atom",
    "AtomicDecomposition",
    "AtomConstructionError",
    "ClauseReport",
    "AtomReport",
    "lp_norm",
    "indicator",
    "make_atom",
    "validate_atom",
    "a_quantity",
    "synthesize",
    "random_decomposition",
    "save_decomposition",
    "load_decomposition",
]

MOMENT_TOL = 1e-10
SIZE_SATURATION = 0.9


class AtomConstructionError(RuntimeError):
    """All random draws degenerated under the moment projection."""


@dataclass(frozen=True)
class Atom:
    cube: Cube
    data: GridFunction
    p0: float
    d: int

    def __post_init__(self):
        if not (self.p0 > 1):
            raise ValueError("p0 must exceed 1 (infinity allowed)")
        if self.d < 0:
            raise ValueError("moment degree must be nonnegative")


@dataclass(frozen=True)
class AtomicDecomposition:
    coefficients: tuple[float, ...]
    atoms: tuple[Atom, ...]

    def __post_init__(self):
        ks = tuple(float(k) for k in self.coefficients)
        if len(ks) != len(self.atoms):
            raise ValueError("coefficient/atom count mismatch")
        if any(k < 0 for k in ks):
            raise ValueError("coefficients must be nonnegative")
        object.__setattr__(self, "coefficients", ks)
        object.__setattr__(self, "atoms", tuple(self.atoms))

    @property
    def cubes(self) -> tuple[Cube, ...]:
        return tuple(a.cube for a in self.atoms)


def lp_norm(f: GridFunction, p0: float) -> float:
    """Grid L^p0 norm; p0 = inf gives the max norm."""
    if math.isinf(p0):
        return float(np.max(np.abs(f.samples)))
    cell = f.domain.spacing ** f.domain.n
    return float(np.sum(np.abs(f.samples) ** p0) * cell) ** (1.0 / p0)


def indicator(domain: DomainBox, Q: Cube) -> GridFunction:
    """Indicator of the cube sampled at cell centers."""
    mask = Q.contains(domain.centers())
    return GridFunction(domain, mask.astype(float))


def _bump_profile(u: np.ndarray) -> np.ndarray:
    """Tensor C-infinity bump on the unit cube in scaled coordinates u in [-1,1]^n."""
    with np.errstate(all="ignore"):
        inside = np.all(np.abs(u) < 1.0, axis=-1)
        core = np.where(inside[..., None], np.exp(-1.0 / np.clip(1.0 - u * u, 1e-300, None)), 0.0)
    return np.prod(core, axis=-1)


def _scaled_coords(domain: DomainBox, Q: Cube) -> np.ndarray:
    pts = domain.centers()
    if domain.n == 1:
        pts = pts[..., None]
    return (pts - np.asarray(Q.center)) / (0.5 * Q.side)


def _monomials(u: np.ndarray, alphas) -> np.ndarray:
    cols = [np.prod(u ** np.asarray(a), axis=-1) for a in alphas]
    return np.stack(cols, axis=-1)


def make_atom(
    Q: Cube,
    p0: float,
    d: int,
    rng: np.random.Generator,
    domain: DomainBox,
    p: ExponentFunction,
) -> Atom:
    """Draw an atom supported in Q with vanishing moments up to degree d.

    The raw profile is bump * random polynomial of degree d+1 (so moments of
    order d+1 stay generically nonzero); the moments up to d are removed by
    projecting onto bump * monomials through the Gram system of the moment
    pairing; finally the samples are rescaled to 90% of the size bound.
    """
    if Q.side < 4 * domain.spacing:
        raise ValueError("atom cube too small for the grid resolution")
    u = _scaled_coords(domain, Q)
    psi = _bump_profile(u)
    alphas_lo = multi_indices(domain.n, d)
    alphas_hi = multi_indices(domain.n, d + 1)
    mon_lo = _monomials(u, alphas_lo).reshape(-1, len(alphas_lo))
    psi_flat = psi.reshape(-1)
    cell = domain.spacing ** domain.n

    # moment pairing of the projection basis (bump * monomial) against monomials
    basis = psi_flat[:, None] * mon_lo
    gram = mon_lo.T @ basis * cell

    chi_norm = luxemburg_norm(indicator(domain, Q), p)
    bound = (Q.volume ** (1.0 / p0) if not math.isinf(p0) else 1.0) / chi_norm

    for _ in range(20):
        coeff = rng.normal(size=len(alphas_hi))
        profile = psi_flat * (_monomials(u, alphas_hi).reshape(-1, len(alphas_hi)) @ coeff)
        rhs = mon_lo.T @ profile * cell
        proj = np.linalg.solve(gram, rhs)
        samples = profile - basis @ proj
        raw_mass = math.sqrt(float(np.sum(profile**2)))
        res_mass = math.sqrt(float(np.sum(samples**2)))
        if raw_mass == 0.0 or res_mass < 1e-8 * raw_mass:
            continue
        f = GridFunction(domain, samples.reshape(domain.shape))
        scale = SIZE_SATURATION * bound / lp_norm(f, p0)
        return Atom(Q, f * scale, p0, d)
    raise AtomConstructionError("profile degenerated in 20 consecutive draws")


@dataclass(frozen=True)
class ClauseReport:
    clause: str
    passed: bool
    measured: float
    bound: float


@dataclass(frozen=True)
class AtomReport:
    clauses: tuple[ClauseReport, ...]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.clauses)

    def clause(self, name: str) -> ClauseReport:
        for c in self.clauses:
            if c.clause == name:
                return c
        raise KeyError(name)


def moments(a: Atom, max_degree: int) -> dict[tuple[int, ...], tuple[float, float]]:
    """Raw moments of the atom against scaled monomials, with their absolute scale."""
    domain = a.data.domain
    u = _scaled_coords(domain, a.cube)
    cell = domain.spacing ** domain.n
    out = {}
    for alpha in multi_indices(domain.n, max_degree):
        mono = np.prod(u ** np.asarray(alpha), axis=-1)
        val = float(np.sum(a.data.samples * mono) * cell)
        scale = float(np.sum(np.abs(a.data.samples * mono)) * cell)
        out[tuple(alpha)] = (val, scale)
    return out


def validate_atom(a: Atom, p: ExponentFunction, s: float | None = None, rel_tol: float = 1e-9) -> AtomReport:
    """Check the three defining clauses, plus the interpolated size bound at s when given."""
    domain = a.data.domain
    clauses = []

    outside = ~a.cube.contains(domain.centers())
    spill = float(np.max(np.abs(a.data.samples[outside]))) if np.any(outside) else 0.0
    clauses.append(ClauseReport("support", spill == 0.0, spill, 0.0))

    chi_norm = luxemburg_norm(indicator(domain, a.cube), p)
    bound = (a.cube.volume ** (1.0 / a.p0) if not math.isinf(a.p0) else 1.0) / chi_norm
    size = lp_norm(a.data, a.p0)
    clauses.append(ClauseReport("size", size <= bound * (1.0 + rel_tol), size, bound))

    worst = 0.0
    for val, scale in moments(a, a.d).values():
        rel = abs(val) / (scale + 1e-300)
        worst = max(worst, rel)
    clauses.append(ClauseReport("moments", worst <= MOMENT_TOL, worst, MOMENT_TOL))

    if s is not None:
        if not (1.0 < s < a.p0):
            raise ValueError("interpolation exponent must lie in (1, p0)")
        bound_s = a.cube.volume ** (1.0 / s) / chi_norm
        size_s = lp_norm(a.data, s)
        clauses.append(ClauseReport("size_interpolated", size_s <= bound_s * (1.0 + rel_tol), size_s, bound_s))

    return AtomReport(tuple(clauses))


def synthesize(dec: AtomicDecomposition) -> GridFunction:
    """Pointwise weighted sum of the atoms."""
    if not dec.atoms:
        raise ValueError("cannot synthesize an empty decomposition without a domain")
    domain = dec.atoms[0].data.domain
    total = np.zeros(domain.shape)
    for k, a in zip(dec.coefficients, dec.atoms):
        if a.data.domain != domain:
            raise ValueError("atoms live on different grids")
        total += k * a.data.samples
    return GridFunction(domain, total)


def a_quantity(dec: AtomicDecomposition, p: ExponentFunction, tol: float = 1e-8) -> float:
    """Luxemburg norm of the l^{p_underline} aggregate of normalized cube indicators."""
    if not dec.atoms:
        return 0.0
    domain = dec.atoms[0].data.domain
    pu = p.p_underline
    agg = np.zeros(domain.shape)
    for k, a in zip(dec.coefficients, dec.atoms):
        if k == 0.0:
            continue
        chi = indicator(domain, a.cube)
        norm = luxemburg_norm(chi, p, tol=tol)
        agg += (k * chi.samples / norm) ** pu
    field = GridFunction(domain, agg ** (1.0 / pu))
    return luxemburg_norm(field, p, tol=tol)


def random_decomposition(
    domain: DomainBox,
    p: ExponentFunction,
    count: int,
    rng: np.random.Generator,
    p0: float = 4.0,
    d: int = 1,
    side_max: float = 0.75,
    dyadic_levels: int = 2,
    center_spread: float = 0.75,
) -> AtomicDecomposition:
    """Decomposition with dyadic cube sizes, random centers and random weights."""
    if not (1 <= count <= 64):
        raise ValueError("count must lie in 1..64")
    atoms, ks = [], []
    for _ in range(count):
        side = side_max * 2.0 ** (-int(rng.integers(0, dyadic_levels + 1)))
        center = tuple(rng.uniform(-center_spread, center_spread, size=domain.n))
        atoms.append(make_atom(Cube(center, side), p0, d, rng, domain, p))
        ks.append(float(rng.uniform(0.25, 2.0)))
    return AtomicDecomposition(tuple(ks), tuple(atoms))


def save_decomposition(dec: AtomicDecomposition, out_dir: str, prefix: str = "atom") -> str:
    """Write the decomposition index JSON plus one grid CSV per atom."""
    os.makedirs(out_dir, exist_ok=True)
    entries = []
    for j, (k, a) in enumerate(zip(dec.coefficients, dec.atoms)):
        ref = f"{prefix}_{j:03d}.csv"
        save_grid_function(a.data, os.path.join(out_dir, ref))
        entries.append(
            {
                "k": k,
                "cube": {"center": list(a.cube.center), "side": a.cube.side},
                "p0": "inf" if math.isinf(a.p0) else a.p0,
                "d": a.d,
                "data_ref": ref,
            }
        )
    index = os.path.join(out_dir, f"{prefix}_index.json")
    with open(index, "w") as fh:
        json.dump(entries, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return index


def load_decomposition(index_path: str) -> AtomicDecomposition:
    base = os.path.dirname(index_path)
    with open(index_path) as fh:
        entries = json.load(fh)
    ks, atoms = [], []
    for e in entries:
        data = load_grid_function(os.path.join(base, e["data_ref"]))
        p0 = math.inf if e["p0"] == "inf" else float(e["p0"])
        atoms.append(Atom(Cube(tuple(e["cube"]["center"]), e["cube"]["side"]), data, p0, int(e["d"])))
        ks.append(float(e["k"]))
    return AtomicDecomposition(tuple(ks), tuple(atoms))
