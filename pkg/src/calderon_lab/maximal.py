"""Scale-indexed seminorms and maximal functions.

Suprema over continuous scale parameters (cube sides r, dilation times t,
truncation radii eps) are evaluated as maxima over geometric grids; the
default grid ratio is 2**(1/4).

The central object is the class maximal function: for a grid function f and a
polynomial degree bound k, it minimizes over polynomials P of degree <= k the
quantity  max_r  r^(-gamma) * |f - P|_{q, Q(x,r)}.  The objective is a
pointwise maximum of seminorms of an affine family of coefficients, hence
convex; it is minimized by coordinate descent with golden-section line
searches plus a simplex polish.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple, Sequence

import numpy as np
from scipy import optimize

from .grid import (
    Cube,
    DomainBox,
    GridFunction,
    Polynomial,
    SubResolutionError,
    cube_weights,
    integrate,
    multi_indices,
)

__all__ = [
    "MaximalParams",
    "FunctionClass",
    "EtaResult",
    "NMaximalResult",
    "IllConditionedBasisError",
    "geometric_scales",
    "seminorm_q_Q",
    "eta_maximal",
    "class_seminorm",
    "N_maximal",
    "hl_maximal",
    "hl_maximal_field",
    "phi_maximal",
    "phi_maximal_field",
    "hardy_norm",
    "truncated_singular_integral",
]

DEFAULT_SCALE_RATIO = 2.0 ** 0.25


class IllConditionedBasisError(RuntimeError):
    """Monomial Gram system too ill-conditioned; recentre the basis at the cube."""


def geometric_scales(r_min: float, r_max: float, ratio: float = DEFAULT_SCALE_RATIO) -> np.ndarray:
    """Geometric grid of scales anchored at ``r_max``, descending to ``r_min``.

    Anchoring at the top keeps round values of r_max (and its dyadic
    subdivisions) exactly representable in the grid.
    """
    if not (r_min > 0 and r_max >= r_min):
        raise ValueError("need 0 < r_min <= r_max")
    if not ratio > 1.0:
        raise ValueError("ratio must exceed 1")
    vals = [r_max]
    while vals[-1] / ratio >= r_min * (1.0 - 1e-12):
        vals.append(vals[-1] / ratio)
    return np.array(vals[::-1])


@dataclass(frozen=True)
class MaximalParams:
    """Parameters (q, gamma) plus the scale grid for the running suprema."""

    q: float
    gamma: float
    scale_grid: np.ndarray

    def __post_init__(self):
        if self.q <= 1:
            raise ValueError("q must exceed 1")
        if self.gamma <= 0:
            raise ValueError("gamma must be positive")
        grid = np.sort(np.asarray(self.scale_grid, dtype=float))
        if grid.size == 0 or grid[0] <= 0:
            raise ValueError("scale grid must hold positive values")
        object.__setattr__(self, "scale_grid", grid)

    @property
    def k(self) -> int:
        """Unique k >= 0 with gamma = k + t, 0 < t <= 1."""
        return int(math.ceil(self.gamma)) - 1

    @property
    def t(self) -> float:
        return self.gamma - self.k


@dataclass(frozen=True)
class FunctionClass:
    """A locally q-integrable function modulo polynomials of degree <= k."""

    representative: GridFunction
    k: int

    def __post_init__(self):
        if self.k < 0:
            raise ValueError("degree bound must be nonnegative")

    def same_class(self, other: "FunctionClass", tol: float = 1e-8) -> bool:
        """True when the representatives differ by a polynomial of degree <= k.

        Tested by a least-squares polynomial fit of the difference over the
        whole box; the relative residual must fall below ``tol``.
        """
        if self.k != other.k:
            return False
        diff = self.representative.samples - other.representative.samples
        domain = self.representative.domain
        pts = domain.centers().reshape(-1, domain.n)
        basis = np.stack(
            [np.prod(pts ** np.asarray(a), axis=1) for a in multi_indices(domain.n, self.k)],
            axis=1,
        )
        resid = np.linalg.lstsq(basis, diff.reshape(-1), rcond=None)[1]
        rel = math.sqrt(float(resid[0])) if resid.size else 0.0
        scale = float(np.linalg.norm(diff)) + 1e-300
        return rel / scale <= tol or scale <= tol


def seminorm_q_Q(f: GridFunction, q: float, Q: Cube) -> float:
    """Normalized q-mean (|Q|^-1 integral_Q |f|^q)^(1/q)."""
    if q < 1:
        raise ValueError("q must be at least 1")
    absq = GridFunction(f.domain, np.abs(f.samples) ** q)
    return (integrate(absq, Q) / Q.volume) ** (1.0 / q)


class EtaResult(NamedTuple):
    value: float
    argmax_scale: float


def eta_maximal(f: GridFunction, prm: MaximalParams, x) -> EtaResult:
    """max over the scale grid of r^(-gamma) |f|_{q, Q(x,r)}."""
    center = tuple(np.atleast_1d(np.asarray(x, dtype=float)))
    best, best_r = -1.0, float(prm.scale_grid[0])
    for r in prm.scale_grid:
        val = r ** (-prm.gamma) * seminorm_q_Q(f, prm.q, Cube(center, float(r)))
        if val > best:
            best, best_r = val, float(r)
    return EtaResult(best, best_r)


# --------------------------------------------------------------------------
# polynomial reduction on a single cube
# --------------------------------------------------------------------------


def _cube_cells(domain: DomainBox, Q: Cube):
    """Flattened cell weights, coordinates and a validity flag for Q clipped to the box."""
    ws = cube_weights(domain, Q)
    if domain.n == 1:
        idx = np.nonzero(ws[0])[0]
        w = ws[0][idx]
        pts = domain.axis_centers()[idx][:, None]
    else:
        i0 = np.nonzero(ws[0])[0]
        i1 = np.nonzero(ws[1])[0]
        w = np.outer(ws[0][i0], ws[1][i1]).reshape(-1)
        c = domain.axis_centers()
        X0, X1 = np.meshgrid(c[i0], c[i1], indexing="ij")
        pts = np.stack([X0.reshape(-1), X1.reshape(-1)], axis=1)
        idx = (i0, i1)
    return idx, w, pts


def _basis_matrix(pts: np.ndarray, alphas, center, scale: float) -> np.ndarray:
    z = (pts - np.asarray(center)) / scale
    cols = [np.prod(z ** np.asarray(a), axis=1) for a in alphas]
    return np.stack(cols, axis=1)


def class_seminorm(F: FunctionClass, q: float, Q: Cube, center=None) -> float:
    """inf over polynomials P of degree <= k of |rep - P|_{q, Q}.

    q = 2 reduces to a weighted least-squares solve; other q >= 1 are handled
    by BFGS on the convex coefficient objective, warm-started at the
    least-squares solution.  Monomials are recentred at the cube center (or at
    ``center``) and scaled by the side length for conditioning.
    """
    domain = F.representative.domain
    if Q.side < 2.0 * domain.spacing:
        raise SubResolutionError("cube below resolution")
    alphas = multi_indices(domain.n, F.k)
    ctr = Q.center if center is None else tuple(np.atleast_1d(np.asarray(center, dtype=float)))
    idx, w, pts = _cube_cells(domain, Q)
    if domain.n == 1:
        fvals = F.representative.samples[idx]
    else:
        fvals = F.representative.samples[np.ix_(*idx)].reshape(-1)
    Phi = _basis_matrix(pts, alphas, ctr, Q.side)

    gram = Phi.T @ (w[:, None] * Phi)
    if np.linalg.cond(gram) > 1e12:
        raise IllConditionedBasisError(
            "monomial Gram system condition exceeds 1e12; recentre at the cube center"
        )
    rhs = Phi.T @ (w * fvals)
    c2 = np.linalg.solve(gram, rhs)

    if q == 2:
        res = fvals - Phi @ c2
        val = float(np.sum(w * res * res))
        return (max(val, 0.0) / Q.volume) ** 0.5

    def power_obj(c):
        res = fvals - Phi @ c
        a = np.abs(res)
        val = float(np.sum(w * a**q))
        grad = -q * (Phi.T @ (w * a ** (q - 1.0) * np.sign(res)))
        return val, grad

    sol = optimize.minimize(power_obj, c2, jac=True, method="BFGS",
                            options={"gtol": 1e-12, "maxiter": 500})
    best = min(power_obj(sol.x)[0], power_obj(c2)[0])
    return (best / Q.volume) ** (1.0 / q)


# --------------------------------------------------------------------------
# the class maximal function N
# --------------------------------------------------------------------------


class _MinimaxObjective:
    """max over scales of r^(-gamma) |f - P_c|_{q, Q(x,r)} as a function of coefficients.

    Pre-assembles, per scale, the quadrature weights and basis matrix on the
    cube cells; q=2 additionally collapses them to small Gram systems so an
    evaluation costs O(scales * dim^2).
    """

    def __init__(self, F: FunctionClass, prm: MaximalParams, x):
        domain = F.representative.domain
        self.alphas = multi_indices(domain.n, F.k)
        self.dim = len(self.alphas)
        self.q = prm.q
        self.x = tuple(np.atleast_1d(np.asarray(x, dtype=float)))
        self.scale_ref = float(prm.scale_grid[-1])
        self.scales = np.asarray(prm.scale_grid, dtype=float)
        self.prefactors = self.scales ** (-prm.gamma) * self.scales ** (-domain.n / prm.q)

        blocks_w, blocks_f, blocks_phi = [], [], []
        for r in self.scales:
            idx, w, pts = _cube_cells(domain, Cube(self.x, float(r)))
            if domain.n == 1:
                fv = F.representative.samples[idx]
            else:
                fv = F.representative.samples[np.ix_(*idx)].reshape(-1)
            blocks_w.append(w)
            blocks_f.append(fv)
            blocks_phi.append(_basis_matrix(pts, self.alphas, self.x, self.scale_ref))

        if self.q == 2:
            self._G = np.stack([P.T @ (w[:, None] * P) for w, P in zip(blocks_w, blocks_phi)])
            self._h = np.stack([P.T @ (w * f) for w, f, P in zip(blocks_w, blocks_f, blocks_phi)])
            self._e = np.array([float(np.sum(w * f * f)) for w, f in zip(blocks_w, blocks_f)])
        else:
            self._w = np.concatenate(blocks_w)
            self._f = np.concatenate(blocks_f)
            self._phi = np.vstack(blocks_phi)
            lens = np.array([len(b) for b in blocks_w])
            offsets = np.concatenate([[0], np.cumsum(lens)[:-1]]).astype(int)
            self._empty = lens == 0
            # reduceat rejects offsets at the end of the array; empty blocks are masked anyway
            self._offsets = np.minimum(offsets, max(int(lens.sum()) - 1, 0))
        # warm start: global weighted least squares across all scales
        Wtot = np.concatenate(blocks_w)
        Ftot = np.concatenate(blocks_f)
        Ptot = np.vstack(blocks_phi)
        gram = Ptot.T @ (Wtot[:, None] * Ptot)
        rhs = Ptot.T @ (Wtot * Ftot)
        try:
            self.warm = np.linalg.solve(gram, rhs)
        except np.linalg.LinAlgError:
            self.warm = np.zeros(self.dim)

    def per_scale(self, c: np.ndarray) -> np.ndarray:
        if self.q == 2:
            quad = np.einsum("sij,i,j->s", self._G, c, c) - 2.0 * self._h @ c + self._e
            return self.prefactors * np.sqrt(np.clip(quad, 0.0, None))
        res = np.abs(self._f - self._phi @ c) ** self.q
        wres = self._w * res
        sums = np.add.reduceat(wres, self._offsets) if wres.size else np.zeros(len(self._offsets))
        sums[self._empty] = 0.0
        return self.prefactors * sums ** (1.0 / self.q)

    def __call__(self, c: np.ndarray) -> float:
        return float(np.max(self.per_scale(c)))

    def unscale(self, c: np.ndarray) -> dict:
        return {
            tuple(a): float(ci / self.scale_ref ** sum(a))
            for a, ci in zip(self.alphas, c)
        }


def _golden_section(fun, a: float, b: float, tol: float) -> tuple[float, float]:
    """Minimize a unimodal 1-D function on [a, b]."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = fun(c), fun(d)
    while (b - a) > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = fun(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = fun(d)
    return (c, fc) if fc <= fd else (d, fd)


def _line_minimize(obj, c: np.ndarray, i: int, f0: float, step0: float) -> tuple[float, float]:
    """1-D minimization of the convex objective along coordinate i."""

    def fun(t):
        ci = c.copy()
        ci[i] = t
        return obj(ci)

    t0 = c[i]
    h = step0
    # shrink until a descent direction shows up (narrow valleys), else keep t0
    found = False
    for _ in range(60):
        fp, fm = fun(t0 + h), fun(t0 - h)
        if fp < f0 or fm < f0:
            found = True
            break
        h *= 0.25
        if h < 1e-14 * max(1.0, abs(t0)) + 1e-300:
            break
    if not found:
        return t0, f0
    if fp < fm:
        direction, fbest = 1.0, fp
    else:
        direction, fbest = -1.0, fm
    # expand the bracket until the function rises again
    t_prev, t_cur = t0, t0 + direction * h
    f_cur = fbest
    while True:
        t_next = t_cur + direction * h
        f_next = fun(t_next)
        if f_next >= f_cur:
            break
        h *= 2.0
        t_prev, t_cur, f_cur = t_cur, t_next, f_next
    lo, hi = (t_prev, t_next) if direction > 0 else (t_next, t_prev)
    t_star, f_star = _golden_section(fun, lo, hi, tol=1e-10 * max(1.0, abs(hi - lo)))
    if f_star <= f0:
        return t_star, f_star
    return t0, f0


def _coordinate_descent(obj, c0: np.ndarray, rtol: float, max_sweeps: int = 60):
    c = np.asarray(c0, dtype=float).copy()
    f = obj(c)
    scale = max(1.0, float(np.max(np.abs(c))))
    converged = False
    for _ in range(max_sweeps):
        f_prev = f
        for i in range(len(c)):
            ti, f = _line_minimize(obj, c, i, f, step0=0.5 * scale)
            c[i] = ti
        if f_prev - f <= rtol * max(abs(f), 1e-300):
            converged = True
            break
    return c, f, converged


class NMaximalResult(NamedTuple):
    value: float
    minimizer: Polynomial
    argmax_scale: float
    converged: bool
    restart_coefficients: np.ndarray


def N_maximal(
    F: FunctionClass,
    prm: MaximalParams,
    x,
    restarts: int = 1,
    rng: np.random.Generator | None = None,
    rtol: float = 1e-4,
) -> NMaximalResult:
    """Minimize the eta maximal over representatives of the class F at x.

    Monomials are recentred at x, so the returned minimizing polynomial of the
    smooth cases is the Taylor polynomial at x.  ``restarts`` > 1 adds seeded
    random warm starts; the per-start solutions are returned for uniqueness
    probes.  A Nelder-Mead polish follows the coordinate-descent stage since
    the max-of-seminorms objective is nonsmooth at scale crossings.
    """
    if F.k != prm.k:
        raise ValueError(f"class degree bound {F.k} != maximal parameter k {prm.k}")
    obj = _MinimaxObjective(F, prm, x)
    starts = [obj.warm, np.zeros(obj.dim)]
    if restarts > 1:
        rng = rng or np.random.default_rng(0)
        spread = 0.5 * (1.0 + np.max(np.abs(obj.warm)))
        starts += [obj.warm + rng.normal(scale=spread, size=obj.dim) for _ in range(restarts - 1)]

    solutions = []
    for c0 in starts:
        c, f, conv = _coordinate_descent(obj, np.asarray(c0, dtype=float), rtol)
        polish = optimize.minimize(
            obj, c, method="Nelder-Mead",
            options={"xatol": 1e-11, "fatol": 1e-14, "maxiter": 4000},
        )
        if polish.fun <= f:
            c, f, conv = polish.x, float(polish.fun), conv or polish.success
        solutions.append((f, c, conv))

    solutions.sort(key=lambda t: t[0])
    f_best, c_best, conv_best = solutions[0]
    per = obj.per_scale(c_best)
    poly = Polynomial(F.representative.domain.n, obj.unscale(c_best), center=obj.x)
    coeff_rows = np.stack([
        np.array([obj.unscale(c)[tuple(a)] for a in obj.alphas]) for _, c, _ in solutions
    ])
    return NMaximalResult(
        value=f_best,
        minimizer=poly,
        argmax_scale=float(prm.scale_grid[int(np.argmax(per))]),
        converged=conv_best,
        restart_coefficients=coeff_rows,
    )


# --------------------------------------------------------------------------
# Hardy-Littlewood maximal function (centered, over the scale grid)
# --------------------------------------------------------------------------


def _window_antiderivative(samples_abs: np.ndarray, domain: DomainBox, axis: int) -> np.ndarray:
    acc = np.cumsum(samples_abs, axis=axis) * domain.spacing
    pad = [(0, 0)] * samples_abs.ndim
    pad[axis] = (1, 0)
    return np.pad(acc, pad)


def _window_integral(E: np.ndarray, domain: DomainBox, positions: np.ndarray, axis: int) -> np.ndarray:
    """Evaluate the piecewise-linear antiderivative at arbitrary positions (clamped to the box)."""
    u = np.clip((positions + domain.half_width) / domain.spacing, 0.0, domain.points_per_axis)
    i = np.minimum(np.floor(u).astype(int), domain.points_per_axis - 1)
    frac = u - i
    Ei = np.take(E, i, axis=axis)
    Ei1 = np.take(E, i + 1, axis=axis)
    if E.ndim == 2 and axis == 0:
        frac = frac[:, None] if frac.ndim == 1 else frac
    return Ei + frac * (Ei1 - Ei)


def _box_average_1d(f_abs: np.ndarray, domain: DomainBox, centers: np.ndarray, r: float) -> np.ndarray:
    E = _window_antiderivative(f_abs, domain, axis=0)
    hi = _window_integral(E, domain, centers + 0.5 * r, axis=0)
    lo = _window_integral(E, domain, centers - 0.5 * r, axis=0)
    return (hi - lo) / r


def hl_maximal(f: GridFunction, x, scale_grid: np.ndarray) -> float:
    """Centered maximal function: max over scales of the |f|-average on Q(x, r)."""
    domain = f.domain
    absf = np.abs(f.samples)
    x_arr = np.atleast_1d(np.asarray(x, dtype=float))
    best = 0.0
    if domain.n == 1:
        E = _window_antiderivative(absf, domain, axis=0)
        for r in np.asarray(scale_grid, dtype=float):
            lo = _window_integral(E, domain, np.array([x_arr[0] - 0.5 * r]), axis=0)
            hi = _window_integral(E, domain, np.array([x_arr[0] + 0.5 * r]), axis=0)
            best = max(best, float(hi[0] - lo[0]) / r)
        return best
    E0 = _window_antiderivative(absf, domain, axis=0)
    for r in np.asarray(scale_grid, dtype=float):
        hi = _window_integral(E0, domain, np.array([x_arr[0] + 0.5 * r]), axis=0)
        lo = _window_integral(E0, domain, np.array([x_arr[0] - 0.5 * r]), axis=0)
        g = (hi - lo)[0]  # integral over x0-window, per x1 cell
        E1 = np.concatenate([[0.0], np.cumsum(g) * domain.spacing])
        u = np.clip(
            (np.array([x_arr[1] - 0.5 * r, x_arr[1] + 0.5 * r]) + domain.half_width)
            / domain.spacing,
            0.0,
            domain.points_per_axis,
        )
        i = np.minimum(np.floor(u).astype(int), domain.points_per_axis - 1)
        vals = E1[i] + (u - i) * (E1[i + 1] - E1[i])
        best = max(best, float(vals[1] - vals[0]) / r**2)
    return best


def hl_maximal_field(f: GridFunction, scale_grid: np.ndarray) -> GridFunction:
    """Centered maximal function evaluated at every cell center."""
    domain = f.domain
    absf = np.abs(f.samples)
    centers = domain.axis_centers()
    out = np.zeros(domain.shape)
    if domain.n == 1:
        E = _window_antiderivative(absf, domain, axis=0)
        for r in np.asarray(scale_grid, dtype=float):
            avg = (_window_integral(E, domain, centers + 0.5 * r, axis=0)
                   - _window_integral(E, domain, centers - 0.5 * r, axis=0)) / r
            np.maximum(out, avg, out=out)
        return GridFunction(domain, out)
    E0 = _window_antiderivative(absf, domain, axis=0)
    for r in np.asarray(scale_grid, dtype=float):
        # windowed x0-integral per x1 cell, then windowed x1-integral of that
        g = (_window_integral(E0, domain, centers + 0.5 * r, axis=0)
             - _window_integral(E0, domain, centers - 0.5 * r, axis=0))
        E1 = np.pad(np.cumsum(g, axis=1) * domain.spacing, ((0, 0), (1, 0)))
        avg = (_window_integral(E1, domain, centers + 0.5 * r, axis=1)
               - _window_integral(E1, domain, centers - 0.5 * r, axis=1)) / r**2
        np.maximum(out, avg, out=out)
    return GridFunction(domain, out)


# --------------------------------------------------------------------------
# smooth-dilation maximal function and the induced norm
# --------------------------------------------------------------------------


def _dilated_kernel(phi, domain: DomainBox, t: float) -> np.ndarray:
    """t^-n phi(./t) sampled on the lattice of cell-center differences."""
    N = domain.points_per_axis
    offsets = np.arange(-(N - 1), N) * domain.spacing
    if domain.n == 1:
        return phi.values(offsets / t) / t
    X0, X1 = np.meshgrid(offsets, offsets, indexing="ij")
    pts = np.stack([X0, X1], axis=-1)
    return phi.values(pts / t) / t**2


def phi_maximal_field(f: GridFunction, phi, t_grid: np.ndarray):
    """sup over the t grid of |t^-n phi(./t) * f| at every cell center.

    Returns (field, argmax_t as an array).  The convolution is the plain
    midpoint quadrature sum, evaluated by FFT for speed; f is zero outside the
    box, so no truncation is involved.
    """
    from scipy.signal import fftconvolve

    if abs(phi.integral) < 1e-12:
        raise ValueError("phi must have nonzero integral")
    domain = f.domain
    cell = domain.spacing ** domain.n
    best = np.full(domain.shape, -1.0)
    arg = np.zeros(domain.shape)
    for t in np.asarray(t_grid, dtype=float):
        K = _dilated_kernel(phi, domain, t)
        conv = np.abs(fftconvolve(f.samples, K, mode="same") * cell)
        upd = conv > best
        best[upd] = conv[upd]
        arg[upd] = t
    return GridFunction(domain, best), arg


def phi_maximal(f: GridFunction, phi, x, t_grid: np.ndarray) -> float:
    """Point value of the smooth-dilation maximal function (direct quadrature)."""
    if abs(phi.integral) < 1e-12:
        raise ValueError("phi must have nonzero integral")
    domain = f.domain
    cell = domain.spacing ** domain.n
    pts = domain.centers()
    x_arr = np.atleast_1d(np.asarray(x, dtype=float))
    if domain.n == 1:
        diff = x_arr[0] - pts
    else:
        diff = x_arr[None, None, :] - pts
    best = 0.0
    for t in np.asarray(t_grid, dtype=float):
        vals = phi.values(diff / t) / t**domain.n
        best = max(best, abs(float(np.sum(vals * f.samples)) * cell))
    return best


def schwartz_seminorm(phi, N: int) -> float:
    """Sum over |beta| <= N of sup (1+|x|)^N |d^beta phi| on a dense grid."""
    n = phi.n
    H = phi.grid_halfwidth
    if n == 1:
        pts = np.linspace(-H, H, 40001)
        weight = (1.0 + np.abs(pts)) ** N
    else:
        ax = np.linspace(-H, H, 1201)
        X0, X1 = np.meshgrid(ax, ax, indexing="ij")
        pts = np.stack([X0, X1], axis=-1)
        weight = (1.0 + np.sqrt(X0**2 + X1**2)) ** N
    total = 0.0
    for beta in multi_indices(n, N):
        total += float(np.max(weight * np.abs(phi.derivative(beta, pts))))
    return total


def hardy_norm(f: GridFunction, p, phi, t_grid: np.ndarray, tol: float = 1e-8) -> float:
    """Luxemburg norm of the smooth-dilation maximal field of f."""
    from .exponents import luxemburg_norm

    field, _ = phi_maximal_field(f, phi, t_grid)
    return luxemburg_norm(field, p, tol=tol)


def truncated_singular_integral(
    a: GridFunction,
    kernel_deriv: Callable[[np.ndarray], np.ndarray],
    eps_grid: np.ndarray,
    x,
) -> float:
    """sup over eps of |integral_{|y| > eps} K(y) a(x - y) dy| by midpoint quadrature.

    ``kernel_deriv`` evaluates the convolution kernel away from the origin.
    All truncation levels are handled in one pass: source cells are sorted by
    distance from x and suffix sums give every truncated integral.
    """
    domain = a.domain
    pts = domain.centers().reshape(-1, domain.n)
    vals = a.samples.reshape(-1)
    nz = vals != 0.0
    if not np.any(nz):
        return 0.0
    pts = pts[nz]
    vals = vals[nz]
    x_arr = np.atleast_1d(np.asarray(x, dtype=float))
    y = x_arr[None, :] - pts
    dist = np.sqrt(np.sum(y * y, axis=1))
    keep = dist > 0
    y, vals, dist = y[keep], vals[keep], dist[keep]
    kern = kernel_deriv(y if domain.n > 1 else y[:, 0])
    contrib = kern * vals * domain.spacing ** domain.n
    order = np.argsort(dist)[::-1]
    dist_sorted = dist[order]
    suffix = np.cumsum(contrib[order])
    best = 0.0
    for eps in np.asarray(eps_grid, dtype=float):
        m = int(np.searchsorted(-dist_sorted, -eps, side="left"))
        total = suffix[m - 1] if m >= 1 else 0.0
        best = max(best, abs(float(total)))
    return best
