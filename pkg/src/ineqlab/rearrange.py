"""Symmetric decreasing rearrangement, the conformal map U and competing symmetries.

The distribution function mu(tau) = |{f > tau}| of an axisymmetric f is
computed slab by slab: planes through the local minima of f on the symmetry
axis cut space into slabs holding one peak each.  Inside a slab, f is sampled
on rays from the peak and

    mu(tau) = |S^(d-2)|/d  sum  int V(theta) sin(theta)^(d-2) dtheta,

where V sums +-r^d over the crossings of the ray with the level, plus r^d
when the ray reaches the wall inside the set.  Along each ray f is a
Chebyshev interpolant in phi = arctan(r / R0), and crossings are refined to
roundoff.  The rearranged profile at radius r solves mu(tau) = |B_1| r^d.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.fft import dct
from scipy.special import erfc, roots_jacobi

from .axial import AxialFunction, AxialGrid, build_axial_grid
from .errors import (DegenerateInput, IntegrabilityError, InvalidParameter, PreconditionError,
                     ResolutionError)
from .euclid import (AxiSymFunction, RadialFunction, _plane_to_sphere, ball_volume,
                     gradient_norm_sq, lift_to_sphere, push_to_plane, two_star)
from .gauss import GaussianFunction, gaussian_cdf, gaussian_density, lsi_deficit
from .spectral import SphereFunction, UltrasphericalGrid, build_grid
from .sphere import sphere_area


@dataclass
class SphereCallable:
    """u(y, z) on S^d given by a vectorized callable."""

    d: int
    fn: Callable

    def __call__(self, y, z):
        return self.fn(y, z)


def _evaluator(f):
    """(d, u(y, z)) for any supported representation."""
    if isinstance(f, (RadialFunction, AxiSymFunction)):
        f = lift_to_sphere(f)
    if isinstance(f, SphereFunction):
        return f.d, lambda y, z: f(z)
    if isinstance(f, AxialFunction):
        return f.d, lambda y, z: f(y, z)
    if isinstance(f, SphereCallable):
        return f.d, f.fn
    raise InvalidParameter(f"unsupported input {type(f).__name__}")


def _nodal_min(f) -> float:
    if isinstance(f, SphereCallable):
        return 0.0
    return float(np.min(f.values))


@dataclass
class DistributionProfile:
    levels: np.ndarray
    measures: np.ndarray


def _lobatto(K: int) -> np.ndarray:
    return np.cos(np.pi * np.arange(K) / (K - 1))


def _cheb_coeffs(vals: np.ndarray, axis: int) -> np.ndarray:
    """Chebyshev coefficients from samples at Lobatto points along `axis`."""
    K = vals.shape[axis]
    coef = dct(vals, type=1, axis=axis) / (K - 1)
    sl = [slice(None)] * vals.ndim
    for end in (0, -1):
        sl[axis] = end
        coef[tuple(sl)] /= 2
    return coef


def _tail(coef: np.ndarray, axis: int) -> float:
    scale = float(np.max(np.abs(coef))) or 1.0
    return float(np.max(np.abs(np.take(coef, range(coef.shape[axis] - 4, coef.shape[axis]),
                                       axis=axis)))) / scale


def _clenshaw(coef: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Row-wise Chebyshev series: sum_k coef[i, k] T_k(x[i])."""
    aT = np.ascontiguousarray(coef.T)
    b1 = np.zeros_like(x)
    b2 = np.zeros_like(x)
    for k in range(aT.shape[0] - 1, 0, -1):
        b1, b2 = aT[k] + 2 * x * b1 - b2, b1
    return aT[0] + x * b1 - b2


def _crossings(coef, dcoef, tl, oversample: int = 4):
    """Roots of p_i(x) = tl[i] on [-1, 1] for Chebyshev series rows p_i.

    Sign changes are bracketed on a uniform table and refined by safeguarded
    Newton.  Returns (row, x, down, end_above): down marks crossings where p
    decreases through the level, end_above rows with p(1) > level.
    """
    R, K = coef.shape
    xs = np.linspace(-1.0, 1.0, oversample * K)
    table = coef @ np.polynomial.chebyshev.chebvander(xs, K - 1).T
    above = table > tl[:, None]
    row, k = np.nonzero(above[:, :-1] != above[:, 1:])
    lo, hi = xs[k].copy(), xs[k + 1].copy()
    t = tl[row]
    flo = table[row, k] - t
    fhi = table[row, k + 1] - t
    down = flo > 0
    x = lo - flo * (hi - lo) / (fhi - flo)
    c, dc = coef[row], dcoef[row]
    act = np.arange(x.size)
    for _ in range(40):
        if act.size == 0:
            break
        xa = x[act]
        fx = _clenshaw(c[act], xa) - t[act]
        dfx = _clenshaw(dc[act], xa)
        left = np.sign(fx) == np.sign(flo[act])
        lo[act] = np.where(left, xa, lo[act])
        flo[act] = np.where(left, fx, flo[act])
        hi[act] = np.where(left, hi[act], xa)
        with np.errstate(divide="ignore", invalid="ignore"):
            xn = xa - fx / dfx
        a, b = np.minimum(lo[act], hi[act]), np.maximum(lo[act], hi[act])
        outside = ~np.isfinite(xn) | (xn < a) | (xn > b)
        xn = np.where(outside, 0.5 * (a + b), xn)
        done = (np.abs(xn - xa) < 1e-14) | (fx == 0)
        x[act] = np.where(fx == 0, xa, xn)
        act = act[~done]
    return row, x, down, above[:, -1]


class _HalfSlab:
    """f on the rays from x0 = t0 e_d at angles theta to e_d in [0, pi/2]
    (upper) or [pi/2, pi] (lower), cut at the plane t = wall.

    Along a ray, r = R0 tan(phi), phi = phi_end(theta) (1 + x)/2 with x in
    [-1, 1], and f is a 2-D Chebyshev series in (theta, x); rays at new angles
    cost one interpolation, not new samples of f.
    """

    MAX_K, MAX_M = 2049, 513

    def __init__(self, d, ueval, t0, wall, upper, R0, M, K):
        self.d, self.ueval, self.t0, self.R0 = d, ueval, t0, R0
        self.upper = upper
        self.ta, self.tb = (0.0, 0.5 * np.pi) if upper else (0.5 * np.pi, np.pi)
        self.h = None if wall is None else abs(wall - t0)
        while True:
            theta = self.ta + (self.tb - self.ta) * (1 + _lobatto(M)) / 2
            vals = self._sample(theta[:, None], _lobatto(K)[None, :])
            A = _cheb_coeffs(_cheb_coeffs(vals, 1), 0)
            tk, tm = _tail(A, 1), _tail(A, 0)
            if tk > 1e-13 and K < self.MAX_K:
                K = 2 * K - 1
            elif tm > 1e-13 and M < self.MAX_M and M > 2:
                M = 2 * M - 1
            else:
                break
        self.M, self.K, self.A = M, K, A
        self.dA = np.polynomial.chebyshev.chebder(A, axis=1)
        self.fmax = float(np.max(vals))
        self.wall_coef = self._wall_series(K) if self.h is not None else None

    def phi_end(self, theta):
        theta = np.asarray(theta, dtype=float)
        if self.h is None:
            return np.full(theta.shape, 0.5 * np.pi)
        return np.arctan2(self.h, np.abs(np.cos(theta)) * self.R0)

    def _sample(self, theta, x):
        phi = self.phi_end(theta) * (1 + x) / 2
        with np.errstate(over="ignore"):
            r = self.R0 * np.tan(phi)
        inf = (phi >= 0.5 * np.pi) | ~np.isfinite(r) | (r > 1e150)
        r = np.where(inf, 0.0, r)
        s = r * np.sin(theta)
        t = self.t0 + r * np.cos(theta)
        y, z, psi = _plane_to_sphere(s, t)
        u = np.asarray(self.ueval(y.ravel(), z.ravel()), dtype=float).reshape(y.shape)
        return np.where(inf, 0.0, psi ** ((self.d - 2) / 2.0) * u)

    def _wall_series(self, K):
        """f(s, wall) with s = R0 tan(pi (1 + x)/4), as a Chebyshev series in x."""
        wall = self.t0 + (self.h if self.upper else -self.h)
        while True:
            x = _lobatto(K)
            phi = 0.25 * np.pi * (1 + x)
            with np.errstate(over="ignore"):
                s = self.R0 * np.tan(phi)
            inf = phi >= 0.5 * np.pi
            s = np.where(inf, 0.0, s)
            y, z, psi = _plane_to_sphere(s, np.full_like(s, wall))
            u = np.asarray(self.ueval(y, z), dtype=float)
            coef = _cheb_coeffs(np.where(inf, 0.0, psi ** ((self.d - 2) / 2.0) * u), 0)
            if _tail(coef, 0) <= 1e-13 or K >= self.MAX_K:
                return coef
            K = 2 * K - 1

    def breakpoints(self, tau):
        """Per level, the angles at which {f > tau} meets the wall."""
        out = [[] for _ in range(tau.size)]
        if self.wall_coef is None:
            return out
        n = tau.size
        coef = np.broadcast_to(self.wall_coef, (n, self.wall_coef.size))
        dcoef = np.polynomial.chebyshev.chebder(coef, axis=1)
        row, x, _, _ = _crossings(np.ascontiguousarray(coef), dcoef, tau)
        s = self.R0 * np.tan(0.25 * np.pi * (1 + x))
        ang = np.arctan2(s, self.h)
        ang = ang if self.upper else np.pi - ang
        for i, a in zip(row, ang):
            if self.ta < a < self.tb:
                out[i].append(float(a))
        return out

    def wall_s(self, theta) -> float:
        """Distance from the axis at which the ray theta meets the wall."""
        alpha = theta if self.upper else np.pi - theta
        if self.h is None or alpha >= 0.5 * np.pi:
            return math.inf
        return self.h * math.tan(alpha)

    def wall_value(self, s) -> float:
        x = 4 / np.pi * math.atan(s / self.R0) - 1
        return float(_clenshaw(self.wall_coef[None, :], np.array([x]))[0])

    def ray_coef(self, theta):
        xi = 2 * (theta - self.ta) / (self.tb - self.ta) - 1
        V = np.polynomial.chebyshev.chebvander(xi, self.M - 1)
        return V @ self.A, V @ self.dA

    def volumes(self, theta, tl, derivative=False):
        """sum(b^d - a^d) over the intervals of {f > tl[i]} on ray theta[i]."""
        coef, dcoef = self.ray_coef(theta)
        row, x, down, end_above = _crossings(coef, dcoef, tl)
        pe = self.phi_end(theta)
        phi = pe[row] * (1 + x) / 2
        r = self.R0 * np.tan(phi)
        sign = np.where(down, 1.0, -1.0)
        vol = np.zeros(theta.size)
        np.add.at(vol, row, sign * r ** self.d)
        if self.h is not None:
            r_end = self.R0 * np.tan(pe)
            vol += np.where(end_above & (pe < 0.5 * np.pi), r_end ** self.d, 0.0)
        if not derivative:
            return vol
        drdx = self.R0 * 0.5 * pe[row] / np.cos(phi) ** 2
        dfx = _clenshaw(dcoef[row], x)
        with np.errstate(divide="ignore", invalid="ignore"):
            dv = self.d * r ** (self.d - 1) * drdx / dfx
        dvol = np.zeros(theta.size)
        np.add.at(dvol, row, np.where(np.isfinite(dv), sign * dv, 0.0))
        return vol, dvol


class _SlabTable:
    """Distribution function of an axisymmetric f >= 0.

    Space is cut by planes t = const at the local minima of f on the axis;
    each slab is described in polar coordinates around its own maximum, so
    that every superlevel component is seen from inside.  The angular
    integral of a half-slab is split where the superlevel set meets the wall,
    which leaves smooth integrands for Gauss-Legendre panels.
    """

    def __init__(self, d, ueval, centers, walls, n_rays, K, radial=False, R0=1.0):
        self.d = d
        self.halves = []
        M = 2 if radial else 33
        for k, t0 in enumerate(centers):
            lo = walls[k - 1] if k > 0 else None
            hi = walls[k] if k < len(walls) else None
            self.halves.append(_HalfSlab(d, ueval, t0, hi, True, R0, M, K))
            self.halves.append(_HalfSlab(d, ueval, t0, lo, False, R0, M, K))
        self.n_gl = 16 if radial else max(8, n_rays // 2)
        self.gl = np.polynomial.legendre.leggauss(self.n_gl)
        self.fmax = max(h.fmax for h in self.halves)
        self.k = sphere_area(d - 2) / d

    def _panels(self, half, tau):
        """Gauss-Legendre nodes per level between consecutive breakpoints.

        Where rays end on the wall inside the set, the cone volume makes the
        theta integrand peak towards theta = pi/2; there the wall coordinate
        s = h tan(alpha) is used, in which the cone contributes h s^(d-2) ds.
        """
        g, gw = self.gl
        thetas, weights, levels = [], [], []
        for i, cuts in enumerate(half.breakpoints(tau)):
            edges = [half.ta] + sorted(cuts) + [half.tb]
            for a, b in zip(edges[:-1], edges[1:]):
                sa, sb = half.wall_s(a), half.wall_s(b)
                if half.h is not None and np.isfinite(sa) and np.isfinite(sb) \
                        and half.wall_value(0.5 * (sa + sb)) > tau[i]:
                    lo, hi = min(sa, sb), max(sa, sb)
                    sn = lo + (hi - lo) * (1 + g) / 2
                    alpha = np.arctan2(sn, half.h)
                    th = alpha if half.upper else np.pi - alpha
                    jac = half.h / (half.h ** 2 + sn ** 2)
                    w = 0.5 * (hi - lo) * gw * jac * np.sin(th) ** (self.d - 2)
                else:
                    th = a + (b - a) * (1 + g) / 2
                    w = 0.5 * (b - a) * gw * np.sin(th) ** (self.d - 2)
                thetas.append(th)
                weights.append(w)
                levels.append(np.full(g.size, i))
        return np.concatenate(thetas), np.concatenate(weights), np.concatenate(levels)

    def measure(self, tau, derivative: bool = False):
        tau = np.atleast_1d(np.asarray(tau, dtype=float))
        mu = np.zeros(tau.size)
        dmu = np.zeros(tau.size)
        # bound the ray-by-table work per batch
        step = max(1, 4_000_000 // (4 * self.n_gl * max(h.K for h in self.halves) ** 2 // 64 + 1))
        for start in range(0, tau.size, step):
            sub = slice(start, min(start + step, tau.size))
            ts = tau[sub]
            for half in self.halves:
                th, w, lev = self._panels(half, ts)
                if derivative:
                    v, dv = half.volumes(th, ts[lev], True)
                    dmu[sub] += np.bincount(lev, w * dv, minlength=ts.size)
                else:
                    v = half.volumes(th, ts[lev])
                mu[sub] += np.bincount(lev, w * v, minlength=ts.size)
        if derivative:
            return self.k * mu, self.k * dmu
        return self.k * mu


def _axis_slabs(d, ueval):
    """Local maxima of f on the symmetry axis and the minima separating them."""
    th = np.linspace(-0.5 * np.pi, 0.5 * np.pi, 4001)[1:-1]
    t = np.tan(th)
    y, z, psi = _plane_to_sphere(np.zeros_like(t), t)
    f = psi ** ((d - 2) / 2.0) * np.asarray(ueval(y, z), dtype=float)
    top = float(np.max(f))
    interior = (f[1:-1] > f[:-2]) & (f[1:-1] >= f[2:]) & (f[1:-1] > 1e-3 * top)
    peaks = list(np.nonzero(interior)[0] + 1)
    if not peaks:
        peaks = [int(np.argmax(f))]
    walls = [float(t[a + int(np.argmin(f[a:b + 1]))]) for a, b in zip(peaks[:-1], peaks[1:])]
    return [float(t[p]) for p in peaks], walls


def _ray_table(f, n_rays, K, center=None):
    d, ueval = _evaluator(f)
    radial = isinstance(f, (SphereFunction, RadialFunction)) and center in (None, 0.0)
    if radial:
        return _SlabTable(d, ueval, [0.0], [], n_rays, K, radial=True)
    if center is not None:
        return _SlabTable(d, ueval, [float(center)], [], n_rays, K)
    centers, walls = _axis_slabs(d, ueval)
    return _SlabTable(d, ueval, centers, walls, n_rays, K)


def distribution_profile(f, levels=None, n_levels: int = 256, n_rays: int = 48,
                         K: int = 129) -> DistributionProfile:
    """Lebesgue measure of {f > tau}; default levels are log-spaced below max f."""
    tab = _ray_table(f, n_rays, K)
    if levels is None:
        levels = tab.fmax * np.logspace(-6, 0, n_levels, endpoint=False)[::-1]
    levels = np.asarray(levels, dtype=float)
    return DistributionProfile(levels=levels, measures=tab.measure(levels))


def _solve_levels(tab: _SlabTable, target: np.ndarray) -> np.ndarray:
    """tau with mu(tau) = target: bracketing from a coarse table, then
    safeguarded Newton on log mu as a function of log tau."""
    top = math.log(tab.fmax)
    grid = top + np.linspace(-40.0, 0.0, 81)[:-1]
    mu = tab.measure(np.exp(grid))
    while mu[0] <= np.max(target) and grid[0] > -700:
        grid = np.concatenate([grid[0] - 40.0 + np.linspace(0, 40, 81)[:-1], grid])
        mu = tab.measure(np.exp(grid))
    # mu is nonincreasing in tau: last index with mu > target
    idx = np.array([np.nonzero(mu > t)[0].max() for t in target])
    lo = grid[idx]
    hi = np.where(idx + 1 < grid.size, grid[np.minimum(idx + 1, grid.size - 1)], top)
    logt = np.log(target)
    lmu = np.log(np.maximum(mu, 1e-300))
    mlo = lmu[idx]
    mhi = np.where(idx + 1 < grid.size, lmu[np.minimum(idx + 1, grid.size - 1)], -np.inf)
    frac = np.where(np.isfinite(mhi), (mlo - logt) / np.where(np.isfinite(mhi), mlo - mhi, 1), 0.5)
    x = lo + np.clip(frac, 0.01, 0.99) * (hi - lo)
    act = np.arange(x.size)
    for _ in range(100):
        xa = x[act]
        m, dm = tab.measure(np.exp(xa), derivative=True)
        with np.errstate(divide="ignore", invalid="ignore"):
            g = np.where(m > 0, np.log(m) - logt[act], -np.inf)
            dg = np.exp(xa) * dm / m
        pos = g > 0
        lo[act] = np.where(pos, xa, lo[act])
        hi[act] = np.where(pos, hi[act], xa)
        with np.errstate(divide="ignore", invalid="ignore"):
            xn = xa - g / dg
        bad = ~np.isfinite(xn) | (xn <= lo[act]) | (xn >= hi[act])
        xn = np.where(bad, 0.5 * (lo[act] + hi[act]), xn)
        done = (np.abs(g) < 2e-15) | (hi[act] - lo[act] < 1e-14)
        x[act] = np.where(np.abs(g) < 2e-15, xa, xn)
        act = act[~done]
        if act.size == 0:
            break
    return np.exp(x)


def rearrange_decreasing(f, out_grid: UltrasphericalGrid | None = None, n_rays: int = 48,
                         K: int = 129, center: float | None = None) -> RadialFunction:
    """Radial nonincreasing f* equimeasurable with f >= 0."""
    if _nodal_min(f) < 0:
        raise PreconditionError("rearrangement needs f >= 0")
    d, _ = _evaluator(f)
    if out_grid is None:
        out_grid = f.grid if isinstance(f, (SphereFunction, RadialFunction)) else build_grid(d, 64)
    tab = _ray_table(f, n_rays, K, center=center)
    if not np.isfinite(tab.fmax) or tab.fmax <= 0:
        raise IntegrabilityError("f must be positive somewhere and bounded")
    z = out_grid.nodes
    r = np.sqrt((1 + z) / (1 - z))
    target = ball_volume(d) * r ** d
    tau = _solve_levels(tab, target)
    return RadialFunction(out_grid, tau)


# --------------------------------------------------------------------------
# conformal map

def conformal_U(f, axial_grid: AxialGrid | None = None):
    """Exchange of w_d and w_{d+1} on the sphere; isometric for both Sobolev norms.

    z-only input is re-embedded into the two-coordinate class first.
    """
    if isinstance(f, AxialFunction):
        return f.swap_axes()
    if isinstance(f, AxiSymFunction):
        return push_to_plane(lift_to_sphere(f).swap_axes())
    if isinstance(f, (SphereFunction, RadialFunction)):
        u = lift_to_sphere(f) if isinstance(f, RadialFunction) else f
        grid = axial_grid or build_axial_grid(u.d, min(u.grid.n - 1, 40))
        v = grid.from_sphere(u).swap_axes()
        return push_to_plane(v) if isinstance(f, RadialFunction) else v
    if isinstance(f, SphereCallable):
        fn = f.fn
        return SphereCallable(f.d, lambda y, z: fn(z, y))
    raise InvalidParameter(f"unsupported input {type(f).__name__}")


# --------------------------------------------------------------------------
# competing symmetries

@dataclass
class CompetingTrace:
    n: list = field(default_factory=list)
    distance: list = field(default_factory=list)
    grad_norm: list = field(default_factory=list)
    status: str = "running"
    final: Optional[RadialFunction] = None

    columns = ("n", "distance", "grad_norm")

    def rows(self):
        return list(zip(self.n, self.distance, self.grad_norm))


def _l2star_to_gstar(u) -> float:
    """||f - g_*||_(2*) from the sphere image."""
    d = u.d
    p = two_star(d)
    area = sphere_area(d)
    ustar = area ** (-1.0 / p)
    w = u.grid.weights
    return area ** (1.0 / p) * float(w @ np.abs(u.values - ustar) ** p) ** (1.0 / p)


def _l2star(u) -> float:
    p = two_star(u.d)
    return (sphere_area(u.d) * float(u.grid.weights @ np.abs(u.values) ** p)) ** (1.0 / p)


def competing_iterate(f0, n_max: int = 50, stop_tol: float = 1e-3,
                      out_grid: UltrasphericalGrid | None = None, n_rays: int = 48,
                      K: int = 129) -> CompetingTrace:
    """f_n = (R U)^n f0 after normalizing ||f0||_(2*) = 1."""
    if _nodal_min(f0) < 0:
        raise PreconditionError("f0 must be nonnegative")
    if isinstance(f0, SphereCallable):
        raise InvalidParameter("f0 needs a grid representation")
    u = lift_to_sphere(f0) if isinstance(f0, (RadialFunction, AxiSymFunction)) else f0
    d = u.d
    u = u.with_values(u.values / _l2star(u))
    out_grid = out_grid or build_grid(d, 64)
    trace = CompetingTrace()

    def record(n, v):
        trace.n.append(n)
        trace.distance.append(_l2star_to_gstar(v))
        trace.grad_norm.append(math.sqrt(gradient_norm_sq(v)))

    record(0, u)
    cur = u
    for n in range(1, n_max + 1):
        if trace.distance[-1] < stop_tol:
            trace.status = "converged"
            break
        if isinstance(cur, SphereFunction):
            src = SphereCallable(d, (lambda g: (lambda y, z: g(y)))(cur))
        else:
            src = conformal_U(SphereCallable(d, (lambda g: (lambda y, z: g(y, z)))(cur)))
        cur = lift_to_sphere(rearrange_decreasing(src, out_grid, n_rays=n_rays, K=K))
        record(n, cur)
    else:
        trace.status = "converged" if trace.distance[-1] < stop_tol else "max_iter"
    trace.final = push_to_plane(cur)
    return trace


# --------------------------------------------------------------------------
# Gaussian rearrangements (one variable)

class _LevelSets1D:
    """Measure of {F > tau} (or {F <= tau}) on [L, R] for a smooth F.

    interval_mass(a, b) is the measure of (a, b); F is taken to keep its
    endpoint values beyond [L, R], so endpoints above tau open intervals to
    -inf or +inf.  density is used for the derivative in tau.
    """

    def __init__(self, F, dF, L, R, interval_mass, density, n_dense=2048):
        self.F, self.dF = F, dF
        self.interval_mass, self.density = interval_mass, density
        xs = np.linspace(L, R, n_dense)
        # add the interior critical points so that no level set is missed
        ds = dF(xs)
        k = np.nonzero(np.sign(ds[:-1]) * np.sign(ds[1:]) < 0)[0]
        a, b, da = xs[k], xs[k + 1], ds[k]
        for _ in range(60):
            c = 0.5 * (a + b)
            dc = dF(c)
            same = np.sign(dc) == np.sign(da)
            a, da, b = np.where(same, c, a), np.where(same, dc, da), np.where(same, b, c)
        self.xs = np.union1d(xs, 0.5 * (a + b))
        self.fs = F(self.xs)
        self.scale = float(np.max(np.abs(self.fs))) or 1.0

    def _crossings(self, tau):
        above = self.fs[None, :] > tau[:, None]
        row, k = np.nonzero(above[:, :-1] != above[:, 1:])
        a, b = self.xs[k].copy(), self.xs[k + 1].copy()
        t = tau[row]
        fa = self.fs[k] - t
        x = 0.5 * (a + b)
        act = np.arange(x.size)
        for _ in range(80):
            if act.size == 0:
                break
            xa = x[act]
            fx = self.F(xa) - t[act]
            dfx = self.dF(xa)
            same = np.sign(fx) == np.sign(fa[act])
            a[act] = np.where(same, xa, a[act])
            fa[act] = np.where(same, fx, fa[act])
            b[act] = np.where(same, b[act], xa)
            with np.errstate(divide="ignore", invalid="ignore"):
                xn = xa - fx / dfx
            bad = ~np.isfinite(xn) | (xn <= a[act]) | (xn >= b[act])
            xn = np.where(bad, 0.5 * (a[act] + b[act]), xn)
            small = np.abs(fx) <= 4e-16 * np.abs(t[act])
            done = small | (b[act] - a[act] <= 1e-15 * (1 + np.abs(xa)))
            x[act] = np.where(small, xa, xn)
            act = act[~done]
        return above, row, x

    def measure(self, tau, below=False, derivative=False):
        tau = np.atleast_1d(np.asarray(tau, dtype=float))
        above, row, x = self._crossings(tau)
        inside = ~above if below else above
        r_left = np.nonzero(inside[:, 0])[0]
        r_right = np.nonzero(inside[:, -1])[0]
        rows = np.concatenate([row, r_left, r_right])
        pts = np.concatenate([x, np.full(r_left.size, -np.inf), np.full(r_right.size, np.inf)])
        order = np.lexsort((pts, rows))
        rows, pts = rows[order], pts[order]
        m = np.zeros(tau.size)
        np.add.at(m, rows[0::2], self.interval_mass(pts[0::2], pts[1::2]))
        if not derivative:
            return m
        dm = np.zeros(tau.size)
        with np.errstate(divide="ignore"):
            contrib = self.density(x) / np.abs(self.dF(x))
        np.add.at(dm, row, np.where(np.isfinite(contrib), contrib, 0.0))
        return m, (dm if below else -dm)

    def solve(self, target, complement=None, log_levels=False, n_table=256):
        """Levels tau with |{F > tau}| = target.

        Where complement (= total - target, supplied accurately) is smaller
        than target, |{F <= tau}| = complement is solved instead, so tiny
        targets at both ends are matched in relative terms.
        """
        target = np.asarray(target, dtype=float)
        use_c = np.zeros(target.size, bool) if complement is None else complement < target
        goal = target if complement is None else np.where(use_c, complement, target)
        fmin, fmax = float(np.min(self.fs)), float(np.max(self.fs))
        if log_levels:
            floor = max(float(np.min(self.fs[self.fs > 0])), fmax * 1e-300)
            table = np.linspace(math.log(floor), math.log(fmax), n_table)
            to_tau = np.exp
        else:
            span = max(fmax - fmin, self.scale * 1e-12)
            table = np.linspace(fmin - 1e-3 * span, fmax, n_table)
            to_tau = lambda v: v  # noqa: E731

        def residual(v, sel, derivative):
            tau = to_tau(v)
            out_g = np.empty(v.size)
            out_d = np.empty(v.size)
            for flag in (False, True):
                mask = use_c[sel] == flag
                if not mask.any():
                    continue
                res = self.measure(tau[mask], below=flag, derivative=derivative)
                m, dm = res if derivative else (res, None)
                # residual in log-measure so that tail levels converge quadratically;
                # both branches decrease in tau
                with np.errstate(divide="ignore", invalid="ignore"):
                    lg = np.log(m) - np.log(goal[sel][mask])
                    out_g[mask] = lg if not flag else -lg
                    if derivative:
                        dl = dm / m * (tau[mask] if log_levels else 1.0)
                        out_d[mask] = dl if not flag else -dl
            return out_g, out_d

        # bracket from a coarse table (one crossing pass per table level)
        m_above = self.measure(to_tau(table))
        m_below = self.measure(to_tau(table), below=True)
        lo = np.empty(goal.size)
        hi = np.empty(goal.size)
        for i in range(goal.size):
            gtab = (m_below - goal[i]) * -1 if use_c[i] else m_above - goal[i]
            pos = np.nonzero(gtab > 0)[0]
            j = pos.max() if pos.size else 0
            lo[i] = table[j] if pos.size else table[0]
            hi[i] = table[min(j + 1, n_table - 1)] if pos.size else table[0]
            if j + 1 >= n_table:
                hi[i] = table[-1]
        v = 0.5 * (lo + hi)
        act = np.arange(v.size)
        for _ in range(100):
            if act.size == 0:
                break
            va = v[act]
            g, dg = residual(va, act, True)
            pos = g > 0
            lo[act] = np.where(pos, va, lo[act])
            hi[act] = np.where(pos, hi[act], va)
            with np.errstate(divide="ignore", invalid="ignore"):
                vn = va - g / dg
            bad = ~np.isfinite(vn) | (vn <= lo[act]) | (vn >= hi[act])
            vn = np.where(bad, 0.5 * (lo[act] + hi[act]), vn)
            small = np.abs(g) <= 1e-14
            done = small | (hi[act] - lo[act] <= 4e-16 * np.maximum(np.abs(va), 1e-300))
            v[act] = np.where(small, va, vn)
            act = act[~done]
        return to_tau(v)


def _gaussian_interval_mass(a, b):
    """gamma((a, b)) in one dimension, accurate in both tails."""
    s = math.sqrt(math.pi)
    return np.where(a >= 0, 0.5 * (erfc(s * a) - erfc(s * b)), 0.5 * (erfc(-s * b) - erfc(-s * a)))


def _require_1d(u: GaussianFunction, what: str):
    if u.N != 1:
        raise InvalidParameter(f"{what} is implemented for N = 1")


def _extended(u: GaussianFunction):
    """u and u' continued log-linearly through the two end nodes outside the
    node range, where extrapolating the interpolant is unstable.  Exact for
    c e^(ax); zero end values continue by zero."""
    x, v = u.grid.nodes1d, u.values
    ends = []
    for i, j in ((0, 1), (-1, -2)):
        s = math.log(v[i] / v[j]) / (x[i] - x[j]) if v[i] > 0 and v[j] > 0 else 0.0
        ends.append((float(x[i]), float(max(v[i], 0.0)), s))
    (a, va, sa), (b, vb, sb) = ends

    def F(t):
        t = np.asarray(t, dtype=float)
        out = u(np.clip(t, a, b))
        out = np.where(t < a, va * np.exp(sa * (t - a)), out)
        return np.where(t > b, vb * np.exp(sb * (t - b)), out)

    def dF(t):
        t = np.asarray(t, dtype=float)
        out = u.derivative_at(np.clip(t, a, b))
        out = np.where(t < a, sa * va * np.exp(sa * (t - a)), out)
        return np.where(t > b, sb * vb * np.exp(sb * (t - b)), out)

    return F, dF


def _gaussian_U_cells(u: GaussianFunction) -> GaussianFunction:
    """Markov-Stieltjes cells: node j owns gamma-mass w_j and gamma((-inf, x_j))
    lies inside its cell, so the rearranged nodal values are the sorted values.
    For N >= 2 the slab {x_1 = x_1j} gets the weighted quantile at the middle
    of its cell."""
    g = u.grid
    if u.N == 1:
        return u.with_values(np.sort(u.values)[::-1])
    order = np.argsort(-u.values, kind="stable")
    cum = np.cumsum(g.weights[order])
    edges = np.concatenate([[0.0], np.cumsum(g.weights1d)])
    mids = 0.5 * (edges[:-1] + edges[1:])
    pick = np.minimum(np.searchsorted(cum, mids), cum.size - 1)
    slab = u.values[order][pick]
    idx1 = np.repeat(np.arange(g.n), g.n ** (u.N - 1))
    return u.with_values(slab[idx1])


def gaussian_U(u: GaussianFunction, method: str = "level", margin: float = 0.25) -> GaussianFunction:
    """Rearrangement with superlevel sets {x_1 < mu} of the same gamma-measure.

    method 'level' inverts the distribution function of the Hermite
    interpolant (N = 1, smooth data); 'cells' permutes nodal values and is
    exact at quadrature level for discontinuous data.
    """
    if np.min(u.values) < -1e-12 * max(1.0, float(np.max(np.abs(u.values)))):
        raise PreconditionError("gaussian_U needs u >= 0")
    if method == "cells" or u.N > 1:
        return _gaussian_U_cells(u)
    if method != "level":
        raise InvalidParameter("method must be 'level' or 'cells'")
    x = u.grid.nodes1d
    X = float(np.max(np.abs(x))) + margin
    F, dF = _extended(u)
    sets = _LevelSets1D(F, dF, -X, X, _gaussian_interval_mass, gaussian_density)
    # data may peak between nodes and kinked iterates overshoot a little, but an
    # excursion comparable to the nodal span means the interpolant is garbage
    v = u.values
    span = max(float(np.max(v) - np.min(v)), 1e-8 * float(np.max(np.abs(v))), 1e-300)
    inner = (sets.xs >= x[0]) & (sets.xs <= x[-1])
    over = max(float(np.max(sets.fs[inner]) - np.max(v)), float(np.min(v) - np.min(sets.fs[inner])))
    if over > 0.5 * span:
        raise ResolutionError(
            f"interpolant leaves the nodal range by {over / span:.2e} of its span; "
            "refine the grid or use method='cells'")
    return u.with_values(sets.solve(gaussian_cdf(x), complement=gaussian_cdf(-x)))


def gaussian_V(u: GaussianFunction, margin: float = 1.5) -> GaussianFunction:
    """V u = e^(pi x^2/2) R(e^(-pi x^2/2) u), R the symmetric decreasing rearrangement on R."""
    _require_1d(u, "gaussian_V")
    if np.min(u.values) < -1e-12 * max(1.0, float(np.max(np.abs(u.values)))):
        raise PreconditionError("gaussian_V needs u >= 0")
    x = u.grid.nodes1d
    X = float(np.max(np.abs(x))) + margin

    uc, duc = _extended(u)

    def F(t):
        return np.exp(-0.5 * math.pi * t * t) * uc(t)

    def dF(t):
        e = np.exp(-0.5 * math.pi * t * t)
        return e * (duc(t) - math.pi * t * uc(t))

    sets = _LevelSets1D(F, dF, -X, X, lambda a, b: b - a, np.ones_like)
    gmax = float(np.max(sets.fs))
    if not gmax > 0:
        raise DegenerateInput("u vanishes identically")
    if max(abs(sets.fs[0]), abs(sets.fs[-1])) > 1e-13 * gmax:
        raise IntegrabilityError("e^(-pi x^2/2) u does not decay inside the grid")
    # boundary values count as outside: F(+-X) is below every level we solve for
    sets.fs[0] = sets.fs[-1] = 0.0
    gstar = sets.solve(2 * np.abs(x), log_levels=True)
    return u.with_values(np.exp(0.5 * math.pi * x * x) * gstar)


@dataclass
class GaussianCompetingTrace:
    n: list = field(default_factory=list)
    distance: list = field(default_factory=list)
    deficit: list = field(default_factory=list)
    status: str = "running"
    final: Optional[GaussianFunction] = None

    columns = ("n", "distance", "deficit")

    def rows(self):
        return list(zip(self.n, self.distance, self.deficit))


def gaussian_competing_iterate(u0: GaussianFunction, n_max: int = 50, stop_tol: float = 1e-3,
                               method: str = "level") -> GaussianCompetingTrace:
    """u_n = (V U)^n u0, tracking ||u_n - ||u0|| ||_(L^2(gamma)) and the LSI deficit."""
    _require_1d(u0, "gaussian_competing_iterate")
    target = u0.norm(2)
    if not target > 0:
        raise DegenerateInput("u0 vanishes identically")
    trace = GaussianCompetingTrace()

    def record(n, v):
        trace.n.append(n)
        trace.distance.append((v - target).norm(2))
        trace.deficit.append(lsi_deficit(v))

    record(0, u0)
    cur = u0
    for n in range(1, n_max + 1):
        if trace.distance[-1] < stop_tol:
            trace.status = "converged"
            break
        cur = gaussian_V(gaussian_U(cur, method=method))
        record(n, cur)
    else:
        trace.status = "converged" if trace.distance[-1] < stop_tol else "max_iter"
    trace.final = cur
    return trace
