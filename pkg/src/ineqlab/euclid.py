"""Sobolev inequality on R^d for radial and axially symmetric functions.

Euclidean functions are carried by their stereographic images on S^d:
f(x) = psi^((d-2)/2) u(w) with psi = 2/(1+|x|^2) = 1 - z.  With the
uniform probability measure on the sphere,

    int |f|^(2*) dx = |S^d| int |u|^(2*),   |grad f|_2^2 = |S^d| Q(u),
    Q(u) = int |grad u|^2 + A u^2,          A = d(d-2)/4.

Radial f corresponds to functions of z only (SphereFunction) and
axisymmetric f(|x'|, x_d) to functions of (y, z) = (w_d, w_{d+1})
(AxialFunction).  The Aubin-Talenti bubble c (a + |x - b e_d|^2)^(-(d-2)/2)
lifts to c B^(-(d-2)/2) with B = 1 + a + b^2 - 2 b y + (1 - a - b^2) z and
solves (-Lap + A) G = 4 a A c^(-4/(d-2)) G^(2*-1) on the sphere; this
identity gives Q-inner products with bubbles and their tangent vectors
without differentiating the data.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Union

import numpy as np
from scipy.special import gammaln, roots_jacobi

from .axial import AxialFunction, AxialGrid
from .errors import (DegenerateInput, EmptySample, IntegrabilityError,
                     InvalidParameter, UndefinedQuotient)
from .spectral import SphereFunction, UltrasphericalGrid, build_grid, dirichlet_energy
from .sphere import sphere_area

SphereRep = Union[SphereFunction, AxialFunction]


def conformal_A(d: int) -> float:
    return d * (d - 2) / 4.0


def two_star(d: int) -> float:
    return 2.0 * d / (d - 2)


def sobolev_constant(d: int) -> float:
    """S_d = A |S^d|^(2/d)."""
    return conformal_A(d) * sphere_area(d) ** (2.0 / d)


def ball_volume(d: int) -> float:
    return float(math.exp(0.5 * d * math.log(math.pi) - gammaln(0.5 * d + 1)))


# --------------------------------------------------------------------------
# manifold points

@dataclass(frozen=True)
class ManifoldPoint:
    a: float
    b: np.ndarray
    c: float

    def __post_init__(self):
        if not self.a > 0:
            raise InvalidParameter("scale a must be positive")
        object.__setattr__(self, "b", np.atleast_1d(np.asarray(self.b, dtype=float)).copy())

    @classmethod
    def on_axis(cls, a: float, b_d: float, c: float, d: int) -> "ManifoldPoint":
        b = np.zeros(d)
        b[-1] = b_d
        return cls(a, b, c)

    @property
    def d(self) -> int:
        return self.b.size

    @property
    def b_axis(self) -> float:
        if np.any(self.b[:-1] != 0):
            raise InvalidParameter("center is off the symmetry axis")
        return float(self.b[-1])

    def __call__(self, x) -> np.ndarray:
        """c (a + |x - b|^2)^(-(d-2)/2) at points x of shape (..., d)."""
        x = np.asarray(x, dtype=float)
        r2 = np.sum((x - self.b) ** 2, axis=-1)
        return self.c * (self.a + r2) ** (-(self.d - 2) / 2.0)


def bubble_sphere(d: int, a: float, b: float, y, z) -> np.ndarray:
    """Unit-amplitude lifted bubble B^(-(d-2)/2); y may be None when b = 0."""
    B = _bubble_base(a, b, y, z)
    return B ** (-(d - 2) / 2.0)


def _bubble_base(a, b, y, z):
    B = (1 + a + b * b) + (1 - a - b * b) * z
    if b != 0:
        B = B - 2 * b * y
    return B


# --------------------------------------------------------------------------
# Euclidean representations

def _radial_nodes(grid: UltrasphericalGrid) -> np.ndarray:
    z = grid.nodes
    return np.sqrt((1 + z) / (1 - z))


def _plane_to_sphere(s, t):
    """(|x'|, x_d) -> (y, z, psi) with psi = 1 - z = 2/(1+|x|^2)."""
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    q = 1 + s * s + t * t
    psi = 2.0 / q
    return t * psi, 1 - psi, psi


class RadialFunction:
    """Radial f on R^d sampled at r_j = sqrt((1+z_j)/(1-z_j)), z_j the sphere nodes."""

    __slots__ = ("grid", "values")

    def __init__(self, grid: UltrasphericalGrid, values):
        values = np.asarray(values, dtype=float)
        if values.shape != (grid.n,):
            raise InvalidParameter("wrong number of nodal values")
        self.grid = grid
        self.values = values

    @classmethod
    def from_callable(cls, grid: UltrasphericalGrid, fn) -> "RadialFunction":
        return cls(grid, np.asarray(fn(_radial_nodes(grid)), dtype=float))

    @property
    def d(self) -> int:
        return self.grid.d

    @property
    def r(self) -> np.ndarray:
        return _radial_nodes(self.grid)

    @property
    def weights(self) -> np.ndarray:
        """Lebesgue quadrature weights attached to the nodes."""
        z = self.grid.nodes
        return sphere_area(self.d) * self.grid.weights / (1 - z) ** self.d

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        _, z, psi = _plane_to_sphere(r, 0.0)
        return psi ** ((self.d - 2) / 2.0) * lift_to_sphere(self)(z)


class AxiSymFunction:
    """Axisymmetric f(s, t), s = |x'|, t = x_d, sampled at the images of an AxialGrid."""

    __slots__ = ("grid", "values")

    def __init__(self, grid: AxialGrid, values):
        values = np.asarray(values, dtype=float).ravel()
        if values.size != grid.size:
            raise InvalidParameter("wrong number of nodal values")
        self.grid = grid
        self.values = values

    @classmethod
    def from_callable(cls, grid: AxialGrid, fn) -> "AxiSymFunction":
        s, t = _axial_nodes(grid)
        return cls(grid, np.asarray(fn(s, t), dtype=float))

    @property
    def d(self) -> int:
        return self.grid.d

    @property
    def coords(self):
        return _axial_nodes(self.grid)

    @property
    def weights(self) -> np.ndarray:
        return sphere_area(self.d) * self.grid.weights / (1 - self.grid.z) ** self.d

    def __call__(self, s, t):
        y, z, psi = _plane_to_sphere(s, t)
        return psi ** ((self.d - 2) / 2.0) * lift_to_sphere(self)(y, z)


def _axial_nodes(grid: AxialGrid):
    y, z = grid.y, grid.z
    psi = 1 - z
    s = np.sqrt(np.maximum(1 - grid.rho ** 2, 0.0)) / psi
    return s, y / psi


EuclidRep = Union[RadialFunction, AxiSymFunction]


def lift_to_sphere(f: EuclidRep) -> SphereRep:
    """u = f / psi^((d-2)/2) on the sphere nodes."""
    if isinstance(f, RadialFunction):
        psi = 1 - f.grid.nodes
        return SphereFunction(f.grid, f.values / psi ** ((f.d - 2) / 2.0))
    if isinstance(f, AxiSymFunction):
        psi = 1 - f.grid.z
        return AxialFunction(f.grid, f.values / psi ** ((f.d - 2) / 2.0))
    raise InvalidParameter(f"cannot lift {type(f).__name__}")


def push_to_plane(u: SphereRep) -> EuclidRep:
    if isinstance(u, SphereFunction):
        psi = 1 - u.grid.nodes
        return RadialFunction(u.grid, u.values * psi ** ((u.d - 2) / 2.0))
    if isinstance(u, AxialFunction):
        psi = 1 - u.grid.z
        return AxiSymFunction(u.grid, u.values * psi ** ((u.d - 2) / 2.0))
    raise InvalidParameter(f"cannot push {type(u).__name__}")


def _as_sphere(f) -> SphereRep:
    if isinstance(f, (SphereFunction, AxialFunction)):
        return f
    return lift_to_sphere(f)


def g_star(d: int, grid: UltrasphericalGrid | None = None) -> RadialFunction:
    """|S^d|^(-(d-2)/(2d)) (2/(1+|x|^2))^((d-2)/2), unit L^(2*) norm."""
    grid = grid or build_grid(d, 64)
    k = sphere_area(d) ** (-(d - 2) / (2.0 * d))
    return RadialFunction.from_callable(grid, lambda r: k * (2 / (1 + r * r)) ** ((d - 2) / 2.0))


def bubble_function(point: ManifoldPoint, grid) -> EuclidRep:
    """Sample g_{a,b,c} on a radial or axial grid (b on the axis)."""
    d = grid.d
    if point.d != d:
        raise InvalidParameter("dimension mismatch")
    b = point.b_axis
    if isinstance(grid, UltrasphericalGrid):
        if b != 0:
            raise InvalidParameter("radial grids need b = 0")
        u = point.c * bubble_sphere(d, point.a, 0.0, None, grid.nodes)
        return push_to_plane(SphereFunction(grid, u))
    u = point.c * bubble_sphere(d, point.a, b, grid.y, grid.z)
    return push_to_plane(AxialFunction(grid, u))


# --------------------------------------------------------------------------
# functionals

def _sphere_norm(u: SphereRep, q: float) -> float:
    if isinstance(u, SphereFunction):
        return float(u.grid.weights @ np.abs(u.values) ** q) ** (1.0 / q)
    return u.norm(q)


def q_energy(u: SphereRep) -> float:
    """Q(u) = int |grad u|^2 + A u^2 for the probability measure."""
    grad = dirichlet_energy(u) if isinstance(u, SphereFunction) else u.gradient_energy()
    return grad + conformal_A(u.d) * _sphere_norm(u, 2.0) ** 2


def _check_finite(u: SphereRep):
    if not np.all(np.isfinite(u.values)):
        raise IntegrabilityError("non-finite values: f does not decay like |x|^(2-d)")
    if isinstance(u, SphereFunction):
        _check_decay(u)


def _check_decay(u: SphereFunction):
    """Both norms are finite only if f decays faster than |x|^(-(d-2)/2).

    The decay exponent is read off the two outermost radial nodes; a smooth
    lift gives exactly d - 2.
    """
    v = np.abs(u.values[-2:])
    if not v[1] > 1e-8 * float(np.max(np.abs(u.values))) or not v[0] > 0:
        return
    z = u.grid.nodes[-2:]
    log_r = 0.5 * np.log((1 + z) / (1 - z))
    k = (u.d - 2) / 2.0
    # f = psi^k u with psi ~ 2/r^2
    s = 2 * k - np.log(v[1] / v[0]) / (log_r[1] - log_r[0])
    if s <= k:
        raise IntegrabilityError(f"f decays like |x|^(-{s:.3g}); need an exponent above {k:g}")


def lebesgue_norm(f, q: float) -> float:
    """||f||_q on R^d through the transport (only q = 2* is conformally invariant)."""
    u = _as_sphere(f)
    _check_finite(u)
    d = u.d
    if isinstance(u, SphereFunction) and q != two_star(d):
        return _radial_norm(u, q)
    z = u.grid.nodes if isinstance(u, SphereFunction) else u.grid.z
    psi = 1 - z
    integrand = np.abs(u.values) ** q * psi ** (q * (d - 2) / 2.0 - d)
    val = sphere_area(d) * float(u.grid.weights @ integrand)
    if not np.isfinite(val):
        raise IntegrabilityError(f"||f||_{q} diverges")
    return val ** (1.0 / q)


def _radial_norm(u: SphereFunction, q: float) -> float:
    """||f||_q for radial f with a Gauss-Jacobi rule carrying the endpoint
    singularity (1-z)^alpha of the transported integrand; the sphere rule
    converges only algebraically there when q != 2*."""
    d = u.d
    k = (d - 2) / 2.0
    alpha = k + q * k - d
    if alpha <= -1:
        raise IntegrabilityError(f"||f||_{q} diverges for every nonzero f in d = {d}")
    x, w = roots_jacobi(2 * u.grid.n, alpha, k)
    # sigma_d = c (1-z^2)^k dz with c = 1 / (2^(2k+1) B(k+1, k+1))
    log_c = -((2 * k + 1) * math.log(2) + 2 * gammaln(k + 1) - gammaln(2 * k + 2))
    val = sphere_area(d) * math.exp(log_c) * float(w @ np.abs(u(x)) ** q)
    if not np.isfinite(val):
        raise IntegrabilityError(f"||f||_{q} diverges")
    return val ** (1.0 / q)


def gradient_norm_sq(f) -> float:
    """||grad f||_2^2 = |S^d| Q(u)."""
    u = _as_sphere(f)
    _check_finite(u)
    return sphere_area(u.d) * q_energy(u)


def sobolev_deficit(f) -> float:
    """||grad f||_2^2 - S_d ||f||_(2*)^2, evaluated on the lifted function."""
    u = _as_sphere(f)
    _check_finite(u)
    d = u.d
    return sphere_area(d) * (q_energy(u) - conformal_A(d) * _sphere_norm(u, two_star(d)) ** 2)


# --------------------------------------------------------------------------
# projection onto the manifold of bubbles

@dataclass
class ProjectionResult:
    point: ManifoldPoint
    dist2: float
    converged: bool
    iterations: int
    gradient_norm: float
    initial_objective: float
    l2star_distance: float = float("nan")


class _BubbleModel:
    """Pointwise bubble quantities and Q-inner products via the bubble equation."""

    def __init__(self, u: SphereRep):
        self.u = u
        self.d = u.d
        self.axial = isinstance(u, AxialFunction)
        if self.axial:
            self.y, self.z, self.w = u.grid.y, u.grid.z, u.grid.weights
        else:
            self.y, self.z, self.w = None, u.grid.nodes, u.grid.weights
        self.A = conformal_A(self.d)
        self.p = two_star(self.d)
        self.k = (self.d - 2) / 2.0

    def pieces(self, a: float, b: float):
        """G, tangent fields and their images under -Lap + A (unit amplitude)."""
        y, z, A, p, k = self.y, self.z, self.A, self.p, self.k
        B = _bubble_base(a, b, y, z)
        if np.min(B) <= 0:
            raise InvalidParameter("bubble parameters outside the admissible range")
        G = B ** (-k)
        Gp1 = G ** (p - 1)
        Gp2 = G ** (p - 2)
        dG_a = -k * G / B * (1 - z)
        fields = [G, a * dG_a]                           # d/dc, d/dlog a
        images = [4 * a * A * Gp1,
                  a * (4 * A * Gp1 + 4 * a * A * (p - 1) * Gp2 * dG_a)]
        if self.axial:
            dG_b = -k * G / B * (2 * b - 2 * y - 2 * b * z)
            fields.append(dG_b)
            images.append(4 * a * A * (p - 1) * Gp2 * dG_b)
        return np.array(fields), np.array(images)

    def normal_equations(self, a, b, c):
        F, LF = self.pieces(a, b)
        scale = np.ones(len(F))
        scale[1:] = c                                    # Jacobian of c G(theta)
        Jf = F * scale[:, None]
        JL = LF * scale[:, None]
        gram = (Jf * self.w) @ JL.T
        gram = 0.5 * (gram + gram.T)
        u = self.u.values
        ju = JL @ (self.w * u)                           # <J_i, u>_Q
        jg = c * (JL @ (self.w * F[0]))                  # <J_i, cG>_Q
        return gram, ju - jg, F[0], LF[0]

    def c_star(self, a, b) -> float:
        F, LF = self.pieces(a, b)
        num = float(self.w @ (self.u.values * LF[0]))
        den = float(self.w @ (F[0] * LF[0]))
        return num / den

    def objective(self, a, b, c, qu) -> float:
        F, LF = self.pieces(a, b)
        G, LG = F[0], LF[0]
        ug = float(self.w @ (self.u.values * LG))
        gg = float(self.w @ (G * LG))
        return qu - 2 * c * ug + c * c * gg

    def reduced(self, a, b, qu) -> float:
        try:
            c = self.c_star(a, b)
            return self.objective(a, b, c, qu)
        except (InvalidParameter, FloatingPointError):
            return math.inf


def _moment_init(model: _BubbleModel):
    """Center from the |f|^(2*) centroid and scale from its second moment."""
    d, z, w = model.d, model.z, model.w
    dens = np.abs(model.u.values) ** model.p
    mass = float(w @ dens)
    if not mass > 0:
        raise DegenerateInput("f vanishes identically")
    psi = 1 - z
    b = 0.0
    if model.axial:
        b = float(w @ (dens * model.y / psi)) / mass
    m2 = float(w @ (dens * (1 + z) / psi)) / mass
    a = max((d - 2) / d * (m2 - b * b), 1e-3)
    return a, b


def _admissible(a, b, model):
    return a > 0 and np.min(_bubble_base(a, b, model.y, model.z)) > 0


def project_to_manifold(f, init: ManifoldPoint | None = None, max_iter: int = 200,
                        tol: float = 1e-13, multistart: bool = True) -> ProjectionResult:
    """Minimize ||grad(f - g_{a,b,c})||_2^2 over the bubbles (b on the symmetry axis).

    Gauss-Newton in (c, log a, b) with c reset to its closed-form optimum after
    each accepted step and a backtracking line search on the objective.
    """
    u = _as_sphere(f)
    _check_finite(u)
    model = _BubbleModel(u)
    area = sphere_area(u.d)
    qu = q_energy(u)
    if not qu > 0:
        raise DegenerateInput("f has zero gradient norm")

    if init is not None:
        cands = [(init.a, init.b_axis if model.axial else 0.0)]
    else:
        cands = [_moment_init(model)]
        if multistart:
            for a0 in (0.25, 1.0, 4.0):
                cands.append((a0, cands[0][1]))
    best = None
    for a0, b0 in cands:
        if not _admissible(a0, b0, model):
            continue
        val = model.reduced(a0, b0, qu)
        if best is None or val < best[0]:
            best = (val, a0, b0)
    if best is None:
        raise InvalidParameter("no admissible initial point")
    obj, a, b = best
    c = model.c_star(a, b) if init is None else init.c
    obj = model.objective(a, b, c, qu)
    initial = area * obj

    converged = False
    gnorm = math.inf
    it = 0
    for it in range(1, max_iter + 1):
        gram, rhs, _, _ = model.normal_equations(a, b, c)
        gnorm = 2 * float(np.linalg.norm(rhs))
        if gnorm <= tol * qu:
            converged = True
            break
        try:
            step = np.linalg.solve(gram, rhs)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(gram, rhs, rcond=None)[0]
        t = 1.0
        accepted = False
        while t > 1e-10:
            c_new = c + t * step[0]
            a_new = a * math.exp(t * step[1])
            b_new = b + t * step[2] if model.axial else 0.0
            if _admissible(a_new, b_new, model):
                c_new = model.c_star(a_new, b_new)
                val = model.objective(a_new, b_new, c_new, qu)
                if val <= obj + 1e-15 * qu:
                    accepted = True
                    break
            t *= 0.5
        if not accepted:
            break
        moved = abs(a_new - a) + abs(b_new - b)
        a, b, c, obj = a_new, b_new, c_new, val
        if moved < 1e-15:
            gram, rhs, _, _ = model.normal_equations(a, b, c)
            gnorm = 2 * float(np.linalg.norm(rhs))
            converged = gnorm <= 1e3 * tol * qu
            break

    point = ManifoldPoint.on_axis(a, b, c, u.d)
    G = c * (bubble_sphere(u.d, a, b, model.y, model.z))
    r = u.with_values(u.values - G)
    dist2 = area * q_energy(r)
    l2s = sphere_area(u.d) ** (1 / model.p) * _sphere_norm(r, model.p)
    return ProjectionResult(point=point, dist2=dist2, converged=converged, iterations=it,
                            gradient_norm=area * gnorm, initial_objective=initial,
                            l2star_distance=l2s)


def projection_gradient(f, point: ManifoldPoint) -> np.ndarray:
    """Gradient of ||grad(f - g)||^2 in (a, b_d, c) (b_d omitted for radial f)."""
    u = _as_sphere(f)
    model = _BubbleModel(u)
    a, b, c = point.a, point.b_axis, point.c
    _, rhs, _, _ = model.normal_equations(a, b, c)
    g = -2 * sphere_area(u.d) * rhs
    out = [g[1] / a]
    if model.axial:
        out.append(g[2])
    out.append(g[0])
    return np.array(out)


def stability_quotient(f, projection: ProjectionResult | None = None) -> float:
    """Sobolev deficit over the squared gradient distance to the bubbles."""
    projection = projection or project_to_manifold(f)
    if not projection.dist2 > 1e-14 * gradient_norm_sq(f):
        raise UndefinedQuotient("f lies on the optimizer manifold")
    return sobolev_deficit(f) / projection.dist2


@dataclass
class IDeltaEstimate:
    value: float
    n_used: int
    n_total: int
    certified: bool = False
    label: str = "empirical upper estimate, not certified"


def estimate_I_delta(delta: float, family: Iterable) -> IDeltaEstimate:
    """Minimum quotient over members with dist2 <= delta ||grad f||^2."""
    if not 0 < delta < 0.5:
        raise InvalidParameter("delta must lie in (0, 1/2)")
    family = list(family)
    if not family:
        raise EmptySample("empty family")
    best = math.inf
    used = 0
    for f in family:
        proj = project_to_manifold(f)
        if proj.dist2 <= delta * gradient_norm_sq(f) and proj.dist2 > 0:
            best = min(best, sobolev_deficit(f) / proj.dist2)
            used += 1
    if used == 0:
        raise EmptySample("no family member satisfies the distance constraint")
    return IDeltaEstimate(value=best, n_used=used, n_total=len(family))


# --------------------------------------------------------------------------
# conformal map in Euclidean form

def conformal_U_plane(fn):
    """(Uf)(x) = (2/|x-e_d|^2)^((d-2)/2) f(2x'/|x-e_d|^2, (|x|^2-1)/|x-e_d|^2)
    for an axisymmetric callable fn(s, t, d).

    On the sphere this is precomposition with the exchange of w_d and w_{d+1}.
    """

    def Uf(s, t, d):
        s = np.asarray(s, dtype=float)
        t = np.asarray(t, dtype=float)
        q = s * s + (t - 1) ** 2
        return (2 / q) ** ((d - 2) / 2.0) * fn(2 * s / q, (s * s + t * t - 1) / q, d)

    return Uf
