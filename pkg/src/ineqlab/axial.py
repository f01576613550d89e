"""Functions on S^d that depend on the two coordinates (y, z) = (w_d, w_{d+1}).

These are the stereographic images of axially symmetric functions on R^d.
In polar form (y, z) = rho (cos t, sin t) the marginal of the uniform
probability measure is proportional to (1 - rho^2)^((d-3)/2) rho drho dt.
The grid is Gauss-Jacobi in rho^2 times a uniform angle grid whose size is a
multiple of 4, so that the quarter turn in the (y, z) plane is an exact index
shift.  The spectral basis is rho^k P_j^{((d-3)/2, k)}(2 rho^2 - 1) times
cos(k t) or sin(k t); each element is a spherical harmonic of degree k + 2j.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Callable

import numpy as np
from scipy.special import eval_jacobi, roots_jacobi

from .errors import InvalidParameter
from .spectral import SphereFunction


def _basis_index(D: int):
    """List of (k, j, kind) with kind 0 = cos, 1 = sin, ordered by degree."""
    idx = []
    for ell in range(D + 1):
        for k in range(ell % 2, ell + 1, 2):
            j = (ell - k) // 2
            idx.append((k, j, 0))
            if k > 0:
                idx.append((k, j, 1))
    return idx


def _radial(alpha: float, k: int, j: np.ndarray, rho: np.ndarray, derivative: bool = False):
    """rho^k P_j^{(alpha,k)}(2 rho^2 - 1), and optionally its rho-derivative."""
    x = 2 * rho * rho - 1
    P = eval_jacobi(j[:, None], alpha, k, x[None, :])
    val = rho[None, :] ** k * P
    if not derivative:
        return val
    jm = np.maximum(j - 1, 0)
    dP = np.where(j[:, None] > 0,
                  0.5 * (j[:, None] + alpha + k + 1)
                  * eval_jacobi(jm[:, None], alpha + 1, k + 1, x[None, :]), 0.0)
    drad = (k * rho[None, :] ** max(k - 1, 0) * P if k > 0 else 0.0) \
        + rho[None, :] ** k * 4 * rho[None, :] * dP
    # value / rho for the angular part, finite because k >= 1 there
    over = rho[None, :] ** max(k - 1, 0) * P if k > 0 else np.zeros_like(P)
    return val, drad, over


def _tables(d: int, D: int, rho: np.ndarray, theta: np.ndarray, derivatives: bool):
    """Basis values (and gradient pieces) at points given in polar form."""
    alpha = (d - 3) / 2
    index = _basis_index(D)
    nb = len(index)
    npts = rho.size
    V = np.empty((npts, nb))
    if derivatives:
        Vr = np.empty((npts, nb))
        Vt = np.empty((npts, nb))
    by_k = {}
    for col, (k, j, kind) in enumerate(index):
        by_k.setdefault(k, []).append((col, j, kind))
    for k, items in by_k.items():
        js = np.array(sorted({j for _, j, _ in items}))
        out = _radial(alpha, k, js, rho, derivative=derivatives)
        pos = {j: n for n, j in enumerate(js)}
        c, s = np.cos(k * theta), np.sin(k * theta)
        for col, j, kind in items:
            ang, dang = (c, -k * s) if kind == 0 else (s, k * c)
            if derivatives:
                val, drad, over = (o[pos[j]] for o in out)
                V[:, col] = val * ang
                Vr[:, col] = drad * ang
                Vt[:, col] = over * dang
            else:
                V[:, col] = out[pos[j]] * ang
    degrees = np.array([k + 2 * j for k, j, _ in index])
    if derivatives:
        return V, Vr, Vt, degrees
    return V, degrees


@dataclass(frozen=True, eq=False)
class AxialGrid:
    d: int
    degree: int
    n_rho: int
    n_theta: int
    t_nodes: np.ndarray      # rho^2
    t_weights: np.ndarray

    @cached_property
    def rho(self) -> np.ndarray:
        return np.repeat(np.sqrt(self.t_nodes), self.n_theta)

    @cached_property
    def theta(self) -> np.ndarray:
        th = 2 * np.pi * np.arange(self.n_theta) / self.n_theta
        return np.tile(th, self.n_rho)

    @cached_property
    def weights(self) -> np.ndarray:
        return np.repeat(self.t_weights, self.n_theta) / self.n_theta

    @property
    def y(self) -> np.ndarray:
        return self.rho * np.cos(self.theta)

    @property
    def z(self) -> np.ndarray:
        return self.rho * np.sin(self.theta)

    @property
    def size(self) -> int:
        return self.n_rho * self.n_theta

    @cached_property
    def _basis(self):
        V, Vr, Vt, deg = _tables(self.d, self.degree, self.rho, self.theta, True)
        norms = np.sqrt(self.weights @ (V * V))
        return V / norms, Vr / norms, Vt / norms, deg, norms

    @property
    def vandermonde(self) -> np.ndarray:
        return self._basis[0]

    @property
    def degrees(self) -> np.ndarray:
        return self._basis[3]

    @cached_property
    def analysis_matrix(self) -> np.ndarray:
        return self.vandermonde.T * self.weights

    @cached_property
    def lambdas(self) -> np.ndarray:
        ell = self.degrees
        return (ell * (ell + self.d - 1)).astype(float)

    def function(self, fn: Callable) -> "AxialFunction":
        """Sample fn(y, z)."""
        vals = np.broadcast_to(np.asarray(fn(self.y, self.z), dtype=float), (self.size,))
        return AxialFunction(self, vals.copy())

    def from_sphere(self, u: SphereFunction) -> "AxialFunction":
        """Embed a z-only function."""
        if u.d != self.d:
            raise InvalidParameter("dimension mismatch")
        return AxialFunction(self, u(self.z))

    def evaluate_basis(self, y, z):
        y = np.asarray(y, dtype=float).ravel()
        z = np.asarray(z, dtype=float).ravel()
        rho = np.sqrt(y * y + z * z)
        th = np.arctan2(z, y)
        V, _ = _tables(self.d, self.degree, rho, th, False)
        return V / self._basis[4]


def build_axial_grid(d: int, degree: int = 32, n_rho: int | None = None,
                     n_theta: int | None = None) -> AxialGrid:
    """Grid resolving degree-`degree` content; products up to twice that are exact."""
    if int(d) != d or d < 3:
        raise InvalidParameter("d must be an integer >= 3")
    if degree < 2:
        raise InvalidParameter("degree must be >= 2")
    n_rho = n_rho or degree + 2
    n_theta = n_theta or 4 * ((2 * degree + 4 + 3) // 4)
    if n_theta % 4:
        raise InvalidParameter("n_theta must be a multiple of 4")
    alpha = (d - 3) / 2
    x, w = roots_jacobi(n_rho, alpha, 0.0)
    t = 0.5 * (1 + x)
    return AxialGrid(d=int(d), degree=int(degree), n_rho=int(n_rho), n_theta=int(n_theta),
                     t_nodes=t, t_weights=w / w.sum())


class AxialFunction:
    """Nodal values on an AxialGrid (flattened rho-major)."""

    __slots__ = ("grid", "values", "_coeffs")

    def __init__(self, grid: AxialGrid, values, coeffs=None):
        values = np.asarray(values, dtype=float).ravel()
        if values.size != grid.size:
            raise InvalidParameter("wrong number of nodal values")
        self.grid = grid
        self.values = values
        self._coeffs = coeffs

    @property
    def d(self):
        return self.grid.d

    @property
    def coeffs(self) -> np.ndarray:
        if self._coeffs is None:
            self._coeffs = self.grid.analysis_matrix @ self.values
        return self._coeffs

    def with_values(self, values) -> "AxialFunction":
        return AxialFunction(self.grid, values)

    def __call__(self, y, z):
        shape = np.shape(np.broadcast_arrays(np.asarray(y), np.asarray(z))[0])
        yy, zz = np.broadcast_arrays(np.asarray(y, float), np.asarray(z, float))
        return (self.grid.evaluate_basis(yy, zz) @ self.coeffs).reshape(shape)

    def integral(self) -> float:
        return float(self.grid.weights @ self.values)

    def norm(self, q: float = 2.0) -> float:
        return float(self.grid.weights @ np.abs(self.values) ** q) ** (1.0 / q)

    def gradient_energy(self) -> float:
        """int |grad u|^2 on S^d = int (1-rho^2) u_rho^2 + (u_t/rho)^2."""
        _, Vr, Vt, _, _ = self.grid._basis
        c = self.coeffs
        ur = Vr @ c
        ut = Vt @ c
        rho = self.grid.rho
        return float(self.grid.weights @ ((1 - rho * rho) * ur * ur + ut * ut))

    def gradient_energy_parseval(self) -> float:
        c = self.coeffs
        return float(np.sum(self.grid.lambdas * c * c))

    def resolved_fraction(self) -> float:
        """Share of the L^2 norm captured by the spectral expansion."""
        n2 = self.norm(2) ** 2
        return float(np.sum(self.coeffs ** 2) / n2) if n2 > 0 else 1.0

    def quarter_turn(self, turns: int = 1) -> "AxialFunction":
        """Precompose with the rotation (y, z) -> (z, -y), i.e. t -> t - pi/2."""
        g = self.grid
        shift = (g.n_theta // 4) * (turns % 4)
        vals = self.values.reshape(g.n_rho, g.n_theta)
        return AxialFunction(g, np.roll(vals, shift, axis=1).ravel())

    def swap_axes(self) -> "AxialFunction":
        """Precompose with (y, z) -> (z, y), i.e. t -> pi/2 - t."""
        g = self.grid
        j = (g.n_theta // 4 - np.arange(g.n_theta)) % g.n_theta
        vals = self.values.reshape(g.n_rho, g.n_theta)
        return AxialFunction(g, vals[:, j].ravel())

    def __add__(self, other):
        o = other.values if isinstance(other, AxialFunction) else other
        return AxialFunction(self.grid, self.values + o)

    __radd__ = __add__

    def __sub__(self, other):
        o = other.values if isinstance(other, AxialFunction) else other
        return AxialFunction(self.grid, self.values - o)

    def __mul__(self, other):
        o = other.values if isinstance(other, AxialFunction) else other
        return AxialFunction(self.grid, self.values * o)

    __rmul__ = __mul__

    def __neg__(self):
        return AxialFunction(self.grid, -self.values)

    def __repr__(self):
        return f"AxialFunction(d={self.d}, degree={self.grid.degree})"
