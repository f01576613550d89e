"""Axisymmetric functions on S^d reduced to the axis variable z in [-1, 1].

The reference measure is the uniform probability measure written in z,
dsigma_d(z) proportional to (1 - z^2)^(d/2 - 1) dz.  Functions are stored by
their values at Gauss-Jacobi nodes; spectral coefficients refer to the
Gegenbauer polynomials of index (d - 1)/2, normalized to unit L^2(dsigma_d)
norm, which are the eigenfunctions of L f = (1 - z^2) f'' - d z f'.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Iterable

import numpy as np
from scipy.special import roots_jacobi

from .errors import InvalidParameter, ResolutionError

__all__ = [
    "UltrasphericalGrid",
    "SphereFunction",
    "build_grid",
    "gegenbauer_values",
    "integrate",
    "dirichlet_energy",
    "apply_L",
    "analyze",
    "synthesize",
    "project_degree",
    "basis_function",
    "eigenvalue",
    "norm",
    "dirichlet_energy_parseval",
    "filter_top",
]


def eigenvalue(k, d):
    """Return k(k+d-1), minus the eigenvalue of L on degree-k functions."""
    k = np.asarray(k)
    return k * (k + d - 1)


def _recurrence_coeffs(d: int, kmax: int) -> np.ndarray:
    # z p_k = b_{k+1} p_{k+1} + b_k p_{k-1} for the orthonormal family
    k = np.arange(kmax + 1, dtype=float)
    b = np.zeros(kmax + 1)
    kk = k[1:]
    b[1:] = np.sqrt(kk * (kk + d - 2) / ((2 * kk + d - 1) * (2 * kk + d - 3)))
    return b


def gegenbauer_values(d: int, z, kmax: int, derivatives: int = 0):
    """Orthonormal Gegenbauer polynomials p_0..p_kmax at points z.

    Returns an array of shape (derivatives + 1, len(z), kmax + 1) holding the
    values and the first ``derivatives`` z-derivatives.
    """
    z = np.atleast_1d(np.asarray(z, dtype=float))
    b = _recurrence_coeffs(d, max(kmax, 1))
    out = np.zeros((derivatives + 1, z.size, kmax + 1))
    p = out[0]
    p[:, 0] = 1.0
    if kmax >= 1:
        p[:, 1] = z / b[1]
    for k in range(1, kmax):
        p[:, k + 1] = (z * p[:, k] - b[k] * p[:, k - 1]) / b[k + 1]
    for order in range(1, derivatives + 1):
        q, prev = out[order], out[order - 1]
        if kmax >= 1:
            q[:, 1] = (order == 1) / b[1]
        for k in range(1, kmax):
            q[:, k + 1] = (z * q[:, k] + order * prev[:, k] - b[k] * q[:, k - 1]) / b[k + 1]
    return out


@dataclass(frozen=True, eq=False)
class UltrasphericalGrid:
    """Gauss quadrature for dsigma_d, immutable and shareable."""

    d: int
    n: int
    nodes: np.ndarray
    weights: np.ndarray
    degree_cap: int

    @cached_property
    def _tables(self):
        return gegenbauer_values(self.d, self.nodes, self.n - 1, derivatives=2)

    @property
    def vandermonde(self) -> np.ndarray:
        return self._tables[0]

    @cached_property
    def analysis_matrix(self) -> np.ndarray:
        # discrete orthonormality V^T W V = I makes V^T W the inverse of V
        return self.vandermonde.T * self.weights

    @cached_property
    def diff_matrix(self) -> np.ndarray:
        return self._tables[1] @ self.analysis_matrix

    @cached_property
    def lambdas(self) -> np.ndarray:
        return eigenvalue(np.arange(self.n), self.d).astype(float)

    @property
    def z(self) -> "SphereFunction":
        return SphereFunction(self, self.nodes.copy())

    def function(self, fn: Callable[[np.ndarray], np.ndarray]) -> "SphereFunction":
        values = np.broadcast_to(np.asarray(fn(self.nodes), dtype=float), self.nodes.shape)
        return SphereFunction(self, values.copy())

    def constant(self, c: float) -> "SphereFunction":
        return SphereFunction(self, np.full(self.n, float(c)))


def build_grid(d: int, n: int) -> UltrasphericalGrid:
    """Gauss-Jacobi grid exact to degree 2n-1 for (1 - z^2)^(d/2 - 1)."""
    if int(d) != d or d < 3:
        raise InvalidParameter(f"dimension must be an integer >= 3, got {d}")
    if int(n) != n or n < 8:
        raise InvalidParameter(f"need at least 8 nodes, got {n}")
    d, n = int(d), int(n)
    a = d / 2 - 1
    x, w = roots_jacobi(n, a, a)
    w = w / w.sum()
    return UltrasphericalGrid(d=d, n=n, nodes=x, weights=w, degree_cap=n // 2)


class SphereFunction:
    """Nodal values of f(z) on an UltrasphericalGrid."""

    __slots__ = ("grid", "values", "_coeffs")

    def __init__(self, grid: UltrasphericalGrid, values, coeffs=None):
        values = np.asarray(values, dtype=float)
        if values.shape != (grid.n,):
            raise InvalidParameter(f"expected {grid.n} nodal values, got shape {values.shape}")
        self.grid = grid
        self.values = values
        self._coeffs = coeffs

    @property
    def d(self) -> int:
        return self.grid.d

    @property
    def coeffs(self) -> np.ndarray:
        if self._coeffs is None:
            self._coeffs = self.grid.analysis_matrix @ self.values
        return self._coeffs

    def with_values(self, values) -> "SphereFunction":
        return SphereFunction(self.grid, values)

    def __call__(self, z):
        """Evaluate the polynomial interpolant at arbitrary z."""
        z = np.asarray(z, dtype=float)
        table = gegenbauer_values(self.d, z.ravel(), self.grid.n - 1)[0]
        return (table @ self.coeffs).reshape(z.shape)

    def derivative(self) -> "SphereFunction":
        return SphereFunction(self.grid, self.grid.diff_matrix @ self.values)

    def _other(self, other):
        if isinstance(other, SphereFunction):
            if other.grid is not self.grid:
                raise InvalidParameter("functions live on different grids")
            return other.values
        return other

    def __add__(self, other):
        return SphereFunction(self.grid, self.values + self._other(other))

    __radd__ = __add__

    def __sub__(self, other):
        return SphereFunction(self.grid, self.values - self._other(other))

    def __rsub__(self, other):
        return SphereFunction(self.grid, self._other(other) - self.values)

    def __mul__(self, other):
        return SphereFunction(self.grid, self.values * self._other(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return SphereFunction(self.grid, self.values / self._other(other))

    def __neg__(self):
        return SphereFunction(self.grid, -self.values)

    def __pow__(self, q):
        return SphereFunction(self.grid, self.values ** q)

    def __abs__(self):
        return SphereFunction(self.grid, np.abs(self.values))

    def __repr__(self):
        return f"SphereFunction(d={self.d}, n={self.grid.n})"


def integrate(f: SphereFunction) -> float:
    return float(f.grid.weights @ f.values)


def norm(f: SphereFunction, q: float = 2.0) -> float:
    """L^q(dsigma_d) norm of |f|."""
    return float(f.grid.weights @ np.abs(f.values) ** q) ** (1.0 / q)


def dirichlet_energy(f: SphereFunction) -> float:
    """Quadrature of (1 - z^2) f'^2, i.e. the squared gradient norm on S^d."""
    fp = f.grid.diff_matrix @ f.values
    z = f.grid.nodes
    return float(f.grid.weights @ ((1 - z * z) * fp * fp))


def dirichlet_energy_parseval(f: SphereFunction) -> float:
    """Same quantity from the spectral coefficients."""
    c = f.coeffs
    return float(np.sum(f.grid.lambdas * c * c))


def apply_L(f: SphereFunction) -> SphereFunction:
    g = f.grid
    return SphereFunction(g, g.vandermonde @ (-g.lambdas * f.coeffs))


def analyze(f: SphereFunction, strict: bool = False, tol: float = 1e-10) -> np.ndarray:
    """Gegenbauer coefficients of f.

    With ``strict`` a ResolutionError is raised if the content above
    degree_cap exceeds ``tol`` relative to the total.
    """
    c = f.coeffs.copy()
    if strict:
        tail = np.linalg.norm(c[f.grid.degree_cap + 1:])
        if tail > tol * max(np.linalg.norm(c), np.finfo(float).tiny):
            raise ResolutionError(
                f"spectral tail {tail:.3e} above degree {f.grid.degree_cap}")
    return c


def synthesize(grid: UltrasphericalGrid, coeffs) -> SphereFunction:
    coeffs = np.asarray(coeffs, dtype=float)
    if coeffs.size > grid.n:
        raise ResolutionError(f"{coeffs.size} coefficients exceed the {grid.n}-node grid")
    full = np.zeros(grid.n)
    full[: coeffs.size] = coeffs
    return SphereFunction(grid, grid.vandermonde @ full, coeffs=full)


def project_degree(f: SphereFunction, k_set: Iterable[int]) -> SphereFunction:
    """L^2(dsigma_d)-orthogonal projection onto the listed degrees."""
    keep = np.zeros(f.grid.n, dtype=bool)
    for k in k_set:
        if 0 <= k < f.grid.n:
            keep[k] = True
    return synthesize(f.grid, np.where(keep, f.coeffs, 0.0))


def basis_function(grid: UltrasphericalGrid, k: int) -> SphereFunction:
    """Unit-norm degree-k Gegenbauer function C_k."""
    c = np.zeros(grid.n)
    c[k] = 1.0
    return synthesize(grid, c)


def filter_top(f: SphereFunction, fraction: float = 1 / 3) -> SphereFunction:
    """Zero the top ``fraction`` of spectral modes (anti-aliasing)."""
    c = f.coeffs.copy()
    cut = int(np.ceil(f.grid.n * (1 - fraction)))
    c[cut:] = 0.0
    return synthesize(f.grid, c)
