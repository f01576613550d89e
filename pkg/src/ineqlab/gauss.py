"""Logarithmic Sobolev inequality for the Gaussian measure dgamma = e^(-pi|x|^2) dx.

Functions on R^N (N <= 3) are stored by their values on a tensor
Gauss-Hermite grid rescaled to variance 1/(2 pi).  Integrals use the
global nodal interpolant; point evaluation uses local barycentric windows,
since the global interpolant is ill-conditioned near the extreme nodes.
Spectral coefficients
refer to the orthonormal Hermite functions h_k(x) = He_k(sqrt(2 pi) x)/sqrt(k!),
for which h_k' = sqrt(2 pi k) h_(k-1) and int |h_k'|^2 dgamma = 2 pi k.

Also collects the sphere-to-Gauss lift: moments on the sphere Sigma_d of
radius rho_d = sqrt(d/(2 pi)) in R^(d+1), the measure mu_d of the rescaled
stereographic picture, the orthogonalized functions R_d and the p -> 1 limit.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import cached_property
from itertools import product
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import quad
from scipy.special import erfc, gammaln, roots_hermitenorm, roots_jacobi

from .errors import DegenerateInput, InvalidParameter, UndefinedQuotient
from .sphere import sphere_area

SQ2PI = math.sqrt(2 * math.pi)
LOCAL_WINDOW = 20


def hermite_values(x, kmax: int, derivative: bool = False):
    """Orthonormal h_0..h_kmax at points x; shape (len(x), kmax+1)."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    t = SQ2PI * x
    H = np.zeros((x.size, kmax + 1))
    H[:, 0] = 1.0
    if kmax >= 1:
        H[:, 1] = t
    for k in range(1, kmax):
        H[:, k + 1] = (t * H[:, k] - math.sqrt(k) * H[:, k - 1]) / math.sqrt(k + 1)
    if not derivative:
        return H
    dH = np.zeros_like(H)
    k = np.arange(1, kmax + 1)
    dH[:, 1:] = SQ2PI * np.sqrt(k) * H[:, :-1]
    return H, dH


def gaussian_cdf(x):
    """gamma((-inf, x)) in one dimension."""
    return 0.5 * erfc(-math.sqrt(math.pi) * np.asarray(x, dtype=float))


def gaussian_density(x):
    return np.exp(-math.pi * np.asarray(x, dtype=float) ** 2)


@dataclass(frozen=True, eq=False)
class GaussianGrid:
    N: int
    n: int
    nodes1d: np.ndarray
    weights1d: np.ndarray
    degree_cap: int

    @cached_property
    def points(self) -> np.ndarray:
        """Tensor nodes, shape (n^N, N), last coordinate fastest."""
        mesh = np.meshgrid(*([self.nodes1d] * self.N), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    @cached_property
    def weights(self) -> np.ndarray:
        w = self.weights1d
        out = w
        for _ in range(self.N - 1):
            out = np.multiply.outer(out, w)
        return np.asarray(out).ravel()

    @cached_property
    def analysis1d(self) -> np.ndarray:
        """Nodal values to orthonormal Hermite coefficients."""
        return hermite_values(self.nodes1d, self.n - 1).T * self.weights1d

    @cached_property
    def diff1d(self) -> np.ndarray:
        """Differentiation matrix of the global nodal interpolant.

        Rows at the extreme nodes carry large roundoff, which the Gaussian
        weights suppress in every integral.
        """
        x = self.nodes1d
        diff = x[:, None] - x[None, :]
        np.fill_diagonal(diff, 1.0)
        logw = -np.sum(np.log(np.abs(diff)), axis=1)
        lam = np.prod(np.sign(diff), axis=1) * np.exp(logw - logw.max())
        D = (lam[None, :] / lam[:, None]) / diff
        np.fill_diagonal(D, 0.0)
        np.fill_diagonal(D, -D.sum(axis=1))
        return D

    @cached_property
    def _windows(self):
        """Barycentric weights of every window of `window` consecutive nodes."""
        m = min(self.n, LOCAL_WINDOW)
        starts = np.arange(self.n - m + 1)
        X = self.nodes1d[starts[:, None] + np.arange(m)]
        diff = X[:, :, None] - X[:, None, :]
        idx = np.arange(m)
        diff[:, idx, idx] = 1.0
        logw = -np.sum(np.log(np.abs(diff)), axis=2)
        lam = np.prod(np.sign(diff), axis=2) * np.exp(logw - logw.max(axis=1, keepdims=True))
        return m, X, lam

    def lagrange(self, x, derivative: bool = False):
        """Local interpolation through the `window` nodes nearest to each x.

        Returns (start indices, basis values) and optionally derivatives, each
        basis array of shape (len(x), window).  Polynomial interpolation on the
        full Hermite grid is too ill-conditioned near the extreme nodes for
        pointwise use; windows keep the Lebesgue constant small.
        """
        x = np.atleast_1d(np.asarray(x, dtype=float)).ravel()
        m, Xw, Lw = self._windows
        start = np.clip(np.searchsorted(self.nodes1d, x) - m // 2, 0, self.n - m)
        nodes, lam = Xw[start], Lw[start]
        diff = x[:, None] - nodes
        hit = diff == 0
        rows = hit.any(axis=1)
        diff[hit] = 1.0
        q = lam / diff
        s = q.sum(axis=1, keepdims=True)
        L = q / s
        if derivative:
            dL = L * ((q / diff).sum(axis=1, keepdims=True) / s - 1.0 / diff)
        if rows.any():
            L[rows] = hit[rows].astype(float)
            if derivative:
                i = np.argmax(hit[rows], axis=1)
                nr, lr = nodes[rows], lam[rows]
                r = np.arange(i.size)
                dd = nr[r, i][:, None] - nr
                dd[r, i] = 1.0
                D = (lr / lr[r, i][:, None]) / dd
                D[r, i] = 0.0
                D[r, i] = -D.sum(axis=1)
                dL[rows] = D
        return (start, L, dL) if derivative else (start, L)

    @property
    def size(self) -> int:
        return self.n ** self.N

    def coordinate(self, j: int) -> "GaussianFunction":
        return GaussianFunction(self, self.points[:, j].copy())

    def function(self, fn: Callable) -> "GaussianFunction":
        """Sample fn(x) with x of shape (m, N) (or (m,) when N = 1)."""
        x = self.points[:, 0] if self.N == 1 else self.points
        vals = np.broadcast_to(np.asarray(fn(x), dtype=float), (self.size,))
        return GaussianFunction(self, vals.copy())

    def hermite(self, k: Sequence[int] | int) -> "GaussianFunction":
        """Tensor Hermite function of multi-degree k."""
        k = (k,) if np.isscalar(k) else tuple(k)
        if len(k) != self.N:
            raise InvalidParameter("multi-degree length must equal N")
        vals = np.ones(self.size)
        for j, kj in enumerate(k):
            vals = vals * hermite_values(self.points[:, j], kj)[:, kj]
        return GaussianFunction(self, vals)


def build_gaussian_grid(N: int = 1, n: int = 64) -> GaussianGrid:
    if N not in (1, 2, 3):
        raise InvalidParameter("N must be 1, 2 or 3")
    if n < 8:
        raise InvalidParameter("need at least 8 nodes per axis")
    t, w = roots_hermitenorm(n)
    return GaussianGrid(N=N, n=n, nodes1d=t / SQ2PI, weights1d=w / w.sum(), degree_cap=n // 2)


def _apply_axis(mat: np.ndarray, vals: np.ndarray, axis: int, N: int, n: int) -> np.ndarray:
    arr = vals.reshape((n,) * N)
    out = np.moveaxis(np.tensordot(mat, arr, axes=([1], [axis])), 0, axis)
    return out.ravel()


class GaussianFunction:
    __slots__ = ("grid", "values", "_coeffs")

    def __init__(self, grid: GaussianGrid, values, coeffs=None):
        values = np.asarray(values, dtype=float).ravel()
        if values.size != grid.size:
            raise InvalidParameter("wrong number of nodal values")
        self.grid = grid
        self.values = values
        self._coeffs = coeffs

    @property
    def N(self) -> int:
        return self.grid.N

    def with_values(self, values) -> "GaussianFunction":
        return GaussianFunction(self.grid, values)

    @property
    def coeffs(self) -> np.ndarray:
        if self._coeffs is None:
            c = self.values
            for j in range(self.N):
                c = _apply_axis(self.grid.analysis1d, c, j, self.N, self.grid.n)
            self._coeffs = c.reshape((self.grid.n,) * self.N)
        return self._coeffs

    def gradient(self) -> np.ndarray:
        """Nodal gradient, shape (N, n^N)."""
        g = self.grid
        return np.array([_apply_axis(g.diff1d, self.values, j, self.N, g.n) for j in range(self.N)])

    def _gather(self, start, axis_vals):
        m = self.grid._windows[0]
        return axis_vals[start[:, None] + np.arange(m)]

    def __call__(self, x):
        """Evaluate the (locally interpolated) function at points x of shape (m, N) or (m,)."""
        x = np.asarray(x, dtype=float)
        g = self.grid
        if self.N == 1:
            start, L = g.lagrange(x.ravel())
            return np.sum(L * self._gather(start, self.values), axis=1).reshape(x.shape)
        x = x.reshape(-1, self.N)
        arr = self.values.reshape((g.n,) * self.N)
        w = g._windows[0]
        out = np.empty(x.shape[0])
        chunk = max(1, 2 ** 18 // w ** self.N)
        for lo in range(0, x.shape[0], chunk):
            xs = x[lo:lo + chunk]
            tabs = [g.lagrange(xs[:, j]) for j in range(self.N)]
            idx = [s[:, None] + np.arange(w) for s, _ in tabs]
            if self.N == 2:
                sub = arr[idx[0][:, :, None], idx[1][:, None, :]]
                out[lo:lo + chunk] = np.einsum("mi,mij,mj->m", tabs[0][1], sub, tabs[1][1])
            else:
                sub = arr[idx[0][:, :, None, None], idx[1][:, None, :, None],
                          idx[2][:, None, None, :]]
                out[lo:lo + chunk] = np.einsum("mi,mj,mk,mijk->m", tabs[0][1], tabs[1][1],
                                               tabs[2][1], sub)
        return out

    def derivative_at(self, x) -> np.ndarray:
        """d/dx of the local interpolant (N = 1)."""
        if self.N != 1:
            raise InvalidParameter("derivative_at is one-dimensional")
        x = np.asarray(x, dtype=float)
        start, _, dL = self.grid.lagrange(x.ravel(), derivative=True)
        return np.sum(dL * self._gather(start, self.values), axis=1).reshape(x.shape)

    def integral(self) -> float:
        return float(self.grid.weights @ self.values)

    def norm(self, q: float = 2.0) -> float:
        return float(self.grid.weights @ np.abs(self.values) ** q) ** (1.0 / q)

    def __add__(self, other):
        o = other.values if isinstance(other, GaussianFunction) else other
        return GaussianFunction(self.grid, self.values + o)

    __radd__ = __add__

    def __sub__(self, other):
        o = other.values if isinstance(other, GaussianFunction) else other
        return GaussianFunction(self.grid, self.values - o)

    def __mul__(self, other):
        o = other.values if isinstance(other, GaussianFunction) else other
        return GaussianFunction(self.grid, self.values * o)

    __rmul__ = __mul__

    def __neg__(self):
        return GaussianFunction(self.grid, -self.values)

    def __repr__(self):
        return f"GaussianFunction(N={self.N}, n={self.grid.n})"


# --------------------------------------------------------------------------
# deficit

def _xlogx_sq(v2: np.ndarray, n2: float) -> np.ndarray:
    """v^2 ln(v^2/n2), with the limit value 0 where v = 0."""
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(v2 > 0, v2 * np.log(v2 / n2), 0.0)


def _deficit_parts(values, grad_sq, weights):
    n2 = float(weights @ (values * values))
    grad = float(weights @ grad_sq)
    if not n2 > 0:
        return grad, 0.0, 0.0
    ent = float(weights @ _xlogx_sq(values * values, n2))
    return grad, ent, n2


def lsi_deficit(u: GaussianFunction) -> float:
    """int |grad u|^2 dgamma - pi int u^2 ln(u^2/||u||^2) dgamma."""
    grad, ent, n2 = _deficit_parts(u.values, np.sum(u.gradient() ** 2, axis=0), u.grid.weights)
    if not n2 > 0:
        raise DegenerateInput("u vanishes identically")
    return grad - math.pi * ent


def lsi_parts(u: GaussianFunction) -> tuple[float, float, float]:
    """(Dirichlet energy, entropy int u^2 ln(u^2/||u||^2), ||u||^2)."""
    return _deficit_parts(u.values, np.sum(u.gradient() ** 2, axis=0), u.grid.weights)


# --------------------------------------------------------------------------
# distance to c e^(a.x)

@dataclass(frozen=True)
class ExpPoint:
    a: np.ndarray
    c: float

    def __post_init__(self):
        object.__setattr__(self, "a", np.atleast_1d(np.asarray(self.a, dtype=float)).copy())


def exp_moment(a) -> float:
    """int e^(2 a.x) dgamma = e^(|a|^2/pi)."""
    a = np.atleast_1d(np.asarray(a, dtype=float))
    return math.exp(float(a @ a) / math.pi)


@dataclass
class ExpProjection:
    point: ExpPoint
    dist2: float
    converged: bool
    gradient_norm: float
    iterations: int


def _exp_terms(u: GaussianFunction, a: np.ndarray):
    X = u.grid.points
    e = np.exp(X @ a)
    wu = u.grid.weights * u.values * e
    M = float(wu.sum())
    dM = X.T @ wu
    d2M = (X * wu[:, None]).T @ X
    return M, dM, d2M


def dist_to_exponentials(u: GaussianFunction, a0=None, max_iter: int = 100,
                         tol: float = 1e-12) -> ExpProjection:
    """min over (a, c) of int (u - c e^(a.x))^2 dgamma, with c eliminated.

    Newton on h(a) = 2 ln|M(a)| - |a|^2/pi, M(a) = int u e^(a.x) dgamma, from
    a = 0 and from a = pi int x u^2 / int u^2.
    """
    N = u.N
    n2 = u.norm(2) ** 2
    if not n2 > 0:
        raise DegenerateInput("u vanishes identically")
    starts = [np.zeros(N)]
    X = u.grid.points
    starts.append(math.pi * (X.T @ (u.grid.weights * u.values ** 2)) / n2)
    if a0 is not None:
        starts.insert(0, np.atleast_1d(np.asarray(a0, dtype=float)))

    def F(a):
        M = _exp_terms(u, a)[0]
        return M * M * math.exp(-float(a @ a) / math.pi)

    best = None
    for a in starts:
        a = a.astype(float)
        converged = False
        it = 0
        gnorm = math.inf
        for it in range(1, max_iter + 1):
            M, dM, d2M = _exp_terms(u, a)
            if M == 0:
                break
            g = 2 * dM / M - 2 * a / math.pi
            H = 2 * (d2M / M - np.outer(dM, dM) / M ** 2) - 2 * np.eye(N) / math.pi
            Fa = M * M * math.exp(-float(a @ a) / math.pi)
            gnorm = Fa * float(np.linalg.norm(g))          # gradient of the distance
            if gnorm <= tol * n2:
                converged = True
                break
            try:
                step = -np.linalg.solve(H, g)
            except np.linalg.LinAlgError:
                step = g
            if float(step @ g) <= 0:                      # not an ascent direction
                step = g * (math.pi / 2)
            t = 1.0
            while t > 1e-12 and not F(a + t * step) >= Fa:
                t *= 0.5
            if t <= 1e-12:
                break
            a = a + t * step
        val = n2 - F(a)
        if best is None or val < best[0]:
            best = (val, a, converged, gnorm, it)
    val, a, converged, gnorm, it = best
    M = _exp_terms(u, a)[0]
    c = M * math.exp(-float(a @ a) / math.pi)
    r = u.values - c * np.exp(X @ a)
    dist2 = float(u.grid.weights @ (r * r))
    return ExpProjection(ExpPoint(a, c), dist2, converged, gnorm, it)


def stability_ratio(u: GaussianFunction, projection: ExpProjection | None = None) -> float:
    projection = projection or dist_to_exponentials(u)
    if not projection.dist2 > 1e-15 * u.norm(2) ** 2:
        raise UndefinedQuotient("u is an optimizer")
    return lsi_deficit(u) / projection.dist2


def translate_normalize(u: GaussianFunction, a, c: float | None = None) -> GaussianFunction:
    """u~(y) = e^(-y.a - |a|^2/(2 pi)) u(y + a/pi), divided by c e^(|a|^2/(2 pi)) if c is given."""
    a = np.atleast_1d(np.asarray(a, dtype=float))
    if a.size != u.N:
        raise InvalidParameter("a must have N components")
    if not np.any(a):
        return u if c is None else u.with_values(u.values / c)
    X = u.grid.points
    shift = a / math.pi
    xmax = float(np.max(np.abs(u.grid.nodes1d)))
    if np.max(np.abs(shift)) > 0.25 * xmax:
        warnings.warn("shift moves nodes far outside the grid; resampling is inaccurate",
                      RuntimeWarning, stacklevel=2)
    Y = X + shift
    vals = u(Y[:, 0] if u.N == 1 else Y)
    aa = float(a @ a)
    out = np.exp(-X @ a - aa / (2 * math.pi)) * vals
    if c is not None:
        out = out / (c * math.exp(aa / (2 * math.pi)))
    return u.with_values(out)


# --------------------------------------------------------------------------
# sign changes

def binary_entropy(m) -> np.ndarray:
    """h(m) = -(m ln m + (1-m) ln(1-m)), h(0) = h(1) = 0."""
    m = np.asarray(m, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        a = np.where(m > 0, m * np.log(m), 0.0)
        b = np.where(m < 1, (1 - m) * np.log1p(-m), 0.0)
    return -(a + b)


@dataclass
class EntropySplit:
    D_u: float
    D_plus: float
    D_minus: float
    m: float
    identity_residual: float
    h_m: float
    h_bound_ok: bool


def entropy_split(u: GaussianFunction) -> EntropySplit:
    """D(u) = D(u+) + D(u-) + pi h(m) with m = ||u-||^2 <= 1/2 after normalization.

    The parts use masked gradients of u so the identity holds at quadrature level.
    """
    nrm = u.norm(2)
    if not nrm > 0:
        raise DegenerateInput("u vanishes identically")
    v = u.values / nrm
    w = u.grid.weights
    grad = u.gradient() / nrm
    if float(w @ np.where(v < 0, v * v, 0.0)) > 0.5:
        v, grad = -v, -grad
    pos, neg = v > 0, v < 0
    gsq = np.sum(grad ** 2, axis=0)
    D_u = _deficit(v, gsq, w)
    D_plus = _deficit(np.where(pos, v, 0.0), np.where(pos, gsq, 0.0), w)
    m = float(w @ np.where(neg, v * v, 0.0))
    D_minus = _deficit(np.where(neg, -v, 0.0), np.where(neg, gsq, 0.0), w) if m > 0 else 0.0
    if not pos.any():
        D_plus = 0.0
    # v = 0 nodes contribute to neither part; their gradient belongs to D(u) only
    zero = ~(pos | neg)
    D_u_masked = D_u - float(w @ np.where(zero, gsq, 0.0))
    hm = float(binary_entropy(m))
    resid = abs(D_u_masked - D_plus - D_minus - math.pi * hm)
    return EntropySplit(D_u=D_u, D_plus=D_plus, D_minus=D_minus, m=m, identity_residual=resid,
                        h_m=hm, h_bound_ok=hm >= 2 * math.log(2) * m - 1e-15)


def _deficit(values, grad_sq, w) -> float:
    grad, ent, n2 = _deficit_parts(values, grad_sq, w)
    return grad - math.pi * ent


def combine_constant(kappa_pos: float) -> float:
    """kappa = min(kappa_pos, 2 pi ln 2) / 2."""
    if not kappa_pos > 0:
        raise InvalidParameter("kappa_pos must be positive")
    return 0.5 * min(kappa_pos, 2 * math.pi * math.log(2))


def h_d(d: int, m) -> np.ndarray:
    """m^((d-2)/d) + (1-m)^((d-2)/d) - 1."""
    q = (d - 2) / d
    m = np.asarray(m, dtype=float)
    return m ** q + (1 - m) ** q - 1


def h_d_bound(d: int, m: float):
    """(h_d(m), 2 h_d(1/2) m, 2 h_d(1/2)/(h_d(1/2)+1))."""
    if d < 3:
        raise InvalidParameter("d >= 3")
    if not 0 <= m <= 0.5:
        raise InvalidParameter("m must lie in [0, 1/2]")
    half = float(h_d(d, 0.5))
    val = float(h_d(d, m))
    lower = 2 * half * m
    if lower > val + 1e-12:
        raise AssertionError(f"concavity bound violated at m={m}")
    return val, lower, 2 * half / (half + 1)


# --------------------------------------------------------------------------
# dimensional lift

@dataclass(frozen=True)
class SphereLiftSpec:
    d: int
    N: int = 1

    def __post_init__(self):
        if self.d <= self.N:
            raise InvalidParameter("need d > N")

    @property
    def rho_d(self) -> float:
        return math.sqrt(self.d / (2 * math.pi))

    @property
    def rho_d_sq(self) -> float:
        return self.d / (2 * math.pi)

    @property
    def Z_d(self) -> float:
        return Z_d(self.d)


def Z_d(d: int) -> float:
    """2^(1-d) sqrt(pi)/Gamma((d+1)/2) (d/2)^(d/2)."""
    return math.exp((1 - d) * math.log(2) + 0.5 * math.log(math.pi) - gammaln(0.5 * (d + 1))
                    + 0.5 * d * math.log(0.5 * d))


def mu_d_mass(d: int) -> float:
    """int (1 + |x|^2/r_d^2)^(-d) dx / Z_d on R^d by radial quadrature."""
    r2 = d / (2 * math.pi)
    area = sphere_area(d - 1)

    def integrand(t):
        # r = r_d tan t maps [0, pi/2) onto [0, inf)
        r = math.sqrt(r2) * math.tan(t)
        jac = math.sqrt(r2) / math.cos(t) ** 2
        return area * r ** (d - 1) * (1 + r * r / r2) ** (-d) * jac

    val, _ = quad(integrand, 0, 0.5 * math.pi, epsabs=0, epsrel=1e-13, limit=400)
    return val / Z_d(d)


def _double_factorial_odd(k: int) -> float:
    return float(np.prod(np.arange(k - 1, 0, -2))) if k > 1 else 1.0


def gaussian_moment(alpha: Sequence[int]) -> float:
    """E_gamma[prod x_i^alpha_i] with variance 1/(2 pi) per coordinate."""
    out = 1.0
    for k in alpha:
        if k % 2:
            return 0.0
        out *= _double_factorial_odd(k) * (2 * math.pi) ** (-k / 2)
    return out


def sphere_moment(d: int, alpha: Sequence[int]) -> float:
    """E[prod x_i^alpha_i] for the uniform measure on Sigma_d (radius rho_d in R^(d+1))."""
    if any(k % 2 for k in alpha):
        return 0.0
    n = d + 1
    s = sum(alpha)
    logv = gammaln(n / 2) - gammaln(n / 2 + s / 2)
    for k in alpha:
        logv += gammaln((k + 1) / 2) - gammaln(0.5)
    return math.exp(logv) * (d / (2 * math.pi)) ** (s / 2)


class SigmaQuadrature:
    """Quadrature for the marginal of the first N coordinates of Sigma_d.

    The marginal density is proportional to (1 - |y|^2/rho^2)^((d-N-1)/2).
    """

    def __init__(self, d: int, N: int = 1, n: int = 48, n_angle: int = 64):
        if N not in (1, 2):
            raise InvalidParameter("N must be 1 or 2")
        if d <= N + 1:
            raise InvalidParameter("need d > N + 1")
        self.d, self.N = d, N
        rho = math.sqrt(d / (2 * math.pi))
        if N == 1:
            a = (d - 2) / 2.0
            t, w = roots_jacobi(n, a, a)
            self.points = (rho * t)[:, None]
            self.weights = w / w.sum()
        else:
            a = (d - 3) / 2.0
            x, w = roots_jacobi(n, a, 0.0)
            s = np.sqrt(0.5 * (1 + x))
            th = 2 * np.pi * np.arange(n_angle) / n_angle
            S, TH = np.meshgrid(s, th, indexing="ij")
            W = np.repeat(w / w.sum(), n_angle) / n_angle
            self.points = rho * np.stack([(S * np.cos(TH)).ravel(), (S * np.sin(TH)).ravel()], -1)
            self.weights = W

    def integrate(self, values) -> float:
        return float(self.weights @ np.asarray(values, dtype=float))


def lift_moments(d: int, alpha: Sequence[int], method: str = "closed") -> tuple[float, float]:
    """(E_Sigma_d[x^alpha], E_gamma[x^alpha]) for a monomial of degree <= 4."""
    alpha = tuple(int(k) for k in alpha)
    if sum(alpha) > 4:
        raise InvalidParameter("monomial degree must be <= 4")
    if d <= len(alpha):
        raise InvalidParameter("need d > N")
    gauss = gaussian_moment(alpha)
    if method == "closed":
        return sphere_moment(d, alpha), gauss
    q = SigmaQuadrature(d, len(alpha))
    vals = np.prod(q.points ** np.array(alpha), axis=1)
    return q.integrate(vals), gauss


@dataclass
class RdFunction:
    """R_d on Sigma_d, stored on the marginal quadrature of the first N coordinates."""

    quadrature: SigmaQuadrature
    values: np.ndarray
    mean_removed: float
    first_moments: np.ndarray

    def orthogonality_residuals(self) -> np.ndarray:
        q = self.quadrature
        res = [q.integrate(self.values)]
        for j in range(q.N):
            res.append(q.integrate(q.points[:, j] * self.values))
        return np.array(res)


def build_R_d(r: Callable, d: int, N: int = 1, n: int = 48) -> RdFunction:
    """R_d = r - int r dmu_d - 2 pi (d+1)/d sum_n x_n int y_n r dmu_d."""
    q = SigmaQuadrature(d, N, n=n)
    y = q.points
    rv = np.asarray(r(y[:, 0] if N == 1 else y), dtype=float)
    mean = q.integrate(rv)
    mom = np.array([q.integrate(y[:, j] * rv) for j in range(N)])
    vals = rv - mean - 2 * math.pi * (d + 1) / d * (y @ mom)
    return RdFunction(quadrature=q, values=vals, mean_removed=mean, first_moments=mom)


# --------------------------------------------------------------------------
# p -> 1

@dataclass
class POneLimit:
    quotient: float
    entropy: float
    gap: float


def p_to_one_limit(h: GaussianFunction, p: float) -> POneLimit:
    """((int h^p)^(1/p) - int h)/(p-1) against int h ln(h / int h)."""
    if not 1 < p <= 1.5:
        raise InvalidParameter("p must lie in (1, 1.5]")
    if np.min(h.values) < 0:
        raise InvalidParameter("h must be nonnegative")
    w = h.grid.weights
    m1 = float(w @ h.values)
    if not m1 > 0:
        raise DegenerateInput("h has zero integral")
    mp = float(w @ h.values ** p)
    quotient = (mp ** (1 / p) - m1) / (p - 1)
    with np.errstate(divide="ignore", invalid="ignore"):
        ent = float(w @ np.where(h.values > 0, h.values * np.log(h.values / m1), 0.0))
    return POneLimit(quotient, ent, abs(quotient - ent))
