"""Interpolation inequalities on S^d for axisymmetric functions.

Covers the Gagliardo-Nirenberg-Sobolev family i >= d e (with the
logarithmic case p = 2), the exponents of the nonlinear diffusion flow, the
improvement function phi and its companion Psi, the theta-improved form, the
Brigati remainder functional and the cut functionals used near the constants.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicHermiteSpline
from scipy.optimize import brentq
from scipy.special import gammaln

from .errors import (DegenerateInput, DomainError, IntegrationError,
                     InvalidParameter, PreconditionError)
from .spectral import (SphereFunction, dirichlet_energy, integrate, norm,
                       project_degree)

LOG_CASE = "log"


def sphere_area(d: int) -> float:
    """|S^d| = 2 pi^((d+1)/2) / Gamma((d+1)/2)."""
    return float(2.0 * math.exp(0.5 * (d + 1) * math.log(math.pi) - gammaln(0.5 * (d + 1))))


@dataclass(frozen=True)
class InterpolationParams:
    d: int
    p: float
    log_case: bool
    two_star: float
    two_sharp: float
    A: float
    area: float
    S_d: float


def make_params(d: int, p) -> InterpolationParams:
    """Exponent p in (1, 2*]; p = 2 or the string "log" selects the log-Sobolev case."""
    if int(d) != d or d < 3:
        raise InvalidParameter(f"dimension must be an integer >= 3, got {d}")
    d = int(d)
    two_star = 2.0 * d / (d - 2)
    if isinstance(p, str):
        if p.strip().lower() not in (LOG_CASE, "2"):
            raise InvalidParameter(f"unknown exponent {p!r}")
        p = 2.0
    p = float(p)
    if not (1.0 < p <= two_star * (1 + 1e-15)):
        raise InvalidParameter(f"p={p} outside (1, {two_star}]")
    p = min(p, two_star)
    A = d * (d - 2) / 4.0
    area = sphere_area(d)
    return InterpolationParams(
        d=d, p=p, log_case=(p == 2.0), two_star=two_star,
        two_sharp=(2.0 * d * d + 1) / (d - 1) ** 2, A=A, area=area,
        S_d=A * area ** (2.0 / d))


# --------------------------------------------------------------------------
# functionals

def entropy_e(u: SphereFunction, params: InterpolationParams) -> float:
    """e = (|u|_p^2 - |u|_2^2)/(p-2), or (1/2) int u^2 ln(u^2/|u|_2^2) if p = 2."""
    n2sq = norm(u, 2) ** 2
    if not n2sq > 0:
        raise DegenerateInput("u vanishes identically")
    if params.log_case:
        a2 = u.values ** 2
        with np.errstate(divide="ignore", invalid="ignore"):
            ent = np.where(a2 > 0, a2 * np.log(a2 / n2sq), 0.0)
        return 0.5 * float(u.grid.weights @ ent)
    p = params.p
    return (norm(u, p) ** 2 - n2sq) / (p - 2)


@dataclass(frozen=True)
class DeficitReport:
    i: float
    e: float
    deficit: float
    norm2: float
    normp: float
    improved_deficit: Optional[float] = None


def gns_deficit(u: SphereFunction, params: InterpolationParams,
                curve: "ImprovedCurve | None" = None) -> DeficitReport:
    """i - d e, and i - d phi(e) when an improvement curve is supplied.

    phi is not homogeneous; it is applied to u/|u|_p (the normalization
    conserved by the flow) and the result is rescaled by |u|_p^2.
    """
    i = dirichlet_energy(u)
    e = entropy_e(u, params)
    n2 = norm(u, 2)
    np_ = n2 if params.log_case else norm(u, params.p)
    improved = None
    if curve is not None:
        scale = np_ ** 2
        improved = i - params.d * scale * float(curve(e / scale))
    return DeficitReport(i=i, e=e, deficit=i - params.d * e, norm2=n2,
                         normp=np_, improved_deficit=improved)


# --------------------------------------------------------------------------
# flow exponents

@dataclass(frozen=True)
class FlowExponents:
    m_minus: float
    m_plus: float
    beta: float
    m: float
    kappa: float
    gamma: float
    delta: float
    beta_star: Optional[float]
    phi_rate: float  # gamma / beta^2, the coefficient in the phi-ODE


def _quadratic_in_inverse_beta(params: InterpolationParams):
    """gamma(beta)/beta^2 = -x^2 + B x + C with x = 1/beta."""
    d, p = params.d, params.p
    B = 2.0 * (d + 3 - p) / (d + 2)
    C = (p - 2) - ((d - 1) / (d + 2)) ** 2 * (p - 1) ** 2
    return B, C


def gamma_of_beta(params: InterpolationParams, beta: float) -> float:
    d, p = params.d, params.p
    kappa = beta * (p - 2) + 1
    s = kappa + beta - 1
    return -((d - 1) / (d + 2) * s) ** 2 + kappa * (beta - 1) + d / (d + 2) * s


def m_bounds(params: InterpolationParams) -> tuple[float, float]:
    """Range of m on which gamma >= 0, from the roots of gamma."""
    d, p = params.d, params.p
    disc = d * (d - 2) * (p - 1) * max(params.two_star - p, 0.0)
    root = 2.0 * math.sqrt(disc)
    return ((d * p + 2 - root) / ((d + 2) * p), (d * p + 2 + root) / ((d + 2) * p))


def m_bounds_as_printed(params: InterpolationParams) -> tuple[float, float]:
    """The boundary formula without the factor 2 on the square root (comparison only)."""
    d, p = params.d, params.p
    root = math.sqrt(d * (d - 2) * (p - 1) * max(params.two_star - p, 0.0))
    return ((d * p + 2 - root) / ((d + 2) * p), (d * p + 2 + root) / ((d + 2) * p))


def beta_from_m(params: InterpolationParams, m: float) -> float:
    inv = 1.0 + params.p * (m - 1.0) / 2.0
    if inv <= 0:
        raise InvalidParameter(f"m={m} gives a nonpositive beta")
    return 1.0 / inv


def m_from_beta(params: InterpolationParams, beta: float) -> float:
    return 1.0 + (2.0 / params.p) * (1.0 / beta - 1.0)


def beta_star(params: InterpolationParams) -> float:
    """Maximizer of gamma(beta)/beta^2, i.e. beta = 2/B = (d+2)/(d+3-p)."""
    B, _ = _quadratic_in_inverse_beta(params)
    if B <= 0:
        raise InvalidParameter(
            f"gamma/beta^2 has no interior maximizer for d={params.d}, p={params.p}")
    return 2.0 / B


def flow_exponents(params: InterpolationParams, beta: float | None = None,
                   m: float | None = None) -> FlowExponents:
    """Exponents for a given beta (or m); beta_star when neither is given."""
    try:
        bstar = beta_star(params)
    except InvalidParameter:
        bstar = None
    if beta is None and m is None:
        if bstar is None:
            raise InvalidParameter("beta_star undefined; supply beta or m explicitly")
        beta = bstar
    elif beta is None:
        beta = beta_from_m(params, m)
    beta = float(beta)
    if not beta > 0 or not math.isfinite(beta):
        raise InvalidParameter(f"beta must be positive and finite, got {beta}")
    p = params.p
    if p <= 2:
        delta = 1.0
    else:
        delta = (2.0 - (4.0 - p) * beta) / (2.0 * beta * (p - 2))
    g = gamma_of_beta(params, beta)
    mm, mp = m_bounds(params)
    return FlowExponents(m_minus=mm, m_plus=mp, beta=beta, m=m_from_beta(params, beta),
                         kappa=beta * (p - 2) + 1, gamma=g, delta=delta,
                         beta_star=bstar, phi_rate=g / beta ** 2)


# --------------------------------------------------------------------------
# improvement function phi

@dataclass(frozen=True)
class ImprovedCurve:
    params: InterpolationParams
    exponents: FlowExponents
    s_grid: np.ndarray
    phi_values: np.ndarray
    phi_prime: np.ndarray
    interpolation: str = "cubic-hermite"
    _spline: CubicHermiteSpline = field(repr=False, default=None)

    @property
    def s_max(self) -> float:
        return float(self.s_grid[-1])

    def __call__(self, s):
        s_arr = np.asarray(s, dtype=float)
        if np.any(s_arr < -1e-15) or np.any(s_arr > self.s_max * (1 + 1e-12)):
            raise DomainError(f"s outside the tabulated range [0, {self.s_max}]")
        out = self._spline(np.clip(s_arr, 0.0, self.s_max))
        return float(out) if np.ndim(out) == 0 else out

    def inverse(self, y):
        """phi^{-1}(y) by bracketed root finding on the interpolant."""
        y_arr = np.atleast_1d(np.asarray(y, dtype=float))
        top = self.phi_values[-1]
        if np.any(y_arr < -1e-15) or np.any(y_arr > top * (1 + 1e-12)):
            raise DomainError(f"value outside phi range [0, {top}]")
        out = np.empty_like(y_arr)
        for j, yj in enumerate(y_arr):
            if yj <= 0:
                out[j] = 0.0
                continue
            if yj >= top:
                out[j] = self.s_max
                continue
            k = int(np.searchsorted(self.phi_values, yj))
            lo, hi = self.s_grid[max(k - 1, 0)], self.s_grid[min(k, len(self.s_grid) - 1)]
            out[j] = brentq(lambda s: self._spline(s) - yj, lo, hi, xtol=1e-17, rtol=1e-15)
        return out if np.ndim(y) else float(out[0])


def _phi_rhs_factor(params: InterpolationParams, exps: FlowExponents, s):
    base = 1.0 - (params.p - 2.0) * s
    return exps.phi_rate / base ** exps.delta


def solve_phi(params: InterpolationParams, exponents: FlowExponents, s_max: float,
              tol: float = 1e-10, n_grid: int = 2001) -> ImprovedCurve:
    """Tabulate phi' = 1 + (gamma/beta^2) phi / (1-(p-2)s)^delta, phi(0) = 0."""
    if exponents.gamma < -1e-12:
        raise DomainError(f"gamma = {exponents.gamma} < 0: m outside [m-, m+]")
    if not s_max > 0:
        raise DomainError("s_max must be positive")
    if params.p > 2 and s_max >= 1.0 / (params.p - 2):
        raise DomainError(f"s_max={s_max} reaches the singular point 1/(p-2)")
    s_grid = np.linspace(0.0, s_max, n_grid)
    rate = exponents.phi_rate
    if abs(rate) <= 1e-300 or exponents.gamma == 0.0:
        phi = s_grid.copy()
        dphi = np.ones_like(s_grid)
    else:
        def rhs(s, y):
            return 1.0 + _phi_rhs_factor(params, exponents, s) * y

        sol = solve_ivp(rhs, (0.0, s_max), [0.0], method="DOP853", rtol=tol,
                        atol=tol * 1e-2, dense_output=True)
        if not sol.success:
            raise IntegrationError(f"phi-ODE failed: {sol.message} (last s={sol.t[-1]})")
        phi = sol.sol(s_grid)[0]
        phi[0] = 0.0
        dphi = 1.0 + _phi_rhs_factor(params, exponents, s_grid) * phi
    spline = CubicHermiteSpline(s_grid, phi, dphi)
    return ImprovedCurve(params=params, exponents=exponents, s_grid=s_grid,
                         phi_values=phi, phi_prime=dphi, _spline=spline)


def psi(s, curve: ImprovedCurve):
    """Psi(s) = s - d phi^{-1}(s/d)."""
    d = curve.params.d
    s_arr = np.asarray(s, dtype=float)
    if np.any(s_arr < 0) or np.any(s_arr / d > curve.phi_values[-1] * (1 + 1e-12)):
        raise DomainError("s outside d*phi(range)")
    out = s_arr - d * np.asarray(curve.inverse(s_arr / d))
    return float(out) if np.ndim(out) == 0 else out


# --------------------------------------------------------------------------
# theta improvement and remainder terms

def theta_of(params: InterpolationParams) -> float:
    d, p = params.d, params.p
    inv = 1.0 + ((d - 1) / (d + 2)) ** 2 * (p - 1) * (params.two_sharp - p) / (p - 2)
    return 1.0 / inv


def theta_improvement(u: SphereFunction, params: InterpolationParams):
    """(|grad u|^2, theta-improved right side, plain GNS right side) for p in (2, 2#)."""
    p, d = params.p, params.d
    if not (2.0 < p < params.two_sharp):
        raise InvalidParameter(f"p={p} outside (2, 2#={params.two_sharp})")
    theta = theta_of(params)
    lhs = dirichlet_energy(u)
    a = norm(u, p) ** 2
    b = norm(u, 2) ** 2
    if b == 0:
        return lhs, 0.0, 0.0
    rhs_gns = d / (p - 2) * (a - b)
    # a^{1/theta} b^{1-1/theta} - b = b((a/b)^{1/theta} - 1)
    rhs_theta = d * theta / (p - 2) * b * np.expm1(math.log(a / b) / theta)
    return lhs, float(rhs_theta), float(rhs_gns)


def remainder_functional(u: SphereFunction, params: InterpolationParams, kappa: float):
    """(GNS deficit, kappa(|grad P1 u|^4/(|grad u|^2+|u|^2) + |grad (1-P1)u|^2))."""
    lhs = gns_deficit(u, params).deficit
    u1 = project_degree(u, {1})
    g1 = dirichlet_energy(u1)
    grad = dirichlet_energy(u)
    rest = dirichlet_energy(u - u1)
    denom = grad + norm(u, 2) ** 2
    rhs = kappa * ((g1 * g1 / denom if denom > 0 else 0.0) + rest)
    return lhs, rhs


@dataclass(frozen=True)
class CutConstants:
    gamma_cut: float
    M: float
    M_bar: float = math.sqrt(math.e)
    eps0: float = 0.1
    eps1: float = 0.1
    eps2: float = 0.1
    k0: float = 1.0
    C_eps: float = 1.0       # C_{eps1, eps2}
    C_M: float = 1.0
    C_M_Mbar: float = 1.0

    def __post_init__(self):
        if not (0 < self.gamma_cut < self.M):
            raise InvalidParameter("need 0 < gamma_cut < M")
        if self.M_bar < math.sqrt(math.e) - 1e-15:
            raise InvalidParameter("need M_bar >= sqrt(e)")
        for name in ("eps0", "eps1", "eps2", "k0", "C_eps", "C_M", "C_M_Mbar"):
            if not getattr(self, name) > 0:
                raise InvalidParameter(f"{name} must be positive")


def cut_pieces(r: SphereFunction, constants: CutConstants):
    v = r.values
    g, M = constants.gamma_cut, constants.M
    r1 = np.minimum(v, g)
    r2 = np.minimum(np.maximum(v - g, 0.0), M - g)
    r3 = np.maximum(v - M, 0.0)
    return r.with_values(r1), r.with_values(r2), r.with_values(r3)


def cut_functionals(r: SphereFunction, constants: CutConstants, params: InterpolationParams):
    """I_1, I_2, I_3 for the pieces of r cut at gamma_cut and M.

    Gradients of the pieces use the chain rule a.e.: grad r_k is grad r on
    the set where r_k is not constant.
    """
    d = params.d
    if d < 6:
        raise InvalidParameter("the cut functionals need d >= 6 (theta <= 1)")
    theta = params.two_star - 2.0
    A, ts = params.A, params.two_star
    c = constants
    if c.eps0 >= 1.0 / theta:
        raise InvalidParameter("need eps0 < 1/theta")
    r1, r2, r3 = cut_pieces(r, c)
    v = r.values
    w = r.grid.weights
    grad_sq = (1 - r.grid.nodes ** 2) * (r.grid.diff_matrix @ v) ** 2
    masks = (v < c.gamma_cut, (v > c.gamma_cut) & (v < c.M), v > c.M)
    energy = [float(w @ (grad_sq * m)) + A * float(w @ piece.values ** 2)
              for m, piece in zip(masks, (r1, r2, r3))]
    sq = [float(w @ piece.values ** 2) for piece in (r1, r2, r3)]
    r3_ts = float(w @ r3.values ** ts)
    lead = 1.0 - theta * c.eps0
    I1 = lead * energy[0] - A * (ts - 1 + c.eps1 * theta) * sq[0] + A * c.k0 * theta * (sq[1] + sq[2])
    I2 = lead * energy[1] - A * (ts - 1 + (c.k0 + c.C_eps) * theta) * sq[1]
    I3 = lead * energy[2] - (2.0 / ts) * A * (1 + c.eps2 * theta) * r3_ts - A * c.k0 * theta * sq[2]
    return I1, I2, I3, (r1, r2, r3)


def cut_expansion_bound(r, constants: CutConstants, d: int):
    """Pointwise upper bound for (1+r)^{2*} - 1 - 2* r from the cut pieces, r >= -1."""
    if d < 6:
        raise InvalidParameter("the cut expansion needs d >= 6")
    r = np.asarray(r, dtype=float)
    if np.any(r < -1):
        raise PreconditionError("r must be >= -1")
    c = constants
    ts = 2.0 * d / (d - 2)
    theta = ts - 2
    g, M, Mb = c.gamma_cut, c.M, c.M_bar
    r1 = np.minimum(r, g)
    r2 = np.minimum(np.maximum(r - g, 0.0), M - g)
    r3 = np.maximum(r - M, 0.0)
    s12 = r1 + r2
    bound = 0.5 * ts * (ts - 1) * s12 ** 2 + 2 * s12 * r3
    bound = bound + (1 + c.C_M * theta * math.log(Mb) / Mb) * r3 ** ts
    low = r <= M
    bound = bound + np.where(low, 1.5 * g * theta * r1 ** 2 + c.C_M_Mbar * theta * r2 ** 2,
                             c.C_M_Mbar * theta * M ** 2)
    return bound


def local_stability_ratio(r: SphereFunction, params: InterpolationParams,
                          tol: float = 1e-8) -> float:
    """(|grad u|^2 + A|u|_2^2 - A|u|_{2*}^2)/(|grad r|^2 + A|r|_2^2), u = 1 + r."""
    scale = max(1.0, norm(r, 2))
    if abs(integrate(r)) > tol * scale or abs(integrate(r * r.grid.nodes)) > tol * scale:
        raise PreconditionError("r must be orthogonal to 1 and z")
    A = params.A
    u = 1.0 + r
    num = dirichlet_energy(u) + A * norm(u, 2) ** 2 - A * norm(u, params.two_star) ** 2
    den = dirichlet_energy(r) + A * norm(r, 2) ** 2
    if den == 0:
        raise DegenerateInput("r = 0")
    return num / den


def local_constant_form(eps0: float, d: int) -> float:
    """The local constant 4 eps0/(d-2) the empirical ratio is compared with."""
    return 4.0 * eps0 / (d - 2)
