"""Nonlinear diffusion flows on S^d in the axis variable.

The state is w = u^(1/beta), so that rho = u^p = w^(beta p), and w solves

    w_t = w^(2-2 beta) (L w + kappa (1-z^2) w'^2 / w),   kappa = beta(p-2) + 1,

which is rho_t = (1/m) L rho^m written for w.  Monitors record i, e, the
conserved mass |u|_p^p, the deficit i - d e and the improved deficit
i - d phi(e).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy.integrate import solve_ivp

from .errors import (DegenerateInput, DomainError, FlowError, InvalidParameter,
                     StiffnessError)
from .spectral import SphereFunction, filter_top, norm
from .sphere import (FlowExponents, ImprovedCurve, InterpolationParams,
                     entropy_e, gns_deficit, solve_phi)

SCHEMES = ("explicit-adaptive", "semi-implicit")


@dataclass(frozen=True)
class FlowConfig:
    params: InterpolationParams
    exponents: FlowExponents
    dt: float = 1e-3
    scheme: str = "explicit-adaptive"
    t_end: float = 3.0
    monitor_stride: int = 20
    tolerance: float = 1e-10
    allow_m_outside: bool = False
    floor_nonnegative: bool = True
    filter_fraction: float = 1.0 / 3.0
    stop_deficit: float = 0.0
    method: str = "DOP853"

    def __post_init__(self):
        if not self.dt > 0:
            raise InvalidParameter("dt must be positive")
        if self.scheme not in SCHEMES:
            raise InvalidParameter(f"scheme must be one of {SCHEMES}")
        if self.monitor_stride < 1:
            raise InvalidParameter("monitor_stride must be >= 1")
        if not self.t_end > 0:
            raise InvalidParameter("t_end must be positive")
        e = self.exponents
        slack = 1e-10
        if not self.allow_m_outside and not (e.m_minus - slack <= e.m <= e.m_plus + slack):
            raise InvalidParameter(
                f"m={e.m:.6g} outside [{e.m_minus:.6g}, {e.m_plus:.6g}]; set allow_m_outside")


@dataclass
class FlowState:
    w: SphereFunction
    t: float = 0.0


@dataclass
class FlowTrace:
    t: list = field(default_factory=list)
    i: list = field(default_factory=list)
    e: list = field(default_factory=list)
    mass: list = field(default_factory=list)
    deficit: list = field(default_factory=list)
    improved: list = field(default_factory=list)
    status: str = "running"

    columns = ("t", "i", "e", "mass", "deficit", "improved")

    def append(self, t, report, mass):
        if self.t and not t > self.t[-1]:
            return
        self.t.append(float(t))
        self.i.append(report.i)
        self.e.append(report.e)
        self.mass.append(mass)
        self.deficit.append(report.deficit)
        imp = report.improved_deficit
        self.improved.append(float("nan") if imp is None else imp)

    def rows(self):
        return list(zip(self.t, self.i, self.e, self.mass, self.deficit, self.improved))

    def as_arrays(self):
        return {c: np.asarray(getattr(self, c)) for c in self.columns}


def init_state(u0: SphereFunction, config: FlowConfig) -> FlowState:
    """w = u0^(1/beta), after flooring nonnegative data at 1e-12 max."""
    v = u0.values.copy()
    vmax = float(np.max(v))
    if vmax <= 0:
        raise DegenerateInput("initial datum is not positive anywhere")
    if np.min(v) <= 0:
        if not config.floor_nonnegative or np.min(v) < 0:
            raise DegenerateInput("initial datum must be positive (or nonnegative with flooring)")
        v = np.maximum(v, 1e-12 * vmax)
    return FlowState(w=u0.with_values(v ** (1.0 / config.exponents.beta)), t=0.0)


def profile(state: FlowState, config: FlowConfig) -> SphereFunction:
    """u = w^beta."""
    return state.w.with_values(state.w.values ** config.exponents.beta)


def _rhs_terms(w: np.ndarray, grid, config: FlowConfig):
    beta, kappa = config.exponents.beta, config.exponents.kappa
    z = grid.nodes
    dw = grid.diff_matrix @ w
    coeffs = grid.analysis_matrix @ w
    Lw = grid.vandermonde @ (-grid.lambdas * coeffs)
    a = w ** (2.0 - 2.0 * beta)
    return a, Lw, kappa * (1 - z * z) * dw * dw / w


def _filter_matrix(grid, fraction: float) -> Optional[np.ndarray]:
    if fraction <= 0:
        return None
    cut = int(math.ceil(grid.n * (1 - fraction)))
    return grid.vandermonde[:, :cut] @ grid.analysis_matrix[:cut]


def w_rhs(w: np.ndarray, grid, config: FlowConfig, filt=None) -> np.ndarray:
    a, Lw, grad = _rhs_terms(w, grid, config)
    out = a * (Lw + grad)
    return out if filt is None else filt @ out


def step(state: FlowState, config: FlowConfig, dt: float | None = None,
         scheme: str | None = None) -> FlowState:
    """One fixed step: 'semi-implicit' (L implicit, rest frozen) or 'explicit' Euler."""
    dt = config.dt if dt is None else dt
    scheme = scheme or "semi-implicit"
    grid = state.w.grid
    w = state.w.values
    if np.min(w) <= 0:
        raise FlowError("positivity lost before step")
    filt = _filter_matrix(grid, config.filter_fraction)
    if scheme == "explicit":
        new = w + dt * w_rhs(w, grid, config, filt)
    else:
        a, _, grad = _rhs_terms(w, grid, config)
        Lmat = _L_matrix(grid)
        lhs = np.eye(grid.n) - dt * a[:, None] * Lmat
        rhs = w + dt * a * grad
        new = np.linalg.solve(lhs, rhs)
        if filt is not None:
            new = filt @ new
    if not np.all(np.isfinite(new)) or np.min(new) <= 0:
        raise FlowError(f"positivity lost at t={state.t + dt:.6g} (min w = {np.min(new):.3e})")
    return FlowState(w=state.w.with_values(new), t=state.t + dt)


def _L_matrix(grid) -> np.ndarray:
    return grid.vandermonde @ (-grid.lambdas[:, None] * grid.analysis_matrix)


def step_rho(rho: SphereFunction, m: float, dt: float, theta: float = 1.0) -> SphereFunction:
    """Linearized theta-scheme for rho_t = L rho^m; conserves the mass exactly."""
    grid = rho.grid
    r = rho.values
    if np.min(r) <= 0:
        raise FlowError("rho must be positive")
    Lmat = _L_matrix(grid)
    phi = r ** m
    dphi = m * r ** (m - 1)
    lhs = np.eye(grid.n) - theta * dt * Lmat * dphi[None, :]
    delta = np.linalg.solve(lhs, dt * (Lmat @ phi))
    new = r + delta
    # remove the roundoff mass change; the exact scheme conserves the mean
    new = new + (grid.weights @ r - grid.weights @ new)
    if np.min(new) <= 0:
        raise FlowError("rho lost positivity")
    return rho.with_values(new)


def default_curve(u0: SphereFunction, params: InterpolationParams,
                  exponents: FlowExponents, margin: float = 1.5) -> Optional[ImprovedCurve]:
    """phi tabulated past the normalized initial entropy."""
    if exponents.gamma < 0:
        return None
    scale = norm(u0, 2 if params.log_case else params.p) ** 2
    e0 = max(entropy_e(u0, params) / scale, 0.0)
    s_max = max(margin * e0, 1e-6)
    if params.p > 2:
        cap = (1 - 1e-3) / (params.p - 2)
        if e0 >= cap:
            raise DomainError("initial entropy beyond the range of phi")
        s_max = min(s_max, cap)
    return solve_phi(params, exponents, s_max)


def _monitor(w_values, grid, config, curve, trace, t):
    u = SphereFunction(grid, w_values ** config.exponents.beta)
    rep = gns_deficit(u, config.params, curve)
    mass = float(grid.weights @ np.abs(u.values) ** config.params.p)
    trace.append(t, rep, mass)
    return rep


def run(u0: SphereFunction, config: FlowConfig, curve: ImprovedCurve | None = None,
        improved: bool = True) -> FlowTrace:
    state = init_state(u0, config)
    grid = state.w.grid
    filt = _filter_matrix(grid, config.filter_fraction)
    if filt is not None:
        state = FlowState(w=state.w.with_values(filt @ state.w.values), t=0.0)
    if improved and curve is None:
        curve = default_curve(profile(state, config), config.params, config.exponents)
    trace = FlowTrace()
    rep = _monitor(state.w.values, grid, config, curve, trace, 0.0)
    record_dt = config.monitor_stride * config.dt
    n_rec = max(1, int(math.ceil(config.t_end / record_dt - 1e-12)))
    times = np.minimum(np.arange(1, n_rec + 1) * record_dt, config.t_end)

    if rep.deficit <= config.stop_deficit:
        trace.status = "converged"
        return trace

    if config.scheme == "semi-implicit":
        # the frozen-coefficient step drifts in mass at O(dt); rescaling w
        # restores the conserved |u|_p^p after every step
        bp = config.exponents.beta * config.params.p
        mass0 = float(grid.weights @ state.w.values ** bp)
        for t_rec in times:
            while state.t < t_rec - 1e-14:
                h = min(config.dt, t_rec - state.t)
                try:
                    state = step(state, config, dt=h)
                    scale = (mass0 / float(grid.weights @ state.w.values ** bp)) ** (1 / bp)
                    state = FlowState(w=state.w.with_values(scale * state.w.values), t=state.t)
                except FlowError as exc:
                    trace.status = f"failed: {exc}"
                    raise FlowError(str(exc), trace) from exc
            rep = _monitor(state.w.values, grid, config, curve, trace, state.t)
            if rep.deficit <= config.stop_deficit:
                trace.status = "converged"
                return trace
        trace.status = "completed"
        return trace

    def fun(_t, y):
        return w_rhs(y, grid, config, filt)

    def positivity(_t, y):
        return float(np.min(y))

    positivity.terminal = True
    positivity.direction = -1
    y0 = state.w.values
    t0 = 0.0
    scale = float(np.max(np.abs(y0)))
    for t_rec in times:
        sol = solve_ivp(fun, (t0, t_rec), y0, method=config.method, rtol=config.tolerance,
                        atol=config.tolerance * scale, first_step=min(config.dt, t_rec - t0),
                        events=positivity)
        if sol.status == 1:
            trace.status = f"failed: positivity lost near t={sol.t[-1]:.6g}"
            raise FlowError(trace.status, trace)
        if not sol.success:
            trace.status = f"failed: {sol.message}"
            raise StiffnessError(trace.status)
        y0 = sol.y[:, -1]
        t0 = t_rec
        rep = _monitor(y0, grid, config, curve, trace, t_rec)
        if rep.deficit <= config.stop_deficit:
            trace.status = "converged"
            return trace
    trace.status = "completed"
    return trace


def final_state(u0: SphereFunction, config: FlowConfig, t: float) -> SphereFunction:
    """Profile u(t) from the adaptive integrator (no monitoring)."""
    state = init_state(u0, config)
    grid = state.w.grid
    filt = _filter_matrix(grid, config.filter_fraction)
    y0 = state.w.values if filt is None else filt @ state.w.values
    sol = solve_ivp(lambda _t, y: w_rhs(y, grid, config, filt), (0.0, t), y0,
                    method=config.method, rtol=config.tolerance,
                    atol=config.tolerance * float(np.max(np.abs(y0))))
    if not sol.success:
        raise StiffnessError(sol.message)
    return SphereFunction(grid, sol.y[:, -1] ** config.exponents.beta)
