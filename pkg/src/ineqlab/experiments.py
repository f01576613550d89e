"""Experiment runners behind the command-line subcommands.

Each runner takes an ExperimentConfig and returns a Table.  Independent
parameter points are mapped over a thread pool whose results are collected
in submission order, so the output does not depend on the thread count.
Per-row numerical failures are flagged in the row; failures that stop a run
(a flow losing positivity, a curve hitting its singular point) raise.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np

from . import gridio
from .axial import build_axial_grid
from .config import ExperimentConfig
from .errors import ConfigError, FlowError, IneqLabError, InvalidParameter
from .euclid import bubble_sphere, project_to_manifold, push_to_plane, sobolev_deficit
from .flow import FlowConfig, default_curve, run
from .gauss import (build_gaussian_grid, combine_constant, dist_to_exponentials, lift_moments,
                    lsi_deficit)
from .rearrange import competing_iterate, gaussian_competing_iterate
from .spectral import SphereFunction, basis_function, build_grid, eigenvalue, synthesize
from .sphere import flow_exponents, gns_deficit, make_params, psi, solve_phi


@dataclass
class Table:
    columns: tuple
    rows: list = field(default_factory=list)
    status: str = "ok"


def ordered_map(fn: Callable, items: Iterable, threads: int = 1) -> list:
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _flag(exc: Exception) -> str:
    return type(exc).__name__


def _rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed & (2 ** 64 - 1), *key]))


def random_positive(grid, rng: np.random.Generator, amplitude: float, kmax: int = 6):
    """1 + band-limited perturbation with sup norm `amplitude` (< 1 keeps it positive)."""
    c = np.zeros(grid.n)
    c[1:kmax + 1] = rng.normal(size=kmax) / np.arange(1, kmax + 1)
    v = synthesize(grid, c).values
    scale = amplitude / float(np.max(np.abs(v)))
    return SphereFunction(grid, 1.0 + scale * v)


def _params(cfg: ExperimentConfig):
    try:
        return make_params(cfg.d, cfg.p)
    except InvalidParameter as exc:
        raise ConfigError(str(exc)) from exc


def _exponents(cfg: ExperimentConfig, params):
    try:
        return flow_exponents(params, beta=cfg.beta, m=cfg.m)
    except InvalidParameter as exc:
        raise ConfigError(str(exc)) from exc


# --------------------------------------------------------------------------
# deficit-scan

DEFICIT_COLUMNS = ("family_id", "d", "p", "i", "e", "deficit", "improved_deficit", "flag")


def cmd_deficit_scan(cfg: ExperimentConfig, threads: int = 1) -> Table:
    params = _params(cfg)
    grid = build_grid(cfg.d, cfg.n_grid)
    try:
        exps = flow_exponents(params, beta=cfg.beta, m=cfg.m)
    except InvalidParameter:
        exps = None
    families = cfg.families or ["constant", "eps-z", "random"]
    unknown = set(families) - {"constant", "eps-z", "random"}
    if unknown:
        raise ConfigError(f"unknown families: {sorted(unknown)}")
    jobs = []
    for fam in families:
        if fam == "constant":
            jobs += [("constant:1", lambda: grid.constant(1.0)),
                     ("constant:2.5", lambda: grid.constant(2.5))]
        elif fam == "eps-z":
            jobs += [(f"eps-z:{e!r}", (lambda e: lambda: 1.0 + e * grid.z)(e)) for e in cfg.eps]
        else:
            jobs += [(f"random:{j}", (lambda j: lambda: random_positive(
                grid, _rng(cfg.seed, j), cfg.amplitude))(j)) for j in range(cfg.n_random)]
    p_out = "log" if params.log_case else params.p

    def one(job):
        fid, make = job
        try:
            u = make()
            curve = None
            if exps is not None and exps.gamma >= 0:
                try:
                    curve = default_curve(u, params, exps)
                except IneqLabError:
                    curve = None
            rep = gns_deficit(u, params, curve)
            imp = math.nan if rep.improved_deficit is None else rep.improved_deficit
            return (fid, cfg.d, p_out, rep.i, rep.e, rep.deficit, imp, "ok")
        except (IneqLabError, FloatingPointError) as exc:
            nan = math.nan
            return (fid, cfg.d, p_out, nan, nan, nan, nan, _flag(exc))

    table = Table(DEFICIT_COLUMNS, ordered_map(one, jobs, threads))
    bad = sum(r[-1] != "ok" for r in table.rows)
    table.status = "ok" if not bad else f"ok ({bad} flagged rows)"
    return table


# --------------------------------------------------------------------------
# flow-run

FLOW_COLUMNS = ("t", "i", "e", "mass", "deficit", "improved")


class RunFailed(IneqLabError):
    """A run stopped on a numerical failure; carries the partial table."""

    def __init__(self, message: str, table: Table):
        super().__init__(message)
        self.table = table


def initial_sphere_datum(cfg: ExperimentConfig, grid) -> SphereFunction:
    if cfg.initial == "cosine":
        return 1.0 + cfg.amplitude * grid.z
    if cfg.initial == "random":
        return random_positive(grid, _rng(cfg.seed, 0), cfg.amplitude)
    f = gridio.read_function(cfg.input)
    if not isinstance(f, SphereFunction) or f.d != cfg.d:
        raise ConfigError("input must be a sphere function of matching dimension")
    return f


def cmd_flow_run(cfg: ExperimentConfig, threads: int = 1) -> Table:
    params = _params(cfg)
    exps = _exponents(cfg, params)
    grid = build_grid(cfg.d, cfg.n_grid)
    u0 = initial_sphere_datum(cfg, grid)
    try:
        fc = FlowConfig(params, exps, dt=cfg.dt, scheme=cfg.scheme, t_end=cfg.t_end,
                        monitor_stride=cfg.monitor_stride, tolerance=cfg.flow_tolerance,
                        allow_m_outside=cfg.allow_m_outside)
    except InvalidParameter as exc:
        raise ConfigError(str(exc)) from exc
    note = ""
    if not exps.m_minus <= exps.m <= exps.m_plus:
        note = f"; note: m={exps.m!r} outside [{exps.m_minus!r}, {exps.m_plus!r}]"
    try:
        trace = run(u0, fc)
    except FlowError as exc:
        rows = exc.trace.rows() if exc.trace is not None else []
        raise RunFailed(f"failed: {exc}{note}", Table(FLOW_COLUMNS, rows)) from exc
    if note:
        d = np.diff(np.asarray(trace.deficit))
        violations = int(np.sum(d > 1e-8 * max(abs(trace.i[0]), 1e-300)))
        note += f"; deficit increases: {violations}"
    return Table(FLOW_COLUMNS, trace.rows(), f"{trace.status}{note}")


# --------------------------------------------------------------------------
# improved-curve

CURVE_COLUMNS = ("s", "phi", "Psi")


def cmd_improved_curve(cfg: ExperimentConfig, threads: int = 1) -> Table:
    params = _params(cfg)
    exps = _exponents(cfg, params)
    if cfg.s_max is not None:
        s_max = cfg.s_max
    else:
        s_max = 0.9 / (params.p - 2) if params.p > 2 else 1.0
    curve = solve_phi(params, exps, s_max)
    s = np.linspace(0.0, s_max, cfg.n_points)
    phi = np.asarray(curve(s))
    Psi = np.asarray(psi(s, curve))
    return Table(CURVE_COLUMNS, list(zip(s.tolist(), phi.tolist(), Psi.tolist())))


# --------------------------------------------------------------------------
# be-quotient

BE_COLUMNS = ("k", "eps", "deficit", "dist2", "quotient", "limit", "oracle", "flag")


def extrapolate_zero(eps, values) -> float:
    """Value at eps = 0 of the least-squares polynomial (degree <= 2) in eps."""
    eps = np.asarray(eps, dtype=float)
    values = np.asarray(values, dtype=float)
    ok = np.isfinite(values)
    eps, values = eps[ok], values[ok]
    if eps.size == 0:
        return math.nan
    deg = min(2, eps.size - 1)
    return float(np.polyfit(eps, values, deg)[-1]) if deg > 0 else float(values[0])


def _with_limits(rows, k_index, eps_index, q_index, limit_index):
    out = []
    for k in dict.fromkeys(r[k_index] for r in rows):
        sel = [r for r in rows if r[k_index] == k]
        lim = extrapolate_zero([r[eps_index] for r in sel], [r[q_index] for r in sel])
        for r in sel:
            r = list(r)
            r[limit_index] = lim
            out.append(tuple(r))
    return out


def be_quotient_point(d: int, k: int, eps: float, n_grid: int = 64):
    """(deficit, dist2, quotient) for f = lift of 1 + eps C_k."""
    grid = build_grid(d, n_grid)
    u = 1.0 + eps * basis_function(grid, k)
    f = push_to_plane(u)
    proj = project_to_manifold(f)
    deficit = sobolev_deficit(f)
    return deficit, proj.dist2, deficit / proj.dist2


def cmd_be_quotient(cfg: ExperimentConfig, threads: int = 1) -> Table:
    if any(k < 1 for k in cfg.degrees):
        raise ConfigError("be-quotient needs degrees >= 1")
    A = cfg.d * (cfg.d - 2) / 4.0
    jobs = [(k, e) for k in cfg.degrees for e in cfg.eps]

    def one(job):
        k, e = job
        lam = float(eigenvalue(k, cfg.d))
        oracle = (lam - cfg.d) / (lam + A) if k >= 2 else math.nan
        try:
            dfc, dist2, q = be_quotient_point(cfg.d, k, e, cfg.n_grid)
            return (k, e, dfc, dist2, q, math.nan, oracle, "ok")
        except (IneqLabError, FloatingPointError) as exc:
            nan = math.nan
            return (k, e, nan, nan, nan, nan, oracle, _flag(exc))

    rows = _with_limits(ordered_map(one, jobs, threads), 0, 1, 4, 5)
    return Table(BE_COLUMNS, rows)


# --------------------------------------------------------------------------
# lsi-quotient

LSI_COLUMNS = ("k", "eps", "deficit", "dist2", "ratio", "limit", "oracle", "eta", "kappa", "flag")


def lsi_quotient_point(k: int, eps: float, n: int = 64):
    g = build_gaussian_grid(1, n)
    u = 1.0 + eps * g.hermite(k)
    proj = dist_to_exponentials(u)
    D = lsi_deficit(u)
    return D, proj.dist2, D / proj.dist2


def cmd_lsi_quotient(cfg: ExperimentConfig, threads: int = 1) -> Table:
    if any(k < 2 for k in cfg.degrees):
        raise ConfigError("lsi-quotient needs degrees >= 2")
    eta = 2 * math.pi * cfg.eps0 if cfg.eps0 is not None else math.nan
    kappa = combine_constant(cfg.kappa_pos) if cfg.kappa_pos is not None else math.nan
    jobs = [(k, e) for k in cfg.degrees for e in cfg.eps]

    def one(job):
        k, e = job
        oracle = 2 * math.pi * (k - 1)
        try:
            D, dist2, r = lsi_quotient_point(k, e, cfg.gauss_nodes)
            return (k, e, D, dist2, r, math.nan, oracle, eta, kappa, "ok")
        except (IneqLabError, FloatingPointError) as exc:
            nan = math.nan
            return (k, e, nan, nan, nan, nan, oracle, eta, kappa, _flag(exc))

    rows = _with_limits(ordered_map(one, jobs, threads), 0, 1, 4, 5)
    return Table(LSI_COLUMNS, rows)


# --------------------------------------------------------------------------
# competing symmetries

COMPETING_COLUMNS = ("family", "n", "distance", "energy_or_deficit", "status")


def _bubble(d, a, b):
    return lambda y, z: bubble_sphere(d, a, b, y, z)


def euclidean_families(d: int) -> dict:
    """Ten nonnegative axisymmetric test functions, as callables of the sphere point (y, z)."""
    B = lambda a, b: _bubble(d, a, b)  # noqa: E731
    return {
        "translated": B(1.0, 0.7),
        "two-bump": lambda y, z: B(0.5, 1.0)(y, z) + B(0.5, -1.0)(y, z),
        "two-bump-asym": lambda y, z: B(0.5, 1.0)(y, z) + 0.5 * B(1.0, -0.5)(y, z),
        "wide": lambda y, z: B(4.0, 0.0)(y, z) * (1 + 0.3 * z * z),
        "perturbed": lambda y, z: B(1.0, 0.3)(y, z) * (1 + 0.2 * y * z + 0.1 * y),
        "narrow": lambda y, z: B(0.3, -0.5)(y, z) + 0.2,
        "narrow-far": B(0.2, 1.5),
        "stretched": lambda y, z: B(1.0, 0.0)(y, z) * (1 + 0.5 * y * y),
        "offset": lambda y, z: B(2.0, -0.4)(y, z) + 0.3 * (1 + y),
        "three-bump": lambda y, z: B(0.4, 1.2)(y, z) + B(0.6, 0.0)(y, z) + B(0.4, -1.2)(y, z),
    }


def gaussian_families() -> dict:
    return {
        "step": lambda x: 1 + 0.5 * (1 + np.tanh(4 * x)) / 2,
        "exponential": lambda x: 2 * np.exp(0.5 * x),
        "bump": lambda x: 1 + 0.8 * np.exp(-4 * (x - 0.5) ** 2),
        "oscillating": lambda x: 1.6 + 0.5 * np.sin(3 * x) * np.exp(-0.5 * x * x) + 0.3 * np.tanh(x),
    }


def cmd_competing(cfg: ExperimentConfig, threads: int = 1) -> Table:
    if cfg.mode == "euclidean":
        fams = euclidean_families(cfg.d)
        ag = build_axial_grid(cfg.d, cfg.axial_degree)
        out_grid = build_grid(cfg.d, cfg.n_grid)
    else:
        fams = gaussian_families()
        gg = build_gaussian_grid(1, cfg.gauss_nodes)
    names = cfg.families or list(fams)
    unknown = set(names) - set(fams)
    if unknown:
        raise ConfigError(f"unknown families: {sorted(unknown)}")

    def one(name):
        try:
            if cfg.mode == "euclidean":
                f = push_to_plane(ag.function(fams[name]))
                tr = competing_iterate(f, n_max=cfg.n_max, stop_tol=cfg.stop_tol,
                                       out_grid=out_grid, n_rays=cfg.n_rays)
                return [(name, n, dist, e, tr.status)
                        for n, dist, e in tr.rows()]
            u0 = gg.function(fams[name])
            tr = gaussian_competing_iterate(u0, n_max=cfg.n_max, stop_tol=cfg.stop_tol)
            return [(name, n, dist, e, tr.status) for n, dist, e in tr.rows()]
        except (IneqLabError, FloatingPointError) as exc:
            return [(name, 0, math.nan, math.nan, _flag(exc))]

    rows = [r for block in ordered_map(one, names, threads) for r in block]
    return Table(COMPETING_COLUMNS, rows)


# --------------------------------------------------------------------------
# dimensional lift

LIFT_COLUMNS = ("d", "sphere_value", "gauss_value", "abs_error", "d_times_error")


def cmd_lift(cfg: ExperimentConfig, threads: int = 1) -> Table:
    alpha = tuple(cfg.monomial)
    for d in cfg.lift_dims:
        if d <= len(alpha):
            raise ConfigError("lift_dims must exceed the number of monomial coordinates")

    def one(d):
        s, g = lift_moments(d, alpha)
        return (d, s, g, abs(s - g), d * abs(s - g))

    return Table(LIFT_COLUMNS, ordered_map(one, cfg.lift_dims, threads))


COMMANDS = {
    "deficit-scan": cmd_deficit_scan,
    "flow-run": cmd_flow_run,
    "improved-curve": cmd_improved_curve,
    "be-quotient": cmd_be_quotient,
    "lsi-quotient": cmd_lsi_quotient,
    "competing": cmd_competing,
    "lift": cmd_lift,
}
