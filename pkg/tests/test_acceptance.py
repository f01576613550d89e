"""Acceptance criteria 1-10, one test each; every test prints a PASS/FAIL line."""
import math
import time

import mpmath as mp
import numpy as np
import pytest
from scipy.integrate import dblquad

from ineqlab.axial import build_axial_grid
from ineqlab.config import from_dict
from ineqlab.euclid import (AxiSymFunction, ManifoldPoint, RadialFunction, _BubbleModel,
                            bubble_function, gradient_norm_sq, lebesgue_norm, lift_to_sphere,
                            project_to_manifold, projection_gradient, push_to_plane,
                            sobolev_deficit, stability_quotient, two_star)
from ineqlab.experiments import (_rng, cmd_be_quotient, euclidean_families, gaussian_families,
                                 ordered_map, random_positive)
from ineqlab.flow import FlowConfig, run
from ineqlab.gauss import (binary_entropy, build_gaussian_grid, build_R_d, entropy_split, h_d,
                           lift_moments, lsi_deficit, mu_d_mass, p_to_one_limit, stability_ratio)
from ineqlab.rearrange import competing_iterate, conformal_U, gaussian_competing_iterate
from ineqlab.spectral import build_grid, synthesize
from ineqlab.sphere import (flow_exponents, gns_deficit, make_params, psi, solve_phi,
                            theta_improvement)

from oracles import sphere_area as area_oracle


@pytest.fixture
def report(capsys):
    def emit(criterion, checks):
        """checks: list of (label, ok, detail)."""
        ok = all(c[1] for c in checks)
        with capsys.disabled():
            print(f"\ncriterion {criterion}: {'PASS' if ok else 'FAIL'}")
            for label, good, detail in checks:
                print(f"  [{'ok' if good else 'FAIL'}] {label}: {detail}")
        failed = [c[0] for c in checks if not c[1]]
        assert not failed, f"criterion {criterion} failed: {failed}"
    return emit


# ---------------------------------------------------------------- 1

def test_criterion_01_bianchi_egnell_dimensional_bound(report):
    checks = []
    for d in (3, 4, 5, 6):
        cfg = from_dict({"experiment": "be", "d": d, "degrees": [2],
                         "eps": [0.01, 0.005, 0.0025, 0.00125]})
        t0 = time.perf_counter()
        table = cmd_be_quotient(cfg, threads=4)
        elapsed = time.perf_counter() - t0
        limit = table.rows[0][5]
        target = 4 / (4 + d)
        rel = abs(limit / target - 1)
        checks.append((f"d={d} limit", rel <= 1e-2 and all(r[7] == "ok" for r in table.rows),
                       f"{limit:.8f} vs 4/(4+d)={target:.8f}, rel {rel:.2e}"))
        checks.append((f"d={d} runtime", elapsed < 60, f"{elapsed:.1f} s"))
    report(1, checks)


# ---------------------------------------------------------------- 2

def test_criterion_02_quartic_cancellation(report):
    d = 3
    params = make_params(d, 6.0)
    g = build_grid(d, 64)

    def deficit(eps):
        return gns_deficit(g.function(lambda z: 1 + eps * z), params).deficit

    eps = [1e-2 / 2 ** j for j in range(4)]
    D = [deficit(e) for e in eps]
    checks = [("deficit/eps^2 at 1e-2", D[0] / eps[0] ** 2 <= 1e-3, f"{D[0] / eps[0] ** 2:.3e}")]
    for j in range(3):
        r = D[j] / D[j + 1]
        checks.append((f"ratio eps={eps[j]:.2e}", abs(r / 16 - 1) <= 0.05, f"{r:.5f}"))
    report(2, checks)


# ---------------------------------------------------------------- 3

def test_criterion_03_flow_monotonicity(report):
    d = 3
    # 32 nodes under-resolve u^5.9 and the mass quadrature alone drifts by 4e-5
    grid = build_grid(d, 48)
    t0 = time.perf_counter()
    checks = []
    for p in (2.2, 3.0, 5.9):
        params = make_params(d, p)
        fc = FlowConfig(params, flow_exponents(params), t_end=3.0)

        def one(j, params=params, fc=fc):
            u0 = random_positive(grid, _rng(2024, int(10 * p), j), amplitude=0.5)
            a = run(u0, fc).as_arrays()
            scale = max(a["i"][0], 1e-300)
            inc = max(np.max(np.diff(a["deficit"]), initial=-np.inf),
                      np.max(np.diff(a["improved"]), initial=-np.inf)) / scale
            drift = np.max(np.abs(a["mass"] / a["mass"][0] - 1))
            return inc, drift, a["deficit"][-1] / scale

        res = np.array(ordered_map(lambda j: one(j), range(100), threads=4))
        checks.append((f"p={p} increments", np.max(res[:, 0]) <= 1e-8,
                       f"max increment/scale {np.max(res[:, 0]):.2e}"))
        checks.append((f"p={p} mass drift", np.max(res[:, 1]) <= 1e-6,
                       f"{np.max(res[:, 1]):.2e}"))
        checks.append((f"p={p} final deficit", np.max(res[:, 2]) < 1e-6,
                       f"{np.max(res[:, 2]):.2e}"))
    elapsed = time.perf_counter() - t0
    checks.append(("runtime", elapsed < 600, f"{elapsed:.1f} s for 300 runs"))
    report(3, checks)


# ---------------------------------------------------------------- 4

def test_criterion_04_phi_psi(report):
    checks = []
    for d, p in ((3, 2.5), (3, 4.0), (3, 5.9), (5, 3.0)):
        params = make_params(d, p)
        exps = flow_exponents(params)
        s_max = 0.9 / (p - 2)
        curve = solve_phi(params, exps, s_max)
        s, phi = curve.s_grid, curve.phi_values
        h = s[1] - s[0]
        # one-sided fifth-order difference on the tabulated values
        fd = (-137 * phi[0] + 300 * phi[1] - 300 * phi[2] + 200 * phi[3]
              - 75 * phi[4] + 12 * phi[5]) / (60 * h)
        second = np.diff(phi, 2)
        ss = np.linspace(0, s_max, 41)[1:]
        sample = np.linspace(0, d * phi[-1], 41)[1:]
        tag = f"d={d} p={p}"
        checks += [
            (f"{tag} phi(0)", curve(0.0) == 0.0, f"{curve(0.0)}"),
            (f"{tag} phi'(0)", max(abs(curve.phi_prime[0] - 1), abs(fd - 1)) <= 1e-8,
             f"table {curve.phi_prime[0] - 1:.1e}, difference quotient {fd - 1:.1e}"),
            (f"{tag} convexity", np.min(second) >= -1e-10, f"min second difference {np.min(second):.2e}"),
            (f"{tag} phi > s", exps.gamma > 0 and np.all(curve(ss) > ss),
             f"gamma={exps.gamma:.4f}, min phi(s)-s {np.min(curve(ss) - ss):.2e}"),
            (f"{tag} Psi > 0", np.all(psi(sample, curve) > 0),
             f"min Psi {np.min(psi(sample, curve)):.2e}"),
        ]
    # gamma vanishes at m = m_+ (m_- gives a nonpositive beta for these p)
    for p in (3.0, 4.0):
        params = make_params(3, p)
        exps = flow_exponents(params, m=flow_exponents(params).m_plus)
        degenerate = type(exps)(**{**exps.__dict__, "gamma": 0.0, "phi_rate": 0.0})
        curve = solve_phi(params, degenerate, 0.9 / (p - 2))
        ss = np.linspace(0, curve.s_max, 97)
        checks.append((f"gamma=0 at m_+ p={p}", np.array_equal(curve(ss), ss)
                       and np.array_equal(curve.phi_values, curve.s_grid),
                       f"gamma(m_+) = {exps.gamma:.1e}, max |phi-s| {np.max(np.abs(curve(ss) - ss))}"))
    report(4, checks)


# ---------------------------------------------------------------- 5

def test_criterion_05_theta_dominance(report):
    rng = np.random.default_rng(5)
    grids = {d: build_grid(d, 40) for d in (3, 4, 5)}
    worst = math.inf
    strict = 0
    n = 500
    for j in range(n):
        d = (3, 4, 5)[j % 3]
        params0 = make_params(d, 3.0)
        p = rng.uniform(2.0, params0.two_sharp)
        p = min(max(p, 2.0 + 1e-6), params0.two_sharp * (1 - 1e-9))
        params = make_params(d, p)
        c = np.zeros(grids[d].n)
        kmax = 8
        c[:kmax + 1] = rng.normal(size=kmax + 1) / (1 + np.arange(kmax + 1)) ** rng.uniform(0.5, 2)
        u = synthesize(grids[d], c)
        _, rhs_theta, rhs_gns = theta_improvement(u, params)
        gap = (rhs_theta - rhs_gns) / max(abs(rhs_gns), 1e-300)
        worst = min(worst, gap)
        strict += rhs_theta > rhs_gns
    report(5, [("rhs_theta >= rhs_gns", worst >= -1e-13,
                f"{n} functions, min relative gap {worst:.3e}, strict in {strict}")])


# ---------------------------------------------------------------- 6

def _radial_test_function(d, coeffs):
    def f(r):
        z = (r * r - 1) / (r * r + 1)
        return (2 / (1 + r * r)) ** ((d - 2) / 2) * sum(c * z ** j for j, c in enumerate(coeffs))
    return f


def test_criterion_06_transport_and_invariance(report):
    checks = []
    mp.mp.dps = 25
    for d, coeffs in ((3, (1.0, 0.3, 0.2)), (5, (1.0, -0.4, 0.1, 0.05))):
        f = _radial_test_function(d, coeffs)
        rf = RadialFunction.from_callable(build_grid(d, 48), f)
        ts = two_star(d)
        sdm1 = area_oracle(d - 1)
        fm = lambda r, f=f: f(mp.mpf(r))  # noqa: E731
        lq = float(mp.quad(lambda r: abs(fm(r)) ** ts * sdm1 * r ** (d - 1), [0, 1, 10, mp.inf]))
        gq = float(mp.quad(lambda r: mp.diff(fm, r) ** 2 * sdm1 * r ** (d - 1), [0, 1, 10, mp.inf]))
        e1 = abs(lebesgue_norm(rf, ts) ** ts / lq - 1)
        e2 = abs(gradient_norm_sq(rf) / gq - 1)
        checks.append((f"radial d={d}", max(e1, e2) <= 1e-7, f"norm {e1:.1e}, gradient {e2:.1e}"))

    d = 3

    def fa(s, t):
        q = 1 + s * s + t * t
        ps = 2 / q
        y, z = t * ps, 1 - ps
        return ps ** ((d - 2) / 2) * (1 + 0.3 * y + 0.2 * y * z)

    af = AxiSymFunction.from_callable(build_axial_grid(d, 24), fa)

    def lq_int(b, a):
        s, t = math.tan(a), math.tan(b)
        return abs(fa(s, t)) ** 6 * 2 * math.pi * s * (1 + s * s) * (1 + t * t)

    lq, _ = dblquad(lq_int, 0, math.pi / 2, -math.pi / 2, math.pi / 2, epsabs=1e-13, epsrel=1e-11)
    e = abs(lebesgue_norm(af, 6.0) ** 6 / lq - 1)
    checks.append(("axisymmetric d=3 norm", e <= 1e-7, f"{e:.1e}"))

    g = build_axial_grid(d, 32)
    f = push_to_plane(g.function(lambda y, z: 1 + 0.2 * y + 0.1 * y * z - 0.15 * z * z + 0.05 * y ** 3))
    Uf = conformal_U(f)
    q0, q1 = stability_quotient(f), stability_quotient(Uf)
    checks.append(("E(Uf) = E(f)", abs(q1 - q0) <= 1e-6 * abs(q0), f"{q0:.10f} vs {q1:.10f}"))

    worst_abs = worst_rel = 0.0
    for a in (0.5, 1.0, 2.0):
        for b in (0.0, 0.5, -0.5):
            for c in (1.0, -2.0):
                bf = bubble_function(ManifoldPoint.on_axis(a, b, c, d), g)
                D = abs(sobolev_deficit(bf))
                worst_abs = max(worst_abs, D)
                worst_rel = max(worst_rel, D / gradient_norm_sq(bf))
    checks.append(("deficits on M", worst_abs <= 1e-8,
                   f"max |deficit| {worst_abs:.1e} (relative {worst_rel:.1e})"))
    report(6, checks)


# ---------------------------------------------------------------- 7

def _tangent_split(u, a, b, v):
    """Coefficients of the Q-projection of v onto span{G, a dG/da, dG/db} and the remainder."""
    model = _BubbleModel(u)
    F, LF = model.pieces(a, b)
    gram = (F * model.w) @ LF.T
    gram = 0.5 * (gram + gram.T)
    coef = np.linalg.solve(gram, LF @ (model.w * v))
    return coef, v - coef @ F


def test_criterion_07_manifold_projection(report):
    d = 3
    a, b, c = 2.0, 0.5, 3.0
    g = build_axial_grid(d, 32)
    f0 = bubble_function(ManifoldPoint.on_axis(a, b, c, d), g)
    u = lift_to_sphere(f0)
    scale = math.sqrt(gradient_norm_sq(f0))
    rng = np.random.default_rng(7)
    checks = []
    for trial in range(5):
        coeff = rng.normal(size=(5, 5))
        raw = sum(coeff[i, j] * g.y ** i * g.z ** j for i in range(5) for j in range(5 - i))
        alpha, orth = _tangent_split(u, a, b, raw)
        for label, v in (("orthogonal", orth), ("generic", raw)):
            nv = math.sqrt(gradient_norm_sq(push_to_plane(u.with_values(v))))
            k = 1e-3 * scale / nv
            f = push_to_plane(u.with_values(u.values + k * v))
            pr = project_to_manifold(f)
            err = np.array([pr.point.a - a, pr.point.b_axis - b, pr.point.c - c])
            stat = np.linalg.norm(projection_gradient(f, pr.point)) / gradient_norm_sq(f)
            if label == "orthogonal":
                checks.append((f"trial {trial} recovery", np.max(np.abs(err)) <= 1e-6,
                               f"parameter error {np.max(np.abs(err)):.1e}"))
                checks.append((f"trial {trial} stationarity", stat <= 1e-8, f"{stat:.1e}"))
            else:
                # generic noise moves the optimum by its tangent component, to first order
                pred = np.array([a * k * alpha[1] / c, k * alpha[2] / c, k * alpha[0]])
                lin = np.max(np.abs(err - pred)) / np.max(np.abs(pred))
                checks.append((f"trial {trial} generic noise", lin <= 1e-2 and stat <= 1e-8,
                               f"shift {np.max(np.abs(err)):.1e}, linear prediction rel {lin:.1e}"))
    report(7, checks)


# ---------------------------------------------------------------- 8

def test_criterion_08_competing_symmetries(report):
    d = 3
    fams = euclidean_families(d)
    ag = build_axial_grid(d, 40)
    out_grid = build_grid(d, 64)

    def one(name):
        f = push_to_plane(ag.function(fams[name]))
        return name, competing_iterate(f, n_max=50, stop_tol=1e-3, out_grid=out_grid, n_rays=48)

    checks = []
    for name, tr in ordered_map(one, list(fams), threads=4):
        dist = np.asarray(tr.distance)
        grad = np.asarray(tr.grad_norm)
        rise = np.max(np.diff(dist), initial=-np.inf)
        grise = np.max(np.diff(grad), initial=-np.inf) / grad[0]
        ok = dist[-1] < 1e-3 and tr.n[-1] <= 50 and rise <= 1e-12 * dist[0] and grise <= 1e-6
        checks.append((name, ok, f"n={tr.n[-1]}, distance {dist[-1]:.1e}, max rise {rise:.1e}, "
                                 f"gradient rise {grise:.1e}"))
    report(8, checks)


# ---------------------------------------------------------------- 9

def test_criterion_09_gaussian_suite(report):
    g = build_gaussian_grid(1, 64)
    checks = []
    worst = 0.0
    for a in np.linspace(-1.0, 1.0, 9):
        for c in (0.3, 1.0, 4.0):
            u = g.function(lambda x: c * np.exp(a * x))
            worst = max(worst, abs(lsi_deficit(u)) / u.norm(2) ** 2)
    checks.append(("lsi deficit on exponentials", worst <= 1e-9, f"{worst:.1e}"))
    g2 = build_gaussian_grid(2, 24)
    u2 = g2.function(lambda x: 1.5 * np.exp(0.4 * x[:, 0] - 0.7 * x[:, 1]))
    r2 = abs(lsi_deficit(u2)) / u2.norm(2) ** 2
    checks.append(("lsi deficit on a 2D exponential", r2 <= 1e-9, f"{r2:.1e}"))

    for k in (2, 3, 4):
        r = stability_ratio(g.function(lambda x: 1 + 0 * x) + g.hermite(k) * 1e-3)
        target = 2 * math.pi * (k - 1)
        checks.append((f"stability ratio k={k}", abs(r / target - 1) <= 1e-2,
                       f"{r:.6f} vs {target:.6f}"))

    res = 0.0
    for shift in np.linspace(-1, 1, 7):
        for freq in (0.5, 1.5, 3.0):
            res = max(res, entropy_split(g.function(lambda x: shift + np.sin(freq * x + 0.3))).identity_residual)
    checks.append(("entropy split residual", res <= 1e-8, f"{res:.1e}"))

    m = np.linspace(0, 0.5, 100001)
    hb = np.min(binary_entropy(m) - 2 * math.log(2) * m)
    checks.append(("h(m) >= 2 ln2 m", hb >= -1e-15, f"min gap {hb:.1e}"))
    for d in (3, 4, 5, 10, 100):
        gap = np.min(h_d(d, m) - 2 * h_d(d, 0.5) * m)
        checks.append((f"h_{d} concavity bound", gap >= -1e-15, f"min gap {gap:.1e}"))

    gg = build_gaussian_grid(1, 64)
    for name, fn in gaussian_families().items():
        tr = gaussian_competing_iterate(gg.function(fn), n_max=50, stop_tol=1e-3)
        checks.append((f"(VU)^n {name}", tr.distance[-1] < 1e-3 and tr.n[-1] <= 50,
                       f"n={tr.n[-1]}, distance {tr.distance[-1]:.1e}"))
    report(9, checks)


# ---------------------------------------------------------------- 10

def test_criterion_10_dimensional_lift(report):
    checks = []
    dims = (100, 1000, 10000)
    err = [abs(lift_moments(d, (2,))[0] - 1 / (2 * math.pi)) for d in dims]
    C = [d * e for d, e in zip(dims, err)]
    checks.append(("C/d decay", all(b < a for a, b in zip(err, err[1:])) and max(C) / min(C) < 1.02,
                   "d*error = " + ", ".join(f"{c:.6f}" for c in C)))
    for d in (5, 10, 20):
        mass = mu_d_mass(d)
        checks.append((f"mu_{d} mass", abs(mass - 1) <= 1e-8, f"{mass - 1:.1e}"))
    worst = 0.0
    for d in (5, 20, 200):
        worst = max(worst, np.max(np.abs(build_R_d(lambda x: np.exp(0.7 * x) + np.cos(2 * x), d)
                                         .orthogonality_residuals())))
        worst = max(worst, np.max(np.abs(build_R_d(
            lambda y: np.exp(0.5 * y[:, 0] - 0.2 * y[:, 1]) + y[:, 0] * y[:, 1] ** 2, d, N=2)
            .orthogonality_residuals())))
    checks.append(("R_d orthogonality", worst <= 1e-8, f"{worst:.1e}"))
    g = build_gaussian_grid(1, 64)
    for label, fn in (("e^x(1+0.2 sin x)", lambda x: np.exp(x) * (1 + 0.2 * np.sin(x))),
                      ("1+0.5 tanh x", lambda x: 1 + 0.5 * np.tanh(x))):
        h = g.function(fn)
        gaps = [p_to_one_limit(h, 1 + e).gap for e in (0.04, 0.02, 0.01)]
        ratios = [b / a for a, b in zip(gaps, gaps[1:])]
        checks.append((f"p->1 gap {label}", all(abs(r / 0.5 - 1) <= 0.2 for r in ratios),
                       "ratios " + ", ".join(f"{r:.4f}" for r in ratios)))
    report(10, checks)
