import math
from dataclasses import replace

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ineqlab.errors import (DegenerateInput, DomainError, InvalidParameter,
                            PreconditionError)
from ineqlab.spectral import basis_function, build_grid, eigenvalue, synthesize
from ineqlab.sphere import (CutConstants, beta_star, cut_expansion_bound, cut_functionals,
                            entropy_e, flow_exponents, gamma_of_beta, gns_deficit,
                            local_constant_form, local_stability_ratio, m_bounds,
                            m_bounds_as_printed, make_params, m_from_beta, psi,
                            remainder_functional, solve_phi, theta_improvement, theta_of)

from oracles import sphere_area, sphere_integral


def random_band_limited(grid, rng, kmax=8, positive=False):
    c = np.zeros(grid.n)
    c[:kmax + 1] = rng.normal(size=kmax + 1) / (1 + np.arange(kmax + 1)) ** 1.5
    if positive:
        c[0] = 0.0
        v = synthesize(grid, c).values
        return grid.constant(1.0) + 0.9 * rng.uniform() * v / np.max(np.abs(v))
    return synthesize(grid, c)


# ---------------------------------------------------------------- params

def test_make_params_examples():
    p = make_params(3, 4.0)
    assert p.two_star == 6
    assert p.two_sharp == pytest.approx(4.75, abs=1e-15)
    oracle = float(3 * (mp.pi / 2) ** (mp.mpf(4) / 3))
    assert p.S_d == pytest.approx(oracle, rel=1e-14)
    assert p.S_d == pytest.approx(0.75 * float(2 * mp.pi ** 2) ** (2 / 3), rel=1e-14)
    assert p.area == pytest.approx(sphere_area(3), rel=1e-14)


@pytest.mark.parametrize("d", range(3, 12))
def test_exponent_ordering(d):
    p = make_params(d, 2.1)
    assert 2 < p.two_sharp < p.two_star


@pytest.mark.parametrize("bad", [1.0, 0.5, 6.01, "cubic"])
def test_make_params_errors(bad):
    with pytest.raises(InvalidParameter):
        make_params(3, bad)


def test_log_sentinel():
    assert make_params(3, "log").log_case and make_params(3, 2).log_case


# ---------------------------------------------------------------- entropy and deficits

def test_entropy_examples():
    g = build_grid(3, 48)
    prm = make_params(3, 4.0)
    assert entropy_e(g.constant(2.0), prm) == pytest.approx(0.0, abs=1e-14)
    u = 1 + 0.1 * g.z
    n4 = sphere_integral(3, lambda z: (1 + 0.1 * z) ** 4) ** 0.5
    n2 = sphere_integral(3, lambda z: (1 + 0.1 * z) ** 2)
    assert entropy_e(u, prm) == pytest.approx((n4 - n2) / 2, rel=1e-12)
    with pytest.raises(DegenerateInput):
        entropy_e(g.constant(0.0), prm)


def test_log_entropy_oracle_and_continuity():
    g = build_grid(3, 48)
    f = lambda z: 1 + 0.4 * z + 0.2 * z * z  # noqa: E731
    u = g.function(f)
    n2 = sphere_integral(3, lambda z: f(z) ** 2)
    oracle = 0.5 * sphere_integral(3, lambda z: f(z) ** 2 * mp.log(f(z) ** 2 / n2))
    e_log = entropy_e(u, make_params(3, "log"))
    assert e_log == pytest.approx(oracle, rel=1e-11)
    for p in (2 - 1e-4, 2 + 1e-4):
        assert abs(entropy_e(u, make_params(3, p)) - e_log) < 1e-4 * e_log * 10


def test_gns_deficit_examples():
    g = build_grid(3, 64)
    prm = make_params(3, 6.0)
    assert gns_deficit(g.constant(1.0), prm).deficit == pytest.approx(0.0, abs=1e-14)
    # 1 + eps z: the eps^2 term cancels
    vals = {e: gns_deficit(1 + e * g.z, prm).deficit for e in (0.1, 0.05, 0.025)}
    for e, v in vals.items():
        assert v / e ** 2 < 1e-2
        assert v > 0
    quart = [v / e ** 4 for e, v in vals.items()]
    richardson = (4 * quart[2] - quart[1]) / 3
    assert richardson > 0
    assert quart[2] == pytest.approx(richardson, rel=0.05)
    # 1 + eps C_2: deficit/eps^2 -> lambda_2 - d = 5
    c2 = basis_function(g, 2)
    r = [gns_deficit(1 + e * c2, prm).deficit / e ** 2 for e in (1e-3, 5e-4)]
    assert r[1] == pytest.approx(5.0, rel=2e-3)
    assert abs(2 * r[1] - r[0] - 5) < abs(r[1] - 5)   # first-order extrapolation improves


def _param_grid():
    for d in (3, 4, 5, 6):
        prm = make_params(d, 3.0)
        for p in (2.1, prm.two_sharp, 3.0, prm.two_star, "log"):
            yield d, p


@pytest.mark.parametrize("d,p", list(_param_grid()))
def test_deficit_nonnegative_suite(d, p):
    rng = np.random.default_rng(hash((d, str(p))) % 2 ** 32)
    g = build_grid(d, 48)
    prm = make_params(d, p)
    for _ in range(500):
        u = random_band_limited(g, rng)
        rep = gns_deficit(u, prm)
        assert rep.deficit >= -1e-9 * (rep.i + prm.A)


@pytest.mark.parametrize("d,p", [(3, 2.5), (3, 3.0), (4, 2.4), (5, 2.2), (6, 2.3),
                                 (3, "log"), (5, 1.5)])
def test_improvement_dominance(d, p):
    rng = np.random.default_rng(7)
    g = build_grid(d, 48)
    prm = make_params(d, p)
    exps = flow_exponents(prm)
    from ineqlab.flow import default_curve
    checked = 0
    for _ in range(100):
        u = random_band_limited(g, rng, kmax=5, positive=True)
        try:
            curve = default_curve(u, prm, exps)
        except DomainError:
            continue
        rep = gns_deficit(u, prm, curve)
        assert rep.improved_deficit <= rep.deficit + 1e-14
        assert rep.improved_deficit >= -1e-8 * (rep.i + prm.A)
        checked += 1
    assert checked >= 50


@given(st.floats(0.1, 10.0), st.sampled_from([2.5, 4.0, 6.0, "log"]), st.integers(0, 2 ** 31))
def test_deficit_two_homogeneous(lam, p, seed):
    g = build_grid(3, 32)
    prm = make_params(3, p)
    u = random_band_limited(g, np.random.default_rng(seed))
    a = gns_deficit(u, prm)
    b = gns_deficit(lam * u, prm)
    scale = abs(a.i) + prm.d * abs(a.e) + 1e-300
    assert abs(b.deficit - lam ** 2 * a.deficit) <= 1e-10 * lam ** 2 * scale


# ---------------------------------------------------------------- exponents

def test_flow_exponent_examples():
    for d in (3, 4, 7):
        prm = make_params(d, 2 * d / (d - 2))
        mm, mp_ = m_bounds(prm)
        assert mm == pytest.approx((d - 1) / d, abs=1e-14)
        assert mp_ == pytest.approx((d - 1) / d, abs=1e-14)
        assert m_bounds_as_printed(prm)[0] == pytest.approx((d - 1) / d, abs=1e-14)
    e = flow_exponents(make_params(3, 3.0), beta=1.0)
    assert e.kappa == 2.0
    assert e.gamma == pytest.approx(0.56, abs=1e-15)
    assert e.m == 1.0 and e.delta == pytest.approx(0.5)


@pytest.mark.parametrize("d,p", [(3, 2.5), (3, 3.0), (4, 3.5), (5, 2.2), (3, 1.5), (6, 2.9)])
def test_beta_star_maximizes_phi_rate(d, p):
    prm = make_params(d, p)
    bs = beta_star(prm)
    rate = lambda b: gamma_of_beta(prm, b) / b ** 2  # noqa: E731
    for h in (1e-2, -1e-2, 0.2, -0.2):
        assert rate(bs) >= rate(bs * (1 + h))
    assert flow_exponents(prm).beta == bs


@pytest.mark.parametrize("d,p", [(3, 2.5), (3, 3.0), (4, 3.5), (5, 2.2), (3, 1.5), (6, 2.9)])
def test_gamma_vanishes_at_m_bounds(d, p):
    prm = make_params(d, p)
    for m in m_bounds(prm):
        x = 1 + prm.p * (m - 1) / 2          # 1/beta, may be <= 0 at m_minus
        assert abs(gamma_of_beta(prm, 1 / x) * x * x) < 1e-10
        if x > 0:
            e = flow_exponents(prm, m=m)
            assert abs(e.gamma) < 1e-10
            assert e.m == pytest.approx(m, rel=1e-12)
    mid = 0.5 * sum(m_bounds(prm))
    assert flow_exponents(prm, m=mid).gamma > 0
    assert flow_exponents(prm, m=m_bounds(prm)[1] + 0.1).gamma < 0


def test_m_beta_roundtrip():
    prm = make_params(4, 3.0)
    for beta in (0.3, 0.9, 1.7):
        assert flow_exponents(prm, m=m_from_beta(prm, beta)).beta == pytest.approx(beta)


def test_flow_exponent_errors():
    prm = make_params(3, 3.0)
    with pytest.raises(InvalidParameter):
        flow_exponents(prm, beta=-1.0)
    with pytest.raises(InvalidParameter):
        beta_star(make_params(3, 6.0))


# ---------------------------------------------------------------- phi and Psi

def _phi_oracle(prm, exps, s):
    """phi(s) = int_0^s exp(A(s) - A(t)) dt with A' = rate (1 - (p-2) t)^(-delta)."""
    r, q, dl = exps.phi_rate, prm.p - 2, exps.delta

    def A(t):
        return mp.quad(lambda x: r * (1 - q * x) ** (-dl), [0, t])

    As = A(s)
    return float(mp.quad(lambda t: mp.e ** (As - A(t)), [0, s]))


@pytest.mark.parametrize("d,p,s", [(3, 3.0, 0.5), (3, 3.0, 0.9), (4, 2.5, 1.2), (3, 1.5, 2.0)])
def test_phi_against_integrating_factor(d, p, s):
    prm = make_params(d, p)
    exps = flow_exponents(prm)
    s_max = min(s, 0.95 / (p - 2)) if p > 2 else s
    curve = solve_phi(prm, exps, s_max)
    mp.mp.dps = 20
    for t in (0.25 * s_max, 0.7 * s_max, s_max):
        assert curve(t) == pytest.approx(_phi_oracle(prm, exps, t), rel=1e-8)


def test_phi_properties():
    prm = make_params(3, 3.0)
    exps = flow_exponents(prm)
    curve = solve_phi(prm, exps, 0.9)
    assert curve.phi_values[0] == 0.0
    assert np.all(np.diff(curve.phi_values) > 0)
    s = curve.s_grid[1:]
    assert np.all(curve.phi_values[1:] > s)
    h = 1e-3
    taylor = (curve(h) - h) / h ** 2
    assert taylor == pytest.approx(exps.phi_rate / 2, rel=1e-2)


def test_phi_gamma_zero_is_identity():
    prm = make_params(3, 3.0)
    exps = replace(flow_exponents(prm), gamma=0.0, phi_rate=0.0)
    curve = solve_phi(prm, exps, 0.5)
    assert np.array_equal(curve.phi_values, curve.s_grid)
    s = np.linspace(0, 1.5, 7)
    assert np.all(psi(s, curve) == 0.0)


def test_phi_errors():
    prm = make_params(3, 3.0)
    exps = flow_exponents(prm)
    with pytest.raises(DomainError):
        solve_phi(prm, exps, 1.0)
    with pytest.raises(DomainError):
        solve_phi(prm, flow_exponents(prm, m=3.0), 0.5)
    curve = solve_phi(prm, exps, 0.5)
    with pytest.raises(DomainError):
        curve(0.6)
    with pytest.raises(DomainError):
        psi(3 * curve.phi_values[-1] * 1.01, curve)


def test_psi_examples():
    prm = make_params(3, 3.0)
    exps = flow_exponents(prm)
    curve = solve_phi(prm, exps, 0.9)
    assert psi(0.0, curve) == 0.0
    s = np.linspace(0, 3 * curve.phi_values[-1], 200)[1:]
    vals = psi(s, curve)
    assert np.all(vals > 0)
    assert np.all(np.diff(vals, 2) >= -1e-8)
    h = 1e-3
    assert psi(h, curve) / h ** 2 == pytest.approx(exps.phi_rate / (2 * 3), rel=2e-2)
    # inverse consistency
    y = curve(0.37)
    assert curve.inverse(y) == pytest.approx(0.37, abs=1e-12)


# ---------------------------------------------------------------- theta improvement

def test_theta_examples():
    prm = make_params(3, 3.0)
    assert 1 / theta_of(prm) == pytest.approx(1.56, abs=1e-14)
    g = build_grid(3, 32)
    assert theta_improvement(g.constant(1.0), prm) == pytest.approx((0.0, 0.0, 0.0), abs=1e-14)
    with pytest.raises(InvalidParameter):
        theta_improvement(g.constant(1.0), make_params(3, 5.0))


@given(st.floats(0.05, 0.99), st.floats(1.0, 50.0))
def test_theta_scalar_inequality(theta, t):
    assert theta * (t ** (1 / theta) - 1) >= (t - 1) * (1 - 1e-14)


# ---------------------------------------------------------------- remainder and cuts

def test_remainder_examples():
    g = build_grid(3, 48)
    prm = make_params(3, 4.0)
    assert remainder_functional(g.constant(1.0), prm, 0.3) == pytest.approx((0, 0), abs=1e-14)
    eps, kappa = 1e-2, 0.3
    c2 = basis_function(g, 2)
    _, rhs = remainder_functional(1 + eps * c2, prm, kappa)
    assert rhs == pytest.approx(kappa * eps ** 2 * eigenvalue(2, 3), rel=1e-10)
    # degree 1: the rhs is O(eps^4)
    r = [remainder_functional(1 + e * g.z, prm, kappa)[1] / e ** 4 for e in (1e-2, 5e-3)]
    assert r[0] == pytest.approx(r[1], rel=1e-3)


def test_cut_pieces_examples():
    d = 6
    g = build_grid(d, 32)
    prm = make_params(d, 3.0)
    c = CutConstants(gamma_cut=0.2, M=1.0)
    I1, I2, I3, (r1, r2, r3) = cut_functionals(g.constant(0.0), c, prm)
    assert (I1, I2, I3) == (0.0, 0.0, 0.0)
    _, _, _, (r1, r2, r3) = cut_functionals(g.constant(0.1), c, prm)
    assert np.all(r1.values == 0.1) and np.all(r2.values == 0) and np.all(r3.values == 0)
    _, _, _, (r1, r2, r3) = cut_functionals(g.constant(0.6), c, prm)
    assert np.allclose(r2.values, 0.4, atol=1e-15) and np.all(r3.values == 0)


@given(st.lists(st.floats(-1, 5), min_size=32, max_size=32))
def test_cut_pieces_sum(vals):
    d = 6
    g = build_grid(d, 32)
    from ineqlab.sphere import cut_pieces
    c = CutConstants(gamma_cut=0.3, M=2.0)
    r1, r2, r3 = cut_pieces(g.z.with_values(np.array(vals)), c)
    assert np.allclose(r1.values + r2.values + r3.values, vals, atol=1e-14)


def test_cut_constants_validation():
    with pytest.raises(InvalidParameter):
        CutConstants(gamma_cut=1.0, M=0.5)
    with pytest.raises(InvalidParameter):
        CutConstants(gamma_cut=0.1, M=1.0, M_bar=1.0)
    with pytest.raises(InvalidParameter):
        cut_functionals(build_grid(5, 16).z, CutConstants(0.1, 1.0), make_params(5, 3.0))
    with pytest.raises(PreconditionError):
        cut_expansion_bound(np.array([-2.0]), CutConstants(0.1, 1.0), 6)


def test_cut_expansion_bound_dominates_taylor_remainder():
    d = 8
    ts = 2 * d / (d - 2)
    # the constants are configuration; large enough ones make the bound hold
    c = CutConstants(gamma_cut=0.1, M=1.0, C_M=20.0, C_M_Mbar=20.0)
    r = np.linspace(-1, 20, 4001)
    lhs = (1 + r) ** ts - 1 - ts * r
    assert np.all(cut_expansion_bound(r, c, d) >= lhs - 1e-12 * (1 + np.abs(lhs)))


# ---------------------------------------------------------------- local stability ratio

def test_local_stability_ratio_examples():
    d = 3
    g = build_grid(d, 48)
    prm = make_params(d, 6.0)
    A = prm.A
    eps = 1e-3
    lam = lambda k: float(eigenvalue(k, d))  # noqa: E731
    o2 = (lam(2) - d) / (lam(2) + A)
    o3 = (lam(3) - d) / (lam(3) + A)
    assert o2 == pytest.approx(4 / 7) and o3 == pytest.approx(0.76190476, abs=1e-8)
    c2, c3 = basis_function(g, 2), basis_function(g, 3)
    assert local_stability_ratio(eps * c2, prm) == pytest.approx(o2, rel=2e-3)
    assert local_stability_ratio(eps * c3, prm) == pytest.approx(o3, rel=2e-3)
    mix = local_stability_ratio(eps * (c2 + c3) / math.sqrt(2), prm)
    assert o2 < mix < o3
    with pytest.raises(PreconditionError):
        local_stability_ratio(eps * g.z, prm)
    assert local_constant_form(0.1, 6) == pytest.approx(0.1)
