"""Independent reference values computed with mpmath (no package code involved)."""

import mpmath as mp

mp.mp.dps = 30


def sphere_z_moment(d, k):
    """int z^k dsigma_d by direct integration against (1 - z^2)^(d/2 - 1)."""
    w = lambda z: (1 - z * z) ** (mp.mpf(d) / 2 - 1)  # noqa: E731
    num = mp.quad(lambda z: z ** k * w(z), [-1, 0, 1])
    return float(num / mp.quad(w, [-1, 0, 1]))


def sphere_integral(d, fn):
    w = lambda z: (1 - z * z) ** (mp.mpf(d) / 2 - 1)  # noqa: E731
    return float(mp.quad(lambda z: fn(z) * w(z), [-1, 0, 1]) / mp.quad(w, [-1, 0, 1]))


def gaussian_integral(fn):
    """int fn dgamma on R with dgamma = e^(-pi x^2) dx."""
    return float(mp.quad(lambda x: fn(x) * mp.e ** (-mp.pi * x * x), [-mp.inf, 0, mp.inf]))


def sphere_area(d):
    return float(2 * mp.pi ** (mp.mpf(d + 1) / 2) / mp.gamma(mp.mpf(d + 1) / 2))
