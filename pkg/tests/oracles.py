"""Independent reference values used by the tests.

Bump transforms come from Gauss-Legendre quadrature of the closed form and
momentum integrals from adaptive quadrature in the variable ``p = m sinh u``.
"""
import numpy as np
from scipy.integrate import quad

_XG, _WG = np.polynomial.legendre.leggauss(2000)


def bump_transform(center, width, p, amplitude=1.0, derivative=False):
    """Unitary transform of ``amplitude * exp(-1/(1-u^2))`` (or its derivative)."""
    p = np.atleast_1d(np.asarray(p, float))
    u = _XG
    b = np.exp(-1.0 / (1.0 - u**2))
    if derivative:
        b = b * (-2.0 * u / (1.0 - u**2) ** 2) / width
    x = center + width * u
    return amplitude * (width * _WG * b) @ np.exp(-1j * np.outer(x, p)) / np.sqrt(2 * np.pi)


def combo_transform(parts, p):
    """Transform of ``sum amp * bump(center, width)``; ``parts`` holds
    ``(center, width, amp, derivative)`` tuples."""
    return sum(bump_transform(c, w, p, a, d) for c, w, a, d in parts)


def momentum_integral(func, m, pmax=400.0):
    """``integral func(p) dp`` over ``|p| < pmax`` for a smooth ``func``."""
    if m > 0:
        U = np.arcsinh(pmax / m)
        edges = np.concatenate([-np.geomspace(U, 1e-3, 24), [0.0], np.geomspace(1e-3, U, 24)])

        def g(u):
            return float(np.squeeze(func(m * np.sinh(u)))) * m * np.cosh(u)

    else:
        edges = np.concatenate([-np.geomspace(pmax, 1e-12, 30), [0.0], np.geomspace(1e-12, pmax, 30)])

        def g(p):
            return float(np.squeeze(func(p)))
    return sum(
        quad(g, a, b, epsabs=0.0, epsrel=1e-12, limit=200)[0] for a, b in zip(edges[:-1], edges[1:])
    )


def mass_norm_sq(re_parts, im_parts, m):
    """``||f||_m^2`` for ``f = sum re_parts + i sum im_parts`` (real bump combinations)."""

    def integrand(p):
        w = np.hypot(p, m)
        F1 = combo_transform(re_parts, p)[0] if re_parts else 0.0
        F2 = combo_transform(im_parts, p)[0] if im_parts else 0.0
        return 0.5 * abs(F1 / np.sqrt(w) + 1j * np.sqrt(w) * F2) ** 2

    return momentum_integral(integrand, m)


def sobolev_sq(parts, m, s):
    def integrand(p):
        return np.hypot(p, m) ** s * abs(combo_transform(parts, p)[0]) ** 2

    return momentum_integral(integrand, m)


def bessel_k_series(order, x, dps=80):
    """``K_0`` or ``K_1`` from the ascending series in extended precision.

    Terms are summed until they drop below ``10**-dps`` relative to the
    running total; at ``x = 1`` about 50 terms are used.
    """
    import mpmath as mp

    with mp.workdps(dps):
        x = mp.mpf(x)
        z = x * x / 4
        lg = mp.log(x / 2)
        tol = mp.mpf(10) ** (-dps)
        if order == 0:
            # K0 = -(log(x/2) + gamma) I0 + sum z^k / (k!)^2 H_k
            i0, s, term, h, k = mp.mpf(0), mp.mpf(0), mp.mpf(1), mp.mpf(0), 0
            while True:
                i0 += term
                s += term * h
                k += 1
                term = term * z / (k * k)
                h += mp.mpf(1) / k
                if term < tol * abs(i0) and k > 5:
                    break
            return float(-(lg + mp.euler) * i0 + s)
        # K1 = 1/x + log(x/2) I1 - (x/4) sum (psi(k+1) + psi(k+2)) z^k / (k! (k+1)!)
        i1, s, term, k = mp.mpf(0), mp.mpf(0), mp.mpf(1), 0
        while True:
            i1 += term
            s += (mp.digamma(k + 1) + mp.digamma(k + 2)) * term
            k += 1
            term = term * z / (k * (k + 1))
            if term < tol * abs(i1) and k > 5:
                break
        return float(1 / x + lg * (x / 2) * i1 - (x / 4) * s)
