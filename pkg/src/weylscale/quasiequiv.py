"""Kernels of the massive/massless comparison and their trace-class diagnostics.

The difference of the real parts of the massive and massless one-particle
forms is given on null-integral real functions by

    1/2 integral (omega_m^-1 - |p|^-1) conj(f^) g^ dp
        = (2 pi)^-1 double integral f(x) g(y) Q-(x - y) dx dy,
    1/2 integral (omega_m - |p|) conj(f^) g^ dp
        = (2 pi)^-1 double integral f(x) g(y) Q+(x - y) dx dy,

with ``Q-(x) = K0(m|x|) + log|x|`` and ``Q+(x) = -(m/|x|) K1(m|x|) + 1/x^2``.
Both kernels split as ``-log|x| A(x) + B(x)`` with entire ``A`` and ``B``,
which drives every singular quadrature below.
"""
from dataclasses import dataclass

import numpy as np
from scipy import integrate, linalg, signal

from .errors import NumericalGuardError
from .sectors import RAMPS
from .testfn import (
    Grid,
    GridFunction,
    mass_inner,
    momentum_rule,
    random_null_function,
    require_null_real_moment,
)

EULER = np.euler_gamma

#: ascending series are used up to this argument
SERIES_MAX = 2.0
#: asymptotic expansion beyond this argument; the integral form in between
ASYMPTOTIC_MIN = 30.0

COND_MAX = 1e12


# -- Bessel functions -------------------------------------------------------------------


def _series_coefficients(kmax):
    k = np.arange(kmax)
    lf = np.cumprod(np.concatenate([[1.0], np.arange(1, kmax, dtype=float)]))  # k!
    harm = np.concatenate([[0.0], np.cumsum(1.0 / np.arange(1, kmax))])  # H_k
    a0 = 1.0 / lf**2
    a1 = 1.0 / (lf * lf * (k + 1))
    # psi(k + 1) + psi(k + 2) = -2 gamma + H_k + H_(k+1)
    psi2 = -2.0 * EULER + harm + harm + 1.0 / (k + 1)
    return a0, harm * a0, a1, psi2 * a1


def _n_terms(zmax):
    return int(30 + 6 * np.sqrt(max(zmax, 0.0)))


def _power_series(coef, z):
    """``sum coef_k z^k`` by Horner, vectorized over ``z``."""
    out = np.zeros_like(z)
    for c in coef[::-1]:
        out = out * z + c
    return out


def series_parts(x):
    """Entire building blocks of ``K0`` and ``K1`` at ``z = x^2/4``.

    Returns
    -------
    i0, s0, i1r, t1 : ndarray
        ``I0(x)``, ``sum H_k z^k/k!^2``, ``I1(x)/(x/2)`` and
        ``sum (psi(k+1) + psi(k+2)) z^k / (k! (k+1)!)``.
    """
    z = 0.25 * np.asarray(x, float) ** 2
    a0, s0, a1, t1 = _series_coefficients(_n_terms(np.max(z, initial=0.0)))
    return tuple(_power_series(c, z) for c in (a0, s0, a1, t1))


def _k_series(order, x):
    i0, s0, i1r, t1 = series_parts(x)
    lg = np.log(0.5 * x)
    if order == 0:
        return -(lg + EULER) * i0 + s0
    return 1.0 / x + lg * (0.5 * x) * i1r - 0.25 * x * t1


def _k_integral(order, x):
    # K_nu(x) = exp(-x) * integral_0^inf exp(-x (cosh t - 1)) cosh(nu t) dt; the
    # integrand is entire and decays double exponentially, so the trapezoid
    # rule converges geometrically in the step
    h = 0.02
    tmax = np.arccosh(1.0 + 800.0 / np.min(x)) + h
    t = np.arange(0.0, tmax, h)
    w = np.full(t.size, h)
    w[0] *= 0.5
    vals = np.exp(-x[:, None] * (np.cosh(t) - 1.0)) * np.cosh(order * t)
    return np.exp(-x) * (vals @ w)


def _k_asymptotic(order, x):
    mu = 4.0 * order**2
    term = np.ones_like(x)
    total = np.ones_like(x)
    for k in range(1, 30):
        term = term * (mu - (2 * k - 1) ** 2) / (k * 8.0 * x)
        total = total + term
    return np.sqrt(np.pi / (2.0 * x)) * np.exp(-x) * total


def bessel_k(order, x):
    """Modified Bessel function of the second kind, order 0 or 1.

    Ascending series for ``x <= 2``, a trapezoid rule on the integral
    representation for ``2 < x <= 30`` and the asymptotic expansion beyond.

    Parameters
    ----------
    order : {0, 1}
    x : float or array_like
        Positive arguments.

    Raises
    ------
    ValueError
        For ``x <= 0`` or an unsupported order.
    """
    if order not in (0, 1):
        raise ValueError("order must be 0 or 1")
    xa = np.asarray(x, float)
    if np.any(~(xa > 0)):
        raise ValueError("bessel_k requires x > 0")
    flat = np.atleast_1d(xa).ravel()
    out = np.empty_like(flat)
    lo = flat <= SERIES_MAX
    hi = flat > ASYMPTOTIC_MIN
    mid = ~lo & ~hi
    if lo.any():
        out[lo] = _k_series(order, flat[lo])
    if mid.any():
        out[mid] = _k_integral(order, flat[mid])
    if hi.any():
        out[hi] = _k_asymptotic(order, flat[hi])
    out = out.reshape(xa.shape)
    return float(out) if out.ndim == 0 else out


# -- kernels ----------------------------------------------------------------------------


def _kernel_args(x, m):
    if not m > 0:
        raise ValueError("mass must be positive")
    xa = np.abs(np.asarray(x, float))
    if np.any(xa == 0):
        raise ValueError("kernel is singular at x = 0; use the limit value")
    return xa


def _scalar(v):
    return float(v) if np.ndim(v) == 0 else v


def kernel_qminus(x, m):
    """``Q-(x) = K0(m|x|) + log|x|``; tends to ``log(2/m) - gamma`` at 0."""
    xa = _kernel_args(x, m)
    return _scalar(bessel_k(0, m * xa) + np.log(xa))


def kernel_qplus(x, m):
    """``Q+(x) = -(m/|x|) K1(m|x|) + 1/x^2``; logarithmically singular at 0."""
    xa = _kernel_args(x, m)
    z = m * xa
    out = np.empty_like(z)
    small = z <= SERIES_MAX
    # below the series cut the 1/x^2 terms cancel analytically
    if small.any():
        _, _, i1r, t1 = series_parts(z[small])
        xs = xa[small]
        out[small] = -(m * m / 2.0) * i1r * np.log(0.5 * z[small]) + 0.25 * m * m * t1
    if (~small).any():
        xs = xa[~small]
        out[~small] = -(m / xs) * bessel_k(1, z[~small]) + 1.0 / xs**2
    return _scalar(out)


def kernel_split_origin(sign, m):
    """``(A(0), B(0))`` in ``Q(x) = -log|x| A(x) + B(x)``."""
    if sign == "-":
        return 0.0, np.log(2.0 / m) - EULER
    return 0.5 * m * m, 0.5 * m * m * (-np.log(0.5 * m) - EULER + 0.5)


def kernel(sign, x, m):
    return kernel_qminus(x, m) if _sign(sign) == "-" else kernel_qplus(x, m)


def _sign(sign):
    s = {"-": "-", "minus": "-", -1: "-", "+": "+", "plus": "+", 1: "+"}.get(sign)
    if s is None:
        raise ValueError(f"sign must be '+' or '-', got {sign!r}")
    return s


# -- bilinear forms ---------------------------------------------------------------------


def form_q_matrix(sign, fs, gs, m):
    """Momentum-path values ``formQ(sign, f_i, g_j)`` for real functions on one grid."""
    s = _sign(sign)
    grid = fs[0].grid
    rm, r0 = momentum_rule(grid, m), momentum_rule(grid, 0.0)

    def spectra(rule, funcs):
        lo = min(f.support[0] for f in funcs)
        hi = max(f.support[1] for f in funcs)
        return rule.values(np.stack([f.samples.real for f in funcs]), (lo, hi))

    out = 0.0
    for rule, sgn in ((rm, 1.0), (r0, -1.0)):
        F = spectra(rule, fs)
        G = F if gs is fs else spectra(rule, gs)
        w = rule.weights_odd * (rule.inverse_omega() if s == "-" else rule.omega)
        out = out + sgn * 0.5 * ((np.conj(F) * w) @ G.T).real
    return out


def _position_path(s, f, g, m):
    grid = f.grid
    dx = grid.dx
    fi, gi = (grid.index_range(*h.support) for h in (f, g))
    a = f.samples.real[fi]
    b = g.samples.real[gi]
    # C(xi) = integral f(y + xi) g(y) dy on the lags between the two index windows
    corr = signal.fftconvolve(a, b[::-1]) * dx
    lags = (np.arange(corr.size) - (b.size - 1) + (fi.start - gi.start)) * dx
    zero = np.abs(lags) < 0.5 * dx
    q = np.zeros_like(corr)
    q[~zero] = kernel(s, lags[~zero], m)
    total = np.sum(corr * q) * dx
    if zero.any():
        a0, b0 = kernel_split_origin(s, m)
        # trapezoid rule for log|x| * phi(x): the node at 0 carries
        # -phi(0) dx log(dx / 2 pi) (zeta-function correction)
        c0 = corr[zero][0]
        total += c0 * dx * (b0 - a0 * np.log(dx / (2.0 * np.pi)))
    if not np.isfinite(total):
        raise NumericalGuardError("singular-cell", "non-finite position-path sum")
    return total / (2.0 * np.pi)


def form_q(sign, f, g, m, path="momentum"):
    """Bilinear form of ``Q-`` or ``Q+`` on null-integral real functions.

    Parameters
    ----------
    sign : {'-', '+'}
    f, g : GridFunction
        Real, with vanishing moment, on the same grid.
    m : float
        Positive mass.
    path : {'momentum', 'position'}
        ``momentum`` integrates ``1/2 (omega_m^-1 - |p|^-1) conj(f^) g^``
        (or ``omega_m - |p|``); ``position`` sums ``f(x) g(y) Q(x - y)``
        over grid pairs with a corrected diagonal.

    Raises
    ------
    ZeroModeError
        If either function has a nonzero moment.
    """
    s = _sign(sign)
    if not m > 0:
        raise ValueError("mass must be positive")
    f._check_grid(g)
    for h in (f, g):
        if not h.is_real:
            raise ValueError("form_q expects real functions")
    require_null_real_moment(f, g)
    if not (np.any(f.samples) and np.any(g.samples)):
        return 0.0
    if path == "momentum":
        return float(form_q_matrix(s, [f], [g], m)[0, 0])
    if path == "position":
        return float(_position_path(s, f, g, m))
    raise ValueError(f"unknown path {path!r}")


def inner_consistency(f, g, m):
    """``|Im <f, g>_m - 1/2 Im integral conj(f) g|``."""
    lhs = mass_inner(f, g, m).imag
    rhs = 0.5 * np.vdot(f.samples, g.samples).imag * f.grid.dx
    return float(abs(lhs - rhs))


# -- Fourier-coefficient diagnostics ----------------------------------------------------

#: period half-length and plateau of the cutoff
PERIOD_HALF = 4.0
PLATEAU = 2.0
CUTOFF_EDGE = 3.0
TRACE_NODES = 2**16


def default_cutoff(xi):
    """Smooth even cutoff, 1 on ``[-2, 2]`` and 0 outside ``(-3, 3)``."""
    a = np.abs(np.asarray(xi, float))
    s = 2.0 * (a - PLATEAU) / (CUTOFF_EDGE - PLATEAU) - 1.0
    return np.where(a >= CUTOFF_EDGE, 0.0, 1.0 - RAMPS["smoothstep"](s))


def _antiderivative_qplus(s, m):
    """``integral_0^s Q+`` from the power series of ``A`` and ``B``."""
    s = np.asarray(s, float)
    zmax = 0.25 * (m * np.max(np.abs(s), initial=0.0)) ** 2
    if zmax > 400:
        raise NumericalGuardError("series-range", "m * |xi| too large for the power series")
    _, _, a1, t1 = _series_coefficients(_n_terms(zmax))
    k = np.arange(a1.size)
    c = (0.5 * m) ** (2 * k)
    alpha = 0.5 * m * m * a1 * c  # A(s) = sum alpha_k s^(2k)
    beta = -np.log(0.5 * m) * alpha + 0.25 * m * m * t1 * c
    n = 2 * k + 1
    out = np.zeros_like(s)
    nz = s != 0
    sa, lg = s[nz], np.log(np.abs(s[nz]))
    s2 = sa * sa
    # integral_0^s u^(2k) (-log|u|) du = -s^(2k+1) (log|s| - 1/(2k+1)) / (2k+1)
    acc = np.zeros_like(sa)
    for j in range(a1.size - 1, -1, -1):
        acc = acc * s2 + (-alpha[j] * (lg - 1.0 / n[j]) + beta[j]) / n[j]
    out[nz] = acc * sa
    return out


@dataclass(frozen=True)
class TraceDiagnostic:
    """Fourier coefficients of ``Q * phi`` on ``[-4, 4]`` and their sums.

    Attributes
    ----------
    k : ndarray
        Indices ``-2K .. 2K``.
    coefficients : ndarray
        ``Q_k``, complex.
    exponent : float
        Least-squares slope of ``-log|Q_k|`` against ``log k`` over ``K <= k <= 2K``.
    partial_sums : tuple of float
        Weighted sums up to ``K`` and ``2K``.
    increment : float
        ``(S_2K - S_K) / S_2K``.
    c0, c0_quadrature : float
        ``Q_0`` from the series and from adaptive quadrature.
    """

    sign: str
    mass: float
    K: int
    k: np.ndarray
    coefficients: np.ndarray
    exponent: float
    partial_sums: tuple
    increment: float
    c0: float
    c0_quadrature: float

    def to_rows(self):
        return [(int(k), float(c.real), float(c.imag)) for k, c in zip(self.k, self.coefficients)]

    def summary(self):
        return {
            "sign": self.sign,
            "mass": self.mass,
            "K": self.K,
            "exponent": self.exponent,
            "partial_sum_K": self.partial_sums[0],
            "partial_sum_2K": self.partial_sums[1],
            "increment": self.increment,
            "c0": self.c0,
            "c0_quadrature": self.c0_quadrature,
        }


def _check_cutoff(cutoff):
    probe = np.linspace(-PLATEAU, PLATEAU, 401)
    if np.max(np.abs(cutoff(probe) - 1.0)) > 1e-12:
        raise ValueError("cutoff must equal 1 on [-2, 2]")
    edge = np.array([-PERIOD_HALF, PERIOD_HALF])
    if np.max(np.abs(cutoff(edge))) > 1e-12:
        raise ValueError("cutoff must vanish at the period ends")


def _direct_c0(s, m, cutoff):
    def f(x):
        return kernel(s, x, m) * float(cutoff(x))

    tot = 0.0
    for lo, hi in ((-PERIOD_HALF, 0.0), (0.0, PERIOD_HALF)):
        val, _ = integrate.quad(f, lo, hi, epsabs=1e-14, epsrel=1e-13, limit=400)
        tot += val
    return tot / (2.0 * PERIOD_HALF)


def fourier_trace_diagnostic(sign, m, cutoff=None, K=256, nodes=TRACE_NODES):
    """Trace-class diagnostic through the Fourier series of ``Q * phi``.

    ``Q_k = (1/8) integral_{-4}^{4} Q(xi) phi(xi) exp(-i pi k xi / 4) dxi``.
    For ``Q-`` the periodic samples are transformed directly; the
    trapezoid rule is exact up to ``O(h^3)`` because ``A-(0) = 0``. For
    ``Q+`` the kernel is integrated first, ``R(xi) = integral_{-2}^{xi} Q+``,
    and ``Q_k = (i pi k / 4) (R phi)_k - (R phi')_k``.

    Weighted sums are ``sum |Q_k| (1 + |k|)`` for ``Q-`` and
    ``sum_{k != 0} |Q_k| / sqrt|k|`` for ``Q+``.
    """
    s = _sign(sign)
    if not m > 0:
        raise ValueError("mass must be positive")
    if K < 64:
        raise ValueError("K must be at least 64")
    cutoff = default_cutoff if cutoff is None else cutoff
    _check_cutoff(cutoff)
    if 2 * K >= nodes // 8:
        raise ValueError("too few nodes for the requested K")
    h = 2.0 * PERIOD_HALF / nodes
    xi = -PERIOD_HALF + h * np.arange(nodes)
    phi = cutoff(xi)
    kk = np.fft.fftfreq(nodes, d=1.0 / nodes)
    # (1/8) h sum_j v_j exp(-i pi k xi_j / 4), xi_j = -4 + j h
    phase = np.exp(1j * np.pi * kk)

    def coeffs(v):
        return np.fft.fft(v) * phase * h / (2.0 * PERIOD_HALF)

    if s == "-":
        q = np.empty(nodes)
        z = np.abs(xi) < 0.5 * h
        q[~z] = kernel_qminus(xi[~z], m)
        q[z] = kernel_split_origin("-", m)[1]
        c = coeffs(q * phi)
    else:
        R = _antiderivative_qplus(xi, m) - _antiderivative_qplus(np.array([-PLATEAU]), m)[0]
        dphi = np.fft.ifft(np.fft.fft(phi) * 1j * np.pi * kk / PERIOD_HALF).real
        c = 1j * np.pi * kk / PERIOD_HALF * coeffs(R * phi) - coeffs(R * dphi)
    k = np.arange(-2 * K, 2 * K + 1)
    ck = c[k % nodes]
    a = np.abs(ck)
    kabs = np.abs(k)
    if s == "-":
        w = 1.0 + kabs
    else:
        w = np.where(kabs > 0, 1.0 / np.sqrt(np.maximum(kabs, 1)), 0.0)
    s_k = float(np.sum((a * w)[kabs <= K]))
    s_2k = float(np.sum(a * w))
    fit = (k >= K) & (k <= 2 * K)
    slope = np.polyfit(np.log(k[fit]), np.log(a[fit]), 1)[0]
    return TraceDiagnostic(
        sign=s,
        mass=float(m),
        K=int(K),
        k=k,
        coefficients=ck,
        exponent=float(-slope),
        partial_sums=(s_k, s_2k),
        increment=(s_2k - s_k) / s_2k,
        c0=float(ck[2 * K].real),
        c0_quadrature=float(_direct_c0(s, m, cutoff)),
    )


# -- norm equivalence -------------------------------------------------------------------


@dataclass(frozen=True)
class NormEquivalenceReport:
    """Empirical constants relating the massive and massless Sobolev norms.

    ``ratio_plus = ||f||_{m,1} / ||f||_{0,1}`` and
    ``ratio_minus = ||f||_{0,-1} / ||f||_{m,-1}``, both at least 1.
    """

    interval: tuple
    mass: float
    ratio_plus: np.ndarray
    ratio_minus: np.ndarray
    one_sided_ok: bool
    omega_bound_ok: bool

    def summary(self):
        return {
            "samples": int(self.ratio_plus.size),
            "max_ratio_plus": float(self.ratio_plus.max()),
            "min_ratio_plus": float(self.ratio_plus.min()),
            "max_ratio_minus": float(self.ratio_minus.max()),
            "min_ratio_minus": float(self.ratio_minus.min()),
            "one_sided_ok": self.one_sided_ok,
            "omega_bound_ok": self.omega_bound_ok,
        }


def omega_bound_holds(p, m):
    """``omega_m(p) <= sqrt(1 + m^2) |p| + m 1_{|p| <= 1}`` at every node."""
    p = np.asarray(p, float)
    lhs = np.hypot(p, m)
    rhs = np.sqrt(1.0 + m * m) * np.abs(p) + m * (np.abs(p) <= 1.0)
    return bool(np.all(lhs <= rhs * (1.0 + 1e-15)))


def norm_equivalence(interval, m, samples, seed, grid=None):
    """Ratios of the ``m`` and ``0`` Sobolev norms over random null-integral functions.

    Functions are drawn with :func:`random_null_function` from a Philox
    generator seeded with ``seed``; a larger sample count extends the same
    stream.

    Raises
    ------
    ValueError
        If ``samples < 20``.
    NumericalGuardError
        If a sample has vanishing norm.
    """
    if samples < 20:
        raise ValueError("at least 20 samples are required")
    if not m > 0:
        raise ValueError("mass must be positive")
    grid = grid or Grid()
    rng = np.random.Generator(np.random.Philox(seed))
    fs = [random_null_function(rng, interval, grid) for _ in range(samples)]
    stack = np.stack([f.samples.real for f in fs])
    norms = {}
    for mass in (m, 0.0):
        rule = momentum_rule(grid, mass)
        P = np.abs(rule.values(stack, tuple(interval))) ** 2
        norms[mass, 1] = np.sqrt(rule.integrate(odd=rule.omega * P))
        norms[mass, -1] = np.sqrt(rule.integrate(odd=rule.inverse_omega() * P))
    if min(v.min() for v in norms.values()) <= 0:
        raise NumericalGuardError("degenerate-sample", "a sample has vanishing norm")
    rtol = 1e-12
    ok = bool(
        np.all(norms[0.0, 1] <= norms[m, 1] * (1 + rtol))
        and np.all(norms[m, -1] <= norms[0.0, -1] * (1 + rtol))
    )
    rp = norms[m, 1] / norms[0.0, 1]
    rm = norms[0.0, -1] / norms[m, -1]
    rule = momentum_rule(grid, m)
    return NormEquivalenceReport(
        tuple(interval), float(m), rp, rm, bool(ok), omega_bound_holds(rule.p, m)
    )


# -- Galerkin model ---------------------------------------------------------------------

#: trapezoid nodes discretizing the weight of the orthogonal polynomials
WEIGHT_NODES = 4000


def _window_weight(u):
    return np.exp(-2.0 / (1.0 - u * u))


def window_recurrence(N, nodes=WEIGHT_NODES):
    """Recurrence of the polynomials orthonormal for ``exp(-2/(1-u^2))`` on ``(-1, 1)``.

    Lanczos on the discretized measure with full reorthogonalization. The
    weight is flat to all orders at the ends, so the trapezoid rule
    discretizes it with spectral accuracy.

    Returns
    -------
    alpha : ndarray, shape (N,)
    beta : ndarray, shape (N + 1,)
        ``beta[0] = 0``.
    mu0 : float
        Total mass of the weight.
    """
    x = np.linspace(-1.0, 1.0, nodes + 2)[1:-1]
    w = _window_weight(x) * (x[1] - x[0])
    v = np.sqrt(w)
    v = v / np.linalg.norm(v)
    V = [v]
    alpha, beta = np.empty(N), np.zeros(N + 1)
    for k in range(N):
        z = x * V[-1]
        alpha[k] = V[-1] @ z
        for u in V:
            z = z - (u @ z) * u
        beta[k + 1] = np.linalg.norm(z)
        V.append(z / beta[k + 1])
    return alpha, beta, float(np.sum(w))


def galerkin_raw_basis(interval, N, grid):
    """``(psi q_k(u))'`` for ``k < N``.

    ``u`` maps ``I`` affinely onto ``(-1, 1)``, ``psi = exp(-1/(1-u^2))`` and
    ``q_k`` are orthonormal for ``psi^2``, so the functions ``psi q_k`` are
    orthogonal in ``L^2(I)`` and smooth.
    """
    a, b = interval
    c, ell = 0.5 * (a + b), 0.5 * (b - a)
    grid.check_interval(a, b, "Galerkin interval")
    sl = grid.index_range(a, b)
    u = (grid.x[sl] - c) / ell
    inside = np.abs(u) < 1.0
    uu = np.where(inside, u, 0.0)
    psi = np.where(inside, np.exp(-1.0 / (1.0 - uu**2)), 0.0)
    dpsi = psi * (-2.0 * uu / (1.0 - uu**2) ** 2)
    alpha, beta, mu0 = window_recurrence(N)
    q_prev, q = np.zeros_like(u), np.full_like(u, 1.0 / np.sqrt(mu0))
    dq_prev, dq = np.zeros_like(u), np.zeros_like(u)
    out = []
    for k in range(N):
        s = np.zeros(grid.n)
        s[sl] = (dpsi * q + psi * dq) / ell
        out.append(GridFunction(grid, s, (a, b)))
        q_next = ((u - alpha[k]) * q - beta[k] * q_prev) / beta[k + 1]
        dq_next = (q + (u - alpha[k]) * dq - beta[k] * dq_prev) / beta[k + 1]
        q_prev, q, dq_prev, dq = q, q_next, dq, dq_next
    return out


@dataclass(frozen=True, eq=False)
class GalerkinModel:
    """Galerkin truncation of ``Re <., .>_m``, ``Re <., .>_0`` and ``sigma/2``.

    The real-linear space is spanned by ``c_k`` (real functions) and
    ``i d_k``; ``c`` is orthonormal for ``||.||_{m,-1}^2 / 2`` and ``d``
    for ``||.||_{m,1}^2 / 2``, so ``gram_m`` is the identity. Matrices are
    ``2N x 2N`` with the real block first.

    Attributes
    ----------
    coef_re, coef_im : ndarray
        Rows express ``c_k`` and ``d_k`` in the raw basis.
    """

    interval: tuple
    basis_size: int
    mass: float
    mass_ref: float
    grid: Grid
    basis_re: tuple
    basis_im: tuple
    coef_re: np.ndarray
    coef_im: np.ndarray
    gram_m: np.ndarray
    gram_0: np.ndarray
    omega: np.ndarray
    condition: float

    @property
    def basis(self):
        return self.basis_re + tuple(1j * d for d in self.basis_im)


def _gram_blocks(fs, grid, m, support):
    rule = momentum_rule(grid, m)
    F = rule.values(np.stack([f.samples.real for f in fs]), support)
    conjF = np.conj(F)
    gm = 0.5 * ((conjF * (rule.weights_odd * rule.inverse_omega())) @ F.T).real
    gp = 0.5 * ((conjF * (rule.weights_odd * rule.omega)) @ F.T).real
    sym = lambda a: 0.5 * (a + a.T)  # noqa: E731
    return sym(gm), sym(gp)


def _orthonormalizer(G):
    d = 1.0 / np.sqrt(np.diag(G))
    Gs = G * d[:, None] * d[None, :]
    cond = np.linalg.cond(Gs)
    if not cond < COND_MAX:
        raise NumericalGuardError("ill-conditioned-gram", f"condition number {cond:.2e}")
    # rows of C: new basis in terms of the raw one, C G C^T = 1; the second
    # pass removes the rounding left by the first
    C = np.diag(d)
    for _ in range(2):
        H = C @ G @ C.T
        L = linalg.cholesky(0.5 * (H + H.T), lower=True)
        C = linalg.solve_triangular(L, C, lower=True)
    return C, cond


def galerkin_grid(interval, N=64):
    """Grid of half width ``4 max|I|``; 4096 nodes up to ``N = 64``, 8192 beyond."""
    r = max(abs(interval[0]), abs(interval[1]))
    return Grid(4096 if N <= 64 else 8192, 4.0 * r)


def build_galerkin(interval, m, N, m_ref=0.0, grid=None):
    """Galerkin model on ``interval`` with ``N`` raw functions per block.

    Parameters
    ----------
    interval : tuple of float
    m : float
        Mass of ``gram_m``, positive.
    N : int
        At most 128.
    m_ref : float
        Mass of ``gram_0``; 0 by default.
    grid : Grid, optional
        Defaults to :func:`galerkin_grid`.

    Raises
    ------
    NumericalGuardError
        If a diagonally scaled Gram matrix has condition number above 1e12.
    """
    if not 1 <= N <= 128:
        raise ValueError("N must be between 1 and 128")
    if not m > 0 or m_ref < 0:
        raise ValueError("invalid masses")
    grid = grid or galerkin_grid(interval, N)
    raw = galerkin_raw_basis(interval, N, grid)
    support = tuple(interval)
    gm_minus, gm_plus = _gram_blocks(raw, grid, m, support)
    g0_minus, g0_plus = _gram_blocks(raw, grid, m_ref, support)
    Cr, cond_r = _orthonormalizer(gm_minus)
    Ci, cond_i = _orthonormalizer(gm_plus)
    S = np.stack([f.samples.real for f in raw])
    S = S @ S.T * grid.dx
    Z = np.zeros((N, N))
    gram_m = np.block([[Cr @ gm_minus @ Cr.T, Z], [Z, Ci @ gm_plus @ Ci.T]])
    gram_0 = np.block([[Cr @ g0_minus @ Cr.T, Z], [Z, Ci @ g0_plus @ Ci.T]])
    # sigma(f, g)/2 = 1/2 Im integral conj(f) g; between c_i and i d_j it is 1/2 (c_i, d_j)
    half = 0.5 * Cr @ S @ Ci.T
    omega = np.block([[Z, half], [-half.T, Z]])

    def combine(C):
        R = np.stack([f.samples.real for f in raw])
        return tuple(GridFunction(grid, row, support) for row in C @ R)

    return GalerkinModel(
        interval=support,
        basis_size=N,
        mass=float(m),
        mass_ref=float(m_ref),
        grid=grid,
        basis_re=combine(Cr),
        basis_im=combine(Ci),
        coef_re=Cr,
        coef_im=Ci,
        gram_m=gram_m,
        gram_0=gram_0,
        omega=omega,
        condition=float(max(cond_r, cond_i)),
    )


@dataclass(frozen=True)
class OperatorDiagnostics:
    """Spectral data of ``1 - T`` and the consistency residuals."""

    eigenvalues: np.ndarray
    trace_norm: float
    partial_trace_norms: np.ndarray
    cross_check_residual: float
    cross_check_skipped: bool
    form_residual: float
    min_singular_r0: float

    def summary(self):
        return {
            "trace_norm": self.trace_norm,
            "largest_eigenvalue": float(np.abs(self.eigenvalues).max(initial=0.0)),
            "cross_check_residual": self.cross_check_residual,
            "cross_check_skipped": self.cross_check_skipped,
            "form_residual": self.form_residual,
            "min_singular_r0": self.min_singular_r0,
        }


def operator_diagnostics(gm, singular_rtol=1e-12):
    """``R_m``, ``T`` and the spectrum of ``1 - T`` for a Galerkin model.

    ``R_m`` solves ``gram_m R = omega`` and ``T`` solves ``gram_m T = gram_0``.
    The identity ``T = R_m R_0^-1`` is checked unless ``R_0`` is numerically
    singular, in which case the check is skipped and flagged. The matrix of
    ``1 - T`` is compared with the momentum-path forms of ``Q-`` on the real
    block and ``Q+`` on the imaginary block.
    """
    Gm, G0, W = gm.gram_m, gm.gram_0, gm.omega
    Rm = linalg.solve(Gm, W, assume_a="sym")
    T = linalg.solve(Gm, G0, assume_a="sym")
    I_T = np.eye(T.shape[0]) - T
    eig = linalg.eigh(Gm - G0, Gm, eigvals_only=True)
    eig = eig[np.argsort(-np.abs(eig))]
    partial = np.cumsum(np.abs(eig))
    sv = linalg.svdvals(G0)
    skipped = bool(sv.min() <= singular_rtol * sv.max())
    R0 = None if skipped else linalg.solve(G0, W, assume_a="sym")
    smin = float(linalg.svdvals(R0).min()) if R0 is not None else 0.0
    if R0 is not None and smin > singular_rtol * linalg.norm(R0, 2):
        cross = float(np.abs(Rm @ np.linalg.inv(R0) - T).max())
    else:
        skipped, cross = True, float("nan")
    if gm.mass_ref == 0:
        q_minus = form_q_matrix("-", list(gm.basis_re), list(gm.basis_re), gm.mass)
        q_plus = form_q_matrix("+", list(gm.basis_im), list(gm.basis_im), gm.mass)
        N = gm.basis_size
        form_res = float(
            max(np.abs(I_T[:N, :N] - q_minus).max(), np.abs(I_T[N:, N:] - q_plus).max())
        )
    else:
        form_res = float("nan")
    return OperatorDiagnostics(
        eigenvalues=eig,
        trace_norm=float(partial[-1]) if partial.size else 0.0,
        partial_trace_norms=partial,
        cross_check_residual=cross,
        cross_check_skipped=skipped,
        form_residual=form_res,
        min_singular_r0=smin,
    )


def trace_norm_convergence(interval, m, N=64):
    """Trace norms of ``1 - T`` at ``N/2`` and ``N`` and their relative change."""
    t_half = operator_diagnostics(build_galerkin(interval, m, N // 2)).trace_norm
    t_full = operator_diagnostics(build_galerkin(interval, m, N)).trace_norm
    return {"trace_half": t_half, "trace": t_full, "relative_change": abs(t_full - t_half) / t_full}
