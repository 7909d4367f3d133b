"""Test functions on a uniform grid, their spectra and the mass norms.

The Fourier convention is unitary,

    f^(p) = (2 pi)^(-1/2) * integral f(x) exp(-i p x) dx,

discretized on the nodes ``x_j = -L + j dx`` with ``dx = 2L / (N - 1)`` and
momentum nodes ``p_k = k dp`` with ``dp = 2 pi / (N dx)``.

Momentum integrals weighted by ``omega_m(p)**(+-1)`` are evaluated with
:class:`MomentumRule`, which splits the integrand with ``erf(omega/s)`` so
that the part handled on the FFT nodes is an entire function of ``p`` and
the remainder near ``p = 0`` is integrated in a hyperbolic variable.
"""
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.special import erf, erfc

from .errors import SupportError, ZeroModeError

SQRT2PI = np.sqrt(2.0 * np.pi)

#: relative zero-mode threshold, see :func:`zero_mode_tolerance`
ZERO_MODE_RTOL = 1e-8

_TAIL_TOL = 1e-14
_CHUNK = 2_000_000


@dataclass(frozen=True)
class Grid:
    """Uniform grid on ``[-half_width, half_width]`` with ``n`` nodes.

    Parameters
    ----------
    n : int
        Number of nodes, a power of two.
    half_width : float
        Half length ``L`` of the domain.
    """

    n: int = 4096
    half_width: float = 32.0

    def __post_init__(self):
        n = int(self.n)
        if n < 8 or n & (n - 1):
            raise ValueError(f"grid size must be a power of two >= 8, got {self.n}")
        if not self.half_width > 0:
            raise ValueError("half_width must be positive")
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "half_width", float(self.half_width))

    @property
    def dx(self):
        return 2.0 * self.half_width / (self.n - 1)

    @property
    def dp(self):
        return 2.0 * np.pi / (self.n * self.dx)

    @cached_property
    def x(self):
        x = -self.half_width + self.dx * np.arange(self.n)
        x.setflags(write=False)
        return x

    @cached_property
    def p(self):
        """Momentum nodes in ascending order."""
        p = self.dp * (np.arange(self.n) - self.n // 2)
        p.setflags(write=False)
        return p

    def refine(self):
        """Grid with twice the nodes on the same domain."""
        return Grid(2 * self.n, self.half_width)

    def index_range(self, lo, hi):
        """Slice of node indices covering the closed interval ``[lo, hi]``."""
        i0 = max(int(np.floor((lo + self.half_width) / self.dx)), 0)
        i1 = min(int(np.ceil((hi + self.half_width) / self.dx)) + 1, self.n)
        return slice(i0, i1)

    def check_interval(self, lo, hi, what="support"):
        L = self.half_width
        if not (-L < lo <= hi < L):
            raise SupportError(
                f"{what} [{lo:.6g}, {hi:.6g}] is not strictly inside [-{L:g}, {L:g}]"
            )


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Complex test function sampled on a :class:`Grid`.

    Parameters
    ----------
    grid : Grid
    samples : array_like
        Complex values at ``grid.x``.
    support : tuple of float
        Declared support ``(lo, hi)``; samples outside must vanish.
    """

    grid: Grid
    samples: np.ndarray
    support: tuple

    def __post_init__(self):
        s = np.array(self.samples, dtype=complex)
        if s.shape != (self.grid.n,):
            raise ValueError(f"expected {self.grid.n} samples, got shape {s.shape}")
        lo, hi = (float(v) for v in self.support)
        self.grid.check_interval(lo, hi)
        sl = self.grid.index_range(lo, hi)
        outside = np.concatenate([s[: sl.start], s[sl.stop:]])
        if outside.size:
            x = self.grid.x
            mask = np.ones(s.size, bool)
            mask[sl] = False
            # nodes right at the edge of the closed interval count as inside
            mask &= (x < lo - 1e-12) | (x > hi + 1e-12)
            peak = max(1.0, float(np.abs(s).max(initial=0.0)))
            if np.abs(s[mask]).max(initial=0.0) >= _TAIL_TOL * peak:
                raise SupportError("samples do not vanish outside the declared support")
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)
        object.__setattr__(self, "support", (lo, hi))

    # -- construction helpers -------------------------------------------------
    @classmethod
    def zero(cls, grid, support=(-1.0, 1.0)):
        return cls(grid, np.zeros(grid.n, complex), support)

    @classmethod
    def from_function(cls, grid, func, support):
        """Sample ``func`` inside ``support`` and zero elsewhere."""
        lo, hi = support
        grid.check_interval(lo, hi)
        x = grid.x
        inside = (x > lo) & (x < hi)
        s = np.zeros(grid.n, complex)
        s[inside] = func(x[inside])
        return cls(grid, s, (lo, hi))

    def truncated(self, support):
        """Copy with samples outside ``support`` set to zero.

        Used after spectral operations, whose round-off spreads over the
        whole grid although the exact result vanishes there.
        """
        lo, hi = support
        x = self.grid.x
        s = np.where((x >= lo - 1e-12) & (x <= hi + 1e-12), self.samples, 0.0)
        return GridFunction(self.grid, s, (lo, hi))

    # -- algebra --------------------------------------------------------------
    def _check_grid(self, other):
        if self.grid != other.grid:
            raise ValueError("grid functions live on different grids")

    def __add__(self, other):
        self._check_grid(other)
        lo = min(self.support[0], other.support[0])
        hi = max(self.support[1], other.support[1])
        return GridFunction(self.grid, self.samples + other.samples, (lo, hi))

    def __neg__(self):
        return GridFunction(self.grid, -self.samples, self.support)

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, c):
        if not np.isscalar(c):
            return NotImplemented
        return GridFunction(self.grid, complex(c) * self.samples, self.support)

    __rmul__ = __mul__

    @property
    def real(self):
        return GridFunction(self.grid, self.samples.real, self.support)

    @property
    def imag(self):
        return GridFunction(self.grid, self.samples.imag, self.support)

    def conj(self):
        return GridFunction(self.grid, self.samples.conj(), self.support)

    @property
    def is_real(self):
        return not np.any(self.samples.imag)

    @property
    def support_radius(self):
        """Largest ``|x|`` of the declared support."""
        return max(abs(self.support[0]), abs(self.support[1]))

    # -- scalar functionals -----------------------------------------------------
    def moment(self):
        """Trapezoid value of ``integral f``; samples vanish at both ends."""
        return complex(self.samples.sum() * self.grid.dx)

    def zero_mode(self):
        """``(Re f)^(0)``."""
        return self.moment().real / SQRT2PI

    def l1_scale(self):
        return float(np.abs(self.samples).sum() * self.grid.dx / SQRT2PI)

    def has_zero_mode(self):
        return abs(self.zero_mode()) > zero_mode_tolerance(self)

    # -- serialization ----------------------------------------------------------
    def to_columns(self):
        """Whitespace separated ``x Re Im`` rows."""
        rows = (
            f"{x:.17g} {v.real:.17g} {v.imag:.17g}"
            for x, v in zip(self.grid.x, self.samples)
        )
        return "\n".join(rows) + "\n"

    def to_json(self):
        return {
            "domain": [-self.grid.half_width, self.grid.half_width],
            "dx": self.grid.dx,
            "n": self.grid.n,
            "support": list(self.support),
            "samples": [[float(v.real), float(v.imag)] for v in self.samples],
        }

    @classmethod
    def from_json(cls, data):
        grid = Grid(int(data["n"]), float(data["domain"][1]))
        s = np.array([complex(a, b) for a, b in data["samples"]])
        return cls(grid, s, tuple(data["support"]))


def zero_mode_tolerance(f):
    """Threshold below which ``|(Re f)^(0)|`` counts as zero.

    Scaled by ``(2 pi)^(-1/2) integral |f|``, the natural bound for the
    transform at ``p = 0``.
    """
    return ZERO_MODE_RTOL * max(f.l1_scale(), 1e-300)


def require_null_real_moment(*fs):
    for f in fs:
        if f.has_zero_mode():
            raise ZeroModeError(
                f"real zero mode {f.zero_mode():.3e} exceeds tolerance "
                f"{zero_mode_tolerance(f):.3e}"
            )


# -- generators -------------------------------------------------------------------


def _bump_profile(u):
    out = np.zeros_like(u)
    inside = np.abs(u) < 1
    out[inside] = np.exp(-1.0 / (1.0 - u[inside] ** 2))
    return out


def make_bump(center, width, amplitude=1.0, grid=None):
    """Bump ``amplitude * exp(-1/(1-u^2))`` with ``u = (x - center)/width``.

    Raises
    ------
    SupportError
        If ``[center - width, center + width]`` is not inside the domain.
    """
    grid = grid or Grid()
    if not width > 0:
        raise ValueError("width must be positive")
    return GridFunction.from_function(
        grid,
        lambda x: amplitude * _bump_profile((x - center) / width),
        (center - width, center + width),
    )


def make_bump_derivative(center, width, amplitude=1.0, grid=None):
    """Analytic ``d/dx`` of :func:`make_bump`; its integral vanishes."""
    grid = grid or Grid()
    if not width > 0:
        raise ValueError("width must be positive")

    def deriv(x):
        u = (x - center) / width
        return amplitude * _bump_profile(u) * (-2.0 * u / (1.0 - u**2) ** 2) / width

    return GridFunction.from_function(grid, deriv, (center - width, center + width))


def random_null_function(rng, interval=(-1.0, 1.0), grid=None, complex_valued=False):
    """Difference of two disjoint bumps with cancelling moments.

    Parameters
    ----------
    rng : numpy.random.Generator
    interval : tuple of float
        The function is supported inside this open interval.
    complex_valued : bool
        Draw a complex amplitude instead of a real one.
    """
    grid = grid or Grid()
    a, b = interval
    mid = a + (b - a) * rng.uniform(0.35, 0.65)
    pieces = []
    for lo, hi in ((a, mid), (mid, b)):
        w = 0.5 * (hi - lo) * rng.uniform(0.5, 0.95)
        c = rng.uniform(lo + w, hi - w)
        pieces.append(make_bump(c, w, 1.0, grid))
    amp = rng.normal()
    if complex_valued:
        amp = complex(amp, rng.normal())
    b1, b2 = pieces
    ratio = b1.moment().real / b2.moment().real
    return amp * (b1 - ratio * b2)


# -- transforms ---------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Transform values at ``grid.p`` (ascending momentum order)."""

    grid: Grid
    values: np.ndarray

    @property
    def p(self):
        return self.grid.p

    @property
    def dp(self):
        return self.grid.dp

    def inverse(self):
        """Samples reproduced by the inverse discrete transform."""
        g = self.grid
        v = np.fft.ifftshift(self.values) * np.exp(-1j * np.fft.ifftshift(g.p) * g.half_width)
        return np.fft.ifft(v) * g.n * g.dp / SQRT2PI


def _fft_values(samples, grid):
    """Transform of raw samples in FFT order."""
    pk = np.fft.fftfreq(grid.n, d=grid.dx) * 2.0 * np.pi
    return np.fft.fft(samples) * np.exp(1j * pk * grid.half_width) * grid.dx / SQRT2PI


def fourier(f):
    """Discrete unitary transform of ``f`` at the ascending nodes ``grid.p``."""
    return Spectrum(f.grid, np.fft.fftshift(_fft_values(f.samples, f.grid)))


def transform_at(samples, grid, p, support=None):
    """Direct evaluation of the discrete transform at arbitrary momenta.

    Only nodes inside ``support`` contribute, which keeps the cost
    proportional to the support length.
    """
    samples = np.asarray(samples)
    p = np.asarray(p, dtype=float)
    sl = grid.index_range(*support) if support is not None else slice(0, grid.n)
    x = grid.x[sl]
    s = samples[..., sl]
    out = np.empty(s.shape[:-1] + p.shape, complex)
    step = max(1, _CHUNK // max(x.size, 1))
    for i in range(0, p.size, step):
        phase = np.exp(-1j * np.outer(p[i : i + step], x))
        out[..., i : i + step] = s @ phase.T
    return out * grid.dx / SQRT2PI


def evaluate(f, x):
    """Band-limited interpolation of ``f`` at arbitrary points ``x``."""
    spec = fourier(f)
    keep = np.abs(spec.values) > 1e-17 * max(np.abs(spec.values).max(), 1e-300)
    p = spec.p[keep]
    v = spec.values[keep]
    x = np.asarray(x, dtype=float)
    out = np.empty(x.shape, complex)
    flat = x.ravel()
    res = out.reshape(-1)
    step = max(1, _CHUNK // max(p.size, 1))
    for i in range(0, flat.size, step):
        res[i : i + step] = np.exp(1j * np.outer(flat[i : i + step], p)) @ v
    return out * f.grid.dp / SQRT2PI


# -- momentum quadrature -----------------------------------------------------------------


class MomentumRule:
    """Quadrature for ``integral dp omega_m(p)^k A(p)`` with ``A`` entire.

    For even ``k`` the integrand is entire and the plain trapezoid rule on
    the FFT nodes is used (``weights_even``). For odd ``k`` the weight is
    split as ``erf(omega/s) + erfc(omega/s)``. Since ``erf(y)/y`` and
    ``y*erf(y)`` are even entire functions, the first part times
    ``omega^(+-1)`` is entire in ``p`` and the trapezoid rule on the FFT
    nodes converges geometrically. The second part lives near ``p = 0`` and
    is integrated with the trapezoid rule in ``u`` where ``p = m sinh(u)``
    (``m > 0``) or ``p = +-exp(u)`` (``m = 0``). These are ``weights_odd``.

    Parameters
    ----------
    grid : Grid
    m : float
        Mass, nonnegative.
    """

    #: window half width in units of ``dp``
    WINDOW = 8.0
    #: window cut, ``erfc(6.5)`` is below 1e-19
    CUT = 6.5
    #: depth of the logarithmic window for ``m = 0``
    LOG_DEPTH = 40.0

    def __init__(self, grid, m):
        if m < 0:
            raise ValueError("mass must be nonnegative")
        self.grid = grid
        self.m = float(m)
        s = self.WINDOW * grid.dp
        self.s = s
        pb = np.fft.fftfreq(grid.n, d=grid.dx) * 2.0 * np.pi
        wb = grid.dp * erf(np.hypot(pb, m) / s)
        top = self.CUT * s
        # the window integrand oscillates like exp(-i p x) with |x| <= 2L
        du = min(0.05, 0.6 / (top * 2.0 * grid.half_width))
        if m > 0:
            if m < top:
                umax = np.arccosh(top / m)
                k = int(np.ceil(umax / du))
                u = np.linspace(-umax, umax, 2 * k + 1)
                h = u[1] - u[0]
                pw = m * np.sinh(u)
                om = m * np.cosh(u)
                ww = h * om * erfc(om / s)
            else:
                pw = ww = np.zeros(0)
        else:
            vmax = np.log(top)
            k = int(np.ceil(self.LOG_DEPTH / du))
            v = np.linspace(vmax - self.LOG_DEPTH, vmax, k + 1)
            h = v[1] - v[0]
            r = np.exp(v)
            wr = h * r * erfc(r / s)
            wr[0] *= 0.5
            pw = np.concatenate([-r[::-1], r])
            ww = np.concatenate([wr[::-1], wr])
        self.n_bulk = grid.n
        self.p = np.concatenate([pb, pw])
        self.weights_odd = np.concatenate([wb, ww])
        self.weights_even = np.concatenate([np.full(grid.n, grid.dp), np.zeros(pw.size)])
        self.omega = np.hypot(self.p, m)
        for a in (self.p, self.weights_odd, self.weights_even, self.omega):
            a.setflags(write=False)

    def values(self, samples, support=None):
        """Transform of ``samples`` (last axis) at all rule nodes."""
        samples = np.asarray(samples)
        bulk = _fft_values(samples, self.grid)
        if self.p.size == self.n_bulk:
            return bulk
        win = transform_at(samples, self.grid, self.p[self.n_bulk :], support)
        return np.concatenate([bulk, win], axis=-1)

    def spectra(self, f):
        """``((Re f)^, (Im f)^)`` at all rule nodes."""
        both = self.values(np.stack([f.samples.real, f.samples.imag]), f.support)
        return both[0], both[1]

    def integrate(self, odd=None, even=None):
        """``sum w_odd * odd + sum w_even * even`` over the nodes.

        ``odd`` holds integrand values containing an odd power of
        ``omega``, ``even`` values containing an even power.
        """
        total = 0.0
        if odd is not None:
            total = total + np.sum(self.weights_odd * odd, axis=-1)
        if even is not None:
            total = total + np.sum(self.weights_even * even, axis=-1)
        return total

    def inverse_omega(self):
        with np.errstate(divide="ignore"):
            return np.where(self.omega > 0, 1.0 / self.omega, 0.0)


_RULES = {}


def momentum_rule(grid, m):
    """Cached :class:`MomentumRule` for ``(grid, m)``."""
    key = (grid, float(m))
    rule = _RULES.get(key)
    if rule is None:
        if len(_RULES) > 64:
            _RULES.clear()
        rule = _RULES[key] = MomentumRule(grid, m)
    return rule


def mass_form_values(rule, F1, F2, G1, G2):
    """Integrate ``1/2 conj(A_f) A_g`` with ``A = omega^(-1/2) F1 + i omega^(1/2) F2``.

    The product is expanded so that each term carries an integer power of
    ``omega``, which is what :class:`MomentumRule` integrates accurately.
    Extra leading axes of the spectra broadcast.
    """
    inv = rule.inverse_omega()
    odd = inv * np.conj(F1) * G1 + rule.omega * np.conj(F2) * G2
    even = 1j * (np.conj(F1) * G2 - np.conj(F2) * G1)
    return 0.5 * rule.integrate(odd, even)


# -- norms ------------------------------------------------------------------------------


@dataclass(frozen=True)
class MassNormValue:
    """Value of a possibly divergent norm."""

    tag: str
    value: float = None

    @property
    def finite(self):
        return self.tag == "Finite"

    def __float__(self):
        if not self.finite:
            raise ZeroModeError("norm is divergent")
        return float(self.value)


FINITE = "Finite"
DIVERGENT = "Divergent"


def _mass_form(f, g, m):
    rule = momentum_rule(f.grid, m)
    F1, F2 = rule.spectra(f)
    if g is f:
        G1, G2 = F1, F2
    else:
        G1, G2 = rule.spectra(g)
    return mass_form_values(rule, F1, F2, G1, G2)


def mass_norm_sq(f, m):
    """``||f||_m^2`` as a float; raises :class:`ZeroModeError` if divergent."""
    if m == 0:
        require_null_real_moment(f)
    return max(float(_mass_form(f, f, m).real), 0.0)


def mass_norm(f, m):
    """``||f||_m`` as a :class:`MassNormValue`."""
    if m < 0:
        raise ValueError("mass must be nonnegative")
    if not np.any(f.samples):
        return MassNormValue(FINITE, 0.0)
    if m == 0 and f.has_zero_mode():
        return MassNormValue(DIVERGENT)
    return MassNormValue(FINITE, float(np.sqrt(mass_norm_sq(f, m))))


def mass_inner(f, g, m):
    """Sesquilinear form ``<f, g>_m``; its real part induces ``||.||_m``."""
    if m < 0:
        raise ValueError("mass must be nonnegative")
    f._check_grid(g)
    if m == 0:
        require_null_real_moment(f, g)
    return complex(_mass_form(f, g, m))


def sobolev_norm(f, m, s):
    """``(integral omega_m^s |f^|^2 dp)^(1/2)`` for real ``f`` and ``s = +-1``."""
    if s not in (1, -1):
        raise ValueError("s must be +1 or -1")
    if not f.is_real:
        raise ValueError("sobolev_norm expects a real function")
    if not np.any(f.samples):
        return MassNormValue(FINITE, 0.0)
    if m == 0 and s == -1 and f.has_zero_mode():
        return MassNormValue(DIVERGENT)
    rule = momentum_rule(f.grid, m)
    F = rule.values(f.samples.real, f.support)
    w = rule.omega if s == 1 else rule.inverse_omega()
    val = rule.integrate(odd=w * np.abs(F) ** 2)
    return MassNormValue(FINITE, float(np.sqrt(max(val, 0.0))))


def null_integral_approx(f, eps, chi):
    """``f_eps(x) = f(x) - (integral f) * eps * chi(eps x)``.

    Parameters
    ----------
    f : GridFunction
    eps : float
        Positive scale; the correction is supported in ``supp(chi) / eps``.
    chi : GridFunction
        Real function with unit integral.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    if not chi.is_real:
        raise ValueError("chi must be real")
    if abs(chi.moment() - 1.0) > 1e-8:
        raise ValueError("chi must have unit integral")
    f._check_grid(chi)
    alpha = f.moment()
    if abs(alpha) / SQRT2PI <= zero_mode_tolerance(f):
        return f
    lo, hi = chi.support[0] / eps, chi.support[1] / eps
    f.grid.check_interval(lo, hi, "scaled correction support")
    x = f.grid.x
    inside = (x >= lo) & (x <= hi)
    corr = np.zeros(f.grid.n, complex)
    corr[inside] = eps * evaluate(chi, eps * x[inside]).real
    # the interpolated correction integrates to 1 up to quadrature error;
    # normalizing removes that error from the moment of f_eps
    corr /= corr.sum() * f.grid.dx
    support = (min(lo, f.support[0]), max(hi, f.support[1]))
    return GridFunction(f.grid, f.samples - alpha * corr, support)
