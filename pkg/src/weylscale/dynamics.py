"""Time and space translations, dilations and smeared operators.

Time evolution acts on the transforms of the real and imaginary parts,

    (Re f)^ -> cos(t w) (Re f)^ - w sin(t w) (Im f)^
    (Im f)^ -> w^-1 sin(t w) (Re f)^ + cos(t w) (Im f)^

with ``w = omega_m(p)``, so that ``w^(-1/2) (Re f)^ + i w^(1/2) (Im f)^``
picks up the phase ``exp(i t w)``. Propagation has unit speed: the support
grows by ``|t|`` on each side and must stay inside the grid.
"""
from dataclasses import dataclass

import numpy as np

from .errors import NumericalGuardError, SupportError
from .testfn import Grid, GridFunction, evaluate

#: largest tolerated amplitude outside the light cone, relative to the peak
LEAK_RTOL = 1e-6


def _headroom(f, lo, hi, what):
    try:
        f.grid.check_interval(lo, hi, what)
    except SupportError as exc:
        raise SupportError(f"headroom violated: {exc}") from None


def evolution_multipliers(p, t, m):
    """``(cos(t w), w sin(t w), sin(t w)/w)`` with ``w = omega_m(p)``."""
    w = np.hypot(p, m)
    c = np.cos(t * w)
    ws = w * np.sin(t * w)
    # sin(t w)/w without the 0/0 at w = 0
    sw = t * np.sinc(t * w / np.pi)
    return c, ws, sw


def evolve_spectra(F1, F2, p, t, m):
    """Apply the time evolution to ``((Re f)^, (Im f)^)`` given at momenta ``p``."""
    c, ws, sw = evolution_multipliers(p, t, m)
    return c * F1 - ws * F2, sw * F1 + c * F2


def time_translate(f, t, m):
    """``tau_t^(m) f`` computed through the real FFT.

    Raises
    ------
    SupportError
        If ``support radius + |t|`` reaches the grid boundary.
    NumericalGuardError
        If the discrete result leaks outside the light cone by more than
        ``LEAK_RTOL``; this signals a symbol that the grid does not resolve.
    """
    if m < 0:
        raise ValueError("mass must be nonnegative")
    lo, hi = f.support[0] - abs(t), f.support[1] + abs(t)
    _headroom(f, lo, hi, "time-translated support")
    if t == 0:
        return f
    g = f.grid
    p = 2.0 * np.pi * np.fft.rfftfreq(g.n, d=g.dx)
    F1 = np.fft.rfft(f.samples.real)
    F2 = np.fft.rfft(f.samples.imag)
    G1, G2 = evolve_spectra(F1, F2, p, t, m)
    s = np.fft.irfft(G1, g.n) + 1j * np.fft.irfft(G2, g.n)
    return GridFunction(g, _clip(s, g, lo, hi), (lo, hi))


def _clip(s, grid, lo, hi):
    x = grid.x
    inside = (x >= lo - 1e-12) & (x <= hi + 1e-12)
    peak = np.abs(s).max(initial=0.0)
    leak = np.abs(s[~inside]).max(initial=0.0)
    if leak > LEAK_RTOL * peak:
        raise NumericalGuardError(
            "light-cone-leakage",
            f"amplitude {leak:.2e} outside the propagated support (peak {peak:.2e}); "
            "refine the grid or use smoother symbols",
        )
    return np.where(inside, s, 0.0)


def space_translate(f, x):
    """``(tau_x f)(y) = f(y - x)``; exact roll when ``x`` is a multiple of ``dx``."""
    lo, hi = f.support[0] + x, f.support[1] + x
    _headroom(f, lo, hi, "shifted support")
    if x == 0:
        return f
    g = f.grid
    k = x / g.dx
    if abs(k - round(k)) < 1e-9:
        k = int(round(k))
        s = np.zeros(g.n, complex)
        if k >= 0:
            s[k:] = f.samples[: g.n - k]
        else:
            s[:k] = f.samples[-k:]
        return GridFunction(g, s, (lo, hi))
    p = 2.0 * np.pi * np.fft.fftfreq(g.n, d=g.dx)
    s = np.fft.ifft(np.fft.fft(f.samples) * np.exp(-1j * p * x))
    return GridFunction(g, _clip(s, g, lo, hi), (lo, hi))


def spacetime_translate(f, t, x, m):
    """``tau_(t,x)^(m) f = tau_t^(m) tau_x f``."""
    return time_translate(space_translate(f, x), t, m)


def dilate(f, lam, grid=None):
    """``(delta_lam f)(x) = lam^-1 (Re f)(x/lam) + i (Im f)(x/lam)``.

    Parameters
    ----------
    f : GridFunction
    lam : float
        Positive scale.
    grid : Grid, optional
        Target grid. By default the result lives on the grid with the same
        node count and half width ``lam * L``, where the samples are exact.
        When a grid is given the result is obtained by band-limited
        interpolation of ``f``.
    """
    if not lam > 0:
        raise ValueError("lambda must be positive")
    lo, hi = lam * f.support[0], lam * f.support[1]
    if grid is None:
        if lam == 1:
            return f
        grid = Grid(f.grid.n, lam * f.grid.half_width)
        s = f.samples.real / lam + 1j * f.samples.imag
        return GridFunction(grid, s, (lo, hi))
    grid.check_interval(lo, hi, "dilated support")
    x = grid.x
    inside = (x >= lo) & (x <= hi)
    s = np.zeros(grid.n, complex)
    v = evaluate(f, x[inside] / lam)
    s[inside] = v.real / lam + 1j * v.imag
    return GridFunction(grid, s, (lo, hi))


def scaled_translate_commute(f, lam, x, m):
    """Max node-wise defect of ``delta_lam tau_x^(lam m) f = tau_(lam x)^(m) delta_lam f``.

    Parameters
    ----------
    x : tuple of float
        Spacetime point ``(t, x)``.
    """
    t, xs = x
    lhs = dilate(spacetime_translate(f, t, xs, lam * m), lam)
    rhs = spacetime_translate(dilate(f, lam), lam * t, lam * xs, m)
    return float(np.abs(lhs.samples - rhs.samples).max())


@dataclass(frozen=True, eq=False)
class SmearedOperator:
    """Quadrature data for ``(alpha_h W(f))_lam``.

    Parameters
    ----------
    t_nodes, x_nodes : ndarray
        Tensor nodes in time and space.
    weights : ndarray
        Shape ``(len(t_nodes), len(x_nodes))``; ``h`` times quadrature weights.
    symbol : GridFunction
    scale : float
        The scaling parameter ``lam``, positive; ``0`` selects the limit theory.
    mass : float
    """

    t_nodes: np.ndarray
    x_nodes: np.ndarray
    weights: np.ndarray
    symbol: GridFunction
    scale: float
    mass: float

    def __post_init__(self):
        t = np.atleast_1d(np.asarray(self.t_nodes, float))
        x = np.atleast_1d(np.asarray(self.x_nodes, float))
        w = np.asarray(self.weights, complex).reshape(t.size, x.size)
        if not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite")
        if self.scale < 0 or self.mass < 0:
            raise ValueError("scale and mass must be nonnegative")
        for name, v in (("t_nodes", t), ("x_nodes", x), ("weights", w)):
            v.setflags(write=False)
            object.__setattr__(self, name, v)

    @property
    def rectangle(self):
        return (self.t_nodes.min(), self.t_nodes.max(), self.x_nodes.min(), self.x_nodes.max())

    @classmethod
    def tensor_trapezoid(cls, h, t_range, x_range, symbol, scale, mass, nodes=33):
        """Sample ``h(t, x)`` on a ``nodes x nodes`` trapezoid grid.

        ``nodes = 1`` places a single unit-weight node at the rectangle centre.
        """
        if nodes == 1:
            t = np.array([0.5 * sum(t_range)])
            x = np.array([0.5 * sum(x_range)])
            w = np.ones((1, 1))
        else:
            t = np.linspace(*t_range, nodes)
            x = np.linspace(*x_range, nodes)
            wt = np.full(nodes, t[1] - t[0])
            wx = np.full(nodes, x[1] - x[0])
            wt[[0, -1]] *= 0.5
            wx[[0, -1]] *= 0.5
            w = np.outer(wt, wx)
        w = w * h(t[:, None], x[None, :])
        return cls(t, x, w, symbol, scale, mass)

    def conjugate_reflection(self):
        """Operator with negated symbol and conjugated weights."""
        return SmearedOperator(
            self.t_nodes, self.x_nodes, np.conj(self.weights), -self.symbol, self.scale, self.mass
        )
