"""Charge profiles and the phases of the sector automorphisms on Weyl symbols."""
from dataclasses import dataclass

import numpy as np

from .dynamics import dilate
from .errors import NumericalGuardError
from .testfn import GridFunction, evaluate
from .weyl import symplectic

_GL_X, _GL_W = np.polynomial.legendre.leggauss(200)

STABLE_TOL = 1e-10


def _integrated_bump(s, k):
    """``int_{-1}^{s} exp(-k/(1-v^2)) dv`` normalized to 1 at ``s = 1``."""
    s = np.clip(np.asarray(s, float), -1.0, 1.0)
    half = 0.5 * (s + 1.0)
    v = -1.0 + half[..., None] * (_GL_X + 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        dens = np.where(np.abs(v) < 1, np.exp(-k / (1.0 - v**2)), 0.0)
    part = half * (dens @ _GL_W)
    total = np.exp(-k / (1.0 - _GL_X**2)) @ _GL_W
    return part / total


RAMPS = {
    "smoothstep": lambda s: _integrated_bump(s, 1.0),
    "steep": lambda s: _integrated_bump(s, 4.0),
}


@dataclass(frozen=True)
class ChargeProfile:
    """Step profile ``u_n`` of height ``q`` with ramp on ``(-a, a)``.

    Parameters
    ----------
    q : float
        Charge.
    a : float
        Localization radius, positive.
    n : int
        Plateau ``[a, n a]``; beyond ``n a`` the profile decays to 0 on
        ``[n a, n a + a]``.
    ramp : str or callable
        Smooth monotone map of ``[-1, 1]`` onto ``[0, 1]``; a key of
        :data:`RAMPS` or a vectorized callable.
    """

    q: float
    a: float = 1.0
    n: int = 1
    ramp: object = "smoothstep"

    def __post_init__(self):
        if not self.a > 0:
            raise ValueError("a must be positive")
        if int(self.n) != self.n or self.n < 1:
            raise ValueError("n must be a positive integer")

    def _ramp(self, s):
        r = RAMPS[self.ramp] if isinstance(self.ramp, str) else self.ramp
        return r(s)

    def with_n(self, n):
        return ChargeProfile(self.q, self.a, n, self.ramp)

    def u_n(self, x):
        """Values of ``u_n`` at ``x``."""
        x = np.asarray(x, float)
        a, na = self.a, self.n * self.a
        out = np.zeros_like(x)
        up = (x > -a) & (x < a)
        out[up] = self._ramp(x[up] / a)
        out[(x >= a) & (x <= na)] = 1.0
        down = (x > na) & (x < na + a)
        out[down] = 1.0 - self._ramp(2.0 * (x[down] - na) / a - 1.0)
        return self.q * out

    def u_inf(self, x):
        """Values of the limit profile ``u_inf``."""
        x = np.asarray(x, float)
        a = self.a
        out = np.where(x >= a, 1.0, 0.0)
        up = (x > -a) & (x < a)
        out[up] = self._ramp(x[up] / a)
        return self.q * out


def build_un(p, grid):
    """``u_n`` as a real grid function supported in ``(-a, n a + a)``."""
    support = (-p.a, p.n * p.a + p.a)
    grid.check_interval(*support, what="charge profile")
    return GridFunction(grid, p.u_n(grid.x), support)


def _profile_integral(values, f):
    return float(np.sum(values * f.samples.real) * f.grid.dx)


def sector_phase(p, f):
    """``exp(-i integral u_inf Re f)``."""
    return complex(np.exp(-1j * _profile_integral(p.u_inf(f.grid.x), f)))


def scaled_profile_phase(p, f, lam):
    """``exp(-i integral u_inf(x/lam) Re f(x) dx)`` on the grid of ``f``."""
    return complex(np.exp(-1j * _profile_integral(p.u_inf(f.grid.x / lam), f)))


def rho_lambda_symbol(p, f, lam):
    """Phase and symbol of the asymptotic morphism at scale ``lam``.

    Returns
    -------
    phase : complex
        ``exp(-i integral u_inf Re f)``, independent of ``lam``.
    symbol : GridFunction
        ``delta_lam f`` on the rescaled grid.
    """
    return sector_phase(p, f), dilate(f, lam)


def rho_lambda_middle_phase(p, f, lam):
    """``exp(-i integral u_inf(x/lam) Re(delta_lam f)(x) dx)`` on the dilated grid."""
    d = dilate(f, lam)
    return complex(np.exp(-1j * _profile_integral(p.u_inf(d.grid.x / lam), d)))


def half_line_integral(g):
    """``integral_0^inf g`` with Gauss-Legendre on the interpolant across 0."""
    lo, hi = g.support
    if lo >= 0:
        return g.moment()
    if hi <= 0:
        return 0j
    x = 0.5 * hi * (_GL_X + 1.0)
    return complex(0.5 * hi * (evaluate(g, x) @ _GL_W))


def limit_morphism_phase(p, f):
    """``exp(-i q integral_0^inf Re f)``."""
    return complex(np.exp(-1j * p.q * half_line_integral(f.real).real))


def stabilization_index(p, f):
    """Smallest ``n`` after which ``exp(i sigma(i u_n, f))`` no longer changes.

    ``n`` runs over the plateaus that fit in the grid; differences below
    :data:`STABLE_TOL` count as stable.
    """
    grid = f.grid
    n_max = int(np.floor((grid.half_width - p.a) / p.a - 1e-12))
    if n_max < 1:
        raise NumericalGuardError("profile-too-wide", "no plateau fits in the grid")
    phases = []
    for n in range(1, n_max + 1):
        u = build_un(p.with_n(n), grid)
        phases.append(np.exp(1j * symplectic(1j * u, f)))
    diffs = np.abs(np.diff(phases))
    unstable = np.nonzero(diffs >= STABLE_TOL)[0]
    if unstable.size == 0:
        return 1
    idx = int(unstable[-1]) + 2
    if idx >= n_max:
        raise NumericalGuardError(
            "stabilization", f"phase still changing at the largest plateau n = {n_max}"
        )
    return idx
