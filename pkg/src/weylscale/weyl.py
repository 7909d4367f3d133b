"""Weyl words, the symplectic form and quasi-free vacuum expectations."""
import json
from dataclasses import dataclass, field

import numpy as np

from .testfn import mass_norm_sq

_UNIT_TOL = 1e-12


def symplectic(f, g):
    """``sigma(f, g) = Im integral conj(f) g`` by the trapezoid rule."""
    f._check_grid(g)
    return float(np.imag(np.vdot(f.samples, g.samples)) * f.grid.dx)


@dataclass(frozen=True)
class WeylWord:
    """Ordered product ``phase * W(f_1) ... W(f_n)``.

    Parameters
    ----------
    factors : tuple of GridFunction
    phase : complex
        Unit-modulus prefactor.
    """

    factors: tuple = ()
    phase: complex = 1.0 + 0j

    def __post_init__(self):
        object.__setattr__(self, "factors", tuple(self.factors))
        ph = complex(self.phase)
        if abs(abs(ph) - 1.0) > _UNIT_TOL:
            raise ValueError(f"phase must have unit modulus, got |phase| = {abs(ph)!r}")
        object.__setattr__(self, "phase", ph)

    def __mul__(self, other):
        return WeylWord(self.factors + other.factors, self.phase * other.phase)

    def adjoint(self):
        """``(c W(f_1)...W(f_n))^* = conj(c) W(-f_n)...W(-f_1)``."""
        return WeylWord(tuple(-f for f in reversed(self.factors)), self.phase.conjugate())

    def to_json(self, names):
        """Serialize with symbol references ``names[i]`` for each factor."""
        return json.dumps(
            {"factors": list(names), "phase": [self.phase.real, self.phase.imag]}
        )


def normal_form(word):
    """Reduce a word left to right with ``W(f)W(g) = e^{-i sigma(f,g)/2} W(f+g)``.

    Returns
    -------
    phase : complex
    symbol : GridFunction or None
        Sum of the factors; ``None`` for the empty word.
    """
    phase = word.phase
    if not word.factors:
        return phase, None
    acc = word.factors[0]
    for g in word.factors[1:]:
        phase *= np.exp(-0.5j * symplectic(acc, g))
        acc = acc + g
    # keep the phase on the unit circle despite rounding
    return phase / abs(phase), acc


@dataclass(frozen=True)
class QuasiFreeState:
    """Vacuum state ``omega^(m)``; at ``m = 0`` the zero-mode rule applies."""

    mass: float
    massless_rule: bool = field(default=None)

    def __post_init__(self):
        if self.mass < 0:
            raise ValueError("mass must be nonnegative")
        rule = self.mass == 0
        if self.massless_rule is not None and self.massless_rule != rule:
            raise ValueError("massless_rule must be set exactly when mass = 0")
        object.__setattr__(self, "massless_rule", rule)

    def weyl(self, f):
        """``omega(W(f))``: Gaussian factor, or exactly 0 for a massless zero mode."""
        if self.massless_rule and f.has_zero_mode():
            return 0.0
        return float(np.exp(-0.5 * mass_norm_sq(f, self.mass)))


def vacuum_expect(state, word):
    """``omega(word)`` via the normal form."""
    phase, symbol = normal_form(word)
    if symbol is None:
        return phase
    return complex(phase * state.weyl(symbol))


def weyl_vector_distance(f, g, m):
    """``||(W(f) - W(g)) Omega||`` in the vacuum representation of mass ``m``."""
    d2 = mass_norm_sq(g - f, m)
    val = 2.0 - 2.0 * np.cos(0.5 * symplectic(f, g)) * np.exp(-0.5 * d2)
    return float(np.sqrt(max(val, 0.0)))


def gauge_phase(mu, nu, f):
    """``exp(i (mu Re integral f + nu Im integral f))``."""
    mom = f.moment()
    return complex(np.exp(1j * (mu * mom.real + nu * mom.imag)))


def expectation_table(state, words):
    """CSV text ``word_id,re,im`` for a sequence of words."""
    lines = ["word_id,re,im"]
    for i, w in enumerate(words):
        v = vacuum_expect(state, w)
        lines.append(f"{i},{v.real:.17g},{v.imag:.17g}")
    return "\n".join(lines) + "\n"
