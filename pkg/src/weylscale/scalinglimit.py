"""Diagnostics of the lambda -> 0 limit.

All spectral quantities are evaluated on the nodes of a
:class:`~weylscale.testfn.MomentumRule` at the relevant mass; symplectic
phases are computed in position space from translated symbols.
"""
from dataclasses import dataclass, field
from itertools import product

import numpy as np

from .dynamics import evolve_spectra, time_translate
from .errors import NumericalGuardError, SupportError
from .testfn import (
    mass_form_values,
    mass_norm_sq,
    momentum_rule,
    require_null_real_moment,
)

#: default sweep: 7 geometric points from 1 to 1e-3
DEFAULT_LAMBDAS = tuple(np.geomspace(1.0, 1e-3, 7))

MAX_POINTS = 3


@dataclass(frozen=True)
class TensorWeight:
    """Weight ``g(t, x)`` given on tensor nodes, quadrature weights included."""

    t_nodes: np.ndarray
    x_nodes: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        t = np.atleast_1d(np.asarray(self.t_nodes, float))
        x = np.atleast_1d(np.asarray(self.x_nodes, float))
        w = np.asarray(self.weights, float).reshape(t.size, x.size)
        for name, v in (("t_nodes", t), ("x_nodes", x), ("weights", w)):
            v.setflags(write=False)
            object.__setattr__(self, name, v)

    @classmethod
    def trapezoid(cls, g, t_range, x_range, nodes=33):
        """``nodes x nodes`` trapezoid rule for ``g``; one node gives unit weight."""
        if nodes == 1:
            t = np.array([0.5 * sum(t_range)])
            x = np.array([0.5 * sum(x_range)])
            return cls(t, x, np.ones((1, 1)))
        t = np.linspace(*t_range, nodes)
        x = np.linspace(*x_range, nodes)
        wt = np.full(nodes, t[1] - t[0])
        wx = np.full(nodes, x[1] - x[0])
        wt[[0, -1]] *= 0.5
        wx[[0, -1]] *= 0.5
        return cls(t, x, np.outer(wt, wx) * g(t[:, None], x[None, :]))

    @property
    def mass(self):
        """``sum |weights|``."""
        return float(np.abs(self.weights).sum())


@dataclass(frozen=True)
class SweepResult:
    """Values of a diagnostic along a strictly decreasing parameter list."""

    lambdas: tuple
    values: tuple
    bounds: tuple = None
    fit: dict = field(default=None)

    def __post_init__(self):
        lam = np.asarray(self.lambdas, float)
        if lam.size > 1 and not np.all(np.diff(lam) < 0):
            raise ValueError("lambdas must be strictly decreasing")
        if not np.all(np.isfinite(np.asarray(self.values, complex))):
            raise NumericalGuardError("non-finite", "sweep produced non-finite values")

    def real_values(self):
        return np.real(np.asarray(self.values, complex))

    def decreasing_after_first_decade(self):
        """Strict decrease on the points with ``lambda <= lambdas[0] / 10``, joined to the start."""
        lam = np.asarray(self.lambdas, float)
        v = self.real_values()
        tail = v[lam <= lam[0] / 10 * (1 + 1e-12)]
        return bool(np.all(np.diff(tail) < 0) and (tail.size == 0 or tail[0] < v[0]))


def _unique(values, decimals=12):
    r = np.round(np.asarray(values, float), decimals)
    u, inv = np.unique(r, return_inverse=True)
    return u, inv.reshape(np.shape(values))


def _shift_phases(p, d):
    return np.exp(-1j * np.outer(p, d))


def _cross_forms(rule, F, G, dts, dxs, m_evol):
    """``<f, tau_dx tau_dt g>_mu`` for all pairs in ``dts x dxs``.

    ``F, G`` are the spectra pairs of ``f`` and ``g`` at the rule nodes and
    the time evolution uses mass ``m_evol``.
    """
    F1, F2 = F
    inv = rule.inverse_omega()
    phases = _shift_phases(rule.p, dxs)
    out = np.empty((len(dts), len(dxs)), complex)
    for k, dt in enumerate(dts):
        E1, E2 = evolve_spectra(G[0], G[1], rule.p, dt, m_evol)
        odd = inv * np.conj(F1) * E1 + rule.omega * np.conj(F2) * E2
        even = 1j * (np.conj(F1) * E2 - np.conj(F2) * E1)
        integrand = rule.weights_odd * odd + rule.weights_even * even
        out[k] = 0.5 * (integrand @ phases)
    return out


def _symplectic_table(f, g, dts, dxs, m_evol):
    """``sigma(f, tau_dx tau_dt g)`` by grid translation and trapezoid quadrature."""
    grid = f.grid
    p = 2.0 * np.pi * np.fft.fftfreq(grid.n, d=grid.dx)
    phases = np.exp(-1j * np.outer(dxs, p))
    out = np.empty((len(dts), len(dxs)))
    reach = max(abs(d) for d in dxs)
    for k, dt in enumerate(dts):
        gt = time_translate(g, dt, m_evol)
        grid.check_interval(gt.support[0] - reach, gt.support[1] + reach, "shifted support")
        shifted = np.fft.ifft(np.fft.fft(gt.samples)[None, :] * phases, axis=1)
        out[k] = np.imag(shifted @ np.conj(f.samples)) * grid.dx
    return out


def _check_headroom(f, t_nodes, x_nodes, what="quadrature nodes"):
    reach = np.abs(t_nodes).max() + np.abs(x_nodes).max()
    lo, hi = f.support[0] - reach, f.support[1] + reach
    try:
        f.grid.check_interval(lo, hi, what)
    except SupportError as exc:
        raise SupportError(f"headroom violated: {exc}") from None


def notiso_norm_sq(f, g, m, lam, return_complex=False):
    """Double integral of the remark on the non-isotony of the naive net.

    Evaluates ``sum g(x) g(y) exp(i sigma(tau_x f, tau_y f)/2)
    exp(-||(tau_y - tau_x) f||^2_(lam m) / 2)`` over the nodes of ``g``,
    where ``tau`` is the mass ``m`` evolution.

    Parameters
    ----------
    f : GridFunction
        Symbol with ``integral Re f = 0``.
    g : TensorWeight
    m, lam : float
        Positive mass and scale.
    return_complex : bool
        Return the complex sum instead of its real part.
    """
    if not (m > 0 and lam > 0):
        raise ValueError("m and lam must be positive")
    require_null_real_moment(f)
    t, x, W = g.t_nodes, g.x_nodes, g.weights
    _check_headroom(f, t, x)
    rule = momentum_rule(f.grid, lam * m)
    F = rule.spectra(f)

    dt, it = _unique(t[None, :] - t[:, None])
    dx, ix = _unique(x[None, :] - x[:, None])
    sig = _symplectic_table(f, f, dt, dx, m)
    # the mass m evolution is not unitary for the lam m norm, so the forms
    # <tau_{t_a} f, tau_d tau_{t_b} f> are built from the evolved spectra of
    # every time node; only the spatial shift reduces to a difference
    E = [evolve_spectra(*F, rule.p, tk, m) for tk in t]
    E1 = np.array([e[0] for e in E])
    E2 = np.array([e[1] for e in E])
    inv = rule.inverse_omega()
    phases = _shift_phases(rule.p, dx)
    wo, we = rule.weights_odd, rule.weights_even
    cross = np.empty((t.size, t.size, dx.size), complex)
    for a in range(t.size):
        a1, a2 = np.conj(E1[a]), np.conj(E2[a])
        integrand = (wo * (inv * a1 * E1 + rule.omega * a2 * E2)
                     + we * 1j * (a1 * E2 - a2 * E1))
        cross[a] = 0.5 * (integrand @ phases)
    ta = np.arange(t.size)
    norms = cross[ta, ta, int(np.argmin(np.abs(dx)))].real

    # indices [a, i, b, j] -> (t_b - t_a, x_j - x_i)
    C = cross[ta[:, None, None, None], ta[None, None, :, None], ix[None, :, None, :]]
    S = sig[it[:, None, :, None], ix[None, :, None, :]]
    D2 = norms[:, None, None, None] + norms[None, None, :, None] - 2.0 * C.real
    D2 = np.maximum(D2, 0.0)
    terms = W[:, :, None, None] * W[None, None, :, :] * np.exp(0.5j * S - 0.5 * D2)
    val = complex(terms.sum())
    return val if return_complex else val.real


def _spectral_difference(F1, F2, p, t, m_a, m_b):
    """Spectra of ``tau_t^(m_a) f - tau_t^(m_b) f``."""
    A1, A2 = evolve_spectra(F1, F2, p, t, m_a)
    B1, B2 = evolve_spectra(F1, F2, p, t, m_b)
    return A1 - B1, A2 - B2


@dataclass(frozen=True)
class DefectResult:
    """Value of a defect norm with its bound diagnostics."""

    value: float
    bound: float
    bound_ok: bool
    low: float = None
    high: float = None


def translation_defect(f, x, m, lam):
    """``||tau_x^(lam m) f - tau_x^(0) f||_0^2`` and the dominating bound.

    The bound ``4/|p| [(1 + |t| omega_m) |(Re f)^| + 2 omega_m |(Im f)^|]^2``
    is compared node-wise with the integrand
    ``|A + i |p| B|^2 / (2 |p|)`` on all nodes with ``p != 0``.

    Returns
    -------
    DefectResult
    """
    t, xs = x
    if abs(f.moment()) > 1e-8 * max(f.l1_scale(), 1e-300):
        raise SupportError("translation_defect requires integral f = 0")
    _check_headroom(f, np.array([t]), np.array([xs]))
    rule = momentum_rule(f.grid, 0.0)
    F1, F2 = rule.spectra(f)
    D1, D2 = _spectral_difference(F1, F2, rule.p, t, lam * m, 0.0)
    value = float(mass_form_values(rule, D1, D2, D1, D2).real)
    ap = np.abs(rule.p)
    nz = ap > 0
    integrand = np.abs(D1[nz] + 1j * ap[nz] * D2[nz]) ** 2 / (2.0 * ap[nz])
    om = np.hypot(rule.p[nz], m)
    dom = 4.0 / ap[nz] * ((1.0 + abs(t) * om) * np.abs(F1[nz]) + 2.0 * om * np.abs(F2[nz])) ** 2
    bound = float(np.sum(rule.weights_odd[nz] * dom))
    ok = bool(np.all(integrand <= dom * (1 + 1e-12) + 1e-300) and value <= bound)
    return DefectResult(value, bound, ok)


def elementary_bound_check(p, t, m, lam):
    """Node-wise check of the two multiplier bounds used for ``|p| <= 1``.

    Returns
    -------
    bool
        Whether both inequalities hold at every node in ``p``.
    """
    om = np.hypot(p, lam * m)
    oM = np.hypot(p, m)
    ap = np.abs(p)
    r = np.sqrt(om)
    lhs1 = np.abs(np.cos(t * om) - np.cos(t * ap)) / r
    mid1 = abs(t) * (om - ap) / r
    lhs2 = np.abs(om * np.sin(t * om) - ap * np.sin(t * ap)) / r
    mid2 = (om - ap) / r * np.abs(np.sin(t * om)) + ap * np.abs(np.sin(t * om) - np.sin(t * ap)) / r
    tol = 1e-12
    ok1 = np.all(lhs1 <= mid1 + tol) and np.all(mid1 <= abs(t) * np.sqrt(oM) + tol)
    ok2 = np.all(lhs2 <= mid2 + tol) and np.all(mid2 <= 3.0 * np.sqrt(oM) + tol)
    return bool(ok1 and ok2)


def massive_defect(f, t, m, lam):
    """``||tau_t^(0) f - tau_t^(lam m) f||^2_(lam m)`` split at ``|p| = 1``.

    ``bound_ok`` reports the node-wise elementary bounds on ``|p| <= 1`` and
    ``bound`` is the integral over ``|p| <= 1`` of
    ``[(|t| |(Re f)^| + 3 |(Im f)^|) + (2 |(Im f)^| + 2 |t| |(Re f)^|)]^2 omega_m / 2``,
    which dominates the integrand there for ``lam <= 1``.
    """
    if not (m > 0 and lam > 0):
        raise ValueError("m and lam must be positive")
    _check_headroom(f, np.array([t]), np.array([0.0]))
    rule = momentum_rule(f.grid, lam * m)
    F1, F2 = rule.spectra(f)
    D1, D2 = _spectral_difference(F1, F2, rule.p, t, 0.0, lam * m)
    inv = rule.inverse_omega()
    odd = inv * np.abs(D1) ** 2 + rule.omega * np.abs(D2) ** 2
    even = 1j * (np.conj(D1) * D2 - np.conj(D2) * D1)
    low_mask = np.abs(rule.p) <= 1.0
    parts = []
    for mask in (low_mask, ~low_mask):
        parts.append(0.5 * float(np.real(np.sum(
            (rule.weights_odd * odd + rule.weights_even * even)[mask]))))
    low, high = parts
    oM = np.hypot(rule.p, m)
    env = (abs(t) * np.abs(F1) + 3.0 * np.abs(F2) + 2.0 * np.abs(F2) + 2.0 * abs(t) * np.abs(F1))
    dom = 0.5 * oM * env**2
    integrand = 0.5 * np.abs(D1 / np.sqrt(np.where(rule.omega > 0, rule.omega, 1.0))
                             + 1j * np.sqrt(rule.omega) * D2) ** 2
    bound = float(np.sum((rule.weights_odd * dom)[low_mask]))
    ok = elementary_bound_check(rule.p[low_mask], t, m, lam) and bool(
        np.all(integrand[low_mask] <= dom[low_mask] * (1 + 1e-12) + 1e-300)
    )
    return DefectResult(low + high, bound, ok, low, high)


def smeared_npoint(ops):
    """``omega^(m)`` of a product of smeared, rescaled Weyl operators.

    Parameters
    ----------
    ops : sequence of SmearedOperator
        Common ``scale`` and ``mass``; ``scale = 0`` evaluates the massless
        limit directly.

    Returns
    -------
    complex
    """
    n = len(ops)
    if n == 0:
        return 1.0 + 0j
    if n > MAX_POINTS:
        raise ValueError(f"at most {MAX_POINTS} smeared operators are supported")
    lam, m = ops[0].scale, ops[0].mass
    if any(o.scale != lam or o.mass != m for o in ops):
        raise ValueError("all operators must share scale and mass")
    mu = lam * m
    fs = [o.symbol for o in ops]
    for o in ops:
        _check_headroom(o.symbol, o.t_nodes, o.x_nodes)
    if mu == 0:
        total = sum(f.moment().real for f in fs)
        scale = sum(f.l1_scale() for f in fs)
        if abs(total) > 1e-8 * scale * np.sqrt(2 * np.pi):
            # the massless state vanishes on a nonzero real zero mode
            return 0j
        require_null_real_moment(*fs)
    rule = momentum_rule(fs[0].grid, mu)
    spectra = [rule.spectra(f) for f in fs]
    norms = [mass_form_values(rule, *F, *F).real for F in spectra]

    # flatten nodes of each operator: (t, x, weight)
    nodes = []
    for o in ops:
        tt, xx = np.meshgrid(o.t_nodes, o.x_nodes, indexing="ij")
        nodes.append((tt.ravel(), xx.ravel(), o.weights.ravel()))

    # exponent pieces per pair i < j, as arrays over (node_i, node_j)
    log_terms = {}
    for i, j in product(range(n), repeat=2):
        if i >= j:
            continue
        ti, xi, _ = nodes[i]
        tj, xj, _ = nodes[j]
        dt, it = _unique(tj[None, :] - ti[:, None])
        dx, ix = _unique(xj[None, :] - xi[:, None])
        cross = _cross_forms(rule, spectra[i], spectra[j], dt, dx, mu)
        sig = _symplectic_table(fs[i], fs[j], dt, dx, mu)
        log_terms[i, j] = -cross[it, ix].real - 0.5j * sig[it, ix]

    const = -0.5 * sum(norms)
    w = [nd[2] for nd in nodes]
    if n == 1:
        return complex(np.exp(const) * w[0].sum())
    if n == 2:
        E = np.exp(const + log_terms[0, 1])
        return complex(w[0] @ E @ w[1])
    # n == 3: loop over the first operator's nodes
    total = 0j
    for a in range(w[0].size):
        E = np.exp(const + log_terms[0, 1][a][:, None] + log_terms[0, 2][a][None, :]
                   + log_terms[1, 2])
        total += w[0][a] * (w[1] @ E @ w[2])
    return complex(total)


def ir_divergence_slope(h, masses):
    """Least-squares fit of ``||h||_m^2`` against ``|log m|``.

    Returns
    -------
    SweepResult
        ``fit`` holds ``slope``, ``intercept``, ``r2`` and the expected slope
        ``|(Re h)^(0)|^2``.
    """
    masses = np.asarray(masses, float)
    if masses.size < 3:
        raise NumericalGuardError("degenerate-fit", "at least three masses are required")
    if np.any(masses <= 0):
        raise ValueError("masses must be positive")
    if np.log10(masses.max() / masses.min()) < 4 - 1e-9:
        raise ValueError("masses must span at least four decades")
    vals = np.array([mass_norm_sq(h, m) for m in masses])
    xlog = np.abs(np.log(masses))
    A = np.vstack([xlog, np.ones_like(xlog)]).T
    (slope, intercept), *_ = np.linalg.lstsq(A, vals, rcond=None)
    resid = vals - A @ np.array([slope, intercept])
    ss = np.sum((vals - vals.mean()) ** 2)
    r2 = 1.0 - np.sum(resid**2) / ss if ss > 0 else 1.0
    fit = {
        "model": "affine-in-abs-log-m",
        "slope": float(slope),
        "intercept": float(intercept),
        "r2": float(r2),
        "expected_slope": float(h.zero_mode() ** 2),
        "scale": float(vals[np.argmax(masses)]),
    }
    return SweepResult(tuple(masses), tuple(vals), fit=fit)


def _sweep(func, lambdas):
    values, bounds = [], []
    for lam in lambdas:
        r = func(lam)
        if isinstance(r, DefectResult):
            values.append(r.value)
            bounds.append(r.bound if r.bound_ok else float("nan"))
        else:
            values.append(r)
            bounds.append(None)
    b = None if all(v is None for v in bounds) else tuple(bounds)
    return SweepResult(tuple(lambdas), tuple(values), b)


def sweep_notiso(f, g, m, lambdas=DEFAULT_LAMBDAS):
    return _sweep(lambda lam: notiso_norm_sq(f, g, m, lam, return_complex=True), lambdas)


def sweep_translation(f, x, m, lambdas=DEFAULT_LAMBDAS):
    return _sweep(lambda lam: translation_defect(f, x, m, lam), lambdas)


def sweep_massive_defect(f, t, m, lambdas=DEFAULT_LAMBDAS):
    return _sweep(lambda lam: massive_defect(f, t, m, lam), lambdas)


def sweep_npoint(ops, lambdas=DEFAULT_LAMBDAS):
    """``smeared_npoint`` along ``lambdas`` for operators built at any scale."""
    from dataclasses import replace

    return _sweep(lambda lam: smeared_npoint([replace(o, scale=lam) for o in ops]), lambdas)
