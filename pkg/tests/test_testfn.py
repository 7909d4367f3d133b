import json

import numpy as np
import numpy.testing as npt
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from weylscale.dynamics import space_translate
from weylscale.errors import SupportError, ZeroModeError
from weylscale.testfn import (
    SQRT2PI,
    Grid,
    GridFunction,
    evaluate,
    fourier,
    make_bump,
    make_bump_derivative,
    mass_inner,
    mass_norm,
    mass_norm_sq,
    null_integral_approx,
    random_null_function,
    sobolev_norm,
)

bumps = st.tuples(
    st.floats(-5.0, 5.0), st.floats(0.8, 3.0), st.floats(-2.0, 2.0).filter(lambda a: abs(a) > 0.1)
)


def test_grid_defaults_and_spacing():
    g = Grid()
    assert g.n == 4096 and g.half_width == 32.0
    npt.assert_allclose(g.dx, 64.0 / 4095)
    npt.assert_allclose(g.dp, 2 * np.pi / (4096 * g.dx))
    with pytest.raises(ValueError):
        Grid(1000, 32.0)


def test_bump_support_and_moment(grid):
    f = make_bump(0.0, 1.0, 1.0, grid)
    assert f.moment().real > 0
    outside = np.abs(grid.x) >= 1.0
    assert np.all(f.samples[outside] == 0)
    with pytest.raises(SupportError):
        make_bump(31.5, 1.0, 1.0, grid)


def test_tail_invariant_enforced(grid):
    s = np.zeros(grid.n, complex)
    s[0] = 1.0
    with pytest.raises(ValueError):
        GridFunction(grid, s, (-1.0, 1.0))


def test_central_difference_has_zero_moment(grid):
    f = make_bump(0.0, 1.0, 1.0, grid)
    d = GridFunction(grid, np.gradient(f.samples.real, grid.dx), (-1.0 - grid.dx, 1.0 + grid.dx))
    assert abs(d.moment()) < 1e-10


def test_real_imag_split(grid, rng):
    f = random_null_function(rng, (-2, 2), grid, complex_valued=True)
    npt.assert_array_equal((f.real + 1j * f.imag).samples, f.samples)


def test_fourier_zero_and_origin(grid):
    z = GridFunction.zero(grid)
    assert not np.any(fourier(z).values)
    f = make_bump(0.0, 1.0, 1.0, grid)
    F = fourier(f)
    i0 = np.argmin(np.abs(F.p))
    npt.assert_allclose(F.values[i0], f.moment() / SQRT2PI, rtol=1e-10)


@settings(max_examples=20, deadline=None)
@given(bumps)
def test_parseval(b):
    g = Grid()
    f = make_bump(*b, g) + 1j * make_bump_derivative(b[0] / 2, b[1], 1.0, g)
    F = fourier(f)
    lhs = np.sum(np.abs(f.samples) ** 2) * g.dx
    rhs = np.sum(np.abs(F.values) ** 2) * F.dp
    npt.assert_allclose(lhs, rhs, rtol=1e-10)


def test_spectrum_round_trip_and_symmetry(grid):
    f = make_bump(1.0, 2.0, 1.0, grid)
    F = fourier(f)
    npt.assert_allclose(F.inverse(), f.samples, atol=1e-10 * np.abs(f.samples).max())
    # p_k and -p_k both present except at the Nyquist node
    v = F.values[1:]
    npt.assert_allclose(v, np.conj(v[::-1]), atol=1e-12)


def test_shift_theorem(grid):
    f = make_bump(0.0, 1.5, 1.0, grid)
    x0 = 37 * grid.dx
    F, G = fourier(f), fourier(space_translate(f, x0))
    npt.assert_allclose(G.values, F.values * np.exp(-1j * F.p * x0), atol=1e-10)


def test_evaluate_interpolates(grid):
    f = make_bump(0.3, 2.0, 1.0, grid)
    x = np.array([0.123, -1.01, 1.7])
    exact = np.exp(-1.0 / (1.0 - ((x - 0.3) / 2.0) ** 2))
    npt.assert_allclose(evaluate(f, x).real, exact, atol=1e-10)


def test_mass_norm_zero_and_divergent(grid):
    z = GridFunction.zero(grid)
    assert mass_norm(z, 1.0).value == 0.0
    assert mass_norm(z, 0.0).tag == "Finite"
    v = mass_norm(make_bump(0.0, 1.0, 1.0, grid), 0.0)
    assert v.tag == "Divergent" and v.value is None
    with pytest.raises(ZeroModeError):
        mass_norm_sq(make_bump(0.0, 1.0, 1.0, grid), 0.0)


@pytest.mark.parametrize("derivative", [False, True])
def test_mass_norm_matches_quadrature_oracle(grid, derivative):
    maker = make_bump_derivative if derivative else make_bump
    f = maker(0.0, 1.0, 1.0, grid)
    ref = oracles.mass_norm_sq([(0.0, 1.0, 1.0, derivative)], [], 1.0)
    npt.assert_allclose(mass_norm(f, 1.0).value ** 2, ref, rtol=1e-6)


def test_mass_norm_of_imaginary_part(grid):
    f = 1j * make_bump(0.5, 1.5, 0.7, grid)
    ref = oracles.mass_norm_sq([], [(0.5, 1.5, 0.7, False)], 0.5)
    npt.assert_allclose(mass_norm_sq(f, 0.5), ref, rtol=1e-6)


def test_massless_norm_of_null_function(grid):
    f = make_bump_derivative(0.0, 1.0, 1.0, grid)
    ref = oracles.mass_norm_sq([(0.0, 1.0, 1.0, True)], [], 0.0)
    npt.assert_allclose(mass_norm(f, 0.0).value ** 2, ref, rtol=1e-6)


def test_mass_inner_identities(grid, rng):
    f = random_null_function(rng, (-2, 2), grid, complex_valued=True)
    g = random_null_function(rng, (-1, 3), grid, complex_valued=True)
    npt.assert_allclose(mass_inner(f, f, 1.0), mass_norm_sq(f, 1.0), atol=1e-10)
    half_sigma = 0.5 * np.vdot(f.samples, g.samples).imag * grid.dx
    npt.assert_allclose(mass_inner(f, g, 1.0).imag, half_sigma, atol=1e-9)
    a, b = f.real, g.real
    assert abs(mass_inner(a, b, 1.0).imag) < 1e-12


def test_mass_inner_matches_oracle(grid):
    fr = [(0.2, 1.0, 1.0, True)]
    fi = [(-0.3, 0.8, 0.5, False)]
    gr = [(1.0, 1.2, -0.7, True)]
    gi = [(0.9, 1.1, 0.3, False)]

    def build(parts):
        out = GridFunction.zero(grid, (-3, 3))
        for c, w, a, d in parts:
            out = out + (make_bump_derivative if d else make_bump)(c, w, a, grid)
        return out

    f = build(fr) + 1j * build(fi)
    g = build(gr) + 1j * build(gi)
    # polarization: Re <f, g> = (||f + g||^2 - ||f - g||^2) / 4
    neg = [(c, w, -a, d) for c, w, a, d in gr]
    negi = [(c, w, -a, d) for c, w, a, d in gi]
    ref = 0.25 * (
        oracles.mass_norm_sq(fr + gr, fi + gi, 1.0) - oracles.mass_norm_sq(fr + neg, fi + negi, 1.0)
    )
    npt.assert_allclose(mass_inner(f, g, 1.0).real, ref, rtol=1e-6)


def test_sobolev_norms(grid, rng):
    z = GridFunction.zero(grid)
    assert sobolev_norm(z, 1.0, 1).value == 0.0
    for _ in range(50):
        f = random_null_function(rng, (-2, 2), grid)
        assert sobolev_norm(f, 0.0, 1).value <= sobolev_norm(f, 1.0, 1).value * (1 + 1e-12)
    f = make_bump_derivative(0.0, 1.0, 1.0, grid)
    ref = oracles.sobolev_sq([(0.0, 1.0, 1.0, True)], 1.0, -1)
    npt.assert_allclose(sobolev_norm(f, 1.0, -1).value ** 2, ref, rtol=1e-6)
    assert sobolev_norm(make_bump(0, 1, 1, grid), 0.0, -1).tag == "Divergent"


def test_norm_axioms_on_random_triples(grid, rng):
    for _ in range(5):
        f, g = (random_null_function(rng, (-3, 3), grid, True) for _ in range(2))
        c = complex(rng.normal(), 0.0)
        nf, ng = mass_norm(f, 1.0).value, mass_norm(g, 1.0).value
        assert mass_norm(f + g, 1.0).value <= nf + ng + 1e-9
        npt.assert_allclose(mass_norm(c * f, 1.0).value, abs(c) * nf, rtol=1e-9)


def test_mass_norm_continuous_in_mass(grid):
    f = make_bump_derivative(0.0, 1.0, 1.0, grid) + 1j * make_bump(0.0, 1.0, 1.0, grid)
    ms = 1.0 + np.array([1e-3, 1e-5, 1e-7])
    base = mass_norm(f, 1.0).value
    gaps = [abs(mass_norm(f, m).value - base) for m in ms]
    assert gaps[0] > gaps[1] > gaps[2] and gaps[2] < 1e-6


def test_null_integral_approx(grid):
    chi = make_bump(0.0, 1.0, 1.0, grid)
    chi = chi * (1.0 / chi.moment().real)
    f0 = make_bump_derivative(0.0, 1.0, 1.0, grid)
    npt.assert_array_equal(null_integral_approx(f0, 0.5, chi).samples, f0.samples)
    f = make_bump(0.0, 1.0, 1.0, grid)
    defects = []
    for eps in (0.8, 0.4, 0.2, 0.1, 0.05):
        fe = null_integral_approx(f, eps, chi)
        assert abs(fe.moment()) < 1e-10
        defects.append(mass_norm(f - fe, 1.0).value)
    assert np.all(np.diff(defects) < 0)
    # f - f_eps = moment(f) * eps * chi(eps x), a dilation of chi
    eps = 0.4
    fe = null_integral_approx(f, eps, chi)
    amp = f.moment().real / make_bump(0.0, 1.0, 1.0, grid).moment().real
    ref = oracles.mass_norm_sq([(0.0, 1.0 / eps, amp * eps, False)], [], 1.0)
    npt.assert_allclose(mass_norm_sq(f - fe, 1.0), ref, rtol=1e-6)


def test_serialization_round_trip(grid, rng):
    f = random_null_function(rng, (-2, 2), grid, complex_valued=True)
    g = GridFunction.from_json(json.loads(json.dumps(f.to_json())))
    npt.assert_array_equal(g.samples, f.samples)
    table = np.loadtxt(f.to_columns().splitlines())
    npt.assert_array_equal(table[:, 0], grid.x)
    npt.assert_array_equal(table[:, 1] + 1j * table[:, 2], f.samples)
