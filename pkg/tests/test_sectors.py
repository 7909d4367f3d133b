import numpy as np
import numpy.testing as npt
import pytest

from weylscale.errors import NumericalGuardError, SupportError
from weylscale.sectors import (
    RAMPS,
    ChargeProfile,
    build_un,
    half_line_integral,
    limit_morphism_phase,
    rho_lambda_middle_phase,
    rho_lambda_symbol,
    scaled_profile_phase,
    sector_phase,
    stabilization_index,
)
from weylscale.testfn import Grid, GridFunction, make_bump, make_bump_derivative


def test_profile_validation():
    with pytest.raises(ValueError):
        ChargeProfile(1.0, a=0.0)
    with pytest.raises(ValueError):
        ChargeProfile(1.0, n=0)


def test_ramps_monotone_onto_unit_interval():
    s = np.linspace(-1, 1, 201)
    for r in RAMPS.values():
        v = r(s)
        npt.assert_allclose([v[0], v[-1]], [0.0, 1.0], atol=1e-14)
        assert np.all(np.diff(v) >= -1e-15)


def test_build_un(grid):
    p = ChargeProfile(1.5, a=1.0, n=4)
    u = build_un(p, grid)
    x = grid.x
    assert np.all(u.samples[x <= -1.0] == 0)
    assert np.all(u.samples[(x >= 1.0) & (x <= 4.0)] == 1.5)
    assert np.all(u.samples[x >= 5.0] == 0)
    assert p.u_n(np.array([2.5]))[0] == 1.5
    u7 = build_un(p.with_n(7), grid)
    band = (x > -1) & (x < 1)
    npt.assert_array_equal(u.samples[band], u7.samples[band])
    assert not np.any(build_un(ChargeProfile(0.0, n=3), grid).samples)
    with pytest.raises(SupportError):
        build_un(ChargeProfile(1.0, a=1.0, n=40), grid)


def test_u_inf():
    p = ChargeProfile(2.0, a=0.5)
    npt.assert_array_equal(p.u_inf(np.array([-3.0, -0.5, 0.5, 100.0])), [0.0, 0.0, 2.0, 2.0])


def test_sector_phase_examples(grid):
    p = ChargeProfile(0.8, a=1.0)
    assert sector_phase(p, 1j * make_bump(0, 2, 1, grid)) == 1
    right = make_bump(3.0, 1.5, 0.6, grid)
    npt.assert_allclose(sector_phase(p, right), np.exp(-0.8j * right.moment().real), atol=1e-10)
    left = make_bump(-3.0, 1.5, 0.6, grid)
    npt.assert_allclose(sector_phase(p, left), 1.0, atol=1e-10)


def test_phase_multiplicative(grid):
    p = ChargeProfile(1.3, a=1.0)
    f = make_bump(0.3, 2.0, 1.0, grid) + 1j * make_bump(0, 1, 1, grid)
    g = make_bump_derivative(-0.5, 1.7, 0.9, grid)
    npt.assert_allclose(sector_phase(p, f + g), sector_phase(p, f) * sector_phase(p, g), atol=1e-10)


def test_ramp_independence(grid):
    f = make_bump(-3.0, 1.5, 0.6, grid) + make_bump(3.0, 1.5, -1.1, grid)
    phases = [sector_phase(ChargeProfile(1.0, a=1.0, ramp=r), f) for r in RAMPS]
    npt.assert_allclose(phases[0], phases[1], atol=1e-10)
    # inside the ramp region the choice matters
    mid = make_bump(0.3, 0.5, 1.0, grid)
    ph = [sector_phase(ChargeProfile(1.0, a=1.0, ramp=r), mid) for r in RAMPS]
    assert abs(ph[0] - ph[1]) > 1e-6


def test_rho_lambda(grid):
    p = ChargeProfile(1.1, a=1.0)
    f = make_bump(0.5, 2.0, 1.0, grid) + 1j * make_bump(0, 1, 0.5, grid)
    ph, s = rho_lambda_symbol(p, f, 1.0)
    assert ph == sector_phase(p, f) and s is f
    base = rho_lambda_symbol(p, f, 1.0)[0]
    for lam in (1.0, 0.1, 0.01):
        ph, s = rho_lambda_symbol(p, f, lam)
        npt.assert_allclose(ph, base, atol=1e-9)
        npt.assert_allclose(rho_lambda_middle_phase(p, f, lam), scaled_profile_phase(p, f, 1.0),
                            atol=1e-9)
        assert s.grid.half_width == pytest.approx(lam * grid.half_width)


def test_null_integral_symbol_unchanged(grid):
    p = ChargeProfile(0.9, a=1.0)
    f = make_bump_derivative(2.0, 1.0, 1.0, grid) + 1j * make_bump_derivative(-2.0, 1.0, 1.0, grid)
    ph, s = rho_lambda_symbol(p, f, 1.0)
    npt.assert_allclose(abs(ph), 1.0, atol=1e-14)
    npt.assert_allclose(ph, 1.0, atol=1e-10)
    npt.assert_array_equal(s.samples, f.samples)


def test_limit_morphism_phase(grid):
    p = ChargeProfile(0.7, a=1.0)
    assert limit_morphism_phase(p, 1j * make_bump(0, 1, 1, grid)) == 1
    right = make_bump(3.0, 1.5, 0.6, grid)
    npt.assert_allclose(limit_morphism_phase(p, right), sector_phase(p, right), atol=1e-10)
    fine = Grid(2**16, 8.0)
    straddle = make_bump(0.4, 1.0, 1.2, fine)
    sweep = scaled_profile_phase(p, straddle, 1e-4)
    npt.assert_allclose(limit_morphism_phase(p, straddle), sweep, atol=1e-3)


def test_half_line_integral(grid):
    d = make_bump_derivative(0.0, 1.0, 1.0, grid)
    # integral_0^inf of an odd derivative is minus the bump value at 0
    npt.assert_allclose(half_line_integral(d).real, -np.exp(-1.0), rtol=1e-6)
    assert half_line_integral(make_bump(-3, 1, 1, grid)) == 0


def test_stabilization_index(grid):
    p = ChargeProfile(1.0, a=1.0)
    assert stabilization_index(p, GridFunction.zero(grid)) == 1
    assert stabilization_index(p, make_bump(-0.5, 1.0, 1.0, grid)) == 1
    f = make_bump(1.5, 2.0, 1.0, grid)
    assert stabilization_index(p, f) == 4
    idx = [stabilization_index(p, make_bump(0.0, w, 1.0, grid)) for w in (0.5, 2.5, 5.5, 9.5)]
    assert idx == sorted(idx)
    with pytest.raises(NumericalGuardError):
        stabilization_index(p, make_bump(28.0, 3.0, 1.0, grid))
