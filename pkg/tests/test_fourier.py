import math

import numpy as np
import pytest
import scipy.special

from operator_moduli.errors import ArgumentError
from operator_moduli.fourier import (
    BumpSpec,
    GridSettings,
    PlanarGrid,
    bandlimit_approx,
    bessel_bound_check,
    bessel_j,
    decay_statistic,
    dyadic_band_count,
    dyadic_h,
    fourier_check,
    gaussian,
    inverse_fourier_grid,
    l1hat_norm,
    psi,
    psi_constant,
    sample_on_grid,
    smooth_step,
)
from operator_moduli.functions import parse_function

SMALL_GRID = GridSettings(half_width=16.0, samples=256)


def test_bessel_j_agrees_with_scipy(subtests):
    for order in (0, 1, 2):
        for x in (0.0, 0.5, 3.0, 12.5, 29.9, 31.0, 80.0, 250.0):
            with subtests.test(order=order, x=x):
                tolerance = 1e-12 if x <= 30 else 1e-8
                expected = scipy.special.jv(order, x)
                assert bessel_j(order, x) == pytest.approx(expected, abs=tolerance)


def test_bessel_j_rejects_bad_arguments():
    with pytest.raises(ArgumentError):
        bessel_j(1, -1.0)
    with pytest.raises(ArgumentError):
        bessel_j(-1, 1.0)
    with pytest.raises(ArgumentError):
        bessel_j(0, math.nan)


def test_bessel_tail_bound_holds():
    check = bessel_bound_check()
    assert check.holds, check


def test_psi_is_continuous_across_the_unit_circle():
    theta = np.linspace(0, 2 * np.pi, 17)
    inside = psi((1 - 1e-9) * np.exp(1j * theta))
    outside = psi((1 + 1e-9) * np.exp(1j * theta))
    assert np.max(np.abs(inside - outside)) < 1e-8
    assert psi(2.0) == pytest.approx(0.5)
    assert psi(0.5j) == pytest.approx(-0.5j)


def test_psi_constant_is_at_least_one():
    # ∫|J₁|/r ≥ ∫J₁/r = 1
    constant = psi_constant()
    assert 1.0 <= constant.c < 10.0
    assert constant.quadrature_error < 1e-3
    assert psi_constant() is constant


def test_smooth_step_shape():
    t = np.linspace(-1, 2, 301)
    s = smooth_step(t)
    assert np.all(s[t <= 0] == 0.0)
    assert np.all(s[t >= 1] == 1.0)
    assert np.all(np.diff(s) >= 0)
    assert smooth_step(np.array(0.5)) == pytest.approx(0.5)


def test_gaussian_transform_on_a_small_grid():
    check = fourier_check("gaussian", SMALL_GRID)
    assert check.grid_W == 16.0
    assert check.grid_N == 256
    assert check.max_abs_error < 1e-8
    assert check.grid_error_estimate < 1e-8


@pytest.mark.slow
def test_closed_forms_at_the_default_grid(subtests):
    for formula_id in ("chi_disc", "psi", "psi_squared", "gaussian"):
        with subtests.test(formula=formula_id):
            assert fourier_check(formula_id).max_abs_error <= 1e-3


def test_fourier_check_rejects_unknown_formula_and_short_dual_grid():
    with pytest.raises(ArgumentError):
        fourier_check("sinc", SMALL_GRID)
    with pytest.raises(ArgumentError):
        fourier_check("gaussian", GridSettings(half_width=64.0, samples=64))


def test_decay_statistic_needs_the_annulus_on_the_grid():
    with pytest.raises(ArgumentError):
        decay_statistic(GridSettings(half_width=64.0, samples=64))


def test_decay_statistic_is_stable_when_the_grid_is_refined():
    coarse = decay_statistic(GridSettings(half_width=64.0, samples=1024))
    fine = decay_statistic(GridSettings(half_width=64.0, samples=2048))
    assert 0 < coarse < math.inf
    assert abs(fine - coarse) / coarse <= 0.10


def test_inverse_fourier_grid_validation():
    with pytest.raises(ArgumentError):
        inverse_fourier_grid(gaussian, GridSettings(samples=100))
    with pytest.raises(ArgumentError):
        PlanarGrid(1.0, 4, np.zeros((3, 3)))


def test_gaussian_l1hat_norm_is_one():
    # ℱ⁻¹ of exp(−|z|²/2) is exp(−|ζ|²/2)/2π, a probability density
    norm = l1hat_norm(gaussian, decay_exponent=3.0, settings=SMALL_GRID)
    assert norm.value == pytest.approx(1.0, abs=1e-6)
    assert norm.error < 1e-6
    with pytest.raises(ArgumentError):
        l1hat_norm(gaussian, decay_exponent=2.0, settings=SMALL_GRID)


def test_dyadic_band_count():
    assert dyadic_band_count(1.0, 8.0) == 4
    assert dyadic_band_count(1.0, 10.0) == 5
    assert dyadic_band_count(0.5, 1.0) == 2


def test_bump_requires_ordered_radii():
    with pytest.raises(ArgumentError):
        BumpSpec(inner=2.0, outer=1.0)


@pytest.mark.slow
def test_dyadic_h_is_the_phase_on_the_annulus():
    result = dyadic_h(1.0, 8.0)
    radii = np.linspace(1.0, 8.0, 29)
    z = radii * np.exp(1j * np.linspace(0, 6, 29))
    assert np.max(np.abs(result.h(z) - np.conj(z) / z)) < 1e-12
    assert result.h(np.array([0j]))[0] == 0
    assert result.bands == 4
    assert result.bound >= result.bands * result.piece_norm


def test_bandlimit_reproduces_a_lattice_plane_wave():
    # 2π/16 is on the FFT lattice of an 8-wide, 64-sample grid
    frequency = 2 * math.pi / 16
    f = parse_function(f"exp_atom:{frequency!r},0")
    grid = sample_on_grid(f, half_width=8.0, samples=64)
    result = bandlimit_approx(grid, d=1.0)
    assert result.sup_deviation < 1e-10
    assert result.leakage < 1e-8
    assert result.modulus_at_d == pytest.approx(2 * math.sin(frequency / 2), rel=1e-9)
    inner = grid.points()[16:48, 16:48]
    assert np.max(np.abs(result.handle.evaluate(inner) - f.evaluate(inner))) < 1e-9
