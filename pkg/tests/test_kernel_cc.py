import math

import numpy as np
import pytest

from anikern.errors import NyquistError
from anikern.grid import AnisoGrid
from anikern.kernel_cc import (
    check_mass,
    check_scaling_identity,
    frequency_box,
    kernel_cc,
    loglog_slope,
    norm_profile,
    nyquist_status,
    support_grid,
)


@pytest.mark.parametrize("t", [0.5, 1.0, 2.0])
def test_gaussian_ground_truth(gaussian, t):
    grid = support_grid(gaussian, t)
    field = kernel_cc(gaussian, t, grid)
    x = grid.axes[0]
    exact = (4.0 * math.pi * t) ** -0.5 * np.exp(-(x**2) / (4.0 * t))
    significant = np.abs(field.values) > 1e-6 * field.peak
    np.testing.assert_allclose(field.values.real[significant], exact[significant], rtol=1e-8)
    assert np.max(np.abs(field.values.imag)) <= 1e-12 * field.peak
    mass = check_mass(field)
    assert mass.covered
    assert mass.deviation <= 1e-10


def test_kernel_at_origin_follows_time_scaling(mixed):
    base = support_grid(mixed, 1.0)
    k1 = kernel_cc(mixed, 1.0, base).at_origin.real
    k4 = kernel_cc(mixed, 4.0, base.dilated(mixed.weights.exponents, 4.0)).at_origin.real
    assert k4 == pytest.approx(4.0 ** -0.75 * k1, rel=1e-9)


@pytest.mark.parametrize("t", [0.25, 4.0])
def test_scaling_identity(mixed, t):
    grid = support_grid(mixed, t)
    assert check_scaling_identity(mixed, t, grid) <= 1e-7


def test_scaling_identity_trivial_at_unit_time(mixed):
    assert check_scaling_identity(mixed, 1.0, support_grid(mixed, 1.0)) == 0.0


def test_mass_check_flags_clipped_support(gaussian):
    field = kernel_cc(gaussian, 1.0, AnisoGrid(radii=(2.0,), counts=(32,)))
    assert not check_mass(field).covered


def test_frequency_box_reaches_threshold(gaussian, mixed):
    np.testing.assert_allclose(frequency_box(gaussian, 2.0, threshold=40.0), [math.sqrt(20.0)])
    radii = frequency_box(mixed, 1.0, threshold=40.0)
    np.testing.assert_allclose(radii, [40.0**0.5, 40.0**0.25])


def test_nyquist_violation_is_reported(gaussian):
    grid = AnisoGrid(radii=(10.0,), counts=(64,))
    assert nyquist_status(gaussian, 1.0, grid) == []
    assert nyquist_status(gaussian, 1.0, grid, freq_counts=[8])
    with pytest.raises(NyquistError):
        kernel_cc(gaussian, 1.0, grid, freq_counts=[8])


def test_kernel_rejects_bad_input(gaussian, mixed):
    grid = AnisoGrid(radii=(10.0,), counts=(64,))
    with pytest.raises(ValueError):
        kernel_cc(gaussian, 0.0, grid)
    with pytest.raises(ValueError):
        kernel_cc(mixed, 1.0, grid)


def test_complex_symbol_gives_complex_kernel():
    from anikern.aniso_core import Symbol

    drift = Symbol.from_terms([1], {(2,): 1.0 + 0.5j})
    grid = support_grid(drift, 1.0)
    field = kernel_cc(drift, 1.0, grid)
    assert np.max(np.abs(field.values.imag)) > 1e-3 * field.peak
    assert check_mass(field).deviation <= 1e-8


def test_norm_slopes(gaussian, mixed):
    times = [0.1, 0.5, 1.0, 5.0, 10.0]
    assert abs(loglog_slope(norm_profile(gaussian, 1.0, times))) <= 0.005
    for symbol in (gaussian, mixed):
        mu = float(symbol.weights.mu)
        slope = loglog_slope(norm_profile(symbol, 2.0, times))
        assert slope == pytest.approx(-mu / 2.0, rel=0.02)
        slope_inf = loglog_slope(norm_profile(symbol, math.inf, times))
        assert slope_inf == pytest.approx(-mu, rel=0.02)


def test_loglog_slope_of_power_law():
    pairs = [(t, 3.0 * t**-0.375) for t in (0.1, 1.0, 10.0)]
    assert loglog_slope(pairs) == pytest.approx(-0.375)
