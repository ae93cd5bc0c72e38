import numpy as np
import pytest

from anikern.aniso_core import Symbol
from anikern.errors import SymbolError
from anikern.grid import AnisoGrid
from anikern.legendre import (
    check_lf_homogeneity,
    fenchel_young_slack,
    lf_grid,
    lf_growth_rays,
    lf_integrability,
    lf_point,
    lf_separable_closed_form,
    lf_values,
)


def mixed_closed_form(x):
    x = np.asarray(x, dtype=float)
    return (x[..., 0] / 2.0) ** 2 + 3.0 * np.abs(x[..., 1] / 4.0) ** (4.0 / 3.0)


def test_closed_form_oracle_on_square_mesh(mixed):
    axis = np.linspace(-4.0, 4.0, 33)
    mesh = np.stack(np.meshgrid(axis, axis, indexing="ij"), axis=-1)
    values = lf_values(mixed, mesh)
    assert values.shape == (33, 33)
    np.testing.assert_allclose(values, mixed_closed_form(mesh), atol=1e-6)


def test_separable_closed_form_generalises_the_oracle(mixed, rng):
    points = rng.uniform(-5, 5, (50, 2))
    np.testing.assert_allclose(lf_separable_closed_form(mixed, points), mixed_closed_form(points), rtol=1e-12)


def test_separable_closed_form_rejects_cross_terms():
    coupled = Symbol.from_terms([1, 1], {(2, 0): 1.0, (1, 1): 0.5, (0, 2): 1.0})
    with pytest.raises(SymbolError):
        lf_separable_closed_form(coupled, [1.0, 1.0])


def test_gaussian_transform(gaussian):
    xs = np.linspace(-6.0, 6.0, 13)[:, None]
    np.testing.assert_allclose(lf_values(gaussian, xs), xs[:, 0] ** 2 / 4.0, atol=1e-9)


def test_lf_point_reports_maximizer(gaussian):
    result = lf_point(gaussian, [3.0])
    assert result.status == "converged"
    assert result.value == pytest.approx(2.25, abs=1e-9)
    # the maximizer of x xi - xi^2 is x / 2
    assert result.argmax[0] == pytest.approx(1.5, abs=1e-6)
    origin = lf_point(gaussian, [0.0])
    assert origin.value == 0.0 and origin.iterations == 0


def test_lf_grid_matches_closed_form(mixed):
    grid = AnisoGrid(radii=(4.0, 4.0), counts=(16, 16))
    field = lf_grid(mixed, grid)
    assert field.values.shape == grid.shape
    assert np.all(field.status == "converged")
    np.testing.assert_allclose(field.values, mixed_closed_form(grid.nodes()), atol=1e-6)
    assert field.values[grid.origin_index] == 0.0


def test_lf_homogeneity(mixed, rng):
    samples = [(float(t), rng.standard_normal(2)) for t in np.exp(rng.uniform(-2, 2, 64))]
    assert check_lf_homogeneity(mixed, samples) <= 1e-8


def test_non_convex_symbol_homogeneity(rng):
    # positive-definite but not convex: R = xi_1^4 + xi_2^4 - xi_1^2 xi_2^2
    bumpy = Symbol.from_terms([2, 2], {(4, 0): 1.0, (0, 4): 1.0, (2, 2): -1.0})
    samples = [(float(t), rng.standard_normal(2)) for t in np.exp(rng.uniform(-1, 1, 16))]
    assert check_lf_homogeneity(bumpy, samples) <= 1e-8


def test_fenchel_young(mixed, rng):
    xs = rng.standard_normal((10_000, 2)) * 3.0
    xis = rng.standard_normal((10_000, 2)) * 3.0
    assert fenchel_young_slack(mixed, xs, xis) >= -1e-9


def test_growth_and_integrability(mixed):
    rays = lf_growth_rays(mixed, n_rays=8)
    assert rays.shape == (8, 5)
    assert np.all(np.diff(rays, axis=1) > 0)
    integrals = lf_integrability(mixed, radius=2.0, spacing=0.5, doublings=4)
    assert np.all(np.isfinite(integrals))
    assert integrals[-1] == pytest.approx(integrals[-2], rel=1e-2)


def test_indefinite_symbol_is_refused():
    loose = Symbol.from_terms([1, 1], {(2, 0): 1.0, (0, 2): -1.0}, strict=False)
    with pytest.raises(SymbolError):
        lf_values(loose, [[1.0, 0.0]])
