import json

import numpy as np
import pytest
import scipy.linalg

from anikern.errors import CoefficientError, GridError, SymbolError, TwistError
from anikern.grid import AnisoGrid
from anikern.kernel_cc import kernel_cc
from anikern.models import CoefficientFieldSpec
from anikern.operator_vc import (
    AxisCutoff,
    CoefficientField,
    assemble,
    assemble_reference,
    default_anchors,
    discrete_form,
    kernel_column,
    make_twist,
    power,
    principal_indices,
    quadratic_form,
    rescale,
    semigroup,
    smoothstep,
    transition_width,
    twist,
    twisted_kernel_column,
)
from anikern.aniso_core import WeightVector, dilate

from .conftest import UNIT_1D

IDENTITY_2D = {((1, 0), (1, 0)): 1.0, ((0, 1), (0, 1)): 1.0}


def test_principal_indices():
    assert principal_indices(WeightVector((1, 2))) == [(0, 2), (1, 0)]
    assert principal_indices(WeightVector((1, 1))) == [(0, 1), (1, 0)]


def test_dirichlet_laplacian_spectrum():
    n, radius = 32, 2.0
    grid = AnisoGrid(radii=(radius,), counts=(n,))
    op = assemble_reference(UNIT_1D, grid, [1])
    h = 2.0 * radius / n
    k = np.arange(1, n)
    expected = 4.0 / h**2 * np.sin(k * np.pi / (2 * n)) ** 2
    np.testing.assert_allclose(op.eigenvalues(), expected, rtol=1e-10)
    assert op.kind == "reference"
    assert op.adjoint_gap() == 0.0


def test_quartic_operator_is_square_of_laplacian():
    grid = AnisoGrid(radii=(2.0,), counts=(32,))
    lap = assemble_reference(UNIT_1D, grid, [1])
    quartic = assemble_reference({((2,), (2,)): 1.0}, grid, [2])
    np.testing.assert_allclose(quartic.dense(), lap.dense() @ lap.dense(), atol=1e-8 * np.abs(quartic.dense()).max())


def test_forms_agree(rng):
    grid = AnisoGrid(radii=(1.5, 1.5), counts=(8, 8))
    lower = {
        ((0, 0), (0, 0)): 0.3,
        ((1, 0), (0, 0)): 0.2 + 0.1j,
        ((0, 0), (1, 0)): 0.2 - 0.1j,
    }
    coeffs = CoefficientField.constant([1, 1], grid, IDENTITY_2D, lower)
    op = assemble(coeffs)
    f = rng.standard_normal(grid.interior_shape) + 1j * rng.standard_normal(grid.interior_shape)
    assert quadratic_form(op, f) == pytest.approx(discrete_form(coeffs, f), rel=1e-12)
    assert abs(quadratic_form(op, f).imag) <= 1e-12 * abs(quadratic_form(op, f))


def test_checkerboard_principal_bounds(line_grid):
    coeffs = CoefficientField.checkerboard([1], line_grid, UNIT_1D, 0.75, 1.5)
    assert coeffs.lower_ratio == pytest.approx(0.75)
    assert coeffs.upper_constant == pytest.approx(1.5)
    assert coeffs.gamma == pytest.approx(1.5)
    assert set(np.unique(coeffs.pairs[((1,), (1,))].real)) == {0.75, 1.5}


def test_principal_floor_is_enforced(line_grid):
    with pytest.raises(CoefficientError):
        CoefficientField.checkerboard([1], line_grid, UNIT_1D, 0.5, 1.5)


def test_hermitian_pairing_is_enforced():
    grid = AnisoGrid(radii=(1.0, 1.0), counts=(6, 6))
    with pytest.raises(CoefficientError):
        CoefficientField.constant([1, 1], grid, IDENTITY_2D, {((1, 0), (0, 0)): 0.5})
    with pytest.raises(CoefficientError):
        CoefficientField.constant(
            [1, 1], grid, IDENTITY_2D, {((1, 0), (0, 0)): 0.5j, ((0, 0), (1, 0)): 0.5j}
        )


def test_pair_above_principal_degree_is_rejected(line_grid):
    with pytest.raises(CoefficientError):
        CoefficientField.constant([1], line_grid, UNIT_1D, {((2,), (0,)): 1.0, ((0,), (2,)): 1.0})


def test_reference_must_be_positive(line_grid):
    with pytest.raises(SymbolError):
        assemble_reference({((1,), (1,)): -1.0}, line_grid, [1])
    with pytest.raises(SymbolError):
        assemble_reference({((0,), (0,)): 1.0}, line_grid, [1])


def test_from_spec_loads_blobs(tmp_path, line_grid):
    values = np.full(line_grid.shape, 1.25)
    np.save(tmp_path / "a.npy", values)
    spec = CoefficientFieldSpec.model_validate(
        {
            "m": [1],
            "grid": {"radii": [4.0], "counts": [64]},
            "reference": [{"alpha": [1], "beta": [1], "value": 1.0}],
            "pairs": [
                {"alpha": [1], "beta": [1], "values": "a.npy"},
                {"alpha": [0], "beta": [0], "values": 0.5},
            ],
        }
    )
    coeffs = CoefficientField.from_spec(spec, tmp_path)
    np.testing.assert_allclose(coeffs.pairs[((1,), (1,))].real, 1.25)
    assert coeffs.upper_constant == pytest.approx(1.25)
    assert not coeffs.is_principal_only
    missing = spec.model_copy(update={"pairs": [spec.pairs[0].model_copy(update={"values": "gone.npy"})]})
    with pytest.raises(CoefficientError):
        CoefficientField.from_spec(missing, tmp_path)


def test_semigroup_matches_expm(line_grid):
    op = assemble(CoefficientField.checkerboard([1], line_grid, UNIT_1D, 0.75, 1.5))
    expected = scipy.linalg.expm(-0.1 * op.dense())
    np.testing.assert_allclose(semigroup(op, 0.1), expected, atol=1e-10)
    with pytest.raises(ValueError):
        semigroup(op, 0.0)


def test_kernel_column_matches_fourier_kernel(gaussian):
    grid = AnisoGrid(radii=(8.0,), counts=(256,))
    op = assemble_reference(UNIT_1D, grid, [1])
    column = kernel_column(op, 1.0, [0.0]).real
    reference = kernel_cc(gaussian, 1.0, grid).values.real[1:]
    x = grid.interior_axes[0]
    far = np.abs(x) <= 4.0
    np.testing.assert_allclose(column[far], reference[far], rtol=0.02)


def test_kernel_column_is_symmetric(line_grid):
    op = assemble(CoefficientField.checkerboard([1], line_grid, UNIT_1D, 0.75, 1.5))
    x = line_grid.interior_axes[0]
    a, b = x[20], x[40]
    k_ab = kernel_column(op, 0.3, [b])[20]
    k_ba = kernel_column(op, 0.3, [a])[40]
    assert k_ab == pytest.approx(k_ba, rel=1e-10)
    with pytest.raises(GridError):
        kernel_column(op, 0.3, [10.0])


def test_power(line_grid):
    op = assemble_reference(UNIT_1D, line_grid, [1])
    assert power(op, 1) is op
    squared = power(op, 2)
    np.testing.assert_allclose(squared.dense(), op.dense() @ op.dense())
    assert squared.kind == "power"
    with pytest.raises(ValueError):
        power(op, 0)


def test_smoothstep_is_flat_at_both_ends():
    for order in (1, 2, 3):
        step = smoothstep(order)
        assert step(0.0) == pytest.approx(0.0)
        assert step(1.0) == pytest.approx(1.0)
        for j in range(1, order + 1):
            assert step.deriv(j)(0.0) == pytest.approx(0.0, abs=1e-12)
            assert step.deriv(j)(1.0) == pytest.approx(0.0, abs=1e-9)


def test_axis_cutoff_shape():
    width = transition_width(2)
    cut = AxisCutoff(low=-1.0, high=1.0, width=width, l=2)
    inside = np.linspace(-1.0, 1.0, 11)
    np.testing.assert_allclose(cut(inside), inside)
    far = np.array([1.0 + width, 1.0 + width + 3.0])
    assert cut(far)[0] == pytest.approx(cut(far)[1])
    assert np.all(np.abs(cut.derivative(np.linspace(-6, 6, 2001), 1)) <= 1.0 + 1e-9)


def test_make_twist_certifies_derivatives(line_grid):
    anchors = default_anchors(line_grid, [1])
    tm = make_twist(anchors, line_grid, [1])
    assert tm.derivative_max <= 1.0 + 1e-9
    x, y = (np.asarray(a) for a in tm.anchors)
    np.testing.assert_allclose(tm.phi(x) - tm.phi(y), x - y)
    with pytest.raises(TwistError):
        make_twist(((-3.9,), (3.9,)), line_grid, [1])


def test_twist_is_a_similarity():
    grid = AnisoGrid(radii=(4.0,), counts=(32,))
    op = assemble(CoefficientField.checkerboard([1], grid, UNIT_1D, 0.75, 1.5))
    tm = make_twist(default_anchors(grid, [1]), grid, [1])
    same = twist(op, tm.with_lambda([0.0]))
    np.testing.assert_allclose(same.dense(), op.dense())
    twisted = twist(op, tm.with_lambda([0.5]))
    assert twisted.kind == "twisted"
    assert not twisted.hermitian
    eig = np.sort(np.linalg.eigvals(twisted.dense()).real)
    np.testing.assert_allclose(eig, op.eigenvalues(), rtol=1e-6, atol=1e-8 * op.eigenvalues().max())
    with pytest.raises(ValueError):
        twist(twisted, tm)


def test_twisted_column_conjugates_the_kernel(line_grid):
    op = assemble(CoefficientField.checkerboard([1], line_grid, UNIT_1D, 0.75, 1.5))
    tm = make_twist(default_anchors(line_grid, [1]), line_grid, [1]).with_lambda([1.0])
    y = [0.5]
    plain = kernel_column(op, 0.2, y)
    twisted = twisted_kernel_column(op, tm, 0.2, y)
    exponent = tm.exponent(line_grid)
    j = line_grid.interior_index(y)[0]
    np.testing.assert_allclose(twisted, np.exp(exponent) * plain * np.exp(-exponent[j]), rtol=1e-8, atol=1e-12)


def test_twist_overflow_guard(line_grid):
    op = assemble_reference(UNIT_1D, line_grid, [1])
    tm = make_twist(default_anchors(line_grid, [1]), line_grid, [1]).with_lambda([1e4])
    with pytest.raises(TwistError) as info:
        twist(op, tm)
    assert 0 < info.value.max_lambda < 1e4


def test_rescale_dilates_the_box(line_grid):
    coeffs = CoefficientField.checkerboard([1], line_grid, UNIT_1D, 0.75, 1.5)
    scaled = rescale(coeffs, 4.0)
    assert scaled.grid.radii == pytest.approx((8.0,))
    np.testing.assert_array_equal(scaled.pairs[((1,), (1,))], coeffs.pairs[((1,), (1,))])
    # the principal part rescales exactly: H_s has the spectrum of H divided by s
    np.testing.assert_allclose(
        assemble(scaled).eigenvalues(), assemble(coeffs).eigenvalues() / 4.0, rtol=1e-10
    )
    lower = CoefficientField.constant([1], line_grid, UNIT_1D, {((0,), (0,)): 1.0})
    with pytest.raises(CoefficientError):
        rescale(lower, 2.0)


def test_coefficient_json_roundtrip_shape(line_grid):
    coeffs = CoefficientField.checkerboard([1], line_grid, UNIT_1D, 0.75, 1.5)
    payload = json.loads(json.dumps(coeffs.to_dict()))
    assert payload["m"] == [1]
    assert payload["upper_constant"] == pytest.approx(1.5)


def test_cutoffs_on_interior_axes(line_grid):
    tm = make_twist(default_anchors(line_grid, [1]), line_grid, [1]).with_lambda([2.0])
    (psi,) = tm.psi_on_axes(line_grid)
    assert psi.shape == (line_grid.interior_size,)
    np.testing.assert_allclose(tm.exponent(line_grid), 2.0 * psi)
    assert np.all(np.diff(psi) >= 0)


@pytest.fixture
def smooth_field():
    """Identity principal part plus smooth non-constant lower-order terms on a 2-D box."""
    grid = AnisoGrid(radii=(3.0, 3.0), counts=(12, 12))
    nodes = grid.nodes()
    ones = np.ones(grid.shape)
    pairs = {
        ((1, 0), (1, 0)): ones,
        ((0, 1), (0, 1)): ones,
        ((0, 0), (0, 0)): 0.5 + 0.3 * np.sin(nodes[..., 0]),
        ((1, 0), (0, 0)): 0.2j * np.cos(nodes[..., 1]),
        ((0, 0), (1, 0)): -0.2j * np.cos(nodes[..., 1]),
    }
    return CoefficientField(m=[1, 1], grid=grid, pairs=pairs, reference=IDENTITY_2D)


def test_twisted_form_is_the_two_sided_form(smooth_field, rng):
    grid = smooth_field.grid
    op = assemble(smooth_field)
    tm = make_twist(default_anchors(grid, [1, 1]), grid, [1, 1]).with_lambda([0.7, -0.4])
    exponent = tm.exponent(grid)
    f = rng.standard_normal(grid.interior_shape) + 1j * rng.standard_normal(grid.interior_shape)
    flat = f.reshape(-1)
    twisted = quadratic_form(twist(op, tm), f)
    two_sided = discrete_form(smooth_field, np.exp(-exponent) * flat, np.exp(exponent) * flat)
    assert twisted == pytest.approx(two_sided, rel=1e-10)


def test_power_commutes_with_twist(smooth_field):
    grid = smooth_field.grid
    op = assemble(smooth_field)
    tm = make_twist(default_anchors(grid, [1, 1]), grid, [1, 1]).with_lambda([0.5, 1.0])
    first = twist(power(op, 2), tm).dense()
    second = power(twist(op, tm), 2).dense()
    np.testing.assert_allclose(first, second, rtol=1e-12, atol=1e-12 * np.abs(first).max())


def test_semigroup_property(line_grid):
    op = assemble(CoefficientField.checkerboard([1], line_grid, UNIT_1D, 0.75, 1.5))
    np.testing.assert_allclose(semigroup(op, 0.25), semigroup(op, 0.05) @ semigroup(op, 0.2), atol=1e-12)
    tm = make_twist(default_anchors(line_grid, [1]), line_grid, [1]).with_lambda([1.0])
    twisted = twist(op, tm)
    whole = semigroup(twisted, 0.25)
    np.testing.assert_allclose(
        whole, semigroup(twisted, 0.05) @ semigroup(twisted, 0.2), atol=1e-10 * np.abs(whole).max()
    )


def test_semigroup_at_small_times_is_close_to_identity(line_grid):
    op = assemble(CoefficientField.checkerboard([1], line_grid, UNIT_1D, 0.75, 1.5))
    gap = np.linalg.norm(semigroup(op, 1e-8) - np.eye(op.size), 2)
    assert gap <= 1e-8 * op.eigenvalues().max() + 1e-12


def test_kernel_column_converges_at_second_order():
    errors = []
    for counts in (128, 256, 512):
        grid = AnisoGrid(radii=(8.0,), counts=(counts,))
        op = assemble_reference(UNIT_1D, grid, [1])
        column = kernel_column(op, 1.0, [0.0]).real
        centre = grid.interior_index([0.0])
        errors.append(abs(column[centre] - (4.0 * np.pi) ** -0.5))
    orders = np.log2(np.array(errors[:-1]) / np.array(errors[1:]))
    np.testing.assert_allclose(orders, 2.0, atol=0.1)


@pytest.mark.parametrize("s", [4.0, 0.25])
def test_rescaled_kernel(line_grid, s):
    coeffs = CoefficientField.checkerboard([1], line_grid, UNIT_1D, 0.75, 1.5)
    scaled = rescale(coeffs, s)
    mu = coeffs.m.mu
    x = line_grid.interior_axes[0]
    t, i, j = 0.3, 20, 40
    original = kernel_column(assemble(coeffs), t, [x[j]])[i]
    y_scaled = dilate([1], s, [x[j]])
    rescaled = kernel_column(assemble(scaled), s * t, y_scaled)[i]
    assert original == pytest.approx(s ** float(mu) * rescaled, rel=1e-8)


def test_dirichlet_laplacian_is_submarkovian(line_grid):
    op = assemble_reference(UNIT_1D, line_grid, [1])
    for t in (0.01, 0.1, 1.0):
        for y in (0.0, 2.0, -3.5):
            column = kernel_column(op, t, [y]).real
            mass = float(column.sum()) * line_grid.cell_volume
            assert 0.0 <= mass <= 1.0 + 1e-6
            assert column.min() >= -1e-12 * column.max()
