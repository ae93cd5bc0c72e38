from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from anikern.aniso_core import (
    Symbol,
    WeightVector,
    check_homogeneity,
    check_positive_definite,
    comparability_constants,
    dilate,
    eval_symbol,
    homogeneous_order,
    kappa_for,
    scaling_majorant,
    symbol_from_coefficients,
    symbol_hash,
    weighted_degree,
)
from anikern.errors import DimensionError, SymbolError

weights_st = st.lists(st.integers(min_value=1, max_value=4), min_size=1, max_size=4)


@pytest.mark.parametrize(
    "beta, m, expected",
    [((2, 0), (1, 2), Fraction(2)), ((0, 4), (1, 2), Fraction(2)), ((0, 0, 0), (1, 2, 3), Fraction(0))],
)
def test_weighted_degree_examples(beta, m, expected):
    assert weighted_degree(beta, m) == expected


def test_weighted_degree_dimension_mismatch():
    with pytest.raises(DimensionError):
        weighted_degree((1, 0, 0), (1, 2))


@given(data=st.data(), m=weights_st)
def test_weighted_degree_is_linear(data, m):
    entries = st.lists(st.integers(0, 8), min_size=len(m), max_size=len(m))
    alpha = data.draw(entries)
    beta = data.draw(entries)
    total = tuple(a + b for a, b in zip(alpha, beta))
    assert weighted_degree(total, m) == weighted_degree(alpha, m) + weighted_degree(beta, m)


@pytest.mark.parametrize(
    "m, mu",
    [((1, 2), Fraction(3, 4)), ((1, 1, 1), Fraction(3, 2)), ((2,), Fraction(1, 4))],
)
def test_homogeneous_order(m, mu):
    assert homogeneous_order(m) == mu
    assert WeightVector(m).dilation_exponents == tuple(Fraction(1, 2 * v) for v in m)


@pytest.mark.parametrize("mu, kappa", [(Fraction(3, 4), 1), (Fraction(1), 2), (Fraction(3, 2), 2), (Fraction(2), 3)])
def test_kappa_rule(mu, kappa):
    assert kappa_for(mu) == kappa


def test_weight_vector_rejects_zero():
    with pytest.raises(DimensionError):
        WeightVector((1, 0))


def test_dilate_examples():
    np.testing.assert_allclose(dilate([1, 2], 16.0, [1.0, 1.0]), [4.0, 2.0])
    np.testing.assert_allclose(dilate([1], 4.0, [3.0]), [6.0])
    x = np.array([0.3, -1.7])
    np.testing.assert_array_equal(dilate([1, 2], 1.0, x), x)


def test_dilate_rejects_non_positive_t():
    with pytest.raises(ValueError):
        dilate([1], 0.0, [1.0])


@settings(max_examples=200)
@given(
    m=weights_st,
    s=st.floats(min_value=1e-3, max_value=1e3),
    t=st.floats(min_value=1e-3, max_value=1e3),
)
def test_dilation_group_law(m, s, t):
    x = np.linspace(-2.0, 3.0, len(m))
    np.testing.assert_allclose(dilate(m, s, dilate(m, t, x)), dilate(m, s * t, x), rtol=1e-13)


def test_eval_symbol_examples(mixed):
    assert eval_symbol(mixed, [1.0, 1.0]) == pytest.approx(2.0)
    assert eval_symbol(mixed, [2.0, 1.0]) == pytest.approx(5.0)
    assert eval_symbol(mixed, [0.0, 0.0]) == 0


def test_symbol_rejects_wrong_degree():
    with pytest.raises(SymbolError):
        Symbol.from_terms([1, 2], {(2, 0): 1.0, (0, 2): 1.0})


def test_symbol_rejects_indefinite_real_part():
    with pytest.raises(SymbolError):
        Symbol.from_terms([1, 1], {(2, 0): 1.0, (0, 2): -1.0})
    loose = Symbol.from_terms([1, 1], {(2, 0): 1.0, (0, 2): -1.0}, strict=False)
    minimum, _ = check_positive_definite(loose)
    assert minimum < 0


def test_homogeneity_of_constructed_symbols(mixed, rng):
    samples = [(float(t), rng.standard_normal(2) * 3.0) for t in np.exp(rng.uniform(-4, 4, 1000))]
    assert check_homogeneity(mixed, samples) <= 1e-12
    assert check_homogeneity(mixed, [(1.0, [0.4, -0.9])]) == 0.0
    line = Symbol.from_terms([1], {(2,): 1.0})
    assert check_homogeneity(line, [(4.0, [1.0])]) == 0.0


def test_positive_definite_minimum_matches_angle_sweep(mixed):
    minimum, argmin = check_positive_definite(mixed)
    theta = np.linspace(0.0, 2.0 * np.pi, 200_001)
    sweep = np.min(np.cos(theta) ** 2 + np.sin(theta) ** 4)
    assert minimum == pytest.approx(sweep, abs=1e-8)
    assert minimum == pytest.approx(0.75, abs=1e-8)
    assert np.linalg.norm(argmin) == pytest.approx(1.0)


def test_positive_definite_one_dimensional(gaussian):
    minimum, argmin = check_positive_definite(gaussian, n_sphere_samples=2)
    assert minimum == 1.0
    assert abs(argmin[0]) == 1.0


def test_positive_definite_needs_enough_samples(mixed):
    with pytest.raises(ValueError):
        check_positive_definite(mixed, n_sphere_samples=3)


def test_comparability_of_multiples(mixed):
    same = comparability_constants(mixed.real, mixed.real, mixed.weights)
    assert same.constant_c == pytest.approx(1.0)
    assert same.constant_C == pytest.approx(1.0)
    double = comparability_constants(lambda x: 2.0 * mixed.real(x), mixed.real, mixed.weights)
    assert double.constant_c == pytest.approx(2.0)
    assert double.constant_C == pytest.approx(2.0)


def test_comparability_extends_off_the_sphere(mixed, rng):
    other = Symbol.from_terms([1, 2], {(2, 0): 2.0, (0, 4): 1.0})
    report = comparability_constants(other.real, mixed.real, mixed.weights)
    assert 0 < report.constant_c <= report.constant_C
    points = rng.standard_normal((10_000, 2)) * np.exp(rng.uniform(-3, 3, (10_000, 1)))
    q, r = other.real(points), mixed.real(points)
    assert np.all(report.constant_c * r <= q + 1e-9 * (1 + q))
    assert np.all(q <= report.constant_C * r + 1e-9 * (1 + q))


def test_comparability_rejects_vanishing_reference(mixed):
    with pytest.raises(SymbolError):
        comparability_constants(mixed.real, lambda x: x[..., 0] ** 2, mixed.weights)


def test_scaling_majorant_examples(mixed):
    assert scaling_majorant((1, 0), mixed, 1.0, 1) == pytest.approx(1.0)
    assert scaling_majorant((0, 0), mixed, 0.5, 1) == pytest.approx(1.0)
    # sup_u |u| - 0.1 u^4 is attained at u = 2.5^(1/3)
    assert scaling_majorant((0, 1), mixed, 0.1, 1) == pytest.approx(0.75 * 2.5 ** (1 / 3), rel=1e-6)


def test_scaling_majorant_is_never_violated(mixed, rng):
    bound = scaling_majorant((0, 1), mixed, 0.1, 1)
    points = rng.standard_normal((10_000, 2)) * 3.0
    assert np.all(np.abs(points[:, 1]) <= 0.1 * mixed.real(points) + bound + 1e-12)


def test_scaling_majorant_requires_low_degree(mixed):
    with pytest.raises(SymbolError):
        scaling_majorant((2, 0), mixed, 0.1, 1)
    with pytest.raises(ValueError):
        scaling_majorant((0, 1), mixed, 0.0, 1)


def test_symbol_from_coefficients_and_hash(mixed):
    built = symbol_from_coefficients({((1, 0), (1, 0)): 1.0, ((0, 2), (0, 2)): 1.0}, [1, 2])
    assert built == mixed
    assert symbol_hash(built) == symbol_hash(mixed)
    assert mixed.to_dict() == {
        "m": [1, 2],
        "terms": [{"beta": [0, 4], "re": 1.0, "im": 0.0}, {"beta": [2, 0], "re": 1.0, "im": 0.0}],
    }
    with pytest.raises(SymbolError):
        symbol_from_coefficients({((1,), (1,)): 0.0}, [1])


def test_symbol_derivatives_match_finite_differences(mixed):
    xi = np.array([0.7, -1.1])
    step = 1e-6
    grad = mixed.grad_real(xi)
    for k in range(2):
        e = np.zeros(2)
        e[k] = step
        fd = (mixed.real(xi + e) - mixed.real(xi - e)) / (2 * step)
        assert grad[k] == pytest.approx(fd, rel=1e-6)
    np.testing.assert_allclose(mixed.hess_real(xi), np.diag([2.0, 12.0 * xi[1] ** 2]), rtol=1e-12)


def test_real_and_even_flags(mixed):
    assert mixed.real_part_only
    assert mixed.is_even
    drift = Symbol.from_terms([1], {(2,): 1.0 + 0.5j})
    assert not drift.real_part_only
