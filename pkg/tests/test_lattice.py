import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from operator_moduli.errors import ArgumentError, PreconditionError, ValidationError
from operator_moduli.functions import parse_function
from operator_moduli.lattice import (
    LatticeSpec,
    check_separation,
    conj_upper_bound,
    divided_difference,
    lambda_kernels,
    lattice_bound_row,
    lattice_points,
    niz_lower_bound,
    partition_cell,
    partition_cells,
    psi_kernel,
    representation_bound,
    schur_test_lower,
    separated_set_bound,
)
from operator_moduli.schur import multiplier_estimate, multiplier_lower, schur_product


def test_lattice_point_counts():
    points = lattice_points(LatticeSpec(0.5, 1.0))
    assert points.size == 13
    assert points[0] == 0
    assert np.all(np.diff(np.abs(points)) >= -1e-15)
    assert lattice_points(LatticeSpec(0.5, 1.0, closed=False)).size == 9
    assert lattice_points(LatticeSpec(1.0, 1.0)).size == 5


def test_lattice_spec_validation():
    with pytest.raises(ArgumentError):
        LatticeSpec(2.0, 1.0)
    with pytest.raises(ArgumentError):
        LatticeSpec(0.0, 1.0)


def test_divided_difference_conventions():
    z = np.array([0, 1, 1j, 1 + 1j])
    identity = divided_difference(parse_function("identity"), z, z).matrix
    np.testing.assert_allclose(identity, np.ones((4, 4)) - np.eye(4))
    square = divided_difference(parse_function("power:2"), z, z)
    off = ~np.eye(4, dtype=bool)
    np.testing.assert_allclose(square.matrix[off], (z[:, None] + z[None, :])[off])
    assert np.all(np.diag(square.matrix) == 0)
    with_derivative = divided_difference(parse_function("power:2"), z, z, diagonal="derivative")
    np.testing.assert_allclose(np.diag(with_derivative.matrix), 2 * z)
    with pytest.raises(ArgumentError):
        divided_difference(parse_function("conj"), z, z, diagonal="derivative")


def test_lambda_kernels_factor_lambda_r():
    points = lattice_points(LatticeSpec(1.0, 3.0))
    kernels = lambda_kernels(points)
    np.testing.assert_allclose(
        kernels.lambda1,
        divided_difference(parse_function("conj"), points, points).matrix,
        atol=1e-15,
    )
    np.testing.assert_allclose(
        schur_product(kernels.lambda1, kernels.lambda2), kernels.lambda_r, atol=1e-15
    )


def test_schur_test_lower_is_below_the_multiplier_upper_bound():
    points = lattice_points(LatticeSpec(1.0, 3.0))
    bound = schur_test_lower(points)
    phi = divided_difference(parse_function("conj"), points, points).matrix
    estimate = multiplier_estimate(phi, budget=16, iterations=40)
    assert 0 < bound.bound <= estimate.upper + 1e-9
    assert bound.count == points.size
    assert bound.lambda_r_norm_lb >= bound.ones_quotient * (1 - 1e-8)


def test_symbol_bound_covers_large_lattices():
    points = lattice_points(LatticeSpec(1.0, 18.0))
    assert points.size > 900
    bound = schur_test_lower(points)
    dense = np.linalg.norm(lambda_kernels(points).lambda2, 2)
    assert bound.lambda2_norm_ub >= dense * (1.0 - 1e-12)
    assert bound.bound == pytest.approx(bound.lambda_r_norm_lb / bound.lambda2_norm_ub)


def test_schur_test_lower_rejects_off_lattice_points():
    with pytest.raises(ArgumentError):
        schur_test_lower(np.array([0, 0.5]))
    with pytest.raises(ArgumentError):
        schur_test_lower(np.array([], dtype=complex))


def test_niz_lower_bound_grows():
    with pytest.raises(ArgumentError):
        niz_lower_bound(2.0)
    bounds = [niz_lower_bound(r).bound for r in (4, 8, 16)]
    assert bounds[0] < bounds[1] < bounds[2]


@pytest.mark.slow
def test_lower_and_upper_conj_bounds_bracket(subtests):
    lower = {r: niz_lower_bound(r).bound for r in (4, 8, 16, 32, 64)}
    for r in lower:
        with subtests.test(r=r):
            assert lower[r] <= conj_upper_bound(LatticeSpec(1.0, r))
    slope, _ = np.polyfit(np.log(list(lower)), list(lower.values()), 1)
    assert slope > 0
    assert lower[64] / lower[8] >= 1.4


def test_partition_cells_match_the_scalar_rule():
    g = np.random.default_rng(5)
    z = g.uniform(-3, 3, 12) + 1j * g.uniform(-3, 3, 12)
    w = g.uniform(-3, 3, 10) + 1j * g.uniform(-3, 3, 10)
    cells = partition_cells(0.7, z, w)
    for j in range(z.size):
        for k in range(w.size):
            assert cells.labels[j, k] == partition_cell(0.7, z[j], w[k])
    total = sum(mask.astype(int) for mask in cells.masks)
    assert np.all(total == 1)
    assert cells.bounds == [10.0] + [1.0] * 9


@settings(max_examples=200, deadline=None)
@given(
    st.floats(-5, 5),
    st.floats(-5, 5),
    st.floats(0, 2 * math.pi),
    st.floats(0, 10),
)
def test_partition_cell_distance_rule(x, y, angle, distance):
    a = 0.5
    z = complex(x, y)
    w = z + distance * complex(math.cos(angle), math.sin(angle))
    cell = partition_cell(a, z, w)
    # dist((z, w), Δ) = |z − w|/√2
    if distance / math.sqrt(2) < a:
        assert 1 <= cell <= 9
    if distance / math.sqrt(2) >= 3 * a:
        assert cell == 0


def test_partition_cell_rejects_nonpositive_scale():
    with pytest.raises(ArgumentError):
        partition_cell(0.0, 0, 1)


def test_check_separation_names_the_pair():
    with pytest.raises(PreconditionError) as e:
        check_separation(np.array([0, 2, 2.5]), 1.0)
    assert set(e.value.offending) == {2 + 0j, 2.5 + 0j}
    check_separation(np.array([0, 1, 1j]), 1.0)


def test_separated_set_bound_dominates_the_dense_lower_bound(subtests):
    for key in ("constant:1", "identity", "hn:1"):
        with subtests.test(key=key):
            f = parse_function(key)
            points = np.array([0, 0.5])
            phi = divided_difference(f, points, points).matrix
            bound = separated_set_bound(f, points, 0.5)
            assert multiplier_lower(phi, budget=8).lower <= bound + 1e-12
    with pytest.raises(PreconditionError):
        separated_set_bound(parse_function("identity"), np.array([0, 0.1]), 0.5)


def test_psi_kernel_reproduces_the_divided_difference():
    f = parse_function("power:2")
    points = lattice_points(LatticeSpec(1.0, 2.0))
    values = f.evaluate(points)
    phi = psi_kernel(points, points, 1.0)
    commutator = np.diag(values) @ phi - phi @ np.diag(values)
    np.testing.assert_allclose(commutator, divided_difference(f, points, points).matrix, atol=1e-13)


def test_representation_bound_for_conj():
    points = lattice_points(LatticeSpec(1.0, 2.0))
    bound = representation_bound(
        parse_function("conj"),
        points,
        g1=lambda z, w: np.zeros(np.shape(z)),
        g2=lambda z, w: np.ones(np.shape(z)),
    )
    assert bound.value == pytest.approx(1.0, abs=1e-6)
    assert bound.residual == 0.0
    with pytest.raises(ValidationError):
        representation_bound(
            parse_function("identity"), points, lambda z, w: 0 * z, lambda z, w: 0 * z
        )


def test_representation_bound_for_the_real_part():
    points = lattice_points(LatticeSpec(1.0, 2.0))
    half = lambda z, w: np.full(np.shape(z), 0.5)  # noqa: E731
    bound = representation_bound(parse_function("re"), points, g1=half, g2=half)
    assert bound.value == pytest.approx(1.0, abs=1e-6)


def test_lattice_bound_row_brackets(subtests):
    for key in ("identity", "power:2", "hn:1"):
        with subtests.test(key=key):
            row = lattice_bound_row(1.0, 2.0, parse_function(key), budget=16, iterations=20)
            assert row.points == 13
            assert 0 < row.lower <= row.upper + 1e-9
            assert row.ratio >= 1 - 1e-9


def test_inverse_square_sum_matches_a_double_loop():
    points = lattice_points(LatticeSpec(1.0, 8.0))
    expected = 0.0
    for z in points:
        for w in points:
            if z != w:
                expected += 1.0 / abs(z - w) ** 2
    bound = niz_lower_bound(8.0)
    assert bound.total == pytest.approx(expected, rel=1e-9)
    assert bound.ones_quotient == pytest.approx(expected / points.size, rel=1e-9)


@pytest.mark.slow
def test_inverse_square_sum_grows_like_area_times_log():
    scaled = {r: niz_lower_bound(r).total / (r**2 * math.log(r)) for r in (8, 16, 32, 64)}
    assert scaled[8] > 0
    for r in (16, 32, 64):
        assert scaled[r] >= 0.8 * scaled[8]
