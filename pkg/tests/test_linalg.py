import warnings

import numpy as np
import pytest
import scipy.linalg

from operator_moduli import linalg
from operator_moduli.errors import ArgumentError, PreconditionError, ValidationError
from operator_moduli.functions import parse_function
from operator_moduli.linalg import (
    OperatorClass,
    antidiag_sym,
    apply_function,
    as_matrix,
    classify,
    corner,
    diag2,
    diagonal_normal,
    eigenvalue_clusters,
    haar_unitary,
    in_support,
    jacobi_singular_values,
    make_normal,
    matrix_from_json,
    matrix_to_json,
    membership_defect,
    operator_norm,
    random_hermitian,
    random_matrix,
    random_normal,
    random_spectrum,
    sqrt_defect_check,
    swap,
    unitary_dilation,
)
from operator_moduli.utils import rng


def test_operator_norm_matches_jacobi_oracle():
    g = rng(7)
    m = g.standard_normal((8, 8)) + 1j * g.standard_normal((8, 8))
    assert operator_norm(m) == pytest.approx(jacobi_singular_values(m)[0], rel=1e-9)


def test_operator_norm_of_small_matrices_does_not_warn():
    g = rng(11)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        for n in (2, 8):
            m = g.standard_normal((n, n)) + 1j * g.standard_normal((n, n))
            assert operator_norm(m - m.conj().T) > 0
            assert membership_defect(m, "U") > 0


def test_power_iteration_path_matches_the_oracle():
    g = rng(13)
    m = g.standard_normal((12, 9)) + 1j * g.standard_normal((12, 9))
    settings = linalg.PowerIterationSettings(direct_size=0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        got = operator_norm(m, settings)
    assert got == pytest.approx(jacobi_singular_values(m)[0], rel=1e-9)


def test_jacobi_singular_values_match_lapack(subtests):
    g = rng(3)
    for shape in [(5, 5), (7, 4), (3, 9), (1, 6)]:
        with subtests.test(shape=shape):
            m = g.standard_normal(shape) + 1j * g.standard_normal(shape)
            expected = scipy.linalg.svdvals(m)
            got = jacobi_singular_values(m)[: expected.size]
            np.testing.assert_allclose(got, expected, rtol=1e-10, atol=1e-12)


def test_operator_norm_of_zero_and_rank_one():
    assert operator_norm(np.zeros((4, 3))) == 0.0
    x = np.arange(1, 5, dtype=float)
    y = np.array([1.0, -2.0, 2.0])
    assert operator_norm(np.outer(x, y)) == pytest.approx(np.linalg.norm(x) * 3.0, rel=1e-10)


@pytest.mark.parametrize("bad", [np.array([1.0, 2.0]), np.zeros((0, 3)), np.array([[1.0, np.nan]])])
def test_as_matrix_rejects_malformed_input(bad):
    with pytest.raises(ArgumentError):
        as_matrix(bad)


def test_membership_classes():
    g = rng(11)
    h = random_hermitian(5, g)
    u = haar_unitary(5, g)
    p = np.diag([1.0, 0.0, 1.0]).astype(complex)
    assert classify(h, "SA")
    assert not classify(u, OperatorClass.SA)
    assert classify(u, OperatorClass.U)
    assert classify(p, OperatorClass.P)
    assert classify(2 * p - np.eye(3), OperatorClass.USA)
    assert classify(random_matrix(4, 6, g), OperatorClass.CONTRACTION)
    assert membership_defect(np.ones((2, 3)), OperatorClass.U) == float("inf")


def test_make_normal_rejects_non_unitary_conjugator():
    with pytest.raises(ValidationError) as e:
        make_normal([1.0, 2.0], [[1.0, 0.1], [0.0, 1.0]])
    assert e.value.defect > linalg.MEMBERSHIP_TOL


def test_make_normal_shape_mismatch():
    with pytest.raises(ArgumentError):
        make_normal([1.0, 2.0, 3.0], np.eye(2))


def test_random_normal_is_normal_with_spectrum_in_disc(generator):
    n = random_normal(9, generator, radius=2.0)
    assert n.normality_defect() < 1e-12
    assert in_support(n.eigenvalues, 2.0, "disc")
    assert np.all(np.abs(n.eigenvalues) <= 2.0)


def test_spectral_projections_resolve_the_operator():
    u = haar_unitary(5, rng(2))
    n = make_normal([1.0, 1.0, 2j, -1.0, 2j], u)
    projections = n.spectral_projections()
    assert len(projections) == 3
    total = sum(p for _, p in projections)
    np.testing.assert_allclose(total, np.eye(5), atol=1e-12)
    rebuilt = sum(value * p for value, p in projections)
    np.testing.assert_allclose(rebuilt, n.matrix, atol=1e-12)


def test_eigenvalue_clusters_keep_first_occurrences():
    labels, reps = eigenvalue_clusters(np.array([1.0, 2.0, 1.0 + 1e-14, 3.0, 2.0]))
    assert labels.tolist() == [0, 1, 0, 2, 1]
    np.testing.assert_array_equal(reps, [1.0, 2.0, 3.0])


def test_apply_function_agrees_with_polynomial_calculus(generator):
    n = random_normal(6, generator)
    square = apply_function(parse_function("power:2"), n)
    np.testing.assert_allclose(square, n.matrix @ n.matrix, atol=1e-12)
    adjoint = apply_function(parse_function("conj"), n)
    np.testing.assert_allclose(adjoint, n.matrix.conj().T, atol=1e-12)


def test_block_lifts():
    n1, n2 = diagonal_normal([1.0, 2.0]), diagonal_normal([3j])
    lifted = diag2(n1, n2)
    np.testing.assert_array_equal(np.diag(lifted.matrix), [1.0, 2.0, 3j])
    r = np.array([[1.0], [2.0j]])
    a = antidiag_sym(r)
    assert classify(a, OperatorClass.SA)
    assert corner(r).shape == (3, 3)
    s = swap(2)
    assert classify(s, OperatorClass.USA)


def test_unitary_dilation_is_unitary_and_checks_its_precondition(generator):
    a = random_hermitian(4, generator)
    u = unitary_dilation(a, 0.5)
    assert membership_defect(u, OperatorClass.U) < 1e-10
    np.testing.assert_allclose(u[:4, :4], 0.5 * a, atol=1e-12)
    with pytest.raises(PreconditionError):
        unitary_dilation(a, 1.0)
    with pytest.raises(ArgumentError):
        unitary_dilation(random_matrix(3, 3, generator), 0.5)


def test_square_root_commutator_inequality_holds(subtests):
    for index in range(20):
        g = rng(5, index)
        t = 0.9 * random_hermitian(5, g)
        x = random_matrix(5, 5, g)
        with subtests.test(index=index):
            assert sqrt_defect_check(t, x) >= -1e-8


@pytest.mark.parametrize("support", ["disc", "line", "circle", "lattice"])
def test_random_spectrum_stays_in_support(support):
    values = random_spectrum(50, rng(4), radius=1.5, support=support)
    assert in_support(values, 1.5, support)


def test_matrix_json_validates_entry_count():
    payload = matrix_to_json(np.arange(6, dtype=complex).reshape(2, 3) * (1 + 1j))
    assert payload["dim"] is None
    np.testing.assert_array_equal(matrix_from_json(payload), np.arange(6).reshape(2, 3) * (1 + 1j))
    payload["re"] = payload["re"][:-1]
    with pytest.raises(ValidationError):
        matrix_from_json(payload)
