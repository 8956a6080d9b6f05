import math

import numpy as np
import pytest

from operator_moduli.errors import ArgumentError, PreconditionError, ValidationError
from operator_moduli.fourier import psi_constant
from operator_moduli.functions import parse_function
from operator_moduli.lattice import LatticeSpec, lattice_points
from operator_moduli.linalg import diagonal_normal, random_hermitian, random_matrix, random_normal
from operator_moduli.moduli import (
    ModulusEnvelope,
    ModulusKind,
    ModulusSpec,
    best_witness,
    conjugate_witness,
    corner_lift,
    dilation_check,
    doi_check,
    doi_quasicommutator,
    kme_lower_terms,
    kme_witness,
    make_witness,
    mcc_sandwich_check,
    measured_modulus_spec,
    modulus_search,
    modulus_search_parallel,
    net_upper_bound,
    omega_transform,
    projection_to_usa,
    swap_lift,
    usa_to_projection,
    witness_from_json,
    witness_scale,
    witness_to_json,
)
from operator_moduli.utils import rng

IDENTITY = parse_function("identity")
CONJ = parse_function("conj")
SWAP = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=np.complex128)


def _sa_witness():
    n = diagonal_normal([0.5, -0.5])
    return make_witness(ModulusKind.SA, IDENTITY, 1.0, n, partner=SWAP)


def _projection_witness():
    n = diagonal_normal([0.5, -0.5])
    projection = np.full((2, 2), 0.5, dtype=np.complex128)
    return make_witness(ModulusKind.P, IDENTITY, 0.5, n, partner=projection)


# Scalar moduli ------------------------------------------------------------------------


def test_power_transforms_have_closed_forms(subtests):
    for alpha in (0.25, 0.5, 0.9):
        omega = ModulusSpec.parse(f"power:{alpha}")
        for delta in (0.01, 0.5, 2.0):
            with subtests.test(alpha=alpha, delta=delta):
                assert omega_transform(omega, delta, 1) == pytest.approx(
                    delta**alpha / (1 - alpha), rel=1e-6
                )
                assert omega_transform(omega, delta, 2) == pytest.approx(
                    delta**alpha / (1 - alpha) ** 2, rel=1e-6
                )


def test_linear_transform_diverges():
    assert omega_transform(ModulusSpec.parse("linear"), 0.5) == math.inf
    assert omega_transform(ModulusSpec.parse("power:1"), 0.5, 2) == math.inf
    assert omega_transform(ModulusSpec.parse("linear:0"), 0.5) == 0.0


def test_table_transform_matches_the_power_law_tail():
    table = ModulusSpec.parse("table:0.25/0.5;1/1;4/2")
    for delta in (4.0, 8.0):
        assert omega_transform(table, delta, 1) == pytest.approx(2 * math.sqrt(delta), rel=1e-9)
        assert omega_transform(table, delta, 2) == pytest.approx(4 * math.sqrt(delta), rel=1e-9)
    assert omega_transform(table, 0.5, 1) == pytest.approx(2 * math.sqrt(0.5), rel=0.1)


def test_transform_ordering_on_a_bounded_power():
    omega = ModulusSpec.parse("bounded_power:0.5,1")
    for delta in (0.05, 0.5, 3.0):
        value = float(omega(delta))
        star = omega_transform(omega, delta, 1)
        assert value <= star * (1 + 1e-9) <= omega_transform(omega, delta, 2) * (1 + 1e-9)


def test_modulus_contract():
    assert ModulusSpec.parse("power:0.5").check_contract() == (True, True, 0.0)
    report = ModulusSpec.parse("table:1/0;2/0;3/3").check_contract()
    assert report.monotone
    assert not report.subadditive
    assert report.worst_violation > 1


@pytest.mark.parametrize(
    "text", ["power:2", "power:", "bogus:1", "table:1/2", "table:2/1;1/2", "bounded_power:0.5"]
)
def test_malformed_moduli(text):
    with pytest.raises(ArgumentError):
        ModulusSpec.parse(text)


def test_omega_transform_arguments():
    with pytest.raises(ArgumentError):
        omega_transform(ModulusSpec.parse("power:0.5"), 0.0)
    with pytest.raises(ArgumentError):
        omega_transform(ModulusSpec.parse("power:0.5"), 1.0, order=3)


def test_measured_modulus_spec_uses_the_exact_modulus():
    spec = measured_modulus_spec(IDENTITY, grid=[0.1, 0.2, 0.4])
    assert spec.kind == "table"
    assert spec.values == pytest.approx((0.1, 0.2, 0.4))


# Witnesses -----------------------------------------------------------------------------


def test_scaling_preserves_the_ratio():
    w = _sa_witness()
    assert w.value == pytest.approx(1.0)
    scaled = witness_scale(w, 0.25)
    assert scaled.delta == pytest.approx(0.25)
    assert scaled.value == pytest.approx(0.25)
    assert witness_scale(w, 1.0) is w
    with pytest.raises(ArgumentError):
        witness_scale(w, 1.5)
    with pytest.raises(ArgumentError):
        witness_scale(_projection_witness(), 0.5)


def test_projection_and_usa_transfer():
    p = _projection_witness()
    assert p.value == pytest.approx(0.5)
    usa = projection_to_usa(p)
    assert usa.kind is ModulusKind.USA
    assert usa.delta == pytest.approx(1.0)
    assert usa.value == pytest.approx(1.0)
    back = usa_to_projection(usa)
    assert back.kind is ModulusKind.P
    assert back.value == pytest.approx(0.5)
    np.testing.assert_allclose(back.partner, p.partner, atol=1e-15)


def test_swap_and_corner_lifts_keep_the_value():
    n1, n2 = diagonal_normal([0.5]), diagonal_normal([-0.5])
    plain = make_witness(ModulusKind.PLAIN, CONJ, 1.0, n1, n2)
    lifted = swap_lift(plain)
    assert lifted.kind is ModulusKind.USA
    assert lifted.n1.dim == 2
    assert lifted.value == pytest.approx(plain.value)

    quasi = make_witness(
        ModulusKind.C,
        IDENTITY,
        1.0,
        diagonal_normal([0.5]),
        diagonal_normal([-0.5]),
        partner=np.ones((1, 1), dtype=np.complex128),
    )
    corner = corner_lift(quasi)
    assert corner.n2 is None
    assert corner.value == pytest.approx(1.0)
    with pytest.raises(ArgumentError):
        corner_lift(_sa_witness())


def test_conjugate_witness():
    w = conjugate_witness(_sa_witness())
    assert w.f.key == "conj"
    assert w.value == pytest.approx(1.0)
    quasi = make_witness(
        ModulusKind.C,
        IDENTITY,
        1.0,
        diagonal_normal([0.5]),
        diagonal_normal([-0.5]),
        partner=np.ones((1, 1), dtype=np.complex128),
    )
    with pytest.raises(ArgumentError):
        conjugate_witness(quasi)


def test_make_witness_rejects_bad_configurations():
    n = diagonal_normal([0.5, -0.5])
    with pytest.raises(ValidationError):
        # constraint 1 > δ
        make_witness(ModulusKind.SA, IDENTITY, 0.5, n, partner=SWAP)
    with pytest.raises(ValidationError):
        make_witness(ModulusKind.SA, IDENTITY, 1.0, n, partner=2 * SWAP)
    with pytest.raises(ValidationError):
        make_witness(ModulusKind.U, IDENTITY, 1.0, n, partner=0.5 * SWAP)
    with pytest.raises(ValidationError):
        make_witness(
            ModulusKind.PLAIN, IDENTITY, 5.0, diagonal_normal([2.0]), diagonal_normal([0.0])
        )


def test_witness_json_is_revalidated():
    payload = witness_to_json(_sa_witness())
    assert witness_from_json(payload).value == pytest.approx(1.0)
    with pytest.raises(ValidationError):
        witness_from_json({**payload, "value": 2.0})
    with pytest.raises(ValidationError):
        witness_from_json({**payload, "f": "no_such_function"})
    with pytest.raises(ValidationError):
        witness_from_json({k: v for k, v in payload.items() if k != "n1"})


def test_best_witness_prefers_value_then_seed():
    a = _sa_witness()
    b = witness_scale(a, 0.5)
    assert best_witness([b, a]) is a
    with pytest.raises(ArgumentError):
        best_witness([])


# Envelopes -----------------------------------------------------------------------------


def test_envelope_scaling_closure():
    grid = [2.0, 0.25, 0.5, 1.0]
    envelope = ModulusEnvelope.from_witnesses(ModulusKind.SA, [_sa_witness()], grid)
    np.testing.assert_allclose(envelope.deltas, [0.25, 0.5, 1.0, 2.0])
    np.testing.assert_allclose(envelope.lower_values, [0.25, 0.5, 1.0, 1.0])
    assert envelope.scaling_law
    assert envelope.value_at(0.75) == pytest.approx(0.5)
    assert envelope.value_at(0.1) == 0.0
    reloaded = ModulusEnvelope.from_json(envelope.to_json())
    assert reloaded.lower_values.tolist() == envelope.lower_values.tolist()


def test_envelope_monotone_closure_for_other_kinds():
    p = _projection_witness()
    envelope = ModulusEnvelope.from_witnesses(ModulusKind.P, [p], [0.5, 1.0, 4.0])
    np.testing.assert_allclose(envelope.lower_values, [0.5, 0.5, 0.5])
    assert not envelope.scaling_law
    # a zero below the first witness forces zeros above it through value/δ
    trimmed = ModulusEnvelope.from_witnesses(ModulusKind.P, [p], [0.25, 0.5])
    np.testing.assert_allclose(trimmed.lower_values, [0.0, 0.0])


def test_envelope_rejects_mixed_inputs_and_broken_laws():
    with pytest.raises(ArgumentError):
        ModulusEnvelope.from_witnesses(ModulusKind.SA, [_projection_witness()], [1.0])
    with pytest.raises(ArgumentError):
        ModulusEnvelope.from_witnesses(ModulusKind.SA, [], [])
    payload = ModulusEnvelope.from_witnesses(ModulusKind.SA, [_sa_witness()], [0.5, 1.0]).to_json()
    with pytest.raises(ValidationError):
        ModulusEnvelope.from_json({**payload, "lower_values": [1.0, 0.5]})
    with pytest.raises(ValidationError):
        # value/δ increasing
        ModulusEnvelope.from_json({**payload, "lower_values": [0.1, 1.0]})


# Double operator integrals -----------------------------------------------------------


def test_doi_equals_the_commutator_for_a_polynomial():
    g = rng(3)
    n = diagonal_normal(g.uniform(-1, 1, 5) + 1j * g.uniform(-1, 1, 5))
    r = random_matrix(5, 5, g)
    f = parse_function("power:2")
    fm = np.diag(n.eigenvalues**2)
    np.testing.assert_allclose(doi_quasicommutator(f, n, n, r), fm @ r - r @ fm, atol=1e-12)


def test_doi_handles_shared_eigenvalues():
    n1 = diagonal_normal([0.5, 0.5, -0.5j])
    n2 = random_normal(2, rng(4))
    n2 = diagonal_normal([0.5, n2.eigenvalues[0]])
    r = random_matrix(3, 2, rng(5))
    f = parse_function("hn:1")
    f1, f2 = np.diag(f.evaluate(n1.eigenvalues)), np.diag(f.evaluate(n2.eigenvalues))
    np.testing.assert_allclose(doi_quasicommutator(f, n1, n2, r), f1 @ r - r @ f2, atol=1e-12)
    with pytest.raises(ArgumentError):
        doi_quasicommutator(f, n1, n2, np.zeros((2, 2)))


def test_doi_check_residuals(subtests):
    for key in ("identity", "conj", "power:2", "hn:1"):
        with subtests.test(key=key):
            report = doi_check(parse_function(key), instances=20, dim=6, seed=1)
            assert report.ok, report
            assert report.max_residual <= 1e-10


def test_doi_check_does_not_depend_on_workers():
    f = parse_function("hn:-2")
    serial = doi_check(f, instances=12, dim=5, seed=2)
    parallel = doi_check(f, instances=12, dim=5, seed=2, num_concurrent=4)
    assert serial == parallel


# Searches ------------------------------------------------------------------------------


def test_search_attains_delta_for_isometries(subtests):
    cases = [(IDENTITY, k) for k in (ModulusKind.PLAIN, ModulusKind.SA, ModulusKind.C)]
    cases += [(CONJ, ModulusKind.PLAIN), (CONJ, ModulusKind.SA)]
    for f, kind in cases:
        with subtests.test(f=f.key, kind=kind.value):
            w = modulus_search(kind, f, 0.5, dim=3, budget=6, seed=1)
            assert w.constraint <= 0.5 + 1e-10
            assert w.value <= 0.5 + 1e-8
            assert w.value >= 0.5 * (1 - 1e-6)


def test_conj_commutator_search_reaches_at_least_delta():
    w = modulus_search(ModulusKind.C, CONJ, 0.5, dim=3, budget=6, seed=1)
    assert w.constraint <= 0.5 + 1e-10
    assert w.value >= 0.5 * (1 - 1e-6)


def test_search_respects_the_support():
    w = modulus_search(
        ModulusKind.USA, parse_function("hn:1"), 0.3, dim=3, budget=6, support="circle"
    )
    assert np.allclose(np.abs(w.n1.eigenvalues), 1.0)
    assert w.constraint <= 0.3 + 1e-10


def test_search_arguments():
    with pytest.raises(ArgumentError):
        modulus_search(ModulusKind.SA, IDENTITY, 0.0, dim=2, budget=2)
    with pytest.raises(ArgumentError):
        modulus_search(ModulusKind.PLAIN, IDENTITY, -1.0, dim=2, budget=2)
    with pytest.raises(ValueError):
        modulus_search("XYZ", IDENTITY, 1.0, dim=2, budget=2)


def test_parallel_search_is_deterministic():
    f = parse_function("abs_power:0.5")
    one = modulus_search_parallel(ModulusKind.PLAIN, f, 0.2, dim=2, budget=8, seeds=[0, 1, 2])
    two = modulus_search_parallel(
        ModulusKind.PLAIN, f, 0.2, dim=2, budget=8, seeds=[0, 1, 2], num_concurrent=3
    )
    assert one.value == two.value
    assert one.seed == two.seed
    # a scalar pair at distance δ already gives δ^α
    assert one.value >= 0.2**0.5 * (1 - 1e-9)


# Separation construction and net bounds -------------------------------------------------


def test_kme_separation_precondition():
    c = psi_constant().c
    with pytest.raises(PreconditionError) as e:
        kme_lower_terms(CONJ, np.array([0, 0.5 * c]), np.array([0, 0.5 * c]), 1.0)
    assert 0j in e.value.offending


def test_kme_two_point_witness():
    c = psi_constant().c + psi_constant().quadrature_error
    w = kme_witness(CONJ, [0, 1.01 * c * 0.5], None, 0.5)
    assert w.kind is ModulusKind.C
    assert w.constraint <= 0.5 + 1e-10
    assert 0 < w.value


def test_kme_lower_bound_grows_with_the_disc():
    c = psi_constant().c + psi_constant().quadrature_error
    terms = []
    for r in (8, 16, 32, 64):
        points = lattice_points(LatticeSpec(c, r))
        terms.append(kme_lower_terms(CONJ, points, points, 1.0, budget=0))
    assert all(t.route == "schur_test" for t in terms)
    values = [t.value for t in terms]
    assert all(a < b for a, b in zip(values, values[1:]))
    assert terms[-1].multiplier_term > terms[0].multiplier_term
    assert all(t.omega_term == pytest.approx(1.0, rel=1e-6) for t in terms)


def test_net_upper_bound_closed_forms():
    affine = parse_function("affine:2,0,1,0")
    assert net_upper_bound(affine, 1.0, 0.3) == pytest.approx(6 * 0.3)
    assert net_upper_bound(parse_function("constant:1"), 1.0, 0.3) == 0.0
    with pytest.raises(ArgumentError):
        net_upper_bound(affine, 1.0, 0.0)


@pytest.mark.slow
def test_kme_lower_is_below_the_net_upper_bound():
    c = psi_constant().c + psi_constant().quadrature_error
    points = lattice_points(LatticeSpec(c, 4 * c))
    radius = float(np.abs(points).max())
    lower = kme_lower_terms(CONJ, points, points, 1.0, budget=8).value
    assert lower <= net_upper_bound(CONJ, radius, 1.0)


# Dilation checks -----------------------------------------------------------------------


def test_dilation_check_single_instance():
    g = rng(8)
    n = random_normal(4, g)
    a = random_hermitian(4, g)
    check = dilation_check(CONJ, n, a, tau=0.5)
    assert check.commutator_ok
    assert check.function_ok


def test_mcc_sandwich_has_no_violations(subtests):
    for key in ("identity", "conj", "hn:1", "abs_power:0.5"):
        with subtests.test(key=key):
            report = mcc_sandwich_check(parse_function(key), instances=20, seed=3, dim_max=8)
            assert report.violations == 0, report
            assert report.worst_vl_slack >= -1e-8
