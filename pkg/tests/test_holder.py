import math

import numpy as np
import pytest

from operator_moduli.errors import ArgumentError, DegenerateInputError, PreconditionError
from operator_moduli.functions import parse_function
from operator_moduli.holder import (
    circle_ratio,
    halpha_lower,
    hn_eval,
    hn_lipschitz_check,
    hn_telescoping,
    holder_ratio_search,
    quasicommutator_experiment,
    substitution_delta,
)
from operator_moduli.linalg import apply_function, diagonal_normal, operator_norm, random_normal
from operator_moduli.moduli import ModulusEnvelope, ModulusKind, make_witness
from operator_moduli.utils import rng


def _plain_envelope(key: str, delta: float, grid: list[float]) -> ModulusEnvelope:
    f = parse_function(key)
    n1, n2 = diagonal_normal([delta / 2]), diagonal_normal([-delta / 2])
    w = make_witness(ModulusKind.PLAIN, f, delta, n1, n2)
    return ModulusEnvelope.from_witnesses(ModulusKind.PLAIN, [w], grid)


def test_hn_values():
    assert hn_eval(1, 2.0) == pytest.approx(2.0)
    assert hn_eval(0, 1 + 1j) == pytest.approx(1 + 1j)
    assert hn_eval(-1, 1 + 1j) == pytest.approx(1 - 1j)
    assert hn_eval(2, 0.0) == 0
    z = np.exp(1j * np.linspace(0, 6, 7))
    np.testing.assert_allclose(hn_eval(1, z), z**3, atol=1e-14)


def test_hn_telescoping_matches_the_functional_calculus(subtests):
    g = rng(11)
    for n in (-3, -2, -1, 0, 1, 2):
        with subtests.test(n=n):
            n1, n2 = random_normal(4, g), random_normal(4, g)
            h = parse_function(f"hn:{n}")
            direct = apply_function(h, n1) - apply_function(h, n2)
            residual = operator_norm(hn_telescoping(n, n1, n2) - direct)
            assert residual <= 1e-10 * (1 + operator_norm(direct))
    with pytest.raises(ArgumentError):
        hn_telescoping(1, random_normal(2, g), random_normal(3, g))


def test_circle_ratio_is_sharp(subtests):
    for n in (-2, 0, 1, 3):
        with subtests.test(n=n):
            assert circle_ratio(n) == pytest.approx(abs(2 * n + 1), abs=1e-3)


def test_hn_lipschitz_check(subtests):
    for n in (-2, -1, 0, 1, 2, 3):
        with subtests.test(n=n):
            report = hn_lipschitz_check(n, instances=30, dim=5, seed=2)
            assert report.ok, report
            assert report.bound == abs(2 * n + 1)
            assert report.max_ratio <= report.bound + 1e-8
            assert report.circle_ratio >= report.bound - 1e-3


def test_hn_lipschitz_check_arguments():
    with pytest.raises(ArgumentError):
        hn_lipschitz_check(1, instances=0, dim=3)


def test_holder_ratio_search_finds_the_scalar_ratio():
    estimate = holder_ratio_search(parse_function("abs_power:0.5"), 0.5, dim=2, budget=8, seed=4)
    # |t|^α against |0|^α along a ray gives exactly the seminorm
    assert estimate.lower >= 1 - 1e-9
    assert estimate.witness is not None
    assert estimate.formula_trace["delta"] == pytest.approx(estimate.witness.constraint)
    assert estimate.formula_trace["seminorm"] == pytest.approx(1.0)


def test_holder_ratio_search_rejects_degenerate_input():
    with pytest.raises(ArgumentError):
        holder_ratio_search(parse_function("identity"), 1.0, dim=2, budget=2)
    with pytest.raises(DegenerateInputError):
        holder_ratio_search(parse_function("constant:3"), 0.5, dim=2, budget=2)


def test_quasicommutator_experiment():
    report = quasicommutator_experiment(
        parse_function("abs_power:0.5"), 0.5, instances=20, dim=4, seed=6
    )
    assert report.violations == 0
    assert report.reference == pytest.approx(4.0)
    assert 0 < report.max_ratio < math.inf
    q50, q90, q99 = report.quantiles
    assert q50 <= q90 <= q99 <= report.max_ratio
    assert report.max_omega_ratio >= 0


def test_substitution_delta():
    assert substitution_delta(0.5) == pytest.approx(2 * math.exp(-2))
    assert substitution_delta(0.9) < substitution_delta(0.5)
    with pytest.raises(ArgumentError):
        substitution_delta(1.0)


def test_halpha_lower_reads_the_envelope():
    small, large = substitution_delta(0.7), substitution_delta(0.5)
    envelope = _plain_envelope("identity", small, [small, large])
    estimates = halpha_lower([0.5, 0.7], parse_function("identity"), envelope)
    assert [e.alpha for e in estimates] == [0.5, 0.7]
    for e in estimates:
        delta = e.formula_trace["delta"]
        assert delta == pytest.approx(substitution_delta(e.alpha))
        assert e.formula_trace["envelope_value"] == pytest.approx(small)
        assert e.lower == pytest.approx(small / (e.formula_trace["seminorm"] * delta**e.alpha))
        assert e.witness is None


def test_halpha_lower_preconditions():
    envelope = _plain_envelope("identity", 0.1, [0.1, 0.2])
    with pytest.raises(ArgumentError):
        halpha_lower([0.5], parse_function("conj"), envelope)
    with pytest.raises(ArgumentError):
        halpha_lower([1.5], parse_function("identity"), envelope)
    steep = _plain_envelope("power:2", 0.1, [0.1, 0.2])
    with pytest.raises(PreconditionError):
        # Lip z² = 2 on the unit disc
        halpha_lower([0.5], parse_function("power:2"), steep)
