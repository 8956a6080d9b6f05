import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from operator_moduli.errors import ArgumentError, DomainError
from operator_moduli.functions import (
    REGISTRY_EXAMPLES,
    constant,
    holder_seminorm,
    parse_function,
    sampled_holder_seminorm,
    sampled_modulus,
    table_function,
)

finite = st.floats(min_value=-1.0, max_value=1.0, allow_nan=False, allow_infinity=False)
points = st.builds(complex, finite, finite)


def test_registry_examples_parse_and_keep_their_keys(subtests):
    for key in REGISTRY_EXAMPLES:
        with subtests.test(key=key):
            f = parse_function(key)
            values = f.evaluate(np.array([0.5 + 0.25j, -0.3j]))
            assert values.shape == (2,)
            assert np.all(np.isfinite(values))


@pytest.mark.parametrize(
    "key", ["nope", "power", "hn:x", "sgn_power:1.5", "affine:1,2", "table:/missing.json"]
)
def test_unknown_or_malformed_ids_raise(key):
    with pytest.raises(ArgumentError):
        parse_function(key)


def test_hn_values():
    z = np.array([2.0, 1j, -1.0 + 1j])
    h1 = parse_function("hn:1")
    np.testing.assert_allclose(h1.evaluate(z), z**2 / np.conj(z), atol=1e-14)
    h_neg = parse_function("hn:-2")
    np.testing.assert_allclose(h_neg.evaluate(z), z**-1 / np.conj(z) ** -2, atol=1e-14)
    assert parse_function("hn:3").evaluate(np.array([0j]))[0] == 0


@settings(max_examples=200, deadline=None)
@given(n=st.integers(min_value=-3, max_value=3), z=points, w=points)
def test_hn_scalar_lipschitz_constant(n, z, w):
    h = parse_function(f"hn:{n}")
    lhs = abs(h.evaluate(np.array([z]))[0] - h.evaluate(np.array([w]))[0])
    assert lhs <= abs(2 * n + 1) * abs(z - w) + 1e-9


def test_conjugate_maps_hn_to_its_partner():
    assert parse_function("hn:2").conjugate().key == "hn:-3"
    assert parse_function("conj").conjugate().key == "identity"
    f = parse_function("conj(exp_atom:1,0)")
    z = np.array([0.3 + 0.1j])
    np.testing.assert_allclose(f.evaluate(z), np.conj(parse_function("exp_atom:1,0").evaluate(z)))
    assert f.conjugate().key == "exp_atom:1,0"


def test_negative_powers_have_a_domain():
    f = parse_function("power:-1")
    with pytest.raises(DomainError) as e:
        f.evaluate(np.array([1.0, 0.0]))
    assert e.value.point == 0


def test_constant_and_affine_metadata():
    c = constant(2.5)
    assert c.holder_constant(0.5, 1.0) == 0.0
    assert c.cl_norm == 0.0
    a = parse_function("affine:2,0,1,0")
    assert a.cl_norm == 2.0
    assert a.lipschitz_on(3.0) == 2.0


def test_holder_seminorm_prefers_closed_forms():
    seminorm = holder_seminorm(parse_function("conj"), 0.5, radius=1.0)
    assert seminorm.method == "analytic"
    assert seminorm.value == pytest.approx(2.0**0.5)
    sampled = holder_seminorm(parse_function("power:3"), 0.5, radius=1.0, samples=20_000)
    assert sampled.method == "sampled"
    assert sampled.value > 0


def test_sampled_seminorm_is_a_lower_estimate(subtests):
    for key, alpha in [("conj", 0.5), ("sgn_power:0.5", 0.5), ("abs_power:0.7", 0.7)]:
        f = parse_function(key)
        with subtests.test(key=key):
            sampled = sampled_holder_seminorm(f, alpha, 1.0, samples=30_000)
            assert sampled <= f.holder_constant(alpha, 1.0) * (1 + 1e-9)
            assert sampled >= 0.9 * f.holder_constant(alpha, 1.0)


def test_sampled_seminorm_never_decreases_with_more_samples():
    f = parse_function("power:2")
    small = sampled_holder_seminorm(f, 0.5, samples=1_000, seed=3)
    large = sampled_holder_seminorm(f, 0.5, samples=100_000, seed=3)
    assert large >= small


def test_sampled_modulus_of_linear_maps():
    assert sampled_modulus(parse_function("conj"), 0.5) == pytest.approx(0.5, rel=1e-9)
    assert sampled_modulus(parse_function("conj"), 3.0) == 0.0


def test_table_function(tmp_path):
    path = tmp_path / "f.json"
    path.write_text(json.dumps({"x": [-1.0, 0.0, 1.0], "y": [1.0, 0.0, 1.0]}))
    f = parse_function(f"table:{path}")
    assert f.support == "line"
    np.testing.assert_allclose(f.evaluate(np.array([-0.5, 0.25])), [0.5, 0.25])
    assert f.lipschitz_on() == 1.0
    with pytest.raises(DomainError):
        f.evaluate(np.array([2.0]))
    with pytest.raises(ArgumentError):
        table_function([0.0, 0.0], [1.0, 2.0])


def test_exp_atom_holder_constant_is_attained_on_the_line():
    f = parse_function("exp_atom:2,0")
    alpha = 0.5
    s = np.linspace(1e-4, math.pi / 2, 20_000)
    origin = f.evaluate(np.zeros_like(s, dtype=complex))
    values = np.abs(f.evaluate(s.astype(complex)) - origin) / s**alpha
    assert values.max() <= f.holder_constant(alpha, 1.0) * (1 + 1e-6)
    assert values.max() >= f.holder_constant(alpha, 1.0) * (1 - 1e-3)
