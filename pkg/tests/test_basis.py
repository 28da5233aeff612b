import math

import numpy as np
import pytest

from feptrkn.basis import eval_basis, make_basis, parse_basis
from feptrkn.errors import ConfigurationError


def test_monomial_three():
    b = make_basis("monomial", 3)
    assert b.label == "{t^2, t^3, t^4}"
    assert b.separable and b.omega is None


def test_trig_mixed_three():
    b = make_basis("trig-mixed", 3, 1.5)
    assert b.label == "{t^2, cos(wt), sin(wt)}"


def test_trig_pure_at_zero():
    w = 1.7
    u, _, u2 = eval_basis(make_basis("trig-pure", 4, w), 0.0)
    np.testing.assert_allclose(u, [1, 0, 1, 0])
    np.testing.assert_allclose(u2, [-w * w, 0, -4 * w * w, 0])


def test_monomial_at_one_and_zero():
    b = make_basis("monomial", 3)
    u, u1, u2 = eval_basis(b, 1.0)
    np.testing.assert_array_equal(u, [1, 1, 1])
    np.testing.assert_array_equal(u1, [2, 3, 4])
    np.testing.assert_array_equal(u2, [2, 6, 12])
    u, u1, u2 = eval_basis(b, 0.0)
    np.testing.assert_array_equal(u, [0, 0, 0])
    np.testing.assert_array_equal(u1, [0, 0, 0])
    np.testing.assert_array_equal(u2, [2, 0, 0])


def test_trig_mixed_at_pi():
    u, _, u2 = eval_basis(make_basis("trig-mixed", 3, 2.0), math.pi)
    np.testing.assert_allclose(u, [math.pi ** 2, 1, 0], atol=1e-15)
    np.testing.assert_allclose(u2, [2, -4, 0], atol=1e-14)


def test_vector_shapes():
    b = make_basis("trig-pure", 6, 1.0)
    u, u1, u2 = eval_basis(b, np.linspace(0, 1, 7))
    assert u.shape == u1.shape == u2.shape == (7, 6)


@pytest.mark.parametrize("kind,s", [("monomial", 5), ("trig-mixed", 5), ("trig-pure", 6)])
def test_derivatives_match_finite_differences(kind, s):
    b = make_basis(kind, s, 1.3)
    t = np.linspace(-2, 3, 11)
    eps = 1e-5
    up, u1p, _ = eval_basis(b, t + eps)
    um, u1m, _ = eval_basis(b, t - eps)
    _, u1, u2 = eval_basis(b, t)
    np.testing.assert_allclose((up - um) / (2 * eps), u1, rtol=1e-8, atol=1e-8)
    np.testing.assert_allclose((u1p - u1m) / (2 * eps), u2, rtol=1e-8, atol=1e-7)


def test_custom_basis_roundtrip():
    fns = [(np.exp, np.exp, np.exp), (np.sin, np.cos, lambda t: -np.sin(t))]
    b = make_basis("custom", 2, functions=fns)
    u, u1, u2 = eval_basis(b, 0.0)
    np.testing.assert_allclose(u, [1, 0])
    np.testing.assert_allclose(u2, [1, 0])
    assert not b.separable


@pytest.mark.parametrize("kind,s,omega", [
    ("trig-mixed", 4, 1.0), ("trig-mixed", 1, 1.0), ("trig-pure", 3, 1.0),
    ("trig-pure", 4, 0.0), ("trig-pure", 4, None), ("monomial", 0, None), ("bogus", 3, None),
])
def test_invalid_combinations(kind, s, omega):
    with pytest.raises(ConfigurationError):
        make_basis(kind, s, omega)


def test_parse_basis_aliases():
    assert parse_basis("monomial:s=3").label == make_basis("monomial", 3).label
    b = parse_basis("trigmix:s=3,omega=1.0")
    assert b.kind == "trig-mixed" and b.omega == 1.0
    b = parse_basis("trig:s=4,omega=2")
    assert b.kind == "trig-pure" and b.s == 4


@pytest.mark.parametrize("spec", ["trig:omega=1", "trig:s=x", "monomial:s=3,q=1", "nope:s=2", "trig:s=4,omega"])
def test_parse_basis_errors(spec):
    with pytest.raises(ConfigurationError):
        parse_basis(spec)


def test_subset_separability():
    b = make_basis("trig-mixed", 5, 1.0)
    assert not b.subset(4).separable        # cos 2t without sin 2t
    assert not b.subset(2).separable        # t^2, cos only
    assert b.subset(3).separable
    p = make_basis("trig-pure", 4, 1.0)
    assert not p.subset(3).separable
