from fractions import Fraction
import itertools

import numpy as np
import pytest

from feptrkn._linalg import lu_factor, lu_solve, solve_rational
from feptrkn.basis import make_basis
from feptrkn.coeffs import (TableauCache, build_F, dense_residuals, embedded_residuals,
                            solve_dense, solve_embedded, solve_tableau, solve_variable_A,
                            tableau_residuals)
from feptrkn.errors import CollocationError, ConfigurationError, SingularMatrixError
from feptrkn.nodes import named_nodes
from oracles import mp_tableau, mp_tableau_residuals, rational_monomial_tableau

C52 = named_nodes("eptrkn52").c
FITTED = [("trig-mixed", 3, "eptrkn52"), ("trig-pure", 4, "eptrkn73"),
          ("trig-mixed", 5, "eptrkn84"), ("trig-pure", 6, "eptrkn95")]


# ---- small dense solver

def test_lu_identity():
    rhs = np.arange(6.0).reshape(3, 2)
    np.testing.assert_array_equal(lu_solve(np.eye(3), rhs), rhs)


def test_lu_diagonal():
    np.testing.assert_allclose(lu_solve(np.diag([2.0, 6.0, 12.0]), np.ones(3)), [1 / 2, 1 / 6, 1 / 12])


def test_lu_hilbert():
    H = 1.0 / (np.arange(4)[:, None] + np.arange(4) + 1)
    x, rc = lu_solve(H, np.ones(4), return_rcond=True)
    assert np.abs(H @ x - 1).max() <= 1e-10
    assert 1e-6 < rc < 1e-4


def test_lu_complex():
    M = np.array([[1.0, 2j], [3.0, 4.0 - 1j]])
    np.testing.assert_allclose(lu_factor(M).solve(np.array([1.0, 2.0])), np.linalg.solve(M, [1.0, 2.0]))


def test_lu_singular():
    with pytest.raises(SingularMatrixError):
        lu_factor([[1.0, 2.0], [2.0, 4.0]])
    with pytest.raises(SingularMatrixError):
        lu_factor([[1.0, 0.0], [0.0, 0.0]])


def test_rational_solver():
    x = solve_rational([[2, 1], [1, 3]], [1, 2])
    assert x == [Fraction(1, 5), Fraction(3, 5)]


# ---- collocation matrix

def test_det_two_stage_monomial():
    c = np.array([0.3, 0.8])
    b = make_basis("monomial", 2)
    for t, h in [(0.0, 0.5), (2.0, 0.1), (-1.0, 1.3)]:
        assert np.linalg.det(build_F(b, c, t, h).F) == pytest.approx(12 * h * (c[1] - c[0]), rel=1e-12)


def test_det_three_stage_monomial():
    b = make_basis("monomial", 3)
    vander = np.prod([C52[j] - C52[i] for i, j in itertools.combinations(range(3), 2)])
    for t, h in [(0.0, 0.25), (4.0, 0.1)]:
        assert np.linalg.det(build_F(b, C52, t, h).F) == pytest.approx(144 * h ** 3 * vander, rel=1e-10)


def test_trig_mixed_first_column():
    F = build_F(make_basis("trig-mixed", 3, 1.0), C52, 0.0, 0.1).F
    np.testing.assert_array_equal(F[:, 0], 2.0)


# ---- tableau

def test_monomial_sums():
    for s, name in [(3, "eptrkn52"), (4, "eptrkn73"), (5, "eptrkn84"), (6, "eptrkn95")]:
        tab = solve_tableau(make_basis("monomial", s), named_nodes(name).c, 0.0, 1.0)
        assert tab.b.sum() == pytest.approx(0.5, abs=1e-12)
        assert tab.d.sum() == pytest.approx(1.0, abs=1e-12)


def test_monomial_is_constant():
    b = make_basis("monomial", 3)
    t1 = solve_tableau(b, C52, 0.0, 0.1)
    t2 = solve_tableau(b, C52, 5.0, 0.3)
    for name in ("A", "b", "d"):
        np.testing.assert_allclose(getattr(t1, name), getattr(t2, name), atol=1e-13)


def test_monomial_matches_rational_oracle():
    for s, name in [(3, "eptrkn52"), (6, "eptrkn95")]:
        c = named_nodes(name).c
        b, d, A = rational_monomial_tableau(c, s)
        tab = solve_tableau(make_basis("monomial", s), c, 0.0, 1.0)
        np.testing.assert_allclose(tab.b, [float(v) for v in b], atol=1e-13)
        np.testing.assert_allclose(tab.d, [float(v) for v in d], atol=1e-13)
        np.testing.assert_allclose(tab.A, [[float(v) for v in r] for r in A], atol=1e-12)


@pytest.mark.parametrize("kind,s,name", FITTED)
@pytest.mark.parametrize("h", [1.0, 0.25, 2.0 ** -6, 2.0 ** -12])
def test_fitted_against_multiprecision(kind, s, name, h):
    basis = make_basis(kind, s, 1.0)
    c = named_nodes(name).c
    tab = solve_tableau(basis, c, 1.7, h)
    b, d, A = mp_tableau(basis, c, 1.7, h)
    np.testing.assert_allclose(tab.b, b, atol=1e-11)
    np.testing.assert_allclose(tab.d, d, atol=1e-11)
    np.testing.assert_allclose(tab.A, A, atol=1e-10)


@pytest.mark.parametrize("kind,s,name", FITTED)
def test_literal_residuals_at_moderate_h(kind, s, name):
    basis = make_basis(kind, s, 1.0)
    tab = solve_tableau(basis, named_nodes(name).c, 0.4, 0.5)
    assert max(tableau_residuals(basis, tab).values()) < 1e-11
    assert max(mp_tableau_residuals(basis, tab).values()) < 1e-13


def test_direct_path_agrees_for_monomials():
    b = make_basis("monomial", 4)
    c = named_nodes("eptrkn73").c
    t1 = solve_tableau(b, c, 0.0, 0.5, method="stable")
    t2 = solve_tableau(b, c, 0.0, 0.5, method="direct")
    np.testing.assert_allclose(t1.A, t2.A, atol=1e-12)
    np.testing.assert_allclose(t1.b, t2.b, atol=1e-13)


def test_direct_path_agrees_for_trig_at_large_h():
    b = make_basis("trig-pure", 4, 1.0)
    c = named_nodes("eptrkn73").c
    t1 = solve_tableau(b, c, 2.0, 0.8, method="stable")
    t2 = solve_tableau(b, c, 2.0, 0.8, method="direct")
    np.testing.assert_allclose(t1.A, t2.A, atol=1e-10)


def test_fitted_coefficients_converge_to_monomial():
    mono = solve_tableau(make_basis("monomial", 3), C52, 0.0, 1.0)
    basis = make_basis("trig-mixed", 3, 1.0)
    hs = 2.0 ** -np.arange(3, 11)
    err = [np.abs(solve_tableau(basis, C52, 0.0, h).b - mono.b).max() for h in hs]
    slope = np.polyfit(np.log(hs), np.log(err), 1)[0]
    assert slope >= 1.0


def test_separable_fitted_is_t_independent():
    b = make_basis("trig-pure", 6, 1.3)
    c = named_nodes("eptrkn95").c
    t1, t2 = solve_tableau(b, c, 0.0, 0.2), solve_tableau(b, c, 11.0, 0.2)
    np.testing.assert_allclose(t1.A, t2.A, atol=1e-13)


def test_custom_basis_uses_direct_path():
    fns = [(lambda t: t ** 2, lambda t: 2 * t, lambda t: 2 + 0 * t),
           (np.exp, np.exp, np.exp),
           (lambda t: t ** 3, lambda t: 3 * t ** 2, lambda t: 6 * t)]
    b = make_basis("custom", 3, functions=fns)
    tab = solve_tableau(b, C52, 0.5, 0.5)
    assert max(tableau_residuals(b, tab).values()) < 1e-12
    with pytest.raises(ConfigurationError):
        solve_tableau(b, C52, 0.5, 0.5, method="stable")


def test_singular_collocation():
    # sin t has zero second derivative at t = 0, and so does t^3
    fns = [(np.sin, np.cos, lambda t: -np.sin(t)), (lambda t: t ** 3, lambda t: 3 * t ** 2, lambda t: 6 * t)]
    b = make_basis("custom", 2, functions=fns)
    with pytest.raises(CollocationError) as err:
        solve_tableau(b, [0.0, 1e-300], 0.0, 1.0)
    assert "collocation condition violated" in str(err.value)


@pytest.mark.parametrize("bad", [dict(h=0.0), dict(h=-1.0), dict(h=np.nan), dict(c=[0.1, 0.1, 0.2])])
def test_tableau_argument_checks(bad):
    kw = dict(c=C52, h=0.1) | bad
    with pytest.raises(ConfigurationError):
        solve_tableau(make_basis("monomial", 3), kw["c"], 0.0, kw["h"])


# ---- variable stage matrix

def test_variable_A_equal_steps():
    b = make_basis("trig-mixed", 3, 1.0)
    np.testing.assert_allclose(solve_variable_A(b, C52, 0.3, 0.2, 0.2), solve_tableau(b, C52, 0.3, 0.2).A,
                               atol=1e-14)


def test_variable_A_monomial_depends_on_ratio_only():
    b = make_basis("monomial", 3)
    ref = solve_variable_A(b, C52, 0.0, 0.1, 0.15)
    for t in (1.0, 7.0):
        np.testing.assert_allclose(solve_variable_A(b, C52, t, 0.1, 0.15), ref, atol=1e-12)
    np.testing.assert_allclose(solve_variable_A(b, C52, 0.0, 0.4, 0.6), ref, atol=1e-12)


def test_variable_A_direct_path():
    b = make_basis("trig-pure", 4, 1.0)
    c = named_nodes("eptrkn73").c
    np.testing.assert_allclose(solve_variable_A(b, c, 1.0, 0.7, 0.35, "direct"),
                               solve_variable_A(b, c, 1.0, 0.7, 0.35, "stable"), atol=1e-10)


# ---- dense output and embedded weights

@pytest.mark.parametrize("kind,s,name", [("monomial", 3, "eptrkn52")] + FITTED)
def test_dense_at_one_is_tableau(kind, s, name):
    basis = make_basis(kind, s, 1.0)
    c = named_nodes(name).c
    tab = solve_tableau(basis, c, 0.5, 0.3)
    dc = solve_dense(basis, c, 0.5, 0.3, 1.0)
    np.testing.assert_allclose(dc.b_xi, tab.b, atol=1e-13)
    np.testing.assert_allclose(dc.d_xi, tab.d, atol=1e-13)


def test_dense_at_zero():
    dc = solve_dense(make_basis("monomial", 3), C52, 0.0, 0.3, 0.0)
    assert not dc.b_xi.any() and not dc.d_xi.any()


def test_dense_residuals_and_range():
    b = make_basis("trig-mixed", 3, 1.0)
    dc = solve_dense(b, C52, 0.0, 0.5, 0.4)
    assert max(dense_residuals(b, C52, 0.0, 0.5, dc).values()) < 1e-11
    with pytest.raises(ConfigurationError):
        solve_dense(b, C52, 0.0, 0.5, 1.5)


def test_embedded_three_of_four():
    basis = make_basis("monomial", 4)
    c = named_nodes("eptrkn73").c
    emb = solve_embedded(basis, c, (0, 1, 2), 0.0, 0.5)
    assert emb.b_tilde.shape == (3,)
    assert emb.b_tilde.sum() == pytest.approx(0.5, abs=1e-13)
    assert max(embedded_residuals(basis, emb).values()) < 1e-12
    # quadrature for y(t+h) exact for t^2..t^4 means local error O(h^5): embedded order 3
    errs = []
    for h in (0.1, 0.05):
        e = solve_embedded(basis, c, (0, 1, 2), 0.0, h)
        u5 = lambda x: x ** 5  # noqa: E731
        q = h * h * e.b_tilde @ (20 * (c[:3] * h) ** 3)
        errs.append(abs(u5(h) - q))
    assert np.log2(errs[0] / errs[1]) == pytest.approx(5, abs=0.1)


def test_embedded_fitted_singular_subbasis():
    # {t^2, cos t}: its collocation determinant vanishes where sin t does
    basis = make_basis("trig-mixed", 3, 1.0)
    h = 0.5
    t = np.pi - 0.5 * (C52[0] + C52[1]) * h
    with pytest.raises(CollocationError):
        solve_embedded(basis, C52, (0, 1), t, h)
    emb = solve_embedded(basis, C52, (0, 1), t + 1e-6, h)
    assert np.abs(emb.b_tilde).max() > 1e3


@pytest.mark.parametrize("subset", [(), (0, 1, 2), (0, 0), (0, 5)])
def test_embedded_subset_checks(subset):
    with pytest.raises(ConfigurationError):
        solve_embedded(make_basis("monomial", 3), C52, subset, 0.0, 0.1)


def test_cache_reuses_separable_results():
    cache = TableauCache(make_basis("trig-mixed", 3, 1.0), C52, (0, 1))
    t1 = cache.tableau(0.0, 0.1)
    assert cache.tableau(5.0, 0.1) is t1
    cache.embedded(0.0, 0.1)
    cache.embedded(1.0, 0.1)   # sub-basis not separable: new entry
    assert len(cache) == 3
    assert cache.variable_A(0.0, 0.1, 0.1) is t1.A
