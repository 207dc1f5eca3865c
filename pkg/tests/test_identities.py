import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rsep.exprdsl import ScalarField
from rsep.identities import (
    CoincidentArgumentsError,
    EPDSolution,
    StackelForm,
    bocher_sum,
    elementary_symmetric,
    elliptic_map,
    elliptic_map_fields,
    elliptic_metric,
    epd_check,
    epd_residual,
    km_map_fields,
    pullback_check,
    pullback_residual,
    stackel_assemble,
    symmetric_f,
    vandermonde_stackel,
)
from rsep.metric import DiagonalMetric, MetricError, first_condition_residual, sample_points
from rsep.separation import ode_sources, r_equation_check, verify_product


def F(texts, coords):
    return tuple(ScalarField.parse(t, coords) for t in texts)


def ordered_points(rng, n, count):
    """Points with ``x_1 > x_2 > ... > x_n`` and gaps bounded away from zero."""
    gaps = rng.uniform(0.2, 1.5, size=(n, count))
    return np.cumsum(gaps, axis=0)[::-1] - rng.uniform(0, 2, size=count)


# -- Bocher sums ---------------------------------------------------------------------


def test_bocher_examples():
    assert bocher_sum([1, 2, 3], 2) == pytest.approx(1.0)
    assert bocher_sum([1, 2, 3], 0) == pytest.approx(0.0, abs=1e-15)
    assert bocher_sum([1, 2, 3], 3) == pytest.approx(6.0)
    assert bocher_sum([5, -2], 1) == pytest.approx(1.0)


def test_bocher_rejects_coincident_arguments():
    with pytest.raises(CoincidentArgumentsError):
        bocher_sum([1.0, 1.0, 2.0], 1)
    with pytest.raises(ValueError):
        bocher_sum([1.0, 2.0], -1)


def test_symmetric_f_examples():
    assert symmetric_f([1, 2, 3, 4], 1) == pytest.approx(10.0)
    assert symmetric_f([1, 2], 2) == pytest.approx(7.0)
    assert symmetric_f([1, 2, 3], 3) == pytest.approx(90.0)
    assert bocher_sum([1, 2, 3], 5) == pytest.approx(90.0)


def test_elementary_symmetric_against_brute_force():
    rng = np.random.default_rng(30)
    x = rng.normal(size=5)
    for k in range(6):
        want = sum(np.prod(c) for c in itertools.combinations(x, k)) if k else 1.0
        assert elementary_symmetric(x, k) == pytest.approx(want, rel=1e-12, abs=1e-12)


@pytest.mark.parametrize("n", range(2, 7))
def test_bocher_low_powers(n):
    rng = np.random.default_rng(100 + n)
    x = ordered_points(rng, n, 200)
    for m in range(n):
        terms = np.abs([x[i] ** m / np.prod([x[i] - x[j] for j in range(n) if j != i], axis=0) for i in range(n)])
        scale = 1 + terms.max(axis=0)
        want = 1.0 if m == n - 1 else 0.0
        assert np.max(np.abs(bocher_sum(x, m) - want) / scale) <= 1e-10


@pytest.mark.parametrize("n", range(2, 7))
def test_closed_forms_match_definition(n):
    rng = np.random.default_rng(200 + n)
    x = ordered_points(rng, n, 200)
    for d in (1, 2, 3):
        closed = symmetric_f(x, d)
        direct = bocher_sum(x, d + n - 1)
        assert np.max(np.abs(closed - direct) / (1 + np.abs(closed))) <= 1e-10


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 6), st.integers(0, 8), st.integers(0, 2**31))
def test_bocher_sum_permutation_symmetric(n, m, seed):
    rng = np.random.default_rng(seed)
    x = ordered_points(rng, n, 1)[:, 0]
    perm = rng.permutation(n)
    a, b = bocher_sum(x, m), bocher_sum(x[perm], m)
    assert abs(a - b) <= 1e-12 * (1 + abs(a)) * 10 ** (m // 3)


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 5), st.integers(1, 5), st.floats(0.3, 3.0), st.integers(0, 2**31))
def test_symmetric_f_homogeneous(n, d, c, seed):
    rng = np.random.default_rng(seed)
    x = ordered_points(rng, n, 1)[:, 0]
    lhs = symmetric_f(c * x, d)
    rhs = c**d * symmetric_f(x, d)
    assert abs(lhs - rhs) <= 1e-9 * (1 + abs(rhs))


# -- Euler-Poisson-Darboux -------------------------------------------------------------


def _coords(n):
    return tuple(f"x{i + 1}" for i in range(n))


def test_epd_examples():
    C = _coords(3)
    rng = np.random.default_rng(31)
    x = ordered_points(rng, 3, 50)
    assert np.max(epd_residual(ScalarField.parse("x1 + x2 + x3", C), x)) == 0.0
    sol = EPDSolution(C, F(("x1^2", "x2^2", "x3^2"), C))
    assert np.allclose(sol(x), 1.0, atol=1e-12)
    assert np.allclose(sol.field()(x), 1.0, atol=1e-12)


@pytest.mark.parametrize("n", [3, 4, 5])
def test_epd_general_solution(n):
    C = _coords(n)
    rng = np.random.default_rng(300 + n)
    gens = []
    for c in C:
        a = [float(v) for v in rng.uniform(-1, 1, size=4)]
        gens.append(f"{a[0]!r} + {a[1]!r}*{c} + {a[2]!r}*{c}^2 + {a[3]!r}*{c}^3")
    M = EPDSolution(C, F(gens, C)).field()
    x = ordered_points(rng, n, 100)
    assert epd_check(M, x, tol=1e-9).passed


def test_epd_detects_non_solutions():
    C = _coords(3)
    x = ordered_points(np.random.default_rng(32), 3, 20)
    assert not epd_check(ScalarField.parse("x1*x2", C), x).passed


# -- Stackel -------------------------------------------------------------------------


def test_polar_stackel():
    C = ("r", "t")
    q = (F(("1", "-(r^(-2))"), C), F(("0", "1"), C))
    res = stackel_assemble(StackelForm(C, q, F(("r", "1"), C)), ((0.5, 2.0), (0.1, 3.0)))
    pts = sample_points(res.metric, 50)
    H = res.metric.lame_values(pts)
    assert np.allclose(H[0], 1.0, atol=1e-14) and np.allclose(H[1], pts[0], rtol=1e-14)
    assert res.robertson.max_residual <= 1e-12


def test_unimodular_stackel_is_euclidean():
    C = ("x", "y", "z")
    # every first-column cofactor equals det q = 1
    q = (F(("1", "1", "1"), C), F(("0", "-1", "0"), C), F(("0", "0", "-1"), C))
    s = StackelForm(C, q, F(("1", "1", "1"), C), k2=2.0, k=(0.5, -0.5))
    res = stackel_assemble(s, ((0, 1),) * 3)
    pts = sample_points(res.metric, 10)
    assert np.all(res.metric.lame_values(pts) == 1.0)
    got = [qi(pts) for qi in res.system.q]
    assert np.allclose(got, [[2.0], [-0.5], [0.5]])
    assert np.allclose(sum(got), 2.0)


def test_identity_matrix_is_degenerate():
    C = ("x", "y", "z")
    q = tuple(F(tuple("1" if i == j else "0" for j in range(3)), C) for i in range(3))
    with pytest.raises(MetricError, match="cofactor"):
        stackel_assemble(StackelForm(C, q, F(("1", "1", "1"), C)), ((0, 1),) * 3)


def test_singular_and_non_robertson_forms_rejected():
    C = ("x", "y")
    q = (F(("1", "1"), C), F(("1", "1"), C))
    with pytest.raises(MetricError, match="singular"):
        stackel_assemble(StackelForm(C, q, F(("1", "1"), C)), ((0.1, 1), (0.1, 1)))
    q = (F(("1", "-(x^(-2))"), C), F(("0", "1"), C))
    with pytest.raises(MetricError, match="Robertson"):
        stackel_assemble(StackelForm(C, q, F(("1", "1"), C)), ((0.5, 2), (0.1, 1)))


ELLIPTIC_B = (2.0, 1.0, 0.0)
ELLIPTIC_BOX = ((2.2, 4.0), (1.1, 1.9), (0.1, 0.9))


def _elliptic_stackel(k2=1.0, k=(0.3, -0.2)):
    L = ("l1", "l2", "l3")
    quartic = [f"4*({x} - 2)*({x} - 1)*{x}" for x in L]
    A = F(quartic, L)
    g = tuple(ScalarField.coordinate(x, L) for x in L)
    # A_2 < 0 on the middle chamber
    f = F([f"sqrt({s}{a})" for s, a in zip(("", "-", ""), quartic)], L)
    return StackelForm(L, vandermonde_stackel(L, g, A), f, k2=k2, k=k)


def test_elliptic_stackel_reproduces_elliptic_metric():
    ref = elliptic_metric(ELLIPTIC_B, ELLIPTIC_BOX)
    res = stackel_assemble(_elliptic_stackel(), ELLIPTIC_BOX, ref.guards)
    pts = sample_points(ref, 50)
    got, want = res.metric.lame_values(pts), ref.lame_values(pts)
    assert np.max(np.abs(got - want) / want) <= 1e-12
    assert res.robertson.passed and res.cofactor_independence.passed


def _random_stackel(rng):
    """Rows ``(g_i^2, g_i, 1) / A_i``: Robertson holds with ``f_i = sqrt(A_i)``."""
    C = ("u1", "u2", "u3")
    g, A, f = [], [], []
    for i, c in enumerate(C):
        s, w = (float(v) for v in rng.uniform(0.1, 0.4, size=2))
        offset = 3.0 * (2 - i)
        g.append(ScalarField.parse(f"{offset!r} + {c} + {s!r}*sin({c})", C))
        atext = f"1 + {w!r}*{c}^2"
        A.append(ScalarField.parse(atext, C))
        f.append(ScalarField.parse(f"sqrt({atext})", C))
    k2 = float(rng.uniform(0.5, 2.0))
    k = tuple(float(v) for v in rng.uniform(-1, 1, size=2))
    return StackelForm(C, vandermonde_stackel(C, g, A), tuple(f), k2=k2, k=k)


def test_random_stackel_forms_separate():
    rng = np.random.default_rng(33)
    for _ in range(5):
        res = stackel_assemble(_random_stackel(rng), ((0.2, 0.8),) * 3)
        pts = sample_points(res.metric, 50)
        assert res.robertson.max_residual <= 1e-10
        assert first_condition_residual(res.metric, res.system.R, pts).passed
        assert r_equation_check(res.system, pts).passed
        assert verify_product(res.system, ode_sources(res.system), grid=8).passed


# -- coordinate maps -------------------------------------------------------------------


def test_identity_map_pulls_back_exactly():
    C = ("x", "y", "z")
    m = DiagonalMetric(C, F(("1 + x*y", "2 + sin(z)", "exp(x)"), C), ((0, 1),) * 3)
    ident = tuple(ScalarField.coordinate(c, C) for c in C)
    assert np.max(pullback_residual(ident, m, m, sample_points(m, 20))) == 0.0


def test_elliptic_map_n2():
    b = (1.0, 0.0)
    em = elliptic_metric(b, ((1.2, 3.0), (0.1, 0.9)))
    X = ("x", "y")
    flat = DiagonalMetric(X, F(("1", "1"), X), ((0, 10),) * 2)
    pts = sample_points(em, 50)
    assert pullback_check(elliptic_map_fields(em.coords, b), em, flat, pts, tol=1e-10).passed
    x = elliptic_map(pts, b)
    # confocal conic identity: sum_i x_i^2 / (lambda - b_i) = 1 for each lambda^j
    for lam in pts:
        assert np.allclose(sum(x[i] ** 2 / (lam - b[i]) for i in range(2)), 1.0, rtol=1e-12)


def test_elliptic_map_n3_and_ordering():
    em = elliptic_metric(ELLIPTIC_B, ELLIPTIC_BOX)
    X = ("x", "y", "z")
    flat = DiagonalMetric(X, F(("1", "1", "1"), X), ((0, 10),) * 3)
    pts = sample_points(em, 50)
    assert pullback_check(elliptic_map_fields(em.coords, ELLIPTIC_B), em, flat, pts).passed
    with pytest.raises(ValueError):
        elliptic_map([1.5, 1.2, 0.5], ELLIPTIC_B)


def test_kalnins_miller_map_pulls_back_minkowski():
    L = ("l1", "l2", "l3")
    sigma = DiagonalMetric(
        L,
        F(("sqrt((l1 - l2)*(l1 - l3))", "sqrt((l1 - l2)*(l2 - l3))", "sqrt((l1 - l3)*(l2 - l3))"), L),
        ((2.6, 3.4), (1.6, 2.4), (0.6, 1.4)),
        (1, -1, 1),
    )
    M = ("t", "x", "y")
    minkowski = DiagonalMetric(M, F(("1", "1", "1"), M), ((-100, 100),) * 3, (-1, 1, 1))
    pts = sample_points(sigma, 50)
    assert pullback_check(km_map_fields(L), sigma, minkowski, pts, tol=1e-9).passed
