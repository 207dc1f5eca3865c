import math

import numpy as np
import pytest

from rsep import catalog
from rsep.exprdsl import ScalarField
from rsep.identities import elliptic_metric
from rsep.metric import (
    BinaryForm,
    DiagonalMetric,
    IsothermicForm,
    MetricError,
    NotSeparableError,
    assemble_binary,
    assemble_isothermic,
    extract_p,
    first_condition_residual,
    form_checks,
    laplace_beltrami,
    sample_points,
)

SPH = ("r", "theta", "phi")
TOR = ("eta", "theta", "phi")
U = ("u1", "u2", "u3")
BOX = ((0.5, 2.0), (0.3, 2.8), (0.0, 6.0))


def F(texts, coords):
    return tuple(ScalarField.parse(t, coords) for t in texts)


def lame_close(a, b, pts, tol=1e-12):
    va, vb = a.lame_values(pts), b.lame_values(pts)
    return np.max(np.abs(va - vb) / (1 + np.abs(vb))) <= tol


def test_assemble_spherical():
    form = IsothermicForm(SPH, ScalarField.constant(1, SPH), F(("sin(theta)", "r", "r"), SPH),
                          F(("r^2", "sin(theta)", "1"), SPH))
    m = assemble_isothermic(form, BOX)
    ref = DiagonalMetric(SPH, F(("1", "r", "r*sin(theta)"), SPH), BOX)
    assert lame_close(m, ref, sample_points(ref, 50))


def test_assemble_euclidean():
    one = F(("1", "1", "1"), U)
    m = assemble_isothermic(IsothermicForm(U, one[0], one, one), ((0, 1),) * 3)
    pts = sample_points(m, 10)
    assert np.all(m.lame_values(pts) == 1.0)


def test_assemble_toroidal_matches_catalog():
    e = catalog.get("toroidal-i")
    m = assemble_isothermic(e.isothermic, e.metric.domain)
    assert lame_close(m, e.metric, sample_points(e.metric, 100))


def test_assemble_rejects_n2():
    C = ("x", "y")
    one = F(("1", "1"), C)
    with pytest.raises(MetricError):
        assemble_isothermic(IsothermicForm(C, one[0], one, one), ((0, 1), (0, 1)))


def test_assemble_binary_elliptic():
    e = catalog.get("n-elliptic-3")
    m = assemble_binary(e.binary, e.metric.domain)
    assert lame_close(m, e.metric, sample_points(e.metric, 100))


def test_assemble_binary_euclidean_and_n2_guard():
    C = ("x", "y", "z")
    one = ScalarField.constant(1, C)
    form = BinaryForm(C, one, {(0, 1): one, (0, 2): one, (1, 2): one}, (one, one, one))
    m = assemble_binary(form, ((0, 1),) * 3)
    assert np.all(m.lame_values(sample_points(m, 5)) == 1.0)
    C2 = ("x", "y")
    R = ScalarField.parse("1 + x*y", C2)
    g = ScalarField.parse("2 + x*y", C2)
    with pytest.raises(MetricError):
        assemble_binary(BinaryForm(C2, R, {(0, 1): g}, F(("1", "1"), C2)), ((0, 1), (0, 1)))


def _random_factors(rng, coords):
    """Positive G_ij(u^i, u^j), f_i(u^i) and a general positive R."""
    a = [float(v) for v in rng.uniform(0.2, 1.0, size=12)]
    x, y, z = coords
    G = {
        (0, 1): f"1 + {a[0]!r}*{x}*{y} + {a[1]!r}*cos({y})",
        (0, 2): f"2 + {a[2]!r}*sin({x} - {z})",
        (1, 2): f"1 + {a[3]!r}*{y}^2 + {a[4]!r}*{z}",
    }
    f = (f"1 + {a[5]!r}*{x}^2", f"exp({a[6]!r}*{y})", f"2 + {a[7]!r}*sin({z})")
    R = f"1 + {a[8]!r}*{x}*{y}*{z} + {a[9]!r}*cos({x} + {y})"
    return G, f, R


def test_binary_equals_isothermic_cross_assembly():
    rng = np.random.default_rng(11)
    dom = ((0.1, 1.0),) * 3
    for _ in range(5):
        Gt, ft, Rt = _random_factors(rng, U)
        R = ScalarField.parse(Rt, U)
        Gp = {k: ScalarField.parse(v, U) for k, v in Gt.items()}
        f = F(ft, U)
        binary = assemble_binary(BinaryForm(U, R, Gp, f), dom)
        Gi = (Gp[(1, 2)], Gp[(0, 2)], Gp[(0, 1)])
        iso = assemble_isothermic(IsothermicForm(U, R, Gi, f), dom)
        assert lame_close(binary, iso, sample_points(iso, 50))


def test_assembled_isothermic_passes_first_condition():
    rng = np.random.default_rng(12)
    dom = ((0.1, 1.0),) * 3
    for _ in range(10):
        Gt, ft, Rt = _random_factors(rng, U)
        R = ScalarField.parse(Rt, U)
        G = F((Gt[(1, 2)], Gt[(0, 2)], Gt[(0, 1)]), U)
        f = F(ft, U)
        m = assemble_isothermic(IsothermicForm(U, R, G, f), dom)
        pts = sample_points(m, 50)
        assert first_condition_residual(m, R, pts, tol=1e-10).passed
        # H_1 R^2 f_1 = G_(2) G_(3)
        lhs = m.H[0](pts) * R(pts) ** 2 * f[0](pts)
        rhs = G[1](pts) * G[2](pts)
        assert np.max(np.abs(lhs - rhs) / np.abs(rhs)) <= 1e-12


def test_gauge_covariance():
    e = catalog.get("spherical")
    form = e.isothermic
    c = 3.0
    # f_1 -> c f_1 is compensated by G_(1) -> G_(1)/sqrt(c), G_(2,3) -> sqrt(c) G_(2,3)
    f = (form.f[0] * c, *form.f[1:])
    G = (form.G[0] / math.sqrt(c), form.G[1] * math.sqrt(c), form.G[2] * math.sqrt(c))
    m1 = assemble_isothermic(form, e.metric.domain)
    m2 = assemble_isothermic(IsothermicForm(SPH, form.R, G, f), e.metric.domain)
    assert lame_close(m1, m2, sample_points(m1, 50))


def test_first_condition_examples():
    sph = catalog.get("spherical").metric
    pts = sample_points(sph, 100)
    assert first_condition_residual(sph, ScalarField.constant(1, SPH), pts).max_residual <= 1e-11
    e = catalog.get("toroidal-i")
    pts = sample_points(e.metric, 100)
    assert first_condition_residual(e.metric, e.R, pts).max_residual <= 1e-11
    bad = DiagonalMetric(U, F(("1", "1", "exp(u1*u2)"), U), ((0.5, 1.5),) * 3)
    pts = sample_points(bad, 30)
    from rsep.metric import first_condition_terms

    res, _ = first_condition_terms(bad, ScalarField.constant(1, U), pts)
    assert np.allclose(np.max(np.abs(res), axis=0), 1.0, rtol=0, atol=1e-12)


def test_extract_p_examples():
    e = catalog.get("spherical")
    tabs = extract_p(e.metric, e.R)
    assert np.allclose(tabs[0].p, 2 / tabs[0].u, atol=1e-12)
    assert np.allclose(tabs[1].p, 1 / np.tan(tabs[1].u), atol=1e-12)
    assert np.allclose(tabs[2].p, 0, atol=1e-12)
    e = catalog.get("toroidal-i")
    tabs = extract_p(e.metric, e.R)
    assert np.allclose(tabs[0].p, 1 / np.tanh(tabs[0].u), atol=1e-12)
    assert np.allclose(tabs[1].p, 0, atol=1e-12) and np.allclose(tabs[2].p, 0, atol=1e-12)
    cart = DiagonalMetric(U, F(("1", "1", "1"), U), ((0, 1),) * 3)
    assert all(np.all(t.p == 0) for t in extract_p(cart, ScalarField.constant(1, U)))


def test_extract_p_rejects_non_separable():
    bad = DiagonalMetric(U, F(("1", "1", "exp(u1*u2)"), U), ((0.5, 1.5),) * 3)
    with pytest.raises(NotSeparableError):
        extract_p(bad, ScalarField.constant(1, U))


def test_laplacian_examples():
    cart = DiagonalMetric(U, F(("1", "1", "1"), U), ((0, 1),) * 3)
    pts = sample_points(cart, 10)
    assert np.allclose(laplace_beltrami(cart, ScalarField.parse("u1^2", U), pts), 2.0)
    sph = catalog.get("spherical").metric
    pts = sample_points(sph, 50)
    assert np.allclose(laplace_beltrami(sph, ScalarField.parse("r^2", SPH), pts), 6.0, atol=1e-12)
    e = catalog.get("toroidal-i")
    pts = sample_points(e.metric, 100)
    lap = laplace_beltrami(e.metric, e.R, pts)
    assert np.max(np.abs(lap - 0.25 * e.R(pts) ** 5)) <= 1e-10


@pytest.mark.parametrize("name", catalog.names())
def test_laplacian_of_constant_vanishes(name):
    m = catalog.get(name).metric
    pts = sample_points(m, 30)
    assert np.max(np.abs(laplace_beltrami(m, ScalarField.constant(2.5, m.coords), pts))) <= 1e-12


def test_sampling_is_deterministic_and_guarded():
    m = elliptic_metric((2.0, 1.0, 0.0), ((1.0, 4.0), (0.5, 2.5), (-0.5, 1.5)))
    a = sample_points(m, 64, seed=5)
    b = sample_points(m, 64, seed=5)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, sample_points(m, 64, seed=6))
    for g in m.guards:
        assert np.all(np.abs(g(a)) > 1e-6)
    assert np.all(m.lame_values(a) > 0)


def test_sampling_refuses_nonpositive_lame():
    m = DiagonalMetric(("x", "y"), F(("x", "1"), ("x", "y")), ((-1.0, -0.5), (0, 1)))
    with pytest.raises(MetricError):
        sample_points(m, 10)


def test_metric_validation():
    with pytest.raises(MetricError):
        DiagonalMetric(("x",), F(("1",), ("x",)), ((0, 1),))
    with pytest.raises(MetricError):
        DiagonalMetric(U, F(("1", "1", "1"), U), ((0, 1), (1, 0), (0, 1)))
    with pytest.raises(MetricError):
        DiagonalMetric(U, F(("1", "1", "1"), U), ((0, 1),) * 3, (1, 2, 1))


def test_independence_checks_flag_forbidden_dependence():
    R = ScalarField.constant(1, U)
    G = F(("u1", "u1", "u1"), U)  # G_(1) may not depend on u1
    f = F(("1", "1", "1"), U)
    form = IsothermicForm(U, R, G, f)
    flat = DiagonalMetric(U, f, ((0.5, 1.0),) * 3)
    pts = sample_points(flat, 20)
    results = {r.name: r for r in form_checks(flat, form, pts)}
    assert not results["independence G[u1]"].passed
    assert results["independence G[u2]"].passed
    with pytest.raises(MetricError):
        assemble_isothermic(form, ((0.5, 1.0),) * 3)
