import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rsep import jets
from rsep.jets import Jet, JetDomainError


def test_seed_square():
    (x,) = jets.seed([2.0], 2)
    y = x * x
    assert y.value == 4.0
    assert y.d(0) == 4.0
    assert y.d(0, 0) == 2.0


def test_seed_sine_third_derivative():
    (x,) = jets.seed([0.0], 3)
    y = jets.sin(x)
    assert y.value == 0.0
    assert y.d(0) == pytest.approx(1.0)
    assert y.d(0, 0, 0) == pytest.approx(-1.0)


def test_seed_gradient():
    x, y = jets.seed([1.0, 2.0], 1)
    assert x.value == 1.0
    assert (x.d(0), x.d(1)) == (1.0, 0.0)
    assert y.d(1) == 1.0


@pytest.mark.parametrize("order", [-1, 6])
def test_seed_order_range(order):
    with pytest.raises(ValueError):
        jets.seed([1.0], order)


def test_mul_and_div():
    (x,) = jets.seed([3.0], 2)
    y = jets.combine("mul", x, x)
    assert (y.value, y.d(0), y.d(0, 0)) == (9.0, 6.0, 2.0)
    (x,) = jets.seed([2.0], 2)
    z = jets.combine("div", Jet.constant(1.0, 1, 2), x)
    assert z.d(0) == pytest.approx(-0.25)


def test_division_by_zero_reports_point():
    (x,) = jets.seed([0.0], 2)
    with pytest.raises(JetDomainError) as info:
        1.0 / x
    assert info.value.value == 0.0


def test_univariate_values():
    (x,) = jets.seed([4.0], 2)
    s = jets.sqrt(x)
    assert s.value == 2.0 and s.d(0) == pytest.approx(0.25)
    (x,) = jets.seed([0.0], 2)
    c = jets.apply_univariate("cosh", x)
    assert (c.value, c.d(0), c.d(0, 0)) == (1.0, 0.0, 1.0)


@pytest.mark.parametrize("func,arg", [("ln", 0.0), ("ln", -1.0), ("sqrt", -2.0)])
def test_domain_errors(func, arg):
    (x,) = jets.seed([arg], 2)
    with pytest.raises(JetDomainError):
        jets.apply_univariate(func, x)


def test_ln_exp_round_trip():
    rng = np.random.default_rng(0)
    pts = rng.uniform(-2, 2, size=(2, 100))
    x, y = jets.seed(pts, 3)
    f = x * y + jets.sin(x)
    g = jets.ln(jets.exp(f))
    assert np.max(np.abs(g.coeffs - f.coeffs)) <= 1e-12 * (1 + np.max(np.abs(f.coeffs)))


def test_partial_examples():
    x, y = jets.seed([1.0, 1.0], 3)
    f = x * x * y
    assert jets.partial(f, (1, 1)) == pytest.approx(2.0)
    assert jets.partial(f, (0, 0)) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        jets.partial(f, (2, 2))


def test_unit_partial_is_exact():
    xs = jets.seed([0.3, -1.7, 2.5], 4)
    for i, x in enumerate(xs):
        for j in range(3):
            assert x.d(j) == (1.0 if i == j else 0.0)


def test_sin_cos_pythagoras():
    rng = np.random.default_rng(1)
    pts = rng.uniform(-3, 3, size=(3, 50))
    x, y, z = jets.seed(pts, 5)
    arg = x * y - z * z
    s = jets.sin(arg)
    c = jets.cos(arg)
    one = s * s + c * c
    assert np.allclose(one.value, 1.0, atol=1e-12)
    assert np.max(np.abs(one.coeffs[1:])) <= 1e-12


def test_truncate_and_diff():
    x, y = jets.seed([0.5, 2.0], 3)
    f = x**3.0 * y
    assert f.truncate(1).order == 1
    g = f.diff(0)
    assert g.order == 2
    assert g.value == pytest.approx(3 * 0.25 * 2.0)
    assert g.d(0) == pytest.approx(f.d(0, 0))
    assert g.d(0, 1) == pytest.approx(f.d(0, 0, 1))


def _poly(coeffs, x, y):
    """Degree-2 polynomial in two variables from six coefficients."""
    a, b, c, d, e, f = coeffs
    return a + b * x + c * y + d * x * x + e * x * y + f * y * y


_small = st.integers(min_value=-5, max_value=5).map(float)


@settings(max_examples=60, deadline=None)
@given(st.lists(_small, min_size=6, max_size=6), st.lists(_small, min_size=6, max_size=6), _small, _small)
def test_leibniz(cf, cg, px, py):
    x, y = jets.seed([px, py], 4)
    f = _poly(cf, x, y)
    g = _poly(cg, x, y)
    h = f * g
    for alpha in [(1, 0), (0, 1), (1, 1), (2, 0), (2, 1), (2, 2), (0, 3)]:
        total = 0.0
        for a0 in range(alpha[0] + 1):
            for a1 in range(alpha[1] + 1):
                w = math.comb(alpha[0], a0) * math.comb(alpha[1], a1)
                total += w * f.partial((a0, a1)) * g.partial((alpha[0] - a0, alpha[1] - a1))
        # integer fixtures: the expansion is exact
        assert h.partial(alpha) == total


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-2, 2), min_size=10, max_size=10), st.floats(-1, 1), st.floats(-1, 1))
def test_polynomial_partials_match_finite_differences(c, px, py):
    def f(x, y):
        return (c[0] + c[1] * x + c[2] * y + c[3] * x * x + c[4] * x * y + c[5] * y * y
                + c[6] * x**3 + c[7] * x * x * y + c[8] * x * y * y + c[9] * y**3)

    x, y = jets.seed([px, py], 2)
    J = f(x, y)
    h = 1e-4
    fx = (f(px + h, py) - f(px - h, py)) / (2 * h)
    fxy = (f(px + h, py + h) - f(px + h, py - h) - f(px - h, py + h) + f(px - h, py - h)) / (4 * h * h)
    scale = 1 + sum(abs(v) for v in c)
    assert abs(J.d(0) - fx) <= 1e-5 * scale
    assert abs(J.d(0, 1) - fxy) <= 1e-5 * scale


def test_batch_matches_pointwise():
    rng = np.random.default_rng(2)
    pts = rng.uniform(0.5, 2, size=(2, 7))
    x, y = jets.seed(pts, 3)
    batch = jets.sqrt(x * y) / (x + 1.0)
    for k in range(7):
        a, b = jets.seed(pts[:, k], 3)
        single = jets.sqrt(a * b) / (a + 1.0)
        assert np.allclose(batch.coeffs[..., k], single.coeffs, rtol=0, atol=1e-15)


def test_arity_and_order_preserved():
    x, y, z = jets.seed([1.0, 2.0, 3.0], 3)
    for r in (x + y, x - z, x * y, x / y, x**2.5, jets.exp(x), -y):
        assert r.arity == 3 and r.order == 3
