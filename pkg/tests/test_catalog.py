import dataclasses

import numpy as np
import pytest

from rsep import catalog
from rsep.curvature import dupin_check, ricci_check
from rsep.metric import first_condition_residual, laplace_beltrami, sample_points
from rsep.separation import laplacian_ratio_terms, r_equation_check

EXPECTED = (
    "spherical",
    "toroidal-i",
    "toroidal-ii",
    "cyclidic",
    "dupin-cyclidic",
    "n-elliptic-2",
    "n-elliptic-3",
    "kalnins-miller",
    "dupin-darboux",
)


def test_list_is_exact():
    assert tuple(catalog.list()) == EXPECTED
    assert catalog.names() == EXPECTED


def test_get_examples():
    e = catalog.get("spherical")
    assert [h.text for h in e.metric.H] == ["1", "r", "r*sin(theta)"]
    assert catalog.get("toroidal-i").R.text == "sqrt(cosh(eta) - cos(theta))"


def test_unknown_name_lists_available():
    with pytest.raises(KeyError) as info:
        catalog.get("nope")
    msg = str(info.value)
    assert "nope" in msg and all(n in msg for n in EXPECTED)


def test_entries_are_immutable():
    e = catalog.get("spherical")
    with pytest.raises(dataclasses.FrozenInstanceError):
        e.name = "x"
    with pytest.raises(TypeError):
        e.constants["alpha"] = 9.0
    assert catalog.get("spherical") is e


def test_toroidal_entries_share_metric():
    a, b = catalog.get("toroidal-i"), catalog.get("toroidal-ii")
    pts = sample_points(a.metric, 100)
    assert np.max(np.abs(a.metric.lame_values(pts) - b.metric.lame_values(pts))) <= 1e-12
    assert a.isothermic != b.isothermic


@pytest.mark.parametrize("name", EXPECTED)
def test_entry_passes_first_condition_and_its_own_template(name):
    e = catalog.get(name)
    pts = sample_points(e.metric, 100)
    assert first_condition_residual(e.metric, e.R, pts, tol=1e-9).passed
    assert r_equation_check(e.system(), pts, tol=1e-9).passed
    H = e.assembled().lame_values(pts)
    assert np.max(np.abs(H - e.metric.lame_values(pts)) / np.abs(H)) <= 1e-12


@pytest.mark.parametrize("name", EXPECTED)
def test_declared_verdicts(name):
    e = catalog.get(name)
    v = e.verdicts
    pts = sample_points(e.metric, 50)
    if v.flat is not None:
        assert ricci_check(e.metric, pts, tol=1e-7).passed == v.flat
    if v.dupin is not None:
        assert dupin_check(e.metric, pts).passed == v.dupin
    if v.harmonic_R is not None:
        lap = laplace_beltrami(e.metric, e.R, pts)
        assert (np.max(np.abs(lap)) <= 1e-9 * (1 + np.max(np.abs(e.R(pts))))) == v.harmonic_R
    if v.laplacian_coefficient is not None:
        ratio, scale = laplacian_ratio_terms(e.metric, e.R, pts, 5.0)
        assert np.max(np.abs(ratio - v.laplacian_coefficient) / (1 + scale)) <= 1e-10


def test_riemannian_entries_are_flat():
    for name in EXPECTED:
        e = catalog.get(name)
        if e.metric.riemannian:
            assert e.verdicts.flat, name
    bad = catalog.dupin_darboux_perturbed()
    assert not ricci_check(bad, sample_points(bad, 50), tol=1e-7).passed


def test_system_rejects_unknown_constants():
    with pytest.raises(KeyError):
        catalog.get("spherical").system(gamma=1.0)
