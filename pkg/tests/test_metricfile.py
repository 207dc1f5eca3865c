import sys

import numpy as np
import pytest

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from helpers import DATA
from rsep import catalog, metricfile
from rsep.metric import sample_points
from rsep.separation import r_equation_check

MINIMAL = """format = 1

[metric]
coords = ["x", "y", "z"]
H = ["1", "1", "1"]
domain = [[0, 1], [0, 1], [0, 1]]
"""


@pytest.mark.parametrize("name", catalog.names())
def test_export_is_a_fixed_point(name):
    text = metricfile.export_entry(catalog.get(name))
    assert metricfile.dumps(tomllib.loads(text)) == text
    problem = metricfile.loads(text)
    again = metricfile.loads(metricfile.dumps(tomllib.loads(text)))
    pts = sample_points(problem.metric, 30)
    assert np.array_equal(problem.metric.lame_values(pts), again.metric.lame_values(pts))
    want = catalog.get(name).metric.lame_values(pts)
    assert np.array_equal(problem.metric.lame_values(pts), want)


@pytest.mark.parametrize("name", catalog.names())
def test_loaded_system_solves_r_equation(name):
    problem = metricfile.loads(metricfile.export_entry(catalog.get(name)))
    pts = sample_points(problem.metric, 40)
    assert r_equation_check(problem.system(), pts).passed


def test_minimal_document_defaults():
    p = metricfile.loads(MINIMAL)
    assert p.metric.signature == (1, 1, 1)
    assert p.R.text == "1"
    assert p.default_ansatz().sizes == (5, 5, 5)


@pytest.mark.parametrize(
    "text, fragment",
    [
        (MINIMAL.replace("format = 1", "format = 2"), "format"),
        (MINIMAL + "colour = 3\n", "colour"),
        (MINIMAL.replace('domain = [[0, 1], [0, 1], [0, 1]]', 'domain = [[0, 1], [1, 0], [0, 1]]\nextra = 1'), "extra"),
        (MINIMAL.replace('"1", "1", "1"', '"1", "1"'), "H"),
        (MINIMAL.replace('"1", "1", "1"', '"1", "1", "w"'), "w"),
        ("format = 1\n[metric\n", ""),
    ],
)
def test_rejections(text, fragment):
    with pytest.raises(metricfile.MetricFileError) as info:
        metricfile.loads(text)
    assert fragment in str(info.value)


def test_load_and_digest():
    problem, text = metricfile.load(DATA / "bad.toml")
    assert problem.metric.coords == ("u1", "u2", "u3")
    assert metricfile.digest(text) == metricfile.digest(text)
    assert len(metricfile.digest(text)) == 64
    with pytest.raises(metricfile.MetricFileError):
        metricfile.load(DATA / "missing.toml")
