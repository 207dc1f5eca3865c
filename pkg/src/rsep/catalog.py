"""Built-in worked examples of R-separable diagonal metrics.

Each entry carries its metric (written out directly), the factorization
that predicts ``R``, a separation-system template with named constants, a
``q`` ansatz with the expected solution family, and expected verdicts.
Expressions follow the DSL rule that ``-x^2`` means ``(-x)^2``; negated
powers are always written ``-(x^2)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from types import MappingProxyType
from builtins import list as list_
from typing import Callable

import numpy as np

from .curvature import darboux_metric
from .exprdsl import ScalarField
from .identities import LogDerivative, elliptic_metric, epd_field
from .metric import BinaryForm, DiagonalMetric, IsothermicForm, assemble_binary, assemble_isothermic
from .separation import ClosedForm, QAnsatz, SeparationSystem


class UnknownEntryError(KeyError):
    def __str__(self) -> str:
        return self.args[0]


@dataclass(frozen=True)
class Family:
    """Expected ``q`` family in ansatz coordinates: particular vector and free directions."""

    particular: tuple
    directions: tuple
    names: tuple


@dataclass(frozen=True)
class Verdicts:
    flat: bool | None = None
    conformally_flat: bool | None = None
    dupin: bool | None = None
    harmonic_R: bool | None = None
    laplacian_coefficient: float | None = None


@dataclass(frozen=True)
class CatalogEntry:
    name: str
    source: str
    metric: DiagonalMetric
    R: ScalarField
    isothermic: IsothermicForm | None
    binary: BinaryForm | None
    p: tuple
    q: tuple
    V: str
    k2: str
    constants: MappingProxyType
    ansatz: QAnsatz
    family: Family
    verdicts: Verdicts
    closed_forms: tuple | None = None
    extra: MappingProxyType = field(default_factory=lambda: MappingProxyType({}))

    @property
    def coords(self):
        return self.metric.coords

    def assembled(self) -> DiagonalMetric:
        """The metric rebuilt from the stored factorization."""
        if self.isothermic is not None:
            return assemble_isothermic(self.isothermic, self.metric.domain, self.metric.guards)
        return assemble_binary(self.binary, self.metric.domain, self.metric.guards)

    def _field(self, text, params):
        return ScalarField.parse(text, self.coords, params)

    def system(self, **overrides) -> SeparationSystem:
        """Separation system with the template constants (optionally overridden)."""
        unknown = set(overrides) - set(self.constants)
        if unknown:
            raise KeyError(f"unknown constants {sorted(unknown)}; available: {sorted(self.constants)}")
        params = {**self.constants, **overrides}
        p = tuple(
            LogDerivative(self._field(t[1], params), i) if isinstance(t, tuple) else self._field(t, params)
            for i, t in enumerate(self.p)
        )
        q = tuple(self._field(t, params) for t in self.q)
        V = self._field(self.V, params)
        k2 = float(self._field(self.k2, params)(np.zeros((self.metric.n, 1)))[0])
        f2 = (self.isothermic or self.binary).f2_sign
        return SeparationSystem(self.metric, self.R, p, q, V, k2, f2)

    def phi_sources(self):
        if self.closed_forms is None:
            return None
        params = dict(self.constants)
        return [ClosedForm(self._field(t, params), i, self.metric) for i, t in enumerate(self.closed_forms)]


def _fields(texts, coords, params=None):
    return tuple(ScalarField.parse(t, coords, params) for t in texts)


def _guards(coords, pairs=True, extra=()):
    out = []
    if pairs:
        for i in range(len(coords)):
            for j in range(i + 1, len(coords)):
                out.append(f"{coords[i]} - {coords[j]}")
    out.extend(extra)
    return tuple(ScalarField.parse(t, coords) for t in out)


def _spherical() -> CatalogEntry:
    C = ("r", "theta", "phi")
    metric = DiagonalMetric(C, _fields(("1", "r", "r*sin(theta)"), C), ((0.5, 2.0), (0.3, 2.8), (0.0, 6.0)))
    one = ScalarField.constant(1.0, C)
    form = IsothermicForm(C, one, _fields(("sin(theta)", "r", "r"), C), _fields(("r^2", "sin(theta)", "1"), C))
    ansatz = QAnsatz(C, (_fields(("1", "r^-2"), C), _fields(("1", "sin(theta)^-2"), C), _fields(("1",), C)))
    return CatalogEntry(
        name="spherical",
        source="spherical coordinates on flat space; R = 1, separation constants alpha and beta",
        metric=metric,
        R=one,
        isothermic=form,
        binary=None,
        p=("2/r", "cos(theta)/sin(theta)", "0"),
        q=("-alpha/r^2", "alpha - beta/sin(theta)^2", "beta"),
        V="0",
        k2="0",
        constants=MappingProxyType({"alpha": 2.0, "beta": 0.5}),
        ansatz=ansatz,
        family=Family((0, 0, 0, 0, 0), ((0, -1, 1, 0, 0), (0, 0, 0, -1, 1)), ("alpha", "beta")),
        verdicts=Verdicts(flat=True, conformally_flat=True, dupin=True, harmonic_R=True),
    )


_TOROIDAL_H = ("1/(cosh(eta) - cos(theta))", "1/(cosh(eta) - cos(theta))", "sinh(eta)/(cosh(eta) - cos(theta))")
_TOROIDAL_DOMAIN = ((0.5, 2.0), (0.3, 2.8), (0.0, 6.0))


def _toroidal_i() -> CatalogEntry:
    C = ("eta", "theta", "phi")
    metric = DiagonalMetric(C, _fields(_TOROIDAL_H, C), _TOROIDAL_DOMAIN)
    R = ScalarField.parse("sqrt(cosh(eta) - cos(theta))", C)
    form = IsothermicForm(C, R, _fields(("1", "sinh(eta)", "1"), C), _fields(("sinh(eta)", "1", "1"), C))
    ansatz = QAnsatz(C, (_fields(("1", "sinh(eta)^-2"), C), _fields(("1",), C), _fields(("1",), C)))
    return CatalogEntry(
        name="toroidal-i",
        source="toroidal coordinates, first isothermic factorization; Delta R = R^5/4",
        metric=metric,
        R=R,
        isothermic=form,
        binary=None,
        p=("cosh(eta)/sinh(eta)", "0", "0"),
        q=("1/4 - alpha1 - alpha2/sinh(eta)^2", "alpha1", "alpha2"),
        V="0",
        k2="0",
        constants=MappingProxyType({"alpha1": 0.3, "alpha2": 0.2}),
        ansatz=ansatz,
        family=Family((0.25, 0, 0, 0), ((-1, 0, 1, 0), (0, -1, 0, 1)), ("alpha1", "alpha2")),
        verdicts=Verdicts(flat=True, conformally_flat=True, dupin=True, harmonic_R=False, laplacian_coefficient=0.25),
    )


def _toroidal_ii() -> CatalogEntry:
    C = ("eta", "theta", "phi")
    metric = DiagonalMetric(C, _fields(_TOROIDAL_H, C), _TOROIDAL_DOMAIN)
    R = ScalarField.parse("sqrt(cosh(eta)/sinh(eta) - cos(theta)/sinh(eta))", C)
    form = IsothermicForm(C, R, _fields(("1", "1", "1/sinh(eta)"), C), _fields(("1", "1", "1"), C))
    ansatz = QAnsatz(C, (_fields(("1", "sinh(eta)^-2"), C), _fields(("1",), C), _fields(("1",), C)))
    return CatalogEntry(
        name="toroidal-ii",
        source="toroidal coordinates, second isothermic factorization of the same metric",
        metric=metric,
        R=R,
        isothermic=form,
        binary=None,
        p=("0", "0", "0"),
        q=("(1/4 - alpha2)/sinh(eta)^2 - alpha1", "alpha1", "alpha2"),
        V="0",
        k2="0",
        constants=MappingProxyType({"alpha1": 0.3, "alpha2": 0.2}),
        ansatz=ansatz,
        family=Family((0, 0.25, 0, 0), ((-1, 0, 1, 0), (0, -1, 0, 1)), ("alpha1", "alpha2")),
        verdicts=Verdicts(flat=True, conformally_flat=True, dupin=True, harmonic_R=False, laplacian_coefficient=0.25),
    )


def _quartic(x: str, roots) -> str:
    return "*".join(f"({x} - {r!r})" if r else x for r in roots)


def cyclidic_metric(p: float, a: float, b: float, c: float, d: float, domain) -> DiagonalMetric:
    """``(1 + p sqrt(l1 l2 l3))^-2 sum (l^i - l^j)(l^i - l^k) (dl^i)^2 / phi(l^i)``,
    ``phi(x) = (x - a)(x - b)(x - c)(x - d)``."""
    C = ("l1", "l2", "l3")
    conf = f"(1 + {p!r}*sqrt(l1*l2*l3))^-2"
    H = []
    for i in range(3):
        li = C[i]
        lj, lk = [C[k] for k in range(3) if k != i]
        H.append(f"sqrt({conf}*({li} - {lj})*({li} - {lk})/({_quartic(li, (a, b, c, d))}))")
    return DiagonalMetric(C, _fields(H, C), domain, None, _guards(C))


_CYCLIDIC_DOMAIN = ((4.3, 6.0), (2.3, 3.7), (1.2, 1.8))


def _cyclidic() -> CatalogEntry:
    C = ("l1", "l2", "l3")
    a, b, c = 1.0, 2.0, 4.0
    p = 1.0 / math.sqrt(a * b * c)
    metric = cyclidic_metric(p, a, b, c, 0.0, _CYCLIDIC_DOMAIN)
    phi = {x: _quartic(x, (0.0, a, b, c)) for x in C}
    R = ScalarField.parse(f"sqrt(1 + sqrt(l1*l2*l3/{a * b * c!r}))", C)
    form = IsothermicForm(
        C,
        R,
        _fields(("sqrt(l2 - l3)", "sqrt(l1 - l3)", "sqrt(l1 - l2)"), C),
        _fields((f"sqrt({phi['l1']})", f"sqrt(-({phi['l2']}))", f"sqrt({phi['l3']})"), C),
    )
    basis = tuple(_fields((f"1/({phi[x]})", f"{x}/({phi[x]})", f"{x}^2/({phi[x]})"), C) for x in C)
    return CatalogEntry(
        name="cyclidic",
        source="flat cyclidic metric with d = 0 and p = 1/sqrt(abc); Delta R = 3 R^5/16",
        metric=metric,
        R=R,
        isothermic=form,
        binary=None,
        p=tuple(("log", f) for f in (f"sqrt({phi['l1']})", f"sqrt(-({phi['l2']}))", f"sqrt({phi['l3']})")),
        q=tuple(f"(alpha1 + alpha2*{x} + 3/16*{x}^2)/({phi[x]})" for x in C),
        V="0",
        k2="0",
        constants=MappingProxyType({"alpha1": 0.4, "alpha2": -0.3}),
        ansatz=QAnsatz(C, basis),
        family=Family(
            (0, 0, 3 / 16) * 3,
            ((1, 0, 0) * 3, (0, 1, 0) * 3),
            ("alpha1", "alpha2"),
        ),
        verdicts=Verdicts(flat=True, conformally_flat=True, dupin=False, harmonic_R=False, laplacian_coefficient=3 / 16),
        extra=MappingProxyType({"a": a, "b": b, "c": c, "d": 0.0, "p": p}),
    )


def _dupin_cyclidic() -> CatalogEntry:
    C = ("u", "v", "w")
    a, c = 3.0, 1.0
    b = math.sqrt(a * a - c * c)
    A, B, Cc = repr(a), repr(b), repr(c)
    den = f"({A}*cosh(v) - {Cc}*cos(u))"
    metric = DiagonalMetric(
        C,
        _fields((f"{B}*({A}*cosh(v) - w)/{den}", f"{B}*(w - {Cc}*cos(u))/{den}", "1"), C),
        ((0.3, 2.8), (0.1, 1.0), (1.3, 2.7)),
        None,
        _guards(C, pairs=False, extra=(f"{A}*cosh(v) - w", f"w - {Cc}*cos(u)")),
    )
    R = ScalarField.parse(f"({A}*cosh(v) - w)^(-1/2)*(w - {Cc}*cos(u))^(-1/2)", C)
    form = IsothermicForm(
        C,
        R,
        _fields((f"({A}*cosh(v) - w)^-1", f"(w - {Cc}*cos(u))^-1", f"{den}^-1"), C),
        _fields((f"1/{B}", f"1/{B}", "1"), C),
    )
    return CatalogEntry(
        name="dupin-cyclidic",
        source="Dupin-cyclidic coordinates with (a, c) = (3, 1) and b^2 = a^2 - c^2; Helmholtz",
        metric=metric,
        R=R,
        isothermic=form,
        binary=None,
        p=("0", "0", "0"),
        q=("1/4", "-1/4", "k2"),
        V="0",
        k2="k2",
        constants=MappingProxyType({"k2": 1.0}),
        ansatz=QAnsatz(C, (_fields(("1",), C),) * 3),
        family=Family((0.25, -0.25, 1.0), (), ()),
        verdicts=Verdicts(flat=True, conformally_flat=True, dupin=True, harmonic_R=False),
        closed_forms=("cos(u/2)", "cosh(v/2)", "cos(sqrt(k2)*w)"),
        extra=MappingProxyType({"a": a, "b": b, "c": c}),
    )


def _n_elliptic(b) -> CatalogEntry:
    n = len(b)
    C = tuple(f"l{i + 1}" for i in range(n))
    domain = {2: ((1.2, 3.0), (0.1, 0.9)), 3: ((2.2, 4.0), (1.1, 1.9), (0.1, 0.9))}[n]
    metric = elliptic_metric(b, domain, C)
    a = {x: "4*" + _quartic(x, b) for x in C}
    G = {
        (i, j): ScalarField.parse(f"sqrt({C[i]} - {C[j]})", C) for i in range(n) for j in range(i + 1, n)
    }
    f_txt = tuple(f"sqrt({'-' if i % 2 else ''}({a[x]}))" for i, x in enumerate(C))
    form = BinaryForm(C, ScalarField.constant(1.0, C), G, _fields(f_txt, C))
    ks = [f"k{m}" for m in range(n - 1)]
    q = tuple(
        "(" + " + ".join([f"{k}*{x}^{m}" for m, k in enumerate(ks)] + [f"k2*{x}^{n - 1}"]) + f")/({a[x]})" for x in C
    )
    basis = tuple(_fields([f"{x}^{m}/({a[x]})" for m in range(n)], C) for x in C)
    particular = tuple(([0.0] * (n - 1) + [1.0]) * n)
    directions = tuple(tuple(([0.0] * m + [1.0] + [0.0] * (n - 1 - m)) * n) for m in range(n - 1))
    constants = {"k2": 1.0, **{k: 0.3 - 0.5 * m for m, k in enumerate(ks)}}
    return CatalogEntry(
        name=f"n-elliptic-{n}",
        source=f"{n}-elliptic coordinates with b = {tuple(b)}; binary with R = 1, Schrodinger/Helmholtz",
        metric=metric,
        R=ScalarField.constant(1.0, C),
        isothermic=None,
        binary=form,
        p=tuple(("log", t) for t in f_txt),
        q=q,
        V="0",
        k2="k2",
        constants=MappingProxyType(constants),
        ansatz=QAnsatz(C, basis),
        family=Family(particular, directions, tuple(ks)),
        verdicts=Verdicts(
            flat=True,
            conformally_flat=True if n == 3 else None,
            dupin=False if n == 3 else None,
            harmonic_R=True,
        ),
        extra=MappingProxyType({"b": tuple(b)}),
    )


def _kalnins_miller() -> CatalogEntry:
    C = ("l1", "l2", "l3")
    s = "(l1 + l2 + l3)"
    metric = DiagonalMetric(
        C,
        _fields(
            (f"sqrt({s}*(l1 - l2)*(l1 - l3))", f"sqrt({s}*(l1 - l2)*(l2 - l3))", f"sqrt({s}*(l1 - l3)*(l2 - l3))"),
            C,
        ),
        ((2.6, 3.4), (1.6, 2.4), (0.6, 1.4)),
        (1, -1, 1),
        _guards(C),
    )
    R = ScalarField.parse(f"{s}^(-1/4)", C)
    G = {(0, 1): "sqrt(l1 - l2)", (0, 2): "sqrt(l1 - l3)", (1, 2): "sqrt(l2 - l3)"}
    form = BinaryForm(
        C, R, {k: ScalarField.parse(v, C) for k, v in G.items()}, _fields(("1", "1", "1"), C), (1, -1, 1)
    )
    ansatz = QAnsatz.monomials(C, 4)
    return CatalogEntry(
        name="kalnins-miller",
        source="conformally Minkowski metric (l1 + l2 + l3) dsigma^2, signature (+,-,+); Helmholtz",
        metric=metric,
        R=R,
        isothermic=None,
        binary=form,
        p=("0", "0", "0"),
        q=tuple(f"k2*{x}^3 + k1*{x} + k0" for x in C),
        V="0",
        k2="k2",
        constants=MappingProxyType({"k2": 1.0, "k1": 0.4, "k0": -0.3}),
        ansatz=ansatz,
        family=Family((0, 0, 0, 1, 0) * 3, ((1, 0, 0, 0, 0) * 3, (0, 1, 0, 0, 0) * 3), ("k0", "k1")),
        verdicts=Verdicts(flat=False, conformally_flat=True, harmonic_R=True),
    )


# bundled flat constant set: a_i = m_i u^2 + 2 n_i u + p_i with b_i solving the
# per-axis quadratic for (alpha, beta, gamma) = (0, (1, -1, 0), (3, -2, -1))
DUPIN_DARBOUX = MappingProxyType(
    {
        "m": (1.0, -1.0, 0.0),
        "n": (0.0, 1.0, -1.0),
        "p": (0.0, 0.0, 0.0),
        "alpha": (0.0, 0.0, 0.0),
        "beta": (1.0, -1.0, 0.0),
        "gamma": (3.0, -2.0, -1.0),
        "a": ("u1^2", "-(u2^2) + 2*u2", "-2*u3"),
        "b": ("-(1 + 3*u1^2)/(2*u1)", "1 - u2 + sqrt(2*u2 - u2^2)", "sqrt(-2*u3)"),
        "domain": ((2.1, 2.9), (0.6, 1.4), (-2.9, -2.1)),
    }
)


def _dupin_darboux() -> CatalogEntry:
    C = ("u1", "u2", "u3")
    d = DUPIN_DARBOUX
    a = _fields(d["a"], C)
    b = _fields(d["b"], C)
    metric = darboux_metric(C, a, b, d["domain"])
    M = epd_field(C, b)
    # M < 0 throughout the bundled box; the R-equation is linear in R
    R = (-M).apply("sqrt")
    G = _fields(("1/(u2 - u3)", "1/(u1 - u3)", "1/(u1 - u2)"), C)
    form = IsothermicForm(C, R, G, tuple(ai.apply("sqrt") for ai in a))
    q = tuple(f"{-mi / 4!r}/({ai})" for mi, ai in zip(d["m"], d["a"]))
    basis = tuple(_fields((f"1/({ai})", "1"), C) for ai in d["a"])
    particular = tuple(v for mi in d["m"] for v in (-mi / 4, 0.0))
    return CatalogEntry(
        name="dupin-darboux",
        source="Dupin-cyclidic metric from quadratic a_i and EPD-generated M with a bundled flat constant set; "
        "R = sqrt|M|, Laplace",
        metric=metric,
        R=R,
        isothermic=form,
        binary=None,
        p=tuple(("log", f"sqrt({ai})") for ai in d["a"]),
        q=q,
        V="0",
        k2="0",
        constants=MappingProxyType({}),
        ansatz=QAnsatz(C, basis),
        family=Family(particular, (), ()),
        verdicts=Verdicts(flat=True, conformally_flat=True, dupin=True, harmonic_R=False),
    )


_BUILDERS: dict[str, Callable[[], CatalogEntry]] = {
    "spherical": _spherical,
    "toroidal-i": _toroidal_i,
    "toroidal-ii": _toroidal_ii,
    "cyclidic": _cyclidic,
    "dupin-cyclidic": _dupin_cyclidic,
    "n-elliptic-2": lambda: _n_elliptic((1.0, 0.0)),
    "n-elliptic-3": lambda: _n_elliptic((2.0, 1.0, 0.0)),
    "kalnins-miller": _kalnins_miller,
    "dupin-darboux": _dupin_darboux,
}

_CACHE: dict[str, CatalogEntry] = {}


def names() -> tuple:
    return tuple(_BUILDERS)


def get(name: str) -> CatalogEntry:
    if name not in _BUILDERS:
        raise UnknownEntryError(f"unknown catalog entry {name!r}; available: {', '.join(_BUILDERS)}")
    if name not in _CACHE:
        _CACHE[name] = _BUILDERS[name]()
    return _CACHE[name]


def list() -> tuple:  # noqa: A001 - public name of the catalog listing
    return names()


def cyclidic_control(p: float = 0.3, a: float = 1.0, b: float = 2.0, c: float = 4.0, d: float = 0.5) -> DiagonalMetric:
    """Cyclidic metric with generic constants violating the flatness conditions."""
    return cyclidic_metric(p, a, b, c, d, _CYCLIDIC_DOMAIN)


def dupin_darboux_perturbed(scale: float = 1.25) -> DiagonalMetric:
    """The dupin-darboux metric with ``a_1`` rescaled so the constant identities break."""
    C = ("u1", "u2", "u3")
    d = DUPIN_DARBOUX
    a = list_(d["a"])
    a[0] = f"{scale!r}*{a[0]}"
    return darboux_metric(C, _fields(a, C), _fields(d["b"], C), d["domain"])
