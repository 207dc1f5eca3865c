"""Declarative metric files (TOML, ``format = 1``).

Layout::

    format = 1
    source = "free text"                 # optional

    [metric]
    coords = ["r", "theta", "phi"]
    H = ["1", "r", "r*sin(theta)"]
    domain = [[0.5, 2.0], [0.3, 2.8], [0.0, 6.0]]
    signature = [1, 1, 1]                # optional, default all +1
    guards = []                          # optional expressions kept away from zero

    [constants]                          # optional name = value bindings
    alpha = 2.0

    [isothermic]                         # optional: R, G_i, f_i, signed f_i^2
    R = "1"
    G = ["sin(theta)", "r", "r"]
    f = ["r^2", "sin(theta)", "1"]
    f2_sign = [1, 1, 1]

    [binary]                             # optional alternative to [isothermic]
    R = "1"
    f = ["1", "1"]
    [binary.G]
    "l1,l2" = "sqrt(l1 - l2)"

    [potential]                          # optional
    V = "0"
    k2 = 0.0                             # number or constant expression

    [separation]                         # optional
    R = "1"                              # only when no form is given
    p = ["2/r", "cos(theta)/sin(theta)", "0"]   # default: f_i'/f_i
    q = ["-alpha/r^2", "alpha - beta/sin(theta)^2", "beta"]
    phi = ["...", "...", "..."]          # closed-form solutions, optional

    [ansatz]                             # optional, per-axis basis or monomial degree
    basis = [["1", "r^-2"], ["1", "sin(theta)^-2"], ["1"]]
    degree = 4

Unknown sections or keys are rejected.
"""

from __future__ import annotations

import hashlib
import math
import sys
from dataclasses import dataclass
from types import MappingProxyType

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib
import tomli_w

from .exprdsl import ExprError, ScalarField
from .identities import LogDerivative
from .jets import JetDomainError
from .metric import BinaryForm, DiagonalMetric, IsothermicForm, MetricError
from .separation import ClosedForm, QAnsatz, SeparationError, SeparationSystem

FORMAT = 1

_SCHEMA = {
    "": {"format", "source", "metric", "constants", "isothermic", "binary", "potential", "separation", "ansatz"},
    "metric": {"coords", "H", "domain", "signature", "guards"},
    "isothermic": {"R", "G", "f", "f2_sign"},
    "binary": {"R", "G", "f", "f2_sign"},
    "potential": {"V", "k2"},
    "separation": {"R", "p", "q", "phi"},
    "ansatz": {"basis", "degree"},
}


class MetricFileError(ValueError):
    pass


@dataclass(frozen=True)
class Problem:
    """A loaded metric file: metric, declared factorization and separation data."""

    source: str
    metric: DiagonalMetric
    constants: MappingProxyType
    R: ScalarField
    isothermic: IsothermicForm | None
    binary: BinaryForm | None
    p: tuple | None
    q: tuple | None
    V: ScalarField
    k2: float
    phi: tuple | None
    ansatz: QAnsatz | None
    degree: int | None

    @property
    def coords(self):
        return self.metric.coords

    @property
    def form(self):
        return self.isothermic or self.binary

    def default_ansatz(self) -> QAnsatz:
        if self.ansatz is not None:
            return self.ansatz
        return QAnsatz.monomials(self.coords, self.degree)

    def p_fields(self) -> tuple:
        if self.p is not None:
            return self.p
        if self.form is None:
            raise MetricFileError("no p given and no factorization to derive it from")
        return tuple(LogDerivative(f, i) for i, f in enumerate(self.form.f))

    def system(self, q=None) -> SeparationSystem:
        q = self.q if q is None else q
        if q is None:
            raise MetricFileError("no q given")
        f2 = self.form.f2_sign if self.form is not None else None
        return SeparationSystem(self.metric, self.R, self.p_fields(), tuple(q), self.V, self.k2, f2)

    def phi_sources(self):
        if self.phi is None:
            return None
        return [ClosedForm(f, i, self.metric) for i, f in enumerate(self.phi)]


def digest(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


# -- loading ---------------------------------------------------------------------


def _check_keys(table, section):
    if not isinstance(table, dict):
        raise MetricFileError(f"[{section}] must be a table")
    extra = set(table) - _SCHEMA[section]
    if extra:
        where = f"[{section}]" if section else "top level"
        raise MetricFileError(f"unknown key(s) {sorted(extra)} at {where}")


def _str(value, what):
    if not isinstance(value, str):
        raise MetricFileError(f"{what} must be a string")
    return value


def _str_list(value, n, what):
    if not isinstance(value, list) or (n is not None and len(value) != n):
        raise MetricFileError(f"{what} must be a list of {n if n is not None else ''} strings".replace("  ", " "))
    return [_str(v, what) for v in value]


def _number(value, what) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise MetricFileError(f"{what} must be a number")
    v = float(value)
    if not math.isfinite(v):
        raise MetricFileError(f"{what} must be finite")
    return v


def _signs(value, n, what):
    if not isinstance(value, list) or len(value) != n:
        raise MetricFileError(f"{what} must list {n} signs")
    out = []
    for s in value:
        if isinstance(s, bool) or s not in (1, -1):
            raise MetricFileError(f"{what} entries must be +1 or -1")
        out.append(int(s))
    return tuple(out)


class _Fields:
    def __init__(self, coords, constants):
        self.coords = coords
        self.constants = constants

    def __call__(self, text, what):
        try:
            return ScalarField.parse(_str(text, what), self.coords, self.constants)
        except ExprError as exc:
            raise MetricFileError(f"{what}: {exc}") from None

    def many(self, texts, n, what):
        return tuple(self(t, f"{what}[{i}]") for i, t in enumerate(_str_list(texts, n, what)))


def _load_metric(doc, parse):
    m = doc.get("metric")
    if m is None:
        raise MetricFileError("missing [metric] section")
    _check_keys(m, "metric")
    for key in ("coords", "H", "domain"):
        if key not in m:
            raise MetricFileError(f"[metric] needs {key!r}")
    n = len(parse.coords)
    H = parse.many(m["H"], n, "H")
    dom = m["domain"]
    if not isinstance(dom, list) or len(dom) != n:
        raise MetricFileError(f"domain must list {n} intervals")
    domain = []
    for i, iv in enumerate(dom):
        if not isinstance(iv, list) or len(iv) != 2:
            raise MetricFileError(f"domain[{i}] must be [lo, hi]")
        domain.append((_number(iv[0], f"domain[{i}]"), _number(iv[1], f"domain[{i}]")))
    sig = _signs(m["signature"], n, "signature") if "signature" in m else None
    guards = parse.many(m.get("guards", []), None, "guards")
    return DiagonalMetric(parse.coords, H, tuple(domain), sig, guards)


def _load_form(doc, key, parse, n):
    t = doc.get(key)
    if t is None:
        return None, None
    _check_keys(t, key)
    for k in ("R", "G", "f"):
        if k not in t:
            raise MetricFileError(f"[{key}] needs {k!r}")
    R = parse(t["R"], f"{key}.R")
    f = parse.many(t["f"], n, f"{key}.f")
    f2 = _signs(t["f2_sign"], n, f"{key}.f2_sign") if "f2_sign" in t else None
    if key == "isothermic":
        return R, IsothermicForm(parse.coords, R, parse.many(t["G"], n, "isothermic.G"), f, f2)
    G = t["G"]
    if not isinstance(G, dict):
        raise MetricFileError("[binary.G] must be a table of 'ui,uj' = expression")
    pairs = {}
    for label, text in G.items():
        names = label.split(",")
        if len(names) != 2 or any(x not in parse.coords for x in names):
            raise MetricFileError(f"binary.G key {label!r} must name two coordinates as 'ui,uj'")
        i, j = sorted(parse.coords.index(x) for x in names)
        if i == j or (i, j) in pairs:
            raise MetricFileError(f"binary.G key {label!r} is repeated or diagonal")
        pairs[(i, j)] = parse(text, f"binary.G[{label}]")
    return R, BinaryForm(parse.coords, R, pairs, f, f2)


def loads(text: str) -> Problem:
    """Parse a metric file; every malformed input raises :class:`MetricFileError`."""
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise MetricFileError(f"TOML: {exc}") from None
    try:
        return _build(doc)
    except MetricFileError:
        raise
    except (ExprError, MetricError, SeparationError, JetDomainError, ValueError, TypeError, KeyError) as exc:
        raise MetricFileError(f"{type(exc).__name__}: {exc}") from None


def load(path) -> tuple[Problem, str]:
    """``(problem, text)`` from a file path."""
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise MetricFileError(f"cannot read {path}: {exc.strerror or exc}") from None
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError:
        raise MetricFileError(f"{path} is not UTF-8") from None
    return loads(text), text


def _build(doc) -> Problem:
    _check_keys(doc, "")
    if doc.get("format") != FORMAT or isinstance(doc.get("format"), bool):
        raise MetricFileError(f"expected 'format = {FORMAT}'")
    source = _str(doc.get("source", ""), "source")
    m = doc.get("metric")
    if not isinstance(m, dict) or "coords" not in m:
        raise MetricFileError("missing [metric] coords")
    coords = tuple(_str_list(m["coords"], None, "coords"))
    if not 2 <= len(coords) <= 6:
        raise MetricFileError("need between 2 and 6 coordinates")
    if len(set(coords)) != len(coords):
        raise MetricFileError("coordinate names must be distinct")

    consts = doc.get("constants", {})
    if not isinstance(consts, dict):
        raise MetricFileError("[constants] must be a table")
    constants = {}
    for k, v in consts.items():
        if k in coords:
            raise MetricFileError(f"constant {k!r} shadows a coordinate")
        constants[k] = _number(v, f"constant {k}")
    parse = _Fields(coords, constants)
    n = len(coords)
    metric = _load_metric(doc, parse)

    Ri, iso = _load_form(doc, "isothermic", parse, n)
    Rb, binary = _load_form(doc, "binary", parse, n)
    if iso is not None and binary is not None:
        raise MetricFileError("give at most one of [isothermic] and [binary]")

    sep = doc.get("separation", {})
    _check_keys(sep, "separation")
    R = Ri or Rb
    if "R" in sep:
        if R is not None:
            raise MetricFileError("R is already declared by the factorization")
        R = parse(sep["R"], "separation.R")
    if R is None:
        R = ScalarField.constant(1.0, coords)
    p = parse.many(sep["p"], n, "p") if "p" in sep else None
    q = parse.many(sep["q"], n, "q") if "q" in sep else None
    phi = parse.many(sep["phi"], n, "phi") if "phi" in sep else None

    pot = doc.get("potential", {})
    _check_keys(pot, "potential")
    V = parse(pot.get("V", "0"), "V")
    k2 = pot.get("k2", 0.0)
    if isinstance(k2, str):
        k2f = parse(k2, "k2")
        if k2f.free_coordinates():
            raise MetricFileError("k2 must not depend on coordinates")
        k2 = float(k2f(np.zeros((n, 1)))[0])
    k2 = _number(k2, "k2")

    an = doc.get("ansatz", {})
    _check_keys(an, "ansatz")
    ansatz = degree = None
    if "basis" in an:
        rows = an["basis"]
        if not isinstance(rows, list) or len(rows) != n:
            raise MetricFileError(f"ansatz basis must have {n} rows")
        ansatz = QAnsatz(coords, tuple(parse.many(r, None, f"basis[{i}]") for i, r in enumerate(rows)))
    if "degree" in an:
        d = an["degree"]
        if isinstance(d, bool) or not isinstance(d, int) or not 0 <= d <= 8:
            raise MetricFileError("ansatz degree must be an integer in [0, 8]")
        degree = d

    return Problem(
        source, metric, MappingProxyType(constants), R, iso, binary, p, q, V, k2, phi, ansatz, degree
    )


# -- export ------------------------------------------------------------------------


def _texts(fields):
    return [f.text for f in fields]


def _collect_bindings(fields, constants):
    for f in fields:
        for k, v in f.bindings.items():
            if k in constants and constants[k] != v:
                raise MetricFileError(f"conflicting values for constant {k!r}")
            constants[k] = v


def entry_document(entry) -> dict:
    """Catalog entry as a metric-file document (plain dict)."""
    m = entry.metric
    constants = dict(entry.constants)
    form = entry.isothermic or entry.binary
    fields = [*m.H, *m.guards, entry.R, *form.f]
    doc = {"format": FORMAT, "source": entry.source}
    doc["metric"] = {
        "coords": list(m.coords),
        "H": _texts(m.H),
        "domain": [[float(lo), float(hi)] for lo, hi in m.domain],
        "signature": list(m.signature),
        "guards": _texts(m.guards),
    }
    if entry.isothermic is not None:
        key, G = "isothermic", _texts(form.G)
        fields += list(form.G)
    else:
        key = "binary"
        G = {f"{m.coords[i]},{m.coords[j]}": g.text for (i, j), g in sorted(form.G.items())}
        fields += list(form.G.values())
    doc[key] = {"R": entry.R.text, "G": G, "f": _texts(form.f), "f2_sign": list(form.f2_sign)}
    _collect_bindings(fields, constants)
    doc["potential"] = {"V": entry.V, "k2": entry.k2}
    sep = {"q": list(entry.q)}
    if all(isinstance(t, str) for t in entry.p):
        sep["p"] = list(entry.p)
    if entry.closed_forms is not None:
        sep["phi"] = list(entry.closed_forms)
    doc["separation"] = sep
    doc["ansatz"] = {"basis": [_texts(row) for row in entry.ansatz.basis]}
    doc["constants"] = {k: float(constants[k]) for k in sorted(constants)}
    return doc


def dumps(doc: dict) -> str:
    order = ["format", "source", "metric", "constants", "isothermic", "binary", "potential", "separation", "ansatz"]
    return tomli_w.dumps({k: doc[k] for k in order if k in doc})


def export_entry(entry) -> str:
    return dumps(entry_document(entry))
