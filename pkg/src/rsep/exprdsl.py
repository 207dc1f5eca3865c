"""Expression language for Lamé coefficients, R-factors, potentials and bases.

Grammar (precedence climbing, lowest to highest)::

    expr    := expr ('+' | '-') expr            left associative
             | expr ('*' | '/') expr            left associative
             | unary '^' expr                   right associative
    unary   := '-' unary | atom
    atom    := NUMBER | NAME | FUNC '(' expr ')' | '(' expr ')'

A leading minus binds tighter than ``^``, so ``-x^2`` is ``(-x)^2``; write
``-(x^2)`` for the other reading.  There is no implicit multiplication:
``2r`` is a syntax error.  ``FUNC`` is one of ``exp ln sin cos sinh cosh
tanh sqrt``; the name ``pi`` is predefined unless shadowed.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Iterable, Mapping, Union

import numpy as np

from . import jets
from .jets import Jet, JetDomainError

FUNCTIONS = frozenset(jets.UNIVARIATE)
BUILTINS = {"pi": math.pi}


class ExprError(ValueError):
    pass


class ExprSyntaxError(ExprError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


class UnknownIdentifierError(ExprError):
    def __init__(self, name: str):
        super().__init__(f"unknown identifier {name!r}")
        self.name = name


# -- syntax tree -------------------------------------------------------------


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Coord:
    name: str


@dataclass(frozen=True)
class Const:
    name: str


@dataclass(frozen=True)
class Neg:
    operand: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Expr"


Expr = Union[Num, Coord, Const, Neg, BinOp, Call]


# -- tokenizer ---------------------------------------------------------------

_TOKEN = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^(),])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class _Tok:
    kind: str  # "num", "name", "op", "end"
    text: str
    offset: int


def _tokenize(text: str) -> list[_Tok]:
    toks = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ExprSyntaxError(f"unexpected character {text[pos]!r}", _byte_offset(text, pos))
        if m.lastgroup != "ws":
            toks.append(_Tok(m.lastgroup, m.group(), _byte_offset(text, pos)))
        pos = m.end()
    toks.append(_Tok("end", "", _byte_offset(text, len(text))))
    return toks


def _byte_offset(text: str, pos: int) -> int:
    return len(text[:pos].encode("utf-8"))


# -- parser ------------------------------------------------------------------

_INFIX = {"+": 10, "-": 10, "*": 20, "/": 20, "^": 30}
_PREFIX_BP = 100


class _Parser:
    def __init__(self, text: str, coordinates: frozenset, constants: frozenset):
        self.toks = _tokenize(text)
        self.pos = 0
        self.coordinates = coordinates
        self.constants = constants

    def peek(self) -> _Tok:
        return self.toks[self.pos]

    def advance(self) -> _Tok:
        tok = self.toks[self.pos]
        self.pos += 1
        return tok

    def expect(self, text: str) -> None:
        tok = self.peek()
        if tok.text != text or tok.kind != "op":
            what = "end of input" if tok.kind == "end" else repr(tok.text)
            raise ExprSyntaxError(f"expected {text!r}, found {what}", tok.offset)
        self.advance()

    def parse(self) -> Expr:
        tree = self.expression(0)
        tok = self.peek()
        if tok.kind != "end":
            raise ExprSyntaxError(f"unexpected {tok.text!r}", tok.offset)
        return tree

    def expression(self, rbp: int) -> Expr:
        left = self.prefix()
        while True:
            tok = self.peek()
            lbp = _INFIX.get(tok.text, 0) if tok.kind == "op" else 0
            if tok.kind in ("num", "name"):
                raise ExprSyntaxError(f"unexpected {tok.text!r} (no implicit multiplication)", tok.offset)
            if lbp <= rbp:
                return left
            self.advance()
            # right associativity for '^'
            right = self.expression(lbp - 1 if tok.text == "^" else lbp)
            left = BinOp(tok.text, left, right)

    def prefix(self) -> Expr:
        tok = self.advance()
        if tok.kind == "num":
            value = float(tok.text)
            if not math.isfinite(value):
                raise ExprSyntaxError(f"numeric literal {tok.text!r} overflows", tok.offset)
            return Num(value)
        if tok.kind == "name":
            return self.name(tok)
        if tok.kind == "op" and tok.text == "-":
            return Neg(self.expression(_PREFIX_BP))
        if tok.kind == "op" and tok.text == "(":
            inner = self.expression(0)
            self.expect(")")
            return inner
        what = "end of input" if tok.kind == "end" else repr(tok.text)
        raise ExprSyntaxError(f"unexpected {what}", tok.offset)

    def name(self, tok: _Tok) -> Expr:
        name = tok.text
        if name in FUNCTIONS:
            self.expect("(")
            arg = self.expression(0)
            self.expect(")")
            return Call(name, arg)
        if name in self.coordinates:
            return Coord(name)
        if name in self.constants or name in BUILTINS:
            return Const(name)
        raise UnknownIdentifierError(name)


def parse(text: str, coordinates: Iterable[str], constants: Iterable[str] = ()) -> Expr:
    """Parse ``text`` with identifiers resolved against the declared names."""
    if not isinstance(text, str) or not text.strip():
        raise ExprSyntaxError("empty expression", 0)
    coordinates = frozenset(coordinates)
    constants = frozenset(constants)
    clash = (coordinates | constants) & FUNCTIONS
    if clash:
        raise ExprError(f"names shadow built-in functions: {sorted(clash)}")
    if coordinates & constants:
        raise ExprError(f"names declared as both coordinate and constant: {sorted(coordinates & constants)}")
    return _Parser(text, coordinates, constants).parse()


# -- printer -----------------------------------------------------------------

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "^": 4}


def _fmt_num(v: float) -> str:
    if v < 0 or math.copysign(1.0, v) < 0:
        return f"(-{_fmt_num(-v)})"
    if v.is_integer() and v < 1e15:
        return str(int(v))
    return repr(float(v))


def to_text(e: Expr) -> str:
    """Render with the minimum parentheses needed for a faithful re-parse."""
    if isinstance(e, Num):
        return _fmt_num(e.value)
    if isinstance(e, (Coord, Const)):
        return e.name
    if isinstance(e, Call):
        return f"{e.func}({to_text(e.arg)})"
    if isinstance(e, Neg):
        inner = to_text(e.operand)
        if isinstance(e.operand, BinOp):
            inner = f"({inner})"
        return f"-{inner}"
    p = _PREC[e.op]
    left, right = to_text(e.left), to_text(e.right)
    if e.op == "^":
        if isinstance(e.left, BinOp):
            left = f"({left})"
        if isinstance(e.right, BinOp) and e.right.op != "^":
            right = f"({right})"
        return f"{left}^{right}"
    if isinstance(e.left, BinOp) and _PREC[e.left.op] < p:
        left = f"({left})"
    if isinstance(e.right, BinOp) and _PREC[e.right.op] <= p:
        right = f"({right})"
    sep = " " if p == 1 else ""
    return f"{left}{sep}{e.op}{sep}{right}"


# -- queries -----------------------------------------------------------------


def free_coordinates(e: Expr) -> frozenset:
    if isinstance(e, Coord):
        return frozenset([e.name])
    if isinstance(e, (Num, Const)):
        return frozenset()
    if isinstance(e, (Neg, Call)):
        return free_coordinates(e.operand if isinstance(e, Neg) else e.arg)
    return free_coordinates(e.left) | free_coordinates(e.right)


def constants_used(e: Expr) -> frozenset:
    if isinstance(e, Const):
        return frozenset() if e.name in BUILTINS else frozenset([e.name])
    if isinstance(e, (Num, Coord)):
        return frozenset()
    if isinstance(e, (Neg, Call)):
        return constants_used(e.operand if isinstance(e, Neg) else e.arg)
    return constants_used(e.left) | constants_used(e.right)


# -- evaluation --------------------------------------------------------------


def _const_value(name: str, bindings: Mapping[str, float]) -> float:
    if name in bindings:
        return np.float64(bindings[name])
    if name in BUILTINS:
        return np.float64(BUILTINS[name])
    raise ExprError(f"constant {name!r} is not bound")


class _Evaluator:
    """Shared recursion for jet and plain evaluation.

    ``lift`` maps a coordinate index to its value (jet or array); constant
    subtrees stay as numpy scalars so both modes perform identical float ops.
    """

    def __init__(self, coords, bindings, lift):
        self.index = {c: i for i, c in enumerate(coords)}
        self.bindings = bindings
        self.lift = lift

    def __call__(self, e: Expr):
        try:
            return self.visit(e)
        except JetDomainError as err:
            if getattr(err, "expr", None) is None:
                err.expr = to_text(e)
            raise

    def visit(self, e: Expr):
        if isinstance(e, Num):
            return np.float64(e.value)
        if isinstance(e, Coord):
            return self.lift(self.index[e.name])
        if isinstance(e, Const):
            return _const_value(e.name, self.bindings)
        if isinstance(e, Neg):
            return -self.visit(e.operand)
        if isinstance(e, Call):
            return self.annotate(e, self.call, e.func, self.visit(e.arg))
        left = self.visit(e.left)
        if e.op == "^":
            right = self.visit(e.right)
            return self.annotate(e, self.power, left, right)
        right = self.visit(e.right)
        if e.op == "+":
            return left + right
        if e.op == "-":
            return left - right
        if e.op == "*":
            return left * right
        return self.annotate(e, self.divide, left, right)

    def annotate(self, e, fn, *args):
        try:
            return fn(*args)
        except JetDomainError as err:
            if getattr(err, "expr", None) is None:
                err.expr = to_text(e)
                err.args = (f"{err.args[0]} in '{err.expr}'",)
            raise

    @staticmethod
    def call(func, x):
        if isinstance(x, Jet):
            return jets.apply_univariate(func, x)
        return _plain_call(func, x)

    @staticmethod
    def divide(a, b):
        if isinstance(a, Jet) or isinstance(b, Jet):
            return a / b
        bad = ~(np.abs(b) > jets.GUARD)
        if np.any(bad):
            raise jets._domain_error("div", b, bad, f"within {jets.GUARD:g} of zero")
        return a / b

    @staticmethod
    def power(a, b):
        if isinstance(b, Jet):
            if not isinstance(a, Jet):
                a = Jet.constant(np.broadcast_to(a, b.batch_shape), b.arity, b.order)
            return jets.power(a, b)
        if isinstance(a, Jet):
            if np.ndim(b) == 0:
                return jets.power(a, b)
            lifted = Jet.constant(np.broadcast_to(b, a.batch_shape), a.arity, a.order)
            return jets.power(a, lifted)
        return _plain_power(a, b)


def _plain_call(func, x):
    if func in ("ln", "sqrt"):
        bad = ~(x > jets.GUARD)
        if np.any(bad):
            raise jets._domain_error(func, x, bad, f"is not above {jets.GUARD:g}")
        return np.log(x) if func == "ln" else np.sqrt(x)
    return {
        "exp": np.exp,
        "sin": np.sin,
        "cos": np.cos,
        "sinh": np.sinh,
        "cosh": np.cosh,
        "tanh": np.tanh,
    }[func](x)


def _plain_power(a, b):
    b_arr = np.asarray(b)
    if b_arr.ndim == 0:
        c = float(b_arr)
        if not c.is_integer():
            bad = ~(a > jets.GUARD)
            if np.any(bad):
                raise jets._domain_error("pow", a, bad, f"is not above {jets.GUARD:g} (fractional power)")
        elif c < 0:
            bad = ~(np.abs(a) > jets.GUARD)
            if np.any(bad):
                raise jets._domain_error("pow", a, bad, f"within {jets.GUARD:g} of zero (negative power)")
    else:
        bad = ~(a > jets.GUARD)
        if np.any(bad):
            raise jets._domain_error("pow", a, bad, f"is not above {jets.GUARD:g} (variable exponent)")
    return np.power(a, b)


def _locate(err: JetDomainError, point: np.ndarray, coords) -> None:
    if err.point is not None:
        return
    if point.ndim == 1:
        err.point = dict(zip(coords, map(float, point)))
    elif err.index is not None:
        flat = point.reshape(point.shape[0], -1)
        if err.index < flat.shape[1]:
            err.point = dict(zip(coords, map(float, flat[:, err.index])))


def eval_jet(e: Expr, point, bindings: Mapping[str, float], order: int, coords) -> Jet:
    """Truncated Taylor expansion of ``e`` at ``point`` (shape ``(n,)`` or ``(n, *batch)``)."""
    point = np.asarray(point, dtype=float)
    seeds = jets.seed(point, order)
    try:
        out = _Evaluator(coords, bindings, lambda i: seeds[i])(e)
    except JetDomainError as err:
        _locate(err, point, coords)
        raise
    if not isinstance(out, Jet):
        out = Jet.constant(np.broadcast_to(out, point.shape[1:]), len(coords), order)
    return out


def evaluate(e: Expr, point, bindings: Mapping[str, float], coords) -> np.ndarray:
    """Plain (value-only) evaluation, sharing the jet evaluator's operation order."""
    point = np.asarray(point, dtype=float)
    try:
        out = _Evaluator(coords, bindings, lambda i: point[i])(e)
    except JetDomainError as err:
        _locate(err, point, coords)
        raise
    return np.broadcast_to(np.asarray(out, dtype=float), point.shape[1:]).copy()


# -- fields ------------------------------------------------------------------

Number = Union[int, float]


def _merge_params(*param_sets) -> tuple:
    merged: dict = {}
    for params in param_sets:
        for k, v in params:
            if k in merged and merged[k] != v:
                raise ExprError(f"conflicting values for constant {k!r}: {merged[k]} vs {v}")
            merged[k] = v
    return tuple(sorted(merged.items()))


@dataclass(frozen=True)
class ScalarField:
    """A parsed expression over named coordinates, with bound constants."""

    expr: Expr
    coords: tuple
    params: tuple = ()

    @classmethod
    def parse(cls, text: str, coords, params: Mapping[str, float] | None = None) -> "ScalarField":
        params = dict(params or {})
        expr = parse(text, coords, params.keys())
        used = constants_used(expr)
        return cls(expr, tuple(coords), tuple(sorted((k, float(params[k])) for k in used)))

    @classmethod
    def constant(cls, value: float, coords) -> "ScalarField":
        return cls(Num(float(value)), tuple(coords))

    @classmethod
    def coordinate(cls, name: str, coords) -> "ScalarField":
        if name not in coords:
            raise UnknownIdentifierError(name)
        return cls(Coord(name), tuple(coords))

    @property
    def text(self) -> str:
        return to_text(self.expr)

    @property
    def bindings(self) -> dict:
        return dict(self.params)

    def __str__(self) -> str:
        return self.text

    def jet(self, points, order: int = jets.DEFAULT_ORDER) -> Jet:
        return eval_jet(self.expr, points, self.bindings, order, self.coords)

    def __call__(self, points) -> np.ndarray:
        return evaluate(self.expr, points, self.bindings, self.coords)

    def free_coordinates(self) -> frozenset:
        return free_coordinates(self.expr)

    def is_constant(self, value: float | None = None) -> bool:
        if not isinstance(self.expr, Num):
            return False
        return value is None or self.expr.value == value

    # composition -----------------------------------------------------------

    def _wrap(self, other) -> "ScalarField":
        if isinstance(other, ScalarField):
            if other.coords != self.coords:
                raise ExprError("cannot combine fields over different coordinates")
            return other
        return ScalarField(Num(float(other)), self.coords)

    def _bin(self, op, other, swap=False) -> "ScalarField":
        other = self._wrap(other)
        a, b = (other, self) if swap else (self, other)
        return ScalarField(BinOp(op, a.expr, b.expr), self.coords, _merge_params(a.params, b.params))

    def __add__(self, other):
        return self._bin("+", other)

    def __radd__(self, other):
        return self._bin("+", other, swap=True)

    def __sub__(self, other):
        return self._bin("-", other)

    def __rsub__(self, other):
        return self._bin("-", other, swap=True)

    def __mul__(self, other):
        return self._bin("*", other)

    def __rmul__(self, other):
        return self._bin("*", other, swap=True)

    def __truediv__(self, other):
        return self._bin("/", other)

    def __rtruediv__(self, other):
        return self._bin("/", other, swap=True)

    def __pow__(self, other):
        return self._bin("^", other)

    def __neg__(self):
        return ScalarField(Neg(self.expr), self.coords, self.params)

    def apply(self, func: str) -> "ScalarField":
        if func not in FUNCTIONS:
            raise ExprError(f"unknown function {func!r}")
        return ScalarField(Call(func, self.expr), self.coords, self.params)


def field_product(fields, coords) -> ScalarField:
    out = None
    for f in fields:
        out = f if out is None else out * f
    return out if out is not None else ScalarField.constant(1.0, coords)


def field_sum(fields, coords) -> ScalarField:
    out = None
    for f in fields:
        out = f if out is None else out + f
    return out if out is not None else ScalarField.constant(0.0, coords)
