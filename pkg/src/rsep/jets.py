"""Truncated multivariate Taylor arithmetic (forward-mode jets).

A :class:`Jet` stores the Taylor coefficients ``f^(alpha)(u) / alpha!`` of a
function of ``arity`` variables for every multi-index with total degree at
most ``order``.  Coefficients live in a dense array indexed by graded
lexicographic rank, so truncating to a lower order is a prefix slice.

Every coefficient array may carry trailing batch dimensions: one jet then
represents the same expansion at many sample points at once, and all
arithmetic is vectorised over the batch.
"""

from __future__ import annotations

import math
from functools import lru_cache
from itertools import combinations_with_replacement
from typing import Sequence

import numpy as np

MAX_ORDER = 5
DEFAULT_ORDER = 3
GUARD = 1e-9

UNIVARIATE = ("exp", "ln", "sin", "cos", "sinh", "cosh", "tanh", "sqrt")


class JetDomainError(ValueError):
    """An argument fell outside a function's real domain (within the guard)."""

    def __init__(self, message, *, func=None, index=None, value=None, point=None):
        super().__init__(message)
        self.func = func
        self.index = index
        self.value = value
        self.point = point


class _Layout:
    """Index tables for a fixed (arity, order) pair."""

    def __init__(self, n: int, order: int):
        self.n = n
        self.order = order
        alphas = []
        for d in range(order + 1):
            for combo in combinations_with_replacement(range(n), d):
                alpha = [0] * n
                for i in combo:
                    alpha[i] += 1
                alphas.append(tuple(alpha))
        self.alphas = alphas
        self.size = len(alphas)
        self.index = {a: k for k, a in enumerate(alphas)}
        self.degree = np.array([sum(a) for a in alphas])
        self.factorial = np.array(
            [math.prod(math.factorial(x) for x in a) for a in alphas], dtype=float
        )

        # (out, left, right) triples with alpha_left + alpha_right = alpha_out
        triples = []
        for a, alpha in enumerate(alphas):
            for b, beta in enumerate(alphas):
                if self.degree[a] + self.degree[b] > order:
                    continue
                gamma = tuple(x + y for x, y in zip(alpha, beta))
                triples.append((self.index[gamma], a, b))
        triples.sort()
        out = np.array([t[0] for t in triples])
        self.mul_left = np.array([t[1] for t in triples])
        self.mul_right = np.array([t[2] for t in triples])
        self.mul_starts = np.searchsorted(out, np.arange(self.size))

        # quotient recurrence, one vectorised level per total degree
        self.div_levels = []
        for d in range(1, order + 1):
            outs = [k for k in range(self.size) if self.degree[k] == d]
            q_idx, b_idx, starts = [], [], []
            for k in outs:
                starts.append(len(q_idx))
                for b, beta in enumerate(alphas):
                    if b == 0 or any(x > y for x, y in zip(beta, alphas[k])):
                        continue
                    rest = tuple(y - x for x, y in zip(beta, alphas[k]))
                    q_idx.append(self.index[rest])
                    b_idx.append(b)
            self.div_levels.append(
                (np.array(outs), np.array(q_idx), np.array(b_idx), np.array(starts))
            )

    def diff_table(self, axis: int):
        """Source indices and factors for the derivative along ``axis``."""
        lower = layout(self.n, self.order - 1)
        src = np.empty(lower.size, dtype=int)
        fac = np.empty(lower.size)
        for k, alpha in enumerate(lower.alphas):
            up = list(alpha)
            up[axis] += 1
            src[k] = self.index[tuple(up)]
            fac[k] = up[axis]
        return src, fac


@lru_cache(maxsize=None)
def layout(n: int, order: int) -> _Layout:
    return _Layout(n, order)


@lru_cache(maxsize=None)
def _diff_table(n: int, order: int, axis: int):
    return layout(n, order).diff_table(axis)


def _check_order(order: int) -> None:
    if not isinstance(order, (int, np.integer)) or not 0 <= order <= MAX_ORDER:
        raise ValueError(f"jet order must be an integer in [0, {MAX_ORDER}], got {order!r}")


def _first_bad(mask) -> int | None:
    mask = np.asarray(mask)
    if mask.ndim == 0:
        return None
    return int(np.flatnonzero(mask.ravel())[0])


def _domain_error(func: str, values, bad, what: str) -> JetDomainError:
    values = np.asarray(values)
    idx = _first_bad(bad)
    v = float(values.ravel()[idx]) if idx is not None else float(values)
    where = f" at batch index {idx}" if idx is not None else ""
    return JetDomainError(f"{func}: argument {v!r} {what}{where}", func=func, index=idx, value=v)


class Jet:
    """Truncated Taylor expansion of a scalar function of ``arity`` variables."""

    __slots__ = ("coeffs", "arity", "order")
    __array_ufunc__ = None  # make numpy scalars defer to the reflected operators

    def __init__(self, coeffs, arity: int, order: int):
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.shape[0] != layout(arity, order).size:
            raise ValueError("coefficient array does not match (arity, order)")
        self.coeffs = coeffs
        self.arity = arity
        self.order = order

    @classmethod
    def constant(cls, value, arity: int, order: int) -> "Jet":
        value = np.asarray(value, dtype=float)
        coeffs = np.zeros((layout(arity, order).size,) + value.shape)
        coeffs[0] = value
        return cls(coeffs, arity, order)

    @property
    def value(self) -> np.ndarray:
        return self.coeffs[0]

    @property
    def batch_shape(self) -> tuple:
        return self.coeffs.shape[1:]

    def __repr__(self) -> str:
        return f"Jet(arity={self.arity}, order={self.order}, value={self.value!r})"

    def coefficient(self, multi_index: Sequence[int]) -> np.ndarray:
        return self.coeffs[self._rank(multi_index)]

    def _rank(self, multi_index) -> int:
        multi_index = tuple(int(x) for x in multi_index)
        if len(multi_index) != self.arity or min(multi_index, default=0) < 0:
            raise ValueError(f"multi-index {multi_index} does not match arity {self.arity}")
        if sum(multi_index) > self.order:
            raise ValueError(
                f"multi-index {multi_index} has degree {sum(multi_index)} > jet order {self.order}"
            )
        return layout(self.arity, self.order).index[multi_index]

    def partial(self, multi_index: Sequence[int]) -> np.ndarray:
        """Raw partial derivative ``d^|alpha| f / du^alpha``."""
        k = self._rank(multi_index)
        return layout(self.arity, self.order).factorial[k] * self.coeffs[k]

    def d(self, *axes: int) -> np.ndarray:
        """Shorthand: ``jet.d(0, 1)`` is the mixed second partial in axes 0 and 1."""
        alpha = [0] * self.arity
        for a in axes:
            alpha[a] += 1
        return self.partial(alpha)

    def truncate(self, order: int) -> "Jet":
        if order > self.order:
            raise ValueError("cannot raise the order of a jet")
        return Jet(self.coeffs[: layout(self.arity, order).size], self.arity, order)

    def diff(self, axis: int) -> "Jet":
        """Jet of the partial derivative along ``axis`` (one order lower)."""
        if self.order == 0:
            raise ValueError("cannot differentiate an order-0 jet")
        src, fac = _diff_table(self.arity, self.order, axis)
        fac = fac.reshape((-1,) + (1,) * len(self.batch_shape))
        return Jet(self.coeffs[src] * fac, self.arity, self.order - 1)

    # -- arithmetic -------------------------------------------------------

    def _coerce(self, other):
        if isinstance(other, Jet):
            if other.arity != self.arity or other.order != self.order:
                raise ValueError(
                    f"jet mismatch: ({self.arity}, {self.order}) vs ({other.arity}, {other.order})"
                )
            return other
        return None

    def __neg__(self):
        return Jet(-self.coeffs, self.arity, self.order)

    def __pos__(self):
        return self

    def __add__(self, other):
        o = self._coerce(other)
        if o is not None:
            a, b = _common(self, o)
            return Jet(a + b, self.arity, self.order)
        other = np.asarray(other, dtype=float)
        c = _expand(self.coeffs, np.broadcast_shapes(other.shape, self.batch_shape)).copy()
        c[0] = c[0] + other
        return Jet(c, self.arity, self.order)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, Jet):
            return self + (-other)
        return self + (-np.asarray(other, dtype=float))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        o = self._coerce(other)
        if o is None:
            other = np.asarray(other, dtype=float)
            return Jet(_pad(self.coeffs, other.ndim) * other, self.arity, self.order)
        lay = layout(self.arity, self.order)
        a, b = _common(self, o)
        prod = a[lay.mul_left] * b[lay.mul_right]
        return Jet(np.add.reduceat(prod, lay.mul_starts, axis=0), self.arity, self.order)

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = self._coerce(other)
        if o is None:
            other = np.asarray(other, dtype=float)
            return Jet(_pad(self.coeffs, other.ndim) / other, self.arity, self.order)
        return _divide(self, o)

    def __rtruediv__(self, other):
        num = Jet.constant(np.broadcast_to(np.asarray(other, dtype=float), self.batch_shape), self.arity, self.order)
        return _divide(num, self)

    def __pow__(self, other):
        return power(self, other)

    def __rpow__(self, other):
        base = Jet.constant(np.broadcast_to(np.asarray(other, dtype=float), self.batch_shape), self.arity, self.order)
        return power(base, self)


def _pad(coeffs: np.ndarray, ndim: int) -> np.ndarray:
    """Insert unit axes so a scalar array of ``ndim`` dims broadcasts over the batch."""
    extra = ndim - (coeffs.ndim - 1)
    if extra <= 0:
        return coeffs
    return coeffs.reshape((coeffs.shape[0],) + (1,) * extra + coeffs.shape[1:])


def _expand(coeffs: np.ndarray, shape: tuple) -> np.ndarray:
    coeffs = _pad(coeffs, len(shape))
    return np.broadcast_to(coeffs, (coeffs.shape[0],) + tuple(shape))


def _common(a: Jet, b: Jet):
    shape = np.broadcast_shapes(a.batch_shape, b.batch_shape)
    return _expand(a.coeffs, shape), _expand(b.coeffs, shape)


def _divide(a: Jet, b: Jet) -> Jet:
    shape = np.broadcast_shapes(a.batch_shape, b.batch_shape)
    acoef, bcoef = _expand(a.coeffs, shape), _expand(b.coeffs, shape)
    b0 = bcoef[0]
    bad = ~(np.abs(b0) > GUARD)
    if np.any(bad):
        raise _domain_error("div", b0, bad, f"within {GUARD:g} of zero")
    lay = layout(a.arity, a.order)
    q = np.zeros((lay.size,) + shape)
    q[0] = acoef[0] / b0
    for outs, q_idx, b_idx, starts in lay.div_levels:
        acc = np.add.reduceat(q[q_idx] * bcoef[b_idx], starts, axis=0)
        q[outs] = (acoef[outs] - acc) / b0
    return Jet(q, a.arity, a.order)


def _compose(a: Jet, taylor: list) -> Jet:
    """Evaluate ``sum_k taylor[k] * (a - a0)^k`` by Horner's rule."""
    delta = Jet(a.coeffs.copy(), a.arity, a.order)
    delta.coeffs[0] = 0.0
    shape = np.broadcast_shapes(a.batch_shape, *(np.shape(t) for t in taylor))
    result = Jet.constant(np.broadcast_to(taylor[-1], shape), a.arity, a.order)
    for t in reversed(taylor[:-1]):
        result = result * delta + t
    return result


def _binom(c: float, k: int) -> float:
    out = 1.0
    for j in range(k):
        out *= (c - j) / (j + 1)
    return out


def _power_taylor(x, c: float, order: int, func: str = "pow") -> list:
    is_int = float(c).is_integer()
    if not is_int:
        bad = ~(x > GUARD)
        if np.any(bad):
            raise _domain_error(func, x, bad, f"is not above {GUARD:g} (fractional power)")
    elif c < 0:
        bad = ~(np.abs(x) > GUARD)
        if np.any(bad):
            raise _domain_error(func, x, bad, f"within {GUARD:g} of zero (negative power)")
    terms = [np.power(x, c)]
    for k in range(1, order + 1):
        if is_int and 0 <= c < k:
            terms.append(np.zeros_like(x))
        else:
            terms.append(_binom(c, k) * np.power(x, c - k))
    return terms


@lru_cache(maxsize=None)
def _tanh_polys(order: int):
    # d^k tanh / dx^k as a polynomial in t = tanh(x)
    polys = [np.polynomial.Polynomial([0.0, 1.0])]
    one_minus_t2 = np.polynomial.Polynomial([1.0, 0.0, -1.0])
    for _ in range(order):
        polys.append(polys[-1].deriv() * one_minus_t2)
    return polys


def _taylor(func: str, x, order: int) -> list:
    fact = [math.factorial(k) for k in range(order + 1)]
    if func == "exp":
        e = np.exp(x)
        return [e / fact[k] for k in range(order + 1)]
    if func in ("sin", "cos"):
        s, c = np.sin(x), np.cos(x)
        cycle = [s, c, -s, -c] if func == "sin" else [c, -s, -c, s]
        return [cycle[k % 4] / fact[k] for k in range(order + 1)]
    if func in ("sinh", "cosh"):
        s, c = np.sinh(x), np.cosh(x)
        cycle = [s, c] if func == "sinh" else [c, s]
        return [cycle[k % 2] / fact[k] for k in range(order + 1)]
    if func == "tanh":
        t = np.tanh(x)
        return [t] + [p(t) / fact[k] for k, p in enumerate(_tanh_polys(order)[1:], start=1)]
    if func == "ln":
        bad = ~(x > GUARD)
        if np.any(bad):
            raise _domain_error("ln", x, bad, f"is not above {GUARD:g}")
        return [np.log(x)] + [(-1.0) ** (k - 1) / (k * np.power(x, k)) for k in range(1, order + 1)]
    if func == "sqrt":
        bad = ~(x > GUARD)
        if np.any(bad):
            raise _domain_error("sqrt", x, bad, f"is not above {GUARD:g}")
        terms = _power_taylor(x, 0.5, order, "sqrt")
        terms[0] = np.sqrt(x)
        return terms
    raise ValueError(f"unknown univariate function {func!r}")


def apply_univariate(func: str, a: Jet) -> Jet:
    """Compose a jet with one of :data:`UNIVARIATE`, exact to the jet's order."""
    return _compose(a, _taylor(func, a.coeffs[0], a.order))


def power(a: Jet, exponent) -> Jet:
    """``a ** exponent`` for a scalar or jet exponent."""
    if isinstance(exponent, Jet):
        if exponent.arity != a.arity or exponent.order != a.order:
            raise ValueError("jet mismatch in power")
        out = apply_univariate("exp", exponent * apply_univariate("ln", a))
        out.coeffs[0] = np.power(a.coeffs[0], exponent.coeffs[0])
        return out
    c = np.asarray(exponent, dtype=float)
    if c.ndim != 0:
        raise ValueError("power exponent must be a scalar or a Jet")
    return _compose(a, _power_taylor(a.coeffs[0], float(c), a.order))


def exp(a: Jet) -> Jet:
    return apply_univariate("exp", a)


def ln(a: Jet) -> Jet:
    return apply_univariate("ln", a)


def sqrt(a: Jet) -> Jet:
    return apply_univariate("sqrt", a)


def sin(a: Jet) -> Jet:
    return apply_univariate("sin", a)


def cos(a: Jet) -> Jet:
    return apply_univariate("cos", a)


def log_abs(a: Jet) -> Jet:
    """``ln|a|``; the sign is taken pointwise from the value."""
    sign = np.where(a.coeffs[0] < 0, -1.0, 1.0)
    return apply_univariate("ln", a * sign)


_OPS = {
    "add": lambda a, b: a + b,
    "sub": lambda a, b: a - b,
    "mul": lambda a, b: a * b,
    "div": lambda a, b: a / b,
    "pow": lambda a, b: power(a, b),
}


def combine(op: str, a: Jet, b) -> Jet:
    """Binary jet arithmetic; ``b`` may be a jet or a scalar."""
    try:
        fn = _OPS[op]
    except KeyError:
        raise ValueError(f"unknown operation {op!r}") from None
    return fn(a, b)


def seed(point, order: int = DEFAULT_ORDER) -> list[Jet]:
    """Coordinate jets at ``point`` (shape ``(n,)`` or ``(n, *batch)``)."""
    _check_order(order)
    point = np.asarray(point, dtype=float)
    if point.ndim == 0 or point.shape[0] < 1:
        raise ValueError("seed point must have at least one coordinate")
    n = point.shape[0]
    lay = layout(n, order)
    jets = []
    for i in range(n):
        coeffs = np.zeros((lay.size,) + point.shape[1:])
        coeffs[0] = point[i]
        if order >= 1:
            unit = [0] * n
            unit[i] = 1
            coeffs[lay.index[tuple(unit)]] = 1.0
        jets.append(Jet(coeffs, n, order))
    return jets


def partial(a: Jet, multi_index: Sequence[int]) -> np.ndarray:
    return a.partial(multi_index)
