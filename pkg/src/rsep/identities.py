"""Rational identities: Bocher sums, symmetric polynomials, EPD solutions,
Stackel construction and coordinate-map pullbacks.

Vector arguments have shape ``(n,)`` or ``(n, *batch)``; everything is
vectorised over the trailing batch axes.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .exprdsl import ScalarField, field_product, field_sum
from .metric import DiagonalMetric, MetricError, sample_points
from .report import CheckResult, summarize

COINCIDENCE = 1e-6


class CoincidentArgumentsError(ValueError):
    pass


def _differences(x):
    """``D[i, j] = x_i - x_j`` after checking pairwise separation."""
    x = np.asarray(x, dtype=float)
    D = x[:, None] - x[None, :]
    n = x.shape[0]
    scale = np.max(np.abs(x), axis=0)
    off = ~np.eye(n, dtype=bool)
    gap = np.abs(D[off]).min(axis=0) if n > 1 else np.inf
    if np.any(gap <= COINCIDENCE * np.maximum(scale, np.finfo(float).tiny)):
        raise CoincidentArgumentsError("arguments must be pairwise distinct")
    return D


def _denominators(x):
    """``prod_{j != i} (x_i - x_j)`` for each ``i``."""
    D = _differences(x)
    n = D.shape[0]
    idx = np.arange(n)
    D[idx, idx] = 1.0
    return np.prod(D, axis=1)


def bocher_sum(x, m: int):
    """``sum_i x_i^m / prod_{j != i} (x_i - x_j)``."""
    if m < 0 or int(m) != m:
        raise ValueError("exponent must be a non-negative integer")
    x = np.asarray(x, dtype=float)
    return np.sum(x ** int(m) / _denominators(x), axis=0)


def bocher_terms(x, m: int):
    """Individual summands of :func:`bocher_sum` (for the residual scale)."""
    x = np.asarray(x, dtype=float)
    return x ** int(m) / _denominators(x)


def elementary_symmetric(x, k: int):
    """``sigma_k(x)`` by the product-expansion recurrence."""
    x = np.asarray(x, dtype=float)
    e = [np.ones(x.shape[1:])] + [np.zeros(x.shape[1:]) for _ in range(k)]
    for xi in x:
        for j in range(k, 0, -1):
            e[j] = e[j] + xi * e[j - 1]
    return e[k]


def symmetric_f(x, d: int):
    """``f_d(x) = sum_i x_i^(d+n-1) / prod_{j != i}(x_i - x_j)``.

    Closed forms in the elementary symmetric polynomials for ``d <= 3``; for
    larger ``d`` the defining sum is used directly (O(n^2) per point).
    """
    if d < 1 or int(d) != d:
        raise ValueError("degree must be a positive integer")
    x = np.asarray(x, dtype=float)
    if d > 3:
        return bocher_sum(x, d + x.shape[0] - 1)
    s1 = elementary_symmetric(x, 1)
    if d == 1:
        return s1
    s2 = elementary_symmetric(x, 2)
    if d == 2:
        return s1 * s1 - s2
    s3 = elementary_symmetric(x, 3)
    return s1**3 - 2.0 * s1 * s2 + s3


# -- Euler-Poisson-Darboux ------------------------------------------------------


def _coordinate(name, coords):
    return ScalarField.coordinate(name, coords)


@dataclass(frozen=True)
class EPDSolution:
    """``M = sum_i m_i(x_i) / prod_{j != i}(x_i - x_j)`` with univariate generators."""

    coords: tuple
    m: tuple

    def field(self) -> ScalarField:
        return epd_field(self.coords, self.m)

    def __call__(self, x):
        return epd_eval(self, x)


def epd_field(coords, generators) -> ScalarField:
    coords = tuple(coords)
    n = len(coords)
    terms = []
    for i in range(n):
        den = field_product(
            [_coordinate(coords[i], coords) - _coordinate(coords[j], coords) for j in range(n) if j != i],
            coords,
        )
        terms.append(generators[i] / den)
    return field_sum(terms, coords)


def epd_eval(sol: EPDSolution, x):
    x = np.asarray(x, dtype=float)
    den = _denominators(x)
    vals = np.stack([g(x) for g in sol.m])
    return np.sum(vals / den, axis=0)


def epd_terms(M: ScalarField, x):
    """Per-pair residuals ``(x_i - x_j) M_ij - M_i + M_j`` and their term scales."""
    x = np.asarray(x, dtype=float)
    _differences(x)
    J = M.jet(x, 2)
    n = x.shape[0]
    res, sc = [], []
    for i, j in combinations(range(n), 2):
        terms = [(x[i] - x[j]) * J.d(i, j), -J.d(i), J.d(j)]
        res.append(sum(terms))
        sc.append(np.max(np.abs(terms), axis=0))
    return np.array(res), np.array(sc)


def epd_residual(M: ScalarField, x):
    """Max over pairs of ``|(x_i - x_j) M_ij - M_i + M_j|``, per point."""
    res, _ = epd_terms(M, x)
    return np.max(np.abs(res), axis=0)


def epd_check(M: ScalarField, x, tol: float = 1e-9, seed: int | None = None) -> CheckResult:
    res, sc = epd_terms(M, x)
    return summarize("epd", res, sc, x, M.coords, tol, seed)


# -- Stackel construction ---------------------------------------------------------


def _minor(rows, skip_row, skip_col):
    return [[f for c, f in enumerate(row) if c != skip_col] for r, row in enumerate(rows) if r != skip_row]


def field_det(matrix, coords) -> ScalarField:
    """Determinant of a square matrix of fields by first-column cofactor expansion."""
    n = len(matrix)
    if n == 1:
        return matrix[0][0]
    terms = []
    for r in range(n):
        sub = field_det(_minor(matrix, r, 0), coords)
        term = matrix[r][0] * sub
        terms.append(term if r % 2 == 0 else -term)
    return field_sum(terms, coords)


def cofactor(matrix, row: int, col: int, coords) -> ScalarField:
    minor = _minor(matrix, row, col)
    det = field_det(minor, coords) if minor else ScalarField.constant(1.0, coords)
    return det if (row + col) % 2 == 0 else -det


@dataclass(frozen=True)
class LogDerivative:
    """``d/du^i ln|f|`` of a univariate field, evaluated through jets."""

    f: ScalarField
    axis: int

    @property
    def coords(self):
        return self.f.coords

    @property
    def text(self) -> str:
        return f"d/d{self.f.coords[self.axis]} ln|{self.f.text}|"

    def __call__(self, points):
        j = self.f.jet(np.asarray(points, dtype=float), 1)
        return j.d(self.axis) / j.value


@dataclass(frozen=True)
class StackelForm:
    """Stackel matrix ``q[i][j](u^i)``, Robertson factors ``f_i`` and separation data."""

    coords: tuple
    q: tuple
    f: tuple
    v: tuple = None
    k2: float = 0.0
    k: tuple = None

    def __post_init__(self):
        n = len(self.coords)
        if len(self.q) != n or any(len(row) != n for row in self.q):
            raise MetricError("Stackel matrix must be n x n")
        if len(self.f) != n:
            raise MetricError("need one f per coordinate")
        if self.v is not None and len(self.v) != n:
            raise MetricError("need one v per coordinate")
        ks = (0.0,) * (n - 1) if self.k is None else tuple(float(c) for c in self.k)
        if len(ks) != n - 1:
            raise MetricError("need n - 1 separation constants k_2 .. k_n")
        object.__setattr__(self, "k", ks)


@dataclass(frozen=True)
class StackelResult:
    metric: DiagonalMetric
    system: object
    det: ScalarField
    cofactors: tuple
    robertson: CheckResult
    cofactor_independence: CheckResult


def _robertson(metric, det, f, points, tol, seed):
    h = metric.weight(points)
    lhs = np.abs(h / det(points))
    rhs = np.abs(np.prod(np.stack([fi(points) for fi in f]), axis=0))
    return summarize("robertson", lhs - rhs, np.maximum(lhs, rhs), points, metric.coords, tol, seed)


def _cofactor_independence(metric, cof, points, tol, seed):
    res, sc = [], []
    for i, Q in enumerate(cof):
        j = Q.jet(points, 1)
        res.append(j.d(i))
        sc.append(np.abs(j.value))
    return summarize("cofactor-independence", res, sc, points, metric.coords, tol, seed)


def stackel_assemble(
    s: StackelForm, domain, guards=(), *, samples: int = 64, seed: int = 42, tol: float = 1e-10
) -> StackelResult:
    """Metric ``ds^2 = det q sum (du^i)^2 / Q_i1`` and its separation system.

    ``p_i = f_i'/f_i``, ``q_i = k^2 q_i1 + sum_{j>=2} k_j q_ij - v_i`` and
    ``V = sum v_i Q_i1 / det q``.  The Robertson condition
    ``|h / det q| = prod |f_i|`` is checked on samples.
    """
    from .separation import SeparationSystem

    coords = tuple(s.coords)
    n = len(coords)
    det = field_det(s.q, coords)
    cof = tuple(cofactor(s.q, i, 0, coords) for i in range(n))
    box = np.array([np.linspace(lo, hi, 7)[1:-1] for lo, hi in domain])
    if np.all(np.abs(det(box)) <= 1e-12 * (1 + np.max(np.abs(box)))):
        raise MetricError("singular Stackel matrix")
    if any(np.all(np.abs(c(box)) <= 1e-12) for c in cof):
        raise MetricError("a first-column cofactor vanishes; the metric is degenerate")
    ratios = [det / cof[i] for i in range(n)]
    probe = DiagonalMetric(coords, tuple(r * r for r in ratios), domain, None, (det, *cof, *guards))
    pts = sample_points(probe, samples, seed)
    signs = []
    for i, r in enumerate(ratios):
        vals = r(pts)
        if not (np.all(vals > 0) or np.all(vals < 0)):
            raise MetricError(f"det q / Q_{i + 1}1 changes sign on the domain")
        signs.append(1 if vals[0] > 0 else -1)
    H = tuple((r * float(sg)).apply("sqrt") for r, sg in zip(ratios, signs))
    metric = DiagonalMetric(coords, H, domain, tuple(signs), (det, *cof, *guards))
    pts = sample_points(metric, samples, seed)
    robertson = _robertson(metric, det, s.f, pts, tol, seed)
    indep = _cofactor_independence(metric, cof, pts, tol, seed)
    if not robertson.passed:
        raise MetricError(f"Robertson condition violated: residual {robertson.max_residual:.3g}")

    q = []
    for i in range(n):
        qi = s.q[i][0] * s.k2
        for j in range(1, n):
            qi = qi + s.q[i][j] * s.k[j - 1]
        if s.v is not None:
            qi = qi - s.v[i]
        q.append(qi)
    if s.v is None:
        V = ScalarField.constant(0.0, coords)
    else:
        V = field_sum([s.v[i] * cof[i] / det for i in range(n)], coords)
    system = SeparationSystem(
        metric=metric,
        R=ScalarField.constant(1.0, coords),
        p=tuple(LogDerivative(s.f[i], i) for i in range(n)),
        q=tuple(q),
        V=V,
        k2=float(s.k2),
    )
    return StackelResult(metric, system, det, cof, robertson, indep)


def vandermonde_stackel(coords, g, A) -> tuple:
    """Rows ``q_ij = g_i^(n-j) / A_i``: a Stackel matrix with ``f_i = sqrt|A_i|``.

    ``g`` and ``A`` are univariate fields, ``g_i`` and ``A_i`` depending on ``u^i``.
    """
    n = len(coords)
    return tuple(tuple(g[i] ** float(n - 1 - j) / A[i] for j in range(n)) for i in range(n))


# -- coordinate maps --------------------------------------------------------------


def elliptic_map(lam, b):
    """Cartesian image of ``n``-elliptic coordinates (positive octant)."""
    lam = np.asarray(lam, dtype=float)
    b = np.asarray(b, dtype=float)
    n = b.shape[0]
    if lam.shape[0] != n:
        raise ValueError("need as many coordinates as parameters")
    for i in range(n):
        if not np.all(lam[i] > b[i]) or (i + 1 < n and not np.all(b[i] > lam[i + 1])):
            raise ValueError("ordering lambda^1 > b_1 > lambda^2 > ... > lambda^n > b_n violated")
    out = []
    for i in range(n):
        num = np.prod([lam[j] - b[i] for j in range(n)], axis=0)
        den = np.prod([b[j] - b[i] for j in range(n) if j != i])
        out.append(np.sqrt(num / den))
    return np.array(out)


def elliptic_map_fields(coords, b) -> tuple:
    n = len(coords)
    out = []
    for i in range(n):
        num = field_product([_coordinate(coords[j], coords) - float(b[i]) for j in range(n)], coords)
        den = float(np.prod([b[j] - b[i] for j in range(n) if j != i]))
        out.append((num / den).apply("sqrt"))
    return tuple(out)


def elliptic_metric(b, domain, names=None) -> DiagonalMetric:
    """``H_i^2 = prod_{j != i}(l^i - l^j) / (4 prod_k (l^i - b_k))`` written out directly."""
    n = len(b)
    coords = tuple(names or [f"l{i + 1}" for i in range(n)])
    H = []
    for i in range(n):
        li = _coordinate(coords[i], coords)
        num = field_product([li - _coordinate(coords[j], coords) for j in range(n) if j != i], coords)
        den = field_product([li - float(bk) for bk in b], coords) * 4.0
        H.append((num / den).apply("sqrt"))
    guards = [_coordinate(coords[i], coords) - _coordinate(coords[j], coords) for i, j in combinations(range(n), 2)]
    guards += [_coordinate(coords[i], coords) - float(bk) for i in range(n) for bk in b]
    return DiagonalMetric(coords, tuple(H), domain, None, tuple(guards))


def km_map_fields(coords) -> tuple:
    """Polynomial map from the Kalnins-Miller coordinates to Minkowski ``(t, x, y)``."""
    l1, l2, l3 = coords
    s = f"({l1} + {l2} + {l3})"
    cubic = f"({l1} + {l2} - {l3})*({l1} - {l2} + {l3})*({l1} - {l2} - {l3})"
    t = ScalarField.parse(f"{s}/9 - 9/16*{cubic}", coords)
    x = ScalarField.parse(f"{s}/9 + 9/16*{cubic}", coords)
    y = ScalarField.parse(f"({l1} + {l2} - {l3})^2/4 - {l1}*{l2}", coords)
    return (t, x, y)


def pullback_terms(mapping, source: DiagonalMetric, target: DiagonalMetric, points):
    """``J^T G_target J - G_source`` component-wise, with term scales."""
    points = np.asarray(points, dtype=float)
    jac = [m.jet(points, 1) for m in mapping]
    image = np.stack([j.value for j in jac])
    Ht = target.lame_values(image)
    Hs = source.lame_values(points)
    n = source.n
    res, sc = [], []
    for i in range(n):
        for j in range(i, n):
            terms = [
                target.signature[a] * Ht[a] ** 2 * jac[a].d(i) * jac[a].d(j) for a in range(target.n)
            ]
            g_src = source.signature[i] * Hs[i] ** 2 if i == j else np.zeros(points.shape[1:])
            res.append(sum(terms) - g_src)
            sc.append(np.max(np.abs(terms + [g_src]), axis=0))
    return np.array(res), np.array(sc)


def pullback_residual(mapping, source: DiagonalMetric, target: DiagonalMetric, points):
    """Max component difference between the pulled-back and the source metric, per point."""
    res, _ = pullback_terms(mapping, source, target, points)
    return np.max(np.abs(res), axis=0)


def pullback_check(mapping, source, target, points, tol: float = 1e-9, seed: int | None = None) -> CheckResult:
    res, sc = pullback_terms(mapping, source, target, points)
    return summarize("pullback", res, sc, points, source.coords, tol, seed)
