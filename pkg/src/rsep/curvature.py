"""Curvature diagnostics for diagonal metrics.

Ricci and Cotton tensors are built in the coordinate basis from jet-valued
Christoffel symbols of ``g_ii = eps_i H_i^2``.  The Lame equations and the
Dupin conditions are evaluated directly from the ``H_i`` jets as an
independent route.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import permutations

import numpy as np

from .exprdsl import ScalarField
from .identities import epd_field
from .jets import Jet
from .metric import DiagonalMetric, MetricError
from .report import CheckResult, summarize


def _metric_jets(metric: DiagonalMetric, points, order: int) -> list[Jet]:
    return [h * h * float(s) for h, s in zip(metric.lame_jets(points, order), metric.signature)]


def christoffel(g: list[Jet]):
    """``Gamma[k][i][j]`` for a diagonal metric given as jets ``g_kk`` (order drops by one)."""
    n = len(g)
    order = g[0].order - 1
    dg = [[g[k].diff(i) for i in range(n)] for k in range(n)]
    inv_half = [(0.5 / g[k]).truncate(order) for k in range(n)]
    zero = Jet.constant(np.zeros(g[0].batch_shape), n, order)
    gam = [[[zero] * n for _ in range(n)] for _ in range(n)]
    for k in range(n):
        for i in range(n):
            for j in range(n):
                # 1/2 g^kk (d_i g_jk + d_j g_ik - d_k g_ij), only diagonal g survive
                acc = None
                if j == k:
                    acc = dg[k][i]
                if i == k:
                    acc = dg[k][j] if acc is None else acc + dg[k][j]
                if i == j:
                    acc = -dg[i][k] if acc is None else acc - dg[i][k]
                if acc is not None:
                    gam[k][i][j] = inv_half[k] * acc
    return gam


def _ricci_from_gamma(gam, want_scale=False):
    """``R_ij = d_k G^k_ij - d_j G^k_ik + G^k_kl G^l_ij - G^k_jl G^l_ik`` (order drops by one)."""
    n = len(gam)
    order = gam[0][0][0].order - 1
    low = [[[gam[k][i][j].truncate(order) for j in range(n)] for i in range(n)] for k in range(n)]
    ric = [[None] * n for _ in range(n)]
    scale = np.zeros((n, n) + gam[0][0][0].batch_shape)
    for i in range(n):
        for j in range(i, n):
            terms = []
            for k in range(n):
                terms.append(gam[k][i][j].diff(k))
                terms.append(-gam[k][i][k].diff(j))
                for l in range(n):
                    terms.append(low[k][k][l] * low[l][i][j])
                    terms.append(-(low[k][j][l] * low[l][i][k]))
            total = terms[0]
            for t in terms[1:]:
                total = total + t
            ric[i][j] = ric[j][i] = total
            if want_scale:
                s = np.max([np.abs(t.value) for t in terms], axis=0)
                scale[i, j] = scale[j, i] = s
    return ric, scale


def ricci_jets(metric: DiagonalMetric, points, order: int = 2):
    """Ricci components as jets of order ``order - 2`` plus the term scale of each component."""
    if order < 2:
        raise ValueError("Ricci needs jet order >= 2")
    g = _metric_jets(metric, points, order)
    gam = christoffel(g)
    ric, scale = _ricci_from_gamma(gam, want_scale=True)
    return ric, scale, g, gam


def ricci(metric: DiagonalMetric, points) -> np.ndarray:
    """Coordinate-basis Ricci tensor, shape ``(n, n, *batch)``."""
    ric, _, _, _ = ricci_jets(metric, np.asarray(points, dtype=float), 2)
    n = metric.n
    return np.array([[ric[i][j].value for j in range(n)] for i in range(n)])


def ricci_check(metric: DiagonalMetric, points, tol: float = 1e-7, seed: int | None = None) -> CheckResult:
    points = np.asarray(points, dtype=float)
    ric, scale, _, _ = ricci_jets(metric, points, 2)
    n = metric.n
    vals = np.array([ric[i][j].value for i in range(n) for j in range(i, n)])
    sc = np.array([scale[i, j] for i in range(n) for j in range(i, n)])
    return summarize("ricci", vals, sc, points, metric.coords, tol, seed)


def _require_3d(metric: DiagonalMetric) -> None:
    if metric.n != 3:
        raise MetricError(f"this check is defined for n = 3, got n = {metric.n}")


def lame_residuals(metric: DiagonalMetric, points):
    """Off-diagonal and diagonal Lame-equation residuals with their term scales.

    Returns ``(off, off_scale, diag, diag_scale)``, each of shape ``(3, *batch)``.
    """
    _require_3d(metric)
    if not metric.riemannian:
        raise MetricError("the Lame equations here assume a Riemannian signature")
    points = np.asarray(points, dtype=float)
    H = metric.lame_jets(points, 2)
    Hv = [h.value for h in H]
    off, off_s = [], []
    for i, j, k in ((0, 1, 2), (1, 0, 2), (2, 0, 1)):
        terms = [H[i].d(j, k), -H[i].d(j) * H[j].d(k) / Hv[j], -H[i].d(k) * H[k].d(j) / Hv[k]]
        off.append(sum(terms))
        off_s.append(np.max(np.abs(terms), axis=0))
    diag, diag_s = [], []
    for i, j, k in ((0, 1, 2), (1, 2, 0), (0, 2, 1)):
        a = (H[j].diff(i) / H[i].truncate(1)).diff(i).value
        b = (H[i].diff(j) / H[j].truncate(1)).diff(j).value
        c = H[i].d(k) * H[j].d(k) / Hv[k] ** 2
        diag.append(a + b + c)
        diag_s.append(np.max(np.abs([a, b, c]), axis=0))
    return np.array(off), np.array(off_s), np.array(diag), np.array(diag_s)


def lame_check(metric: DiagonalMetric, points, tol: float = 1e-7, seed: int | None = None) -> CheckResult:
    off, off_s, diag, diag_s = lame_residuals(metric, points)
    res = np.concatenate([off, diag])
    sc = np.concatenate([off_s, diag_s])
    return summarize("lame", res, sc, points, metric.coords, tol, seed)


def _schouten(ric, g, n):
    order = ric[0][0].order
    gl = [gk.truncate(order) for gk in g]
    rs = None
    for i in range(n):
        term = ric[i][i] / gl[i]
        rs = term if rs is None else rs + term
    return [[ric[i][j] - (rs * gl[i] * 0.25 if i == j else 0.0) for j in range(n)] for i in range(n)]


def cotton_york(metric: DiagonalMetric, points, order: int = 3):
    """Cotton tensor ``C_ijk = nabla_k S_ij - nabla_j S_ik`` of the Schouten tensor ``S``.

    Returns ``(C, scale)`` with ``C`` of shape ``(3, 3, 3, *batch)``.
    """
    _require_3d(metric)
    if order < 3:
        raise ValueError("Cotton tensor needs jet order >= 3")
    points = np.asarray(points, dtype=float)
    n = 3
    g = _metric_jets(metric, points, order)
    gam = christoffel(g)
    ric, _ = _ricci_from_gamma(gam)
    S = _schouten(ric, g, n)
    low = order - 3
    S0 = [[S[i][j].truncate(low) for j in range(n)] for i in range(n)]
    G0 = [[[gam[k][i][j].truncate(low) for j in range(n)] for i in range(n)] for k in range(n)]

    def nabla_terms(i, j, k):
        # nabla_k S_ij
        out = [S[i][j].diff(k).value]
        for l in range(n):
            out.append(-(G0[l][k][i] * S0[l][j]).value)
            out.append(-(G0[l][k][j] * S0[i][l]).value)
        return out

    shape = points.shape[1:]
    C = np.zeros((n, n, n) + shape)
    scale = np.zeros((n, n, n) + shape)
    for i in range(n):
        for j in range(n):
            for k in range(n):
                if j == k:
                    continue
                a = nabla_terms(i, j, k)
                b = nabla_terms(i, k, j)
                C[i, j, k] = sum(a) - sum(b)
                scale[i, j, k] = np.max(np.abs(a + b), axis=0)
    return C, scale


def cotton_check(
    metric: DiagonalMetric, points, tol: float = 1e-7, seed: int | None = None, order: int = 3
) -> CheckResult:
    C, scale = cotton_york(metric, points, order)
    return summarize("cotton-york", C.reshape(27, -1), scale.reshape(27, -1), points, metric.coords, tol, seed)


def dupin_residual(metric: DiagonalMetric, points):
    """Residuals of ``d_j (H_i^-1 d_i ln H_j)`` for ordered pairs ``i != j``.

    Returns ``(residuals, scale, k)`` where ``k[(i, j)] = -H_i^-1 d_i ln H_j``
    are the principal curvatures of the coordinate surfaces.
    """
    _require_3d(metric)
    points = np.asarray(points, dtype=float)
    H = metric.lame_jets(points, 2)
    Hv = [h.value for h in H]
    res, sc, curv = [], [], {}
    for i, j in permutations(range(3), 2):
        # d_j [H_j,i / (H_i H_j)] expanded by the product rule
        t1 = H[j].d(i, j) / (Hv[i] * Hv[j])
        t2 = -H[j].d(i) * H[i].d(j) / (Hv[i] ** 2 * Hv[j])
        t3 = -H[j].d(i) * H[j].d(j) / (Hv[i] * Hv[j] ** 2)
        res.append(t1 + t2 + t3)
        sc.append(np.max(np.abs([t1, t2, t3]), axis=0))
        curv[(i, j)] = -H[j].d(i) / (Hv[i] * Hv[j])
    return np.array(res), np.array(sc), curv


def dupin_check(metric: DiagonalMetric, points, tol: float = 1e-10, seed: int | None = None) -> CheckResult:
    res, sc, _ = dupin_residual(metric, points)
    return summarize("dupin", res, sc, points, metric.coords, tol, seed)


@dataclass(frozen=True)
class CurvatureReport:
    ricci: np.ndarray
    lame_off: np.ndarray | None
    lame_diag: np.ndarray | None
    cotton: np.ndarray | None
    checks: tuple = ()


def curvature_report(metric: DiagonalMetric, points, tol: float = 1e-7, seed: int | None = None) -> CurvatureReport:
    points = np.asarray(points, dtype=float)
    checks = [ricci_check(metric, points, tol, seed)]
    off = diag = C = None
    if metric.n == 3:
        C, _ = cotton_york(metric, points)
        checks.append(cotton_check(metric, points, tol, seed))
        if metric.riemannian:
            off, _, diag, _ = lame_residuals(metric, points)
            checks.append(lame_check(metric, points, tol, seed))
    return CurvatureReport(ricci(metric, points), off, diag, C, tuple(checks))


# -- constant constraints --------------------------------------------------------


def proposition3_check(p: float, a: float, b: float, c: float, d: float, tol: float = 1e-12):
    """Flatness conditions of the cyclidic family: ``pabcd = 0`` and ``p^2 e3(a,b,c,d) = 1``."""
    first = p * a * b * c * d
    second = p * p * (a * b * c + a * b * d + a * c * d + b * c * d) - 1.0
    return (abs(first) <= tol and abs(second) <= tol), first, second


@dataclass(frozen=True)
class DupinConstants:
    """``a_i = m_i u^2 + 2 n_i u + p_i`` and flatness constants ``alpha, beta, gamma``.

    ``b`` holds univariate fields ``b_i(u^i)`` over ``coords``.
    """

    coords: tuple
    m: tuple
    n: tuple
    p: tuple
    b: tuple
    alpha: tuple = (0.0, 0.0, 0.0)
    beta: tuple = (0.0, 0.0, 0.0)
    gamma: tuple = (0.0, 0.0, 0.0)

    def a_text(self, i: int) -> str:
        u = self.coords[i]
        return f"{self.m[i]!r}*{u}^2 + 2*{self.n[i]!r}*{u} + {self.p[i]!r}"

    def a(self, i: int, u):
        return self.m[i] * u * u + 2.0 * self.n[i] * u + self.p[i]


@dataclass(frozen=True)
class ConstantsVerdict:
    passed: bool
    sums: dict = field(default_factory=dict)
    identity: dict = field(default_factory=dict)


def theorem7_check(dc: DupinConstants, intervals, grid: int = 41, tol: float = 1e-10) -> ConstantsVerdict:
    """Sum rules on ``m, n, p`` and ``alpha, beta, gamma``; per-axis quadratic identity in ``b_i``.

    The identity ``(n^2 - m p) b^2 + 2[(beta m - alpha n) u + beta n - alpha p] b
    + (alpha u + beta)^2 + gamma a = 0`` is sampled on a ``u^i`` grid inside each interval.
    """
    sums = {
        "m": float(sum(dc.m)),
        "n": float(sum(dc.n)),
        "p": float(sum(dc.p)),
        "alpha": float(sum(dc.alpha)),
        "beta": float(sum(dc.beta)),
        "gamma": float(sum(dc.gamma)),
    }
    ok = all(abs(v) <= tol for v in sums.values())
    identity = {}
    for i, (lo, hi) in enumerate(intervals):
        u = np.linspace(lo, hi, grid)
        pts = np.zeros((len(dc.coords), grid))
        pts[i] = u
        b = dc.b[i](pts)
        m, n_, p = dc.m[i], dc.n[i], dc.p[i]
        al, be, ga = dc.alpha[i], dc.beta[i], dc.gamma[i]
        terms = [
            (n_ * n_ - m * p) * b * b,
            2.0 * ((be * m - al * n_) * u + be * n_ - al * p) * b,
            (al * u + be) ** 2,
            ga * dc.a(i, u),
        ]
        r = np.abs(sum(terms))
        scale = 1.0 + np.max(np.abs(terms), axis=0)
        identity[dc.coords[i]] = float(np.max(r))
        ok &= bool(np.all(r <= tol * scale))
    return ConstantsVerdict(ok, sums, identity)


def darboux_metric(coords, a_fields, b_fields, domain) -> DiagonalMetric:
    """``H_i = |M (u^i - u^j)(u^i - u^k)|^-1 a_i^-1/2`` with ``M`` assembled from ``b_i``."""
    M = epd_field(coords, b_fields)
    H = []
    guards = []
    for i in range(3):
        j, k = [x for x in range(3) if x != i]
        ui = ScalarField.coordinate(coords[i], coords)
        uj = ScalarField.coordinate(coords[j], coords)
        uk = ScalarField.coordinate(coords[k], coords)
        prod = M * (ui - uj) * (ui - uk)
        H.append((1.0 / (prod ** 2.0 * a_fields[i])).apply("sqrt"))
    for i in range(3):
        for j in range(i + 1, 3):
            guards.append(ScalarField.coordinate(coords[i], coords) - ScalarField.coordinate(coords[j], coords))
    guards.append(M)
    guards.extend(a_fields)
    return DiagonalMetric(tuple(coords), tuple(H), domain, None, tuple(guards))
