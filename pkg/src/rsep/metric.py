"""Diagonal metrics, isothermic and binary factorizations, and the first condition.

A diagonal metric is ``ds^2 = sum_i eps_i H_i^2 (du^i)^2`` with ``H_i > 0``
stored as expressions; ``eps_i`` carries the signature.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np
from scipy.stats import qmc

from . import jets
from .exprdsl import ScalarField, field_product
from .jets import Jet, JetDomainError
from .report import CheckResult, summarize

MAX_DIM = 6
INDEPENDENCE_TOL = 1e-10


class MetricError(ValueError):
    pass


class NotSeparableError(MetricError):
    pass


class SamplingError(MetricError):
    pass


@dataclass(frozen=True)
class DiagonalMetric:
    coords: tuple
    H: tuple
    domain: tuple
    signature: tuple = None
    guards: tuple = ()

    def __post_init__(self):
        n = len(self.coords)
        if not 2 <= n <= MAX_DIM:
            raise MetricError(f"dimension must be in [2, {MAX_DIM}], got {n}")
        if len(set(self.coords)) != n:
            raise MetricError("coordinate names must be distinct")
        if len(self.H) != n or len(self.domain) != n:
            raise MetricError("need one Lame coefficient and one interval per coordinate")
        sig = (1,) * n if self.signature is None else tuple(int(s) for s in self.signature)
        if len(sig) != n or any(s not in (1, -1) for s in sig):
            raise MetricError("signature entries must be +1 or -1, one per axis")
        object.__setattr__(self, "signature", sig)
        dom = tuple((float(lo), float(hi)) for lo, hi in self.domain)
        for c, (lo, hi) in zip(self.coords, dom):
            if not (np.isfinite(lo) and np.isfinite(hi) and lo < hi):
                raise MetricError(f"bad interval for {c}: [{lo}, {hi}]")
        object.__setattr__(self, "domain", dom)
        for f in (*self.H, *self.guards):
            if tuple(f.coords) != tuple(self.coords):
                raise MetricError("fields must be declared over the metric's coordinates")

    @property
    def n(self) -> int:
        return len(self.coords)

    @property
    def riemannian(self) -> bool:
        return all(s == 1 for s in self.signature)

    def lame_jets(self, points, order: int) -> list[Jet]:
        return [h.jet(points, order) for h in self.H]

    def lame_values(self, points) -> np.ndarray:
        return np.stack([h(points) for h in self.H])

    def weight(self, points) -> np.ndarray:
        """``h = prod |H_i|``."""
        return np.prod(np.abs(self.lame_values(points)), axis=0)

    def with_H(self, H) -> "DiagonalMetric":
        return DiagonalMetric(self.coords, tuple(H), self.domain, self.signature, self.guards)


# -- sampling ----------------------------------------------------------------


def _valid_mask(fields, points) -> np.ndarray:
    """Pointwise finiteness of ``fields``, tolerating domain errors per point."""
    ok = np.ones(points.shape[1], dtype=bool)
    for f in fields:
        try:
            with np.errstate(all="ignore"):
                vals = f(points)
            ok &= np.isfinite(vals)
        except JetDomainError:
            for k in np.flatnonzero(ok):
                try:
                    with np.errstate(all="ignore"):
                        ok[k] = bool(np.isfinite(f(points[:, k])))
                except JetDomainError:
                    ok[k] = False
    return ok


def admissible(metric: DiagonalMetric, points, extra_fields=()) -> np.ndarray:
    """Mask of points inside the box, clear of guards and with finite fields."""
    points = np.asarray(points, dtype=float)
    lo = np.array([d[0] for d in metric.domain])[:, None]
    hi = np.array([d[1] for d in metric.domain])[:, None]
    ok = np.all((points >= lo) & (points <= hi), axis=0)
    margin = 1e-6 * float(np.linalg.norm(hi - lo))
    for g in metric.guards:
        idx = np.flatnonzero(ok)
        if idx.size == 0:
            break
        sub = points[:, idx]
        good = _valid_mask([g], sub)
        with np.errstate(all="ignore"):
            vals = np.where(good, 0.0, np.nan)
            if good.any():
                vals[good] = g(sub[:, good])
        ok[idx] = good & (np.abs(vals) > max(margin, jets.GUARD))
    idx = np.flatnonzero(ok)
    if idx.size:
        ok[idx] = _valid_mask((*metric.H, *extra_fields), points[:, idx])
    return ok


def sample_points(metric: DiagonalMetric, count: int, seed: int = 42, extra_fields=()) -> np.ndarray:
    """``count`` admissible points, shape ``(n, count)``, from a scrambled Halton sequence."""
    if count < 1:
        raise SamplingError("sample count must be positive")
    sampler = qmc.Halton(d=metric.n, scramble=True, seed=seed)
    lo = np.array([d[0] for d in metric.domain])
    hi = np.array([d[1] for d in metric.domain])
    accepted = []
    total = 0
    drawn = 0
    while total < count:
        batch = max(2 * (count - total), 64)
        drawn += batch
        if drawn > 200 * count + 10_000:
            raise SamplingError(
                f"only {total} of {count} points in the domain box satisfy the guards; shrink the box"
            )
        pts = qmc.scale(sampler.random(batch), lo, hi).T
        ok = admissible(metric, pts, extra_fields)
        accepted.append(pts[:, ok])
        total += int(ok.sum())
    points = np.concatenate(accepted, axis=1)[:, :count]
    H = metric.lame_values(points)
    if np.any(H <= 0):
        k = int(np.argwhere(H <= 0)[0][1])
        where = dict(zip(metric.coords, points[:, k]))
        raise MetricError(f"Lame coefficients must be positive; got a non-positive value at {where}")
    return points


# -- differential operators ----------------------------------------------------


def laplacian_parts(signature, H: list[Jet], f: Jet):
    """Laplace-Beltrami value and term scale from jets (``H`` order >= 1, ``f`` order >= 2).

    Uses ``Df = sum_i eps_i/H_i^2 (f_ii + w_i f_i)`` with
    ``w_i = sum_k H_k,i/H_k - 2 H_i,i/H_i``, which equals the divergence form
    ``h^-1 sum_i d_i(eps_i h H_i^-2 d_i f)`` for ``h = prod H_k``.
    """
    n = len(H)
    value = 0.0
    scale = 0.0
    for i in range(n):
        Hv = [h.value for h in H]
        w = sum(H[k].d(i) / Hv[k] for k in range(n)) - 2.0 * H[i].d(i) / Hv[i]
        c = signature[i] / Hv[i] ** 2
        t1 = c * f.d(i, i)
        t2 = c * w * f.d(i)
        value = value + t1 + t2
        scale = np.maximum(scale, np.maximum(np.abs(t1), np.abs(t2)))
    return value, scale


def laplace_beltrami(metric: DiagonalMetric, f: ScalarField, points) -> np.ndarray:
    points = np.asarray(points, dtype=float)
    H = metric.lame_jets(points, 2)
    value, _ = laplacian_parts(metric.signature, H, f.jet(points, 2))
    return value


def _log_jets(fields, points, order):
    return [jets.log_abs(f.jet(points, order)) for f in fields]


def first_condition_terms(metric: DiagonalMetric, R: ScalarField, points):
    """Per-pair residuals of ``[ln(R^2 h / H_i^2)]_{,ij}`` and their term scales."""
    n = metric.n
    lnH = _log_jets(metric.H, points, 2)
    lnR = jets.log_abs(R.jet(points, 2))
    rows, scales = [], []
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            terms = [2.0 * lnR.d(i, j)] + [(1.0 if k != i else -1.0) * lnH[k].d(i, j) for k in range(n)]
            rows.append(sum(terms))
            scales.append(np.max(np.abs(terms), axis=0))
    return np.array(rows), np.array(scales)


def first_condition_residual(
    metric: DiagonalMetric, R: ScalarField, points, tol: float = 1e-9, seed: int | None = None
) -> CheckResult:
    points = np.asarray(points, dtype=float)
    res, scale = first_condition_terms(metric, R, points)
    return summarize("first-condition", res, scale, points, metric.coords, tol, seed)


def log_derivative_p(metric: DiagonalMetric, R: ScalarField, points, axis: int) -> np.ndarray:
    """``p_i = d_i ln(R^2 h / H_i^2)`` sampled at ``points``."""
    lnH = _log_jets(metric.H, points, 1)
    lnR = jets.log_abs(R.jet(points, 1))
    return 2.0 * lnR.d(axis) + sum(lnH[k].d(axis) for k in range(metric.n)) - 2.0 * lnH[axis].d(axis)


@dataclass(frozen=True)
class PTable:
    axis: str
    u: np.ndarray
    p: np.ndarray
    spread: float


def extract_p(
    metric: DiagonalMetric,
    R: ScalarField,
    *,
    grid: int = 20,
    others: int = 8,
    tol: float = 1e-8,
    seed: int = 42,
) -> list[PTable]:
    """Tabulate each ``p_i`` on a grid in ``u^i``, varying the other coordinates.

    Raises :class:`NotSeparableError` if some ``p_i`` changes with a coordinate
    other than its own.
    """
    base = sample_points(metric, others, seed)
    tables = []
    for i, c in enumerate(metric.coords):
        lo, hi = metric.domain[i]
        us = np.linspace(lo, hi, grid + 2)[1:-1]
        pts = np.repeat(base, grid, axis=1)
        pts[i] = np.tile(us, others)
        ok = admissible(metric, pts).reshape(others, grid)
        p = np.full((others, grid), np.nan)
        flat_ok = ok.ravel()
        p.ravel()[flat_ok] = log_derivative_p(metric, R, pts[:, flat_ok], i)
        keep = ok.sum(axis=0) >= 2
        u_kept = us[keep]
        p_kept = p[:, keep]
        mean = np.nanmean(p_kept, axis=0)
        spread = np.nanmax(p_kept, axis=0) - np.nanmin(p_kept, axis=0)
        limit = tol * (1.0 + np.nanmax(np.abs(p_kept), axis=0))
        if np.any(spread > limit):
            k = int(np.argmax(spread / limit))
            raise NotSeparableError(
                f"p for {c} varies by {spread[k]:.3g} with the other coordinates at {c}={u_kept[k]:.6g}"
            )
        tables.append(PTable(c, u_kept, mean, float(spread.max(initial=0.0))))
    return tables


# -- factorizations ------------------------------------------------------------


def numeric_dependence(field: ScalarField, points, axes) -> float:
    """Largest relative first partial of ``field`` along ``axes`` at ``points``."""
    j = field.jet(points, 1)
    scale = 1.0 + np.abs(j.value)
    worst = 0.0
    for a in axes:
        worst = max(worst, float(np.max(np.abs(j.d(a)) / scale)))
    return worst


@dataclass(frozen=True)
class IndependenceReport:
    """Syntactic (advisory) and numeric (authoritative) dependence checks."""

    syntactic: dict = field(default_factory=dict)
    numeric: dict = field(default_factory=dict)
    tolerance: float = INDEPENDENCE_TOL

    @property
    def passed(self) -> bool:
        return all(v <= self.tolerance for v in self.numeric.values())


def _one_sign(values, what: str) -> None:
    if not (np.all(values > 0) or np.all(values < 0)):
        raise MetricError(f"{what} changes sign or vanishes on the domain")


@dataclass(frozen=True)
class IsothermicForm:
    """``R``, ``G_(i)`` independent of ``u^i`` and univariate ``f_i(u^i)``.

    ``f2_sign[i]`` is the sign of ``f_i^2``; ``f_i`` itself stores the magnitude.
    """

    coords: tuple
    R: ScalarField
    G: tuple
    f: tuple
    f2_sign: tuple = None

    def __post_init__(self):
        n = len(self.coords)
        if len(self.G) != n or len(self.f) != n:
            raise MetricError("need one G and one f per coordinate")
        signs = (1,) * n if self.f2_sign is None else tuple(int(s) for s in self.f2_sign)
        if len(signs) != n or any(s not in (1, -1) for s in signs):
            raise MetricError("f2_sign entries must be +1 or -1")
        object.__setattr__(self, "f2_sign", signs)

    def independence(self, points) -> IndependenceReport:
        syn, num = {}, {}
        for i, c in enumerate(self.coords):
            others = [k for k in range(len(self.coords)) if k != i]
            syn[f"G[{c}]"] = c not in self.G[i].free_coordinates()
            syn[f"f[{c}]"] = self.f[i].free_coordinates() <= {c}
            num[f"G[{c}]"] = numeric_dependence(self.G[i], points, [i])
            num[f"f[{c}]"] = numeric_dependence(self.f[i], points, others)
        return IndependenceReport(syn, num)


@dataclass(frozen=True)
class BinaryForm:
    """Pairwise factors ``G_ij(u^i, u^j)`` for ``i < j``, univariate ``f_i`` and ``R``."""

    coords: tuple
    R: ScalarField
    G: dict
    f: tuple
    f2_sign: tuple = None

    def __post_init__(self):
        n = len(self.coords)
        pairs = set(combinations(range(n), 2))
        if set(self.G) != pairs:
            raise MetricError("binary form needs exactly one G for every pair i < j")
        if len(self.f) != n:
            raise MetricError("need one f per coordinate")
        signs = (1,) * n if self.f2_sign is None else tuple(int(s) for s in self.f2_sign)
        if len(signs) != n or any(s not in (1, -1) for s in signs):
            raise MetricError("f2_sign entries must be +1 or -1")
        object.__setattr__(self, "f2_sign", signs)

    def independence(self, points) -> IndependenceReport:
        syn, num = {}, {}
        n = len(self.coords)
        for (i, j), g in sorted(self.G.items()):
            others = [k for k in range(n) if k not in (i, j)]
            key = f"G[{self.coords[i]},{self.coords[j]}]"
            syn[key] = g.free_coordinates() <= {self.coords[i], self.coords[j]}
            num[key] = numeric_dependence(g, points, others) if others else 0.0
        for i, c in enumerate(self.coords):
            others = [k for k in range(n) if k != i]
            syn[f"f[{c}]"] = self.f[i].free_coordinates() <= {c}
            num[f"f[{c}]"] = numeric_dependence(self.f[i], points, others)
        return IndependenceReport(syn, num)

    def isothermic_G(self) -> tuple:
        """``G_(i) = prod`` of pair factors not involving ``i`` (valid for n = 3)."""
        n = len(self.coords)
        return tuple(
            field_product([g for (p, q), g in sorted(self.G.items()) if i not in (p, q)], self.coords)
            for i in range(n)
        )


def _conformal_factor(R: ScalarField, n: int) -> ScalarField | None:
    if R.is_constant(1.0):
        return None
    return R ** (4.0 / (2 - n))


def assemble_isothermic(form: IsothermicForm, domain, guards=(), check_points: int = 32, seed: int = 42):
    """Build ``H_i^2 = R^(4/(2-n)) (prod_k G_(k))^(2/(n-2)) / (G_(i)^2 f_i^2)``."""
    n = len(form.coords)
    if n == 2:
        raise MetricError("isothermic assembly needs n >= 3 (the exponent 2/(n-2) is singular at n = 2)")
    P = field_product(form.G, form.coords)
    conf = _conformal_factor(form.R, n)
    H = []
    for i in range(n):
        sq = P ** (2.0 / (n - 2)) / (form.G[i] ** 2.0 * form.f[i] ** 2.0)
        if conf is not None:
            sq = conf * sq
        H.append(sq.apply("sqrt"))
    metric = DiagonalMetric(tuple(form.coords), tuple(H), domain, form.f2_sign, tuple(guards))
    _check_form(metric, form, check_points, seed)
    return metric


def assemble_binary(form: BinaryForm, domain, guards=(), check_points: int = 32, seed: int = 42):
    """Build ``H_i^2 = R^(4/(2-n)) prod_{pairs containing i} G^2 / f_i^2``.

    For ``n = 2`` the conformal exponent is singular, so only ``R = 1`` is accepted.
    """
    n = len(form.coords)
    if n == 2 and not form.R.is_constant(1.0):
        raise MetricError("binary assembly with n = 2 requires R = 1")
    conf = None if n == 2 else _conformal_factor(form.R, n)
    H = []
    for i in range(n):
        num = field_product(
            [g ** 2.0 for (p, q), g in sorted(form.G.items()) if i in (p, q)], form.coords
        )
        sq = num / form.f[i] ** 2.0
        if conf is not None:
            sq = conf * sq
        H.append(sq.apply("sqrt"))
    metric = DiagonalMetric(tuple(form.coords), tuple(H), domain, form.f2_sign, tuple(guards))
    _check_form(metric, form, check_points, seed)
    return metric


def _check_form(metric, form, count, seed):
    if count <= 0:
        return
    points = sample_points(metric, count, seed)
    report = form.independence(points)
    if not report.passed:
        bad = {k: v for k, v in report.numeric.items() if v > report.tolerance}
        raise MetricError(f"factor depends on a forbidden coordinate: {bad}")
    R = form.R(points)
    if not np.all(R > 0):
        raise MetricError("R must be positive on the domain")


def form_checks(metric: DiagonalMetric, form, points, tol: float = INDEPENDENCE_TOL) -> list[CheckResult]:
    """Numeric independence of the factors and positivity of ``R`` as check records."""
    report = form.independence(points)
    out = []
    for key, value in report.numeric.items():
        out.append(
            CheckResult(
                f"independence {key}",
                value,
                tol,
                points.shape[1],
                None,
                value <= tol,
                {},
                value / tol,
                {"syntactic": bool(report.syntactic[key])},
            )
        )
    R = form.R(points)
    worst = int(np.argmin(R))
    out.append(
        CheckResult(
            "R positive",
            float(R[worst]),
            0.0,
            points.shape[1],
            None,
            bool(np.all(R > 0)),
            dict(zip(metric.coords, map(float, points[:, worst]))),
        )
    )
    return out
