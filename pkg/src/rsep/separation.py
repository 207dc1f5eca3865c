"""R-equation residuals, collocation solving for the ``q_i`` and product-solution checks.

A separation system is ``(R, p_i, q_i, V, k^2)`` over a diagonal metric; it
is R-separable at tested resolution when every ``psi = R prod phi_i`` built
from solutions of ``phi'' + p phi' + q phi = 0`` satisfies
``Delta psi + (k^2 - V) psi = 0``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from .exprdsl import ScalarField, field_sum
from .jets import JetDomainError
from .metric import (
    DiagonalMetric,
    MetricError,
    admissible,
    laplacian_parts,
    numeric_dependence,
    sample_points,
)
from .report import CheckResult, summarize

RANK_THRESHOLD = 1e-8
DEFAULT_STEPS = 4096


class SeparationError(ValueError):
    pass


class IntegrationError(SeparationError):
    def __init__(self, message: str, abscissa: float | None = None):
        super().__init__(message)
        self.abscissa = abscissa


@dataclass(frozen=True)
class SeparationSystem:
    """``R``, per-axis ``p_i`` and ``q_i`` (callables of points), potential and energy."""

    metric: DiagonalMetric
    R: ScalarField
    p: tuple
    q: tuple
    V: ScalarField = None
    k2: float = 0.0
    f2_sign: tuple = None

    def __post_init__(self):
        n = self.metric.n
        if len(self.p) != n or len(self.q) != n:
            raise SeparationError("need one p and one q per coordinate")
        if self.V is None:
            object.__setattr__(self, "V", ScalarField.constant(0.0, self.metric.coords))
        if self.f2_sign is None:
            object.__setattr__(self, "f2_sign", self.metric.signature)

    @property
    def coords(self):
        return self.metric.coords

    def univariate_check(self, points, tol: float = 1e-10) -> dict:
        """Largest relative dependence of ``p_i, q_i`` on coordinates other than ``u^i``."""
        out = {}
        n = self.metric.n
        for i, c in enumerate(self.coords):
            others = [k for k in range(n) if k != i]
            for label, fn in (("p", self.p[i]), ("q", self.q[i])):
                target = fn.f if hasattr(fn, "f") and not isinstance(fn, ScalarField) else fn
                if isinstance(target, ScalarField):
                    out[f"{label}[{c}]"] = numeric_dependence(target, points, others)
        return out


def _text(fn) -> str:
    return getattr(fn, "text", repr(fn))


# -- R-equation -------------------------------------------------------------------


def r_equation_terms(sys: SeparationSystem, points):
    """Residual ``Delta R + (k^2 - V - sum eps_i q_i / H_i^2) R`` and its term scale."""
    points = np.asarray(points, dtype=float)
    m = sys.metric
    H = m.lame_jets(points, 1)
    Rj = sys.R.jet(points, 2)
    lap, lap_scale = laplacian_parts(m.signature, H, Rj)
    R = Rj.value
    terms = [sys.k2 * R, -sys.V(points) * R]
    for i in range(m.n):
        terms.append(-m.signature[i] * sys.q[i](points) * R / H[i].value ** 2)
    res = lap + sum(terms)
    scale = np.maximum(lap_scale, np.max(np.abs(terms), axis=0))
    return res, scale


def r_equation_residual(sys: SeparationSystem, points) -> np.ndarray:
    res, _ = r_equation_terms(sys, points)
    return np.abs(res)


def r_equation_check(sys: SeparationSystem, points, tol: float = 1e-9, seed: int | None = None) -> CheckResult:
    res, sc = r_equation_terms(sys, points)
    return summarize("r-equation", res, sc, points, sys.coords, tol, seed)


def laplacian_ratio_terms(metric: DiagonalMetric, R: ScalarField, points, exponent: float):
    """``Delta R / R^exponent`` per point, with the Laplacian's term scale divided likewise."""
    H = metric.lame_jets(points, 1)
    Rj = R.jet(points, 2)
    lap, scale = laplacian_parts(metric.signature, H, Rj)
    denom = Rj.value**exponent
    return lap / denom, scale / np.abs(denom)


# -- q ansatz and collocation --------------------------------------------------------


@dataclass(frozen=True)
class QAnsatz:
    """Per-axis basis fields ``B_ik(u^i)``."""

    coords: tuple
    basis: tuple

    def __post_init__(self):
        if len(self.basis) != len(self.coords):
            raise SeparationError("need one basis list per coordinate")
        for c, row in zip(self.coords, self.basis):
            if not row:
                raise SeparationError(f"empty basis for {c}")
            for b in row:
                if not b.free_coordinates() <= {c}:
                    raise SeparationError(f"basis function {b.text!r} for {c} is not univariate in {c}")

    @classmethod
    def monomials(cls, coords, degree: int | None = None) -> "QAnsatz":
        """``1, u, ..., u^degree`` on each axis (default degree ``n + 1``)."""
        coords = tuple(coords)
        degree = len(coords) + 1 if degree is None else degree
        basis = []
        for c in coords:
            row = ["1", c] + [f"{c}^{k}" for k in range(2, degree + 1)]
            basis.append(tuple(ScalarField.parse(t, coords) for t in row[: degree + 1]))
        return cls(coords, tuple(basis))

    @property
    def sizes(self) -> tuple:
        return tuple(len(b) for b in self.basis)

    @property
    def size(self) -> int:
        return sum(self.sizes)

    def labels(self) -> list[str]:
        return [f"{c}:{b.text}" for c, row in zip(self.coords, self.basis) for b in row]

    def split(self, coeffs) -> list[np.ndarray]:
        coeffs = np.asarray(coeffs, dtype=float)
        out, start = [], 0
        for s in self.sizes:
            out.append(coeffs[start : start + s])
            start += s
        return out

    def q_fields(self, coeffs) -> tuple:
        """``q_i = sum_k c_ik B_ik`` as fields (zero coefficients dropped)."""
        fields = []
        for row, cs in zip(self.basis, self.split(coeffs)):
            terms = [b * float(c) for b, c in zip(row, cs) if c != 0.0]
            fields.append(field_sum(terms, self.coords))
        return tuple(fields)


@dataclass(frozen=True)
class QSolution:
    ansatz: QAnsatz
    particular: np.ndarray
    nullspace: np.ndarray  # shape (k, ncoef), orthonormal rows
    residual: float
    points: int
    rank: int
    singular_values: np.ndarray
    tol: float

    @property
    def solved(self) -> bool:
        return self.residual <= self.tol

    @property
    def verdict(self) -> str:
        return "solved" if self.solved else "ansatz insufficient"

    @property
    def nullity(self) -> int:
        return int(self.nullspace.shape[0])

    def coefficients(self, constants=()) -> np.ndarray:
        c = self.particular.copy()
        for t, v in zip(constants, self.nullspace):
            c = c + float(t) * v
        return c

    def q_fields(self, constants=()) -> tuple:
        return self.ansatz.q_fields(self.coefficients(constants))


def _rhs(metric, R, V, k2, points):
    H = metric.lame_jets(points, 1)
    Rj = R.jet(points, 2)
    lap, lap_scale = laplacian_parts(metric.signature, H, Rj)
    Vv = V(points)
    b = lap / Rj.value + k2 - Vv
    scale = np.maximum(np.abs(lap_scale / Rj.value), np.maximum(abs(k2), np.abs(Vv)))
    return b, scale, [h.value for h in H]


def collocation_system(metric: DiagonalMetric, R: ScalarField, V: ScalarField, k2: float, ansatz: QAnsatz, points):
    """Rows ``sum_i eps_i/H_i^2 sum_k c_ik B_ik(u^i)`` and right side ``R^-1 Delta R + k^2 - V``."""
    points = np.asarray(points, dtype=float)
    b, bscale, Hv = _rhs(metric, R, V, k2, points)
    cols = []
    for i, row in enumerate(ansatz.basis):
        w = metric.signature[i] / Hv[i] ** 2
        for B in row:
            cols.append(w * B(points))
    A = np.stack(cols, axis=1)
    return A, b, bscale


def solve_q(
    metric: DiagonalMetric,
    R: ScalarField,
    V: ScalarField | None,
    k2: float,
    ansatz: QAnsatz,
    n_points: int | None = None,
    *,
    seed: int = 42,
    tol: float = 1e-8,
) -> QSolution:
    """Least-squares particular solution and nullspace of the collocation system.

    Rows are scaled by their largest term and columns to unit norm before the
    SVD; singular values below ``1e-8 * sigma_max`` span the nullspace.  The
    returned particular solution has minimum norm in the original coefficients
    and the nullspace rows are orthonormal there.
    """
    if V is None:
        V = ScalarField.constant(0.0, metric.coords)
    ncoef = ansatz.size
    n_points = 3 * ncoef if n_points is None else n_points
    if n_points < 3 * ncoef:
        raise SeparationError(f"need at least {3 * ncoef} collocation points for {ncoef} coefficients")
    points = sample_points(metric, n_points, seed, extra_fields=(R, V, *[b for row in ansatz.basis for b in row]))
    A, b, bscale = collocation_system(metric, R, V, k2, ansatz, points)
    row_scale = 1.0 + np.maximum(np.max(np.abs(A), axis=1), bscale)
    As = A / row_scale[:, None]
    bs = b / row_scale
    col = np.linalg.norm(As, axis=0)
    col[col == 0] = 1.0
    As = As / col
    U, s, Vt = np.linalg.svd(As, full_matrices=True)
    rank = int(np.sum(s > RANK_THRESHOLD * s[0])) if s.size and s[0] > 0 else 0
    y = Vt[:rank].T @ ((U[:, :rank].T @ bs) / s[:rank])
    c = y / col
    null = Vt[rank:] / col[None, :]
    if null.shape[0]:
        qmat, _ = np.linalg.qr(null.T)
        null = qmat.T
        c = c - null.T @ (null @ c)
    null = _canonical_signs(null)
    residual = float(np.max(np.abs(As @ (c * col) - bs)))
    return QSolution(ansatz, c, null, residual, n_points, rank, s, tol)


def _canonical_signs(null):
    out = null.copy()
    for k, row in enumerate(out):
        j = int(np.argmax(np.abs(row) > 1e-12)) if np.any(np.abs(row) > 1e-12) else 0
        if row[j] < 0:
            out[k] = -row
    return out


def _orthonormal(rows) -> np.ndarray:
    rows = np.atleast_2d(np.asarray(rows, dtype=float))
    if rows.size == 0:
        return rows.reshape(0, rows.shape[-1] if rows.ndim == 2 else 0)
    q, r = np.linalg.qr(rows.T)
    keep = np.abs(np.diag(r)) > 1e-12
    return q[:, keep].T


def family_error(sol: QSolution, particular, directions) -> dict:
    """Gauge-normalized distance between a solved family and an expected one.

    Both particular solutions are reduced to minimum norm within their own
    family; the nullspaces are compared through their orthogonal projectors.
    """
    particular = np.asarray(particular, dtype=float)
    E = _orthonormal(directions) if len(directions) else np.zeros((0, particular.size))
    p_exp = particular - E.T @ (E @ particular) if E.shape[0] else particular
    N = sol.nullspace
    p_got = sol.particular
    P_exp = E.T @ E if E.shape[0] else np.zeros((particular.size,) * 2)
    P_got = N.T @ N if N.shape[0] else np.zeros((particular.size,) * 2)
    return {
        "particular": float(np.max(np.abs(p_exp - p_got))),
        "span": float(np.max(np.abs(P_exp - P_got))),
        "dimension": (int(E.shape[0]), int(N.shape[0])),
    }


# -- ODE integration ---------------------------------------------------------------


def along_axis(fn, metric: DiagonalMetric, axis: int, u, anchor=None):
    """Evaluate a univariate field ``fn`` at ``u`` on ``axis``, other coordinates at ``anchor``."""
    u = np.asarray(u, dtype=float)
    if anchor is None:
        anchor = np.array([0.5 * (lo + hi) for lo, hi in metric.domain])
    pts = np.repeat(np.asarray(anchor, dtype=float)[:, None], u.size, axis=1)
    pts[axis] = u
    return np.asarray(fn(pts), dtype=float).reshape(u.shape)


@dataclass(frozen=True)
class ODESolution:
    """RK4 samples of ``phi, phi'`` with cubic Hermite dense output."""

    u: np.ndarray
    phi: np.ndarray
    dphi: np.ndarray
    ddphi: np.ndarray
    p: object
    q: object

    def evaluate(self, x):
        """``(phi, phi', phi'')`` at ``x``; ``phi''`` is rebuilt from the ODE."""
        x = np.asarray(x, dtype=float)
        lo, hi = self.u[0], self.u[-1]
        span = hi - lo
        if np.any(x < lo - 1e-12 * span) or np.any(x > hi + 1e-12 * span):
            raise IntegrationError("dense output requested outside the integrated interval")
        phi = CubicHermiteSpline(self.u, self.phi, self.dphi)(x)
        dphi = CubicHermiteSpline(self.u, self.dphi, self.ddphi)(x)
        pv, qv = self.p(x), self.q(x)
        return phi, dphi, -pv * dphi - qv * phi


def _safe_eval(fn, x, name):
    try:
        with np.errstate(all="ignore"):
            vals = np.asarray(fn(x), dtype=float)
    except JetDomainError as err:
        at = float(x.ravel()[err.index]) if err.index is not None else float(x.ravel()[0])
        raise IntegrationError(f"{name} is singular at u = {at!r}: {err}", at) from None
    vals = np.broadcast_to(vals, x.shape)
    bad = ~np.isfinite(vals)
    if np.any(bad):
        at = float(x[np.argmax(bad)])
        raise IntegrationError(f"{name} is not finite at u = {at!r}", at)
    return vals


def integrate_ode(p, q, interval, y0: float, dy0: float, steps: int = DEFAULT_STEPS) -> ODESolution:
    """Classical fixed-step RK4 for ``phi'' + p phi' + q phi = 0`` from ``interval[0]``.

    ``p`` and ``q`` map a 1-D array of abscissae to values; both are evaluated
    at every stage abscissa before stepping, and integration is refused if any
    value is singular.
    """
    a, b = map(float, interval)
    if not (np.isfinite(a) and np.isfinite(b)) or a == b:
        raise IntegrationError("interval must be finite and non-degenerate")
    if steps < 1:
        raise IntegrationError("need at least one step")
    h = (b - a) / steps
    nodes = a + h * np.arange(2 * steps + 1) / 2.0
    nodes[-1] = b
    pv = _safe_eval(p, nodes, "p")
    qv = _safe_eval(q, nodes, "q")
    u = nodes[::2]
    y = np.empty(steps + 1)
    dy = np.empty(steps + 1)
    y[0], dy[0] = y0, dy0

    def f(k, yy, vv):
        return vv, -pv[k] * vv - qv[k] * yy

    for n in range(steps):
        k0, km, k1 = 2 * n, 2 * n + 1, 2 * n + 2
        a1, b1 = f(k0, y[n], dy[n])
        a2, b2 = f(km, y[n] + 0.5 * h * a1, dy[n] + 0.5 * h * b1)
        a3, b3 = f(km, y[n] + 0.5 * h * a2, dy[n] + 0.5 * h * b2)
        a4, b4 = f(k1, y[n] + h * a3, dy[n] + h * b3)
        y[n + 1] = y[n] + h / 6.0 * (a1 + 2 * a2 + 2 * a3 + a4)
        dy[n + 1] = dy[n] + h / 6.0 * (b1 + 2 * b2 + 2 * b3 + b4)
    if h < 0:
        u, y, dy = u[::-1], y[::-1], dy[::-1]
        pv_n, qv_n = pv[::2][::-1], qv[::2][::-1]
    else:
        pv_n, qv_n = pv[::2], qv[::2]
    ddy = -pv_n * dy - qv_n * y
    return ODESolution(u.copy(), y, dy, ddy, p, q)


def axis_ode(sys: SeparationSystem, axis: int, y0: float = 1.0, dy0: float = 0.5, steps: int = DEFAULT_STEPS):
    """Integrate the separation ODE of ``axis`` across the metric's domain interval."""
    m = sys.metric

    def p(x):
        return along_axis(sys.p[axis], m, axis, x)

    def q(x):
        return along_axis(sys.q[axis], m, axis, x)

    return integrate_ode(p, q, m.domain[axis], y0, dy0, steps)


@dataclass(frozen=True)
class ClosedForm:
    """Closed-form ``phi_i`` given as a univariate field; derivatives come from jets."""

    phi: ScalarField
    axis: int
    metric: DiagonalMetric

    def evaluate(self, x):
        x = np.asarray(x, dtype=float)
        anchor = np.array([0.5 * (lo + hi) for lo, hi in self.metric.domain])
        pts = np.repeat(anchor[:, None], x.size, axis=1)
        pts[self.axis] = x
        j = self.phi.jet(pts, 2)
        return j.value, j.d(self.axis), j.d(self.axis, self.axis)


@dataclass(frozen=True)
class Scaled:
    """``lam * phi`` for a source ``phi``."""

    source: object
    factor: float

    def evaluate(self, x):
        return tuple(self.factor * v for v in self.source.evaluate(x))


# -- product verification -----------------------------------------------------------


def grid_points(metric: DiagonalMetric, per_axis: int) -> np.ndarray:
    """Interior tensor grid, filtered to admissible points; shape ``(n, P)``."""
    axes = [np.linspace(lo, hi, per_axis + 2)[1:-1] for lo, hi in metric.domain]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh])
    return pts[:, admissible(metric, pts)]


def product_terms(sys: SeparationSystem, sources, points):
    """Exact product-rule residual of ``Delta psi + (k^2 - V) psi`` for ``psi = R prod phi_i``."""
    points = np.asarray(points, dtype=float)
    m = sys.metric
    n = m.n
    H = m.lame_jets(points, 1)
    Hv = [h.value for h in H]
    Rj = sys.R.jet(points, 2)
    R = Rj.value
    vals = [src.evaluate(points[i]) for i, src in enumerate(sources)]
    phi = [v[0] for v in vals]
    Phi = np.prod(phi, axis=0)
    rest = [np.prod([phi[j] for j in range(n) if j != i], axis=0) for i in range(n)]
    terms = []
    for i in range(n):
        c = m.signature[i] / Hv[i] ** 2
        w = sum(H[k].d(i) / Hv[k] for k in range(n)) - 2.0 * H[i].d(i) / Hv[i]
        dphi, ddphi = vals[i][1], vals[i][2]
        Ri, Rii = Rj.d(i), Rj.d(i, i)
        terms += [
            c * Rii * Phi,
            c * 2.0 * Ri * dphi * rest[i],
            c * R * ddphi * rest[i],
            c * w * Ri * Phi,
            c * w * R * dphi * rest[i],
        ]
    potential = (sys.k2 - sys.V(points)) * R * Phi
    residual = sum(terms) + potential
    norm = 1.0 + np.abs(potential) + np.max(np.abs(terms), axis=0)
    return residual, norm


def verify_product(sys: SeparationSystem, sources, grid: int = 20, tol: float = 1e-6, points=None) -> CheckResult:
    """Max of ``|residual| / (1 + |k^2 - V||psi| + max term)`` over a grid."""
    if points is None:
        points = grid_points(sys.metric, grid)
    if points.shape[1] == 0:
        raise SeparationError("no admissible grid points")
    res, norm = product_terms(sys, sources, points)
    rel = np.abs(res) / norm
    return summarize(
        "verify-product",
        rel,
        0.0,
        points,
        sys.coords,
        tol,
        None,
        relative=False,
        detail={"grid": grid, "max_abs_residual": float(np.max(np.abs(res)))},
    )


def ode_sources(sys: SeparationSystem, y0: float = 1.0, dy0: float = 0.5, steps: int = DEFAULT_STEPS) -> list:
    return [axis_ode(sys, i, y0, dy0, steps) for i in range(sys.metric.n)]


# -- fixed-energy shift -------------------------------------------------------------


def fixed_energy_shift(sys: SeparationSystem, v) -> SeparationSystem:
    """Potential ``V = sum eps_i v_i / H_i^2`` absorbed as ``q_i -> q_i - v_i``."""
    if sys.k2 != 0.0 or not sys.V.is_constant(0.0):
        raise SeparationError("the shift applies to Laplace systems (k = 0, V = 0)")
    m = sys.metric
    for i, vi in enumerate(v):
        if not vi.free_coordinates() <= {m.coords[i]}:
            raise SeparationError(f"v for {m.coords[i]} must be univariate")
    V = field_sum([v[i] * float(m.signature[i]) / m.H[i] ** 2.0 for i in range(m.n)], m.coords)
    q = tuple(qi - vi for qi, vi in zip(sys.q, v))
    return SeparationSystem(m, sys.R, sys.p, q, V, 0.0, sys.f2_sign)
