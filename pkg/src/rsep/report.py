"""Residual records shared by every check."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class CheckResult:
    """Outcome of one sampled identity check.

    ``max_residual`` is the raw worst residual; ``passed`` applies the
    relative model ``residual <= tol * (1 + max |term|)`` pointwise.
    """

    name: str
    max_residual: float
    tolerance: float
    samples: int
    seed: int | None
    passed: bool
    argmax: dict = field(default_factory=dict)
    worst_ratio: float = 0.0
    detail: dict = field(default_factory=dict)

    def __bool__(self) -> bool:
        return self.passed


def summarize(
    name: str,
    residual,
    scale,
    points,
    coords,
    tol: float,
    seed: int | None = None,
    *,
    relative: bool = True,
    detail: dict | None = None,
) -> CheckResult:
    """Reduce per-point residuals (shape ``(P,)`` or ``(k, P)``) to a record.

    ``scale`` holds the largest individual term magnitude at each point and
    broadcasts against ``residual``.  With ``relative=False`` the threshold is
    the bare tolerance.
    """
    residual = np.abs(np.asarray(residual, dtype=float))
    points = np.asarray(points, dtype=float)
    if residual.ndim == 1:
        residual = residual[None, :]
    scale = np.broadcast_to(np.abs(np.asarray(scale, dtype=float)), residual.shape)
    samples = residual.shape[-1]
    if samples == 0:
        return CheckResult(name, float("nan"), tol, 0, seed, False, {}, float("nan"), dict(detail or {}))
    per_point = residual.max(axis=0)
    threshold = tol * (1.0 + scale) if relative else np.full(residual.shape, tol)
    ratio = np.where(np.isfinite(residual), residual / threshold, np.inf).max(axis=0)
    worst = int(np.argmax(per_point)) if np.all(np.isfinite(per_point)) else int(np.argmax(~np.isfinite(per_point)))
    argmax = {c: float(v) for c, v in zip(coords, points[:, worst])} if points.ndim == 2 else {}
    return CheckResult(
        name=name,
        max_residual=float(per_point[worst]),
        tolerance=tol,
        samples=samples,
        seed=seed,
        passed=bool(np.all(ratio <= 1.0)),
        argmax=argmax,
        worst_ratio=float(ratio.max()),
        detail=dict(detail or {}),
    )
