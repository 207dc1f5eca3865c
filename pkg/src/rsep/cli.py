"""Command-line front end.

Targets are ``catalog:NAME`` or ``file:PATH`` (a metric file).  Exit codes:
0 when every gating check passes, 1 when one fails, 2 on malformed input.
Reports are deterministic for a fixed seed.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass, field

import numpy as np

from . import __version__, catalog, metricfile
from .curvature import cotton_check, dupin_check, lame_check, ricci_check
from .exprdsl import ExprError
from .jets import MAX_ORDER, JetDomainError
from .metric import (
    MetricError,
    assemble_binary,
    assemble_isothermic,
    first_condition_residual,
    form_checks,
    sample_points,
)
from .report import CheckResult, summarize
from .separation import (
    IntegrationError,
    SeparationError,
    laplacian_ratio_terms,
    ode_sources,
    r_equation_check,
    solve_q,
    verify_product,
)

SCHEMA = 1
COMMANDS = ("check-isothermic", "check-flat", "check-dupin", "r-equation", "solve-q", "verify", "procedure")


class InputError(Exception):
    pass


# -- report ------------------------------------------------------------------------


def _float(v: float) -> str:
    if not math.isfinite(v):
        return "null"
    return "%.17g" % v


def to_json(obj, indent: int = 0) -> str:
    """JSON with keys in insertion order and floats at 17 significant digits."""
    pad = "  " * (indent + 1)
    end = "  " * indent
    if obj is None:
        return "null"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _float(float(obj))
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {to_json(v, indent + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        if len(obj) == 0:
            return "[]"
        if all(isinstance(v, (int, float, bool, np.number)) or v is None for v in obj):
            return "[" + ", ".join(to_json(v) for v in obj) + "]"
        return "[\n" + ",\n".join(pad + to_json(v, indent + 1) for v in obj) + "\n" + end + "]"
    raise TypeError(f"cannot serialise {type(obj).__name__}")


@dataclass
class Report:
    command: str
    target: str
    digest: str
    options: dict
    checks: list = field(default_factory=list)
    sections: dict = field(default_factory=dict)
    verdict: str = "pass"

    def add(self, result: CheckResult, gating: bool = True, step: int | None = None) -> bool:
        rec = {
            "check": result.name,
            "max_residual": result.max_residual,
            "tolerance": result.tolerance,
            "samples": result.samples,
            "seed": result.seed,
            "pass": result.passed,
            "gating": gating,
            "argmax": result.argmax,
        }
        if step is not None:
            rec["step"] = step
        if result.detail:
            rec["detail"] = result.detail
        self.checks.append(rec)
        return result.passed or not gating

    def fail(self, verdict: str) -> None:
        if self.verdict == "pass":
            self.verdict = verdict

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"

    def as_dict(self) -> dict:
        return {
            "tool": "rsep",
            "version": __version__,
            "schema": SCHEMA,
            "command": self.command,
            "target": self.target,
            "input_digest": self.digest,
            "options": self.options,
            "checks": self.checks,
            **self.sections,
            "verdict": self.verdict,
            "exit_code": 0 if self.passed else 1,
        }

    def text(self) -> str:
        lines = [f"rsep {__version__} {self.command} {self.target}", f"input sha256 {self.digest}"]
        for c in self.checks:
            mark = "PASS" if c["pass"] else ("FAIL" if c["gating"] else "info")
            where = ", ".join(f"{k}={v:.6g}" for k, v in c["argmax"].items())
            lines.append(
                f"  {mark:4s} {c['check']:32s} residual {c['max_residual']:.3e}  tol {c['tolerance']:.1e}"
                + (f"  at ({where})" if where and not c["pass"] else "")
            )
        for name, sec in self.sections.items():
            lines.append(f"  {name}:")
            for k, v in sec.items():
                lines.append(f"    {k}: {v}")
        lines.append(f"verdict: {self.verdict}")
        return "\n".join(lines)


# -- targets -----------------------------------------------------------------------


def load_target(target: str):
    """``(problem, text)`` for ``catalog:NAME`` or ``file:PATH``."""
    kind, sep, rest = target.partition(":")
    if not sep or not rest:
        raise InputError(f"target must be catalog:NAME or file:PATH, got {target!r}")
    if kind == "catalog":
        try:
            entry = catalog.get(rest)
        except KeyError as exc:
            raise InputError(str(exc)) from None
        text = metricfile.export_entry(entry)
        return metricfile.loads(text), text
    if kind == "file":
        problem, text = metricfile.load(rest)
        return problem, text
    raise InputError(f"unknown target kind {kind!r}; use catalog:NAME or file:PATH")


# -- checks ------------------------------------------------------------------------


def _points(problem, args):
    return sample_points(problem.metric, args.samples, args.seed, extra_fields=(problem.R,))


def _assembly_check(problem, points, tol, seed) -> CheckResult:
    m = problem.metric
    try:
        if problem.isothermic is not None:
            built = assemble_isothermic(problem.isothermic, m.domain, m.guards, check_points=0)
        else:
            built = assemble_binary(problem.binary, m.domain, m.guards, check_points=0)
    except MetricError as exc:
        return CheckResult("assembled-metric", math.inf, tol, 0, seed, False, {}, math.inf, {"error": str(exc)})
    a = built.lame_values(points)
    b = m.lame_values(points)
    return summarize("assembled-metric", np.abs(a) - np.abs(b), np.abs(b), points, m.coords, tol, seed)


def _step_isothermic(problem, args, report, step=None) -> bool:
    pts = _points(problem, args)
    ok = report.add(first_condition_residual(problem.metric, problem.R, pts, args.tol, args.seed), step=step)
    if problem.form is not None:
        for res in form_checks(problem.metric, problem.form, pts):
            ok &= report.add(res, step=step)
        ok &= report.add(_assembly_check(problem, pts, args.tol, args.seed), step=step)
    return ok


def cmd_check_isothermic(problem, args, report):
    if not _step_isothermic(problem, args, report):
        report.fail("not isothermic with the declared R")


def cmd_check_flat(problem, args, report):
    m = problem.metric
    pts = _points(problem, args)
    flat = report.add(ricci_check(m, pts, args.tol, args.seed))
    if m.n == 3 and m.riemannian:
        lame = lame_check(m, pts, args.tol, args.seed)
        report.add(lame, gating=False)
        report.sections["flatness"] = {"ricci": flat, "lame": lame.passed, "agree": flat == lame.passed}
    if m.n == 3:
        report.add(cotton_check(m, pts, args.tol, args.seed, args.jet_order), gating=False)
    if not flat:
        report.fail("not flat")


def cmd_check_dupin(problem, args, report):
    m = problem.metric
    if m.n != 3:
        raise InputError("check-dupin needs a 3-dimensional metric")
    pts = _points(problem, args)
    if not report.add(dupin_check(m, pts, args.tol, args.seed)):
        report.fail("not Dupin-cyclidic")


def cmd_r_equation(problem, args, report):
    if problem.q is None:
        raise InputError("r-equation needs [separation] q")
    pts = _points(problem, args)
    if not report.add(r_equation_check(problem.system(), pts, args.tol, args.seed)):
        report.fail("R-equation violated")


def _ansatz(problem, args):
    if args.q_degree is not None:
        from .separation import QAnsatz

        return QAnsatz.monomials(problem.coords, args.q_degree)
    return problem.default_ansatz()


def _solve(problem, args, report, step=None):
    ansatz = _ansatz(problem, args)
    sol = solve_q(problem.metric, problem.R, problem.V, problem.k2, ansatz, seed=args.seed, tol=args.tol)
    rec = CheckResult("solve-q", sol.residual, args.tol, sol.points, args.seed, sol.solved, {}, 0.0, {})
    report.add(rec, step=step)
    report.sections["solve_q"] = {
        "verdict": sol.verdict,
        "labels": ansatz.labels(),
        "particular": [float(c) for c in sol.particular],
        "nullspace_dimension": sol.nullity,
        "constants": {f"c{k + 1}": [float(x) for x in row] for k, row in enumerate(sol.nullspace)},
        "rank": sol.rank,
    }
    return sol


def cmd_solve_q(problem, args, report):
    sol = _solve(problem, args, report)
    if not sol.solved:
        report.fail("ansatz insufficient")


def _verify(problem, system, sources, args, report, step=None) -> bool:
    if sources is None:
        try:
            sources = ode_sources(system)
        except IntegrationError as exc:
            detail = {"error": str(exc), "abscissa": exc.abscissa}
            report.add(CheckResult("verify-product", math.inf, args.tol, 0, None, False, {}, math.inf, detail), step=step)
            return False
    return report.add(verify_product(system, sources, args.grid, args.tol), step=step)


def cmd_verify(problem, args, report):
    pts = _points(problem, args)
    if not report.add(first_condition_residual(problem.metric, problem.R, pts, args.tol, args.seed)):
        report.fail("first condition fails")
        return
    if problem.q is not None:
        system, sources = problem.system(), problem.phi_sources()
    else:
        sol = _solve(problem, args, report)
        if not sol.solved:
            report.fail("ansatz insufficient")
            return
        system, sources = problem.system(sol.q_fields()), None
    if not _verify(problem, system, sources, args, report):
        report.fail("product solution check fails")


def cmd_procedure(problem, args, report):
    if not _step_isothermic(problem, args, report, step=1):
        report.fail("step 1: first condition fails")
        return
    m = problem.metric
    if m.n > 2:
        pts = _points(problem, args)
        ratio, scale = laplacian_ratio_terms(m, problem.R, pts, (m.n + 2) / (m.n - 2))
        mean = float(np.mean(ratio))
        res = summarize("laplacian-ratio", ratio - mean, scale, pts, m.coords, args.tol, args.seed,
                        detail={"value": mean, "exponent": (m.n + 2) / (m.n - 2)})
        report.add(res, gating=False, step=2)
    sol = _solve(problem, args, report, step=3)
    if not sol.solved:
        report.fail("step 3: ansatz insufficient")
        return
    if not _verify(problem, problem.system(sol.q_fields()), None, args, report, step=3):
        report.fail("step 3: product solution check fails")


HANDLERS = {
    "check-isothermic": cmd_check_isothermic,
    "check-flat": cmd_check_flat,
    "check-dupin": cmd_check_dupin,
    "r-equation": cmd_r_equation,
    "solve-q": cmd_solve_q,
    "verify": cmd_verify,
    "procedure": cmd_procedure,
}


# -- argument parsing --------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise InputError(message)


def _positive_int(text):
    v = int(text)
    if v <= 0:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def _positive_float(text):
    v = float(text)
    if not (math.isfinite(v) and v > 0):
        raise argparse.ArgumentTypeError("must be a positive number")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("target", help="catalog:NAME or file:PATH")
    common.add_argument("--samples", type=_positive_int, default=100)
    common.add_argument("--seed", type=int, default=42)
    common.add_argument("--tol", type=_positive_float, default=1e-8)
    common.add_argument("--jet-order", type=int, default=3, help="jet order for third-derivative checks")
    common.add_argument("--format", choices=("json", "text"), default="json")
    common.add_argument("--grid", type=_positive_int, default=20)
    common.add_argument("--q-degree", type=int, default=None, help="monomial q ansatz degree")

    parser = _Parser(prog="rsep", description="R-separability checks for diagonal metrics")
    parser.add_argument("--version", action="version", version=f"rsep {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    cat = sub.add_parser("catalog", help="list or export built-in examples")
    cat.add_argument("--export", metavar="NAME")
    cat.add_argument("--output", metavar="PATH")
    return parser


def _catalog(args, out) -> int:
    if args.export is None:
        for name in catalog.names():
            out.write(f"{name}\t{catalog.get(name).source}\n")
        return 0
    try:
        text = metricfile.export_entry(catalog.get(args.export))
    except KeyError as exc:
        raise InputError(str(exc)) from None
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        out.write(text)
    return 0


def run(argv=None, out=None, err=None) -> int:
    out = sys.stdout if out is None else out
    err = sys.stderr if err is None else err
    try:
        with np.errstate(all="ignore"):
            return _run(argv, out)
    except (InputError, metricfile.MetricFileError, ExprError, MetricError, SeparationError, JetDomainError) as exc:
        err.write(f"rsep: error: {exc}\n")
        return 2
    except OSError as exc:
        err.write(f"rsep: error: {exc}\n")
        return 2
    except Exception as exc:  # never surface a traceback to the caller
        err.write(f"rsep: internal error: {type(exc).__name__}: {exc}\n")
        return 2


def _run(argv, out) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "catalog":
        return _catalog(args, out)
    if not 3 <= args.jet_order <= MAX_ORDER:
        raise InputError(f"--jet-order must be in [3, {MAX_ORDER}]")
    if args.q_degree is not None and not 0 <= args.q_degree <= 8:
        raise InputError("--q-degree must be in [0, 8]")
    problem, text = load_target(args.target)
    options = {
        "samples": args.samples,
        "seed": args.seed,
        "tol": args.tol,
        "jet_order": args.jet_order,
        "grid": args.grid,
        "q_degree": args.q_degree,
    }
    report = Report(args.command, args.target, metricfile.digest(text), options)
    HANDLERS[args.command](problem, args, report)
    out.write((to_json(report.as_dict()) if args.format == "json" else report.text()) + "\n")
    return 0 if report.passed else 1


def main(argv=None) -> None:
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
