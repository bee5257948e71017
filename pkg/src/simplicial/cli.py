"""Command-line entry point: ``simplicial {pareto,verify,perturb,diff-probe,catalog}``.

Exit codes: 0 success, 1 rank condition fails (``verify``) or failed trials
(``perturb``), 2 partial convergence or an inconsistent report, 64 usage error
(unknown problem, bad parameter), 74 I/O error.

Every option with a default can also be set through an environment variable
named ``SIMPLICIAL_<OPTION>`` (for example ``SIMPLICIAL_RESOLUTION=10``).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import tempfile
from collections.abc import Sequence
from pathlib import Path

from .pareto import (
    DEFAULT_RANK_RTOL,
    ParetoSamplingError,
    WeightVector,
    path_difference_quotients,
    sample_pareto,
    simplex_grid,
)
from .perturbation import genericity_experiment
from .problems import (
    InvalidParameterError,
    ProblemInstance,
    UnknownProblemError,
    catalog_get,
    describe_catalog,
)
from .solver import DEFAULT_TOL_X
from .verify import SCHEMA_VERSION, ReportConfig, Verdict, build_report

EX_OK = 0
EX_PARTIAL = 2
EX_USAGE = 64
EX_IOERR = 74
ENV_PREFIX = "SIMPLICIAL_"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EX_USAGE, f"{self.prog}: error: {message}\n")


def _env(name: str, default, cast=str):
    raw = os.environ.get(ENV_PREFIX + name.upper().replace("-", "_"))
    if raw is None:
        return default
    try:
        return cast(raw)
    except ValueError:
        raise UsageError(f"bad value {raw!r} for {ENV_PREFIX}{name.upper()}") from None


def _fmt(v) -> str:
    """Shortest round-trip decimal for floats."""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _write_output(text: str, path: str | None) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    target = Path(path)
    fd, tmp = tempfile.mkstemp(dir=target.parent, prefix=f".{target.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, target)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _problem_from_args(args) -> ProblemInstance:
    params = {}
    for item in args.param or ():
        key, sep, value = item.partition("=")
        if not sep:
            raise UsageError(f"--param expects key=value, got {item!r}")
        params[key.strip()] = value.strip()
    if args.a is not None:
        params["a"] = args.a
    if args.n is not None:
        params["n"] = args.n
    try:
        return catalog_get(args.problem, params)
    except (UnknownProblemError, InvalidParameterError) as exc:
        raise UsageError(exc.args[0] if exc.args else str(exc)) from None


def _check_common(args) -> None:
    if getattr(args, "resolution", 1) < 1:
        raise UsageError("--resolution must be at least 1")
    if not getattr(args, "tol_x", 1.0) > 0:
        raise UsageError("--tol-x must be positive")
    if not 0 < getattr(args, "rank_threshold", 0.5) < 1:
        raise UsageError("--rank-threshold must lie in (0, 1)")


def _problem_record(problem: ProblemInstance) -> dict:
    return {"name": problem.name, "params": dict(problem.params), "m": problem.m, "n": problem.n}


def pareto_table(problem: ProblemInstance, samples) -> tuple[list[str], list[list]]:
    header = (
        [f"w_{i}" for i in range(1, problem.m + 1)]
        + [f"x_{j}" for j in range(1, problem.n + 1)]
        + [f"f_{i}" for i in range(1, problem.m + 1)]
        + ["kkt_residual", "rank", "error_radius"]
    )
    rows = []
    for s in samples:
        rows.append(
            [float(v) for v in s.w.exact]
            + [float(v) for v in s.x]
            + [float(v) for v in s.f_values]
            + [float(s.kkt_residual), int(s.jacobian_rank), float(s.error_radius)]
        )
    return header, rows


def cmd_pareto(args) -> int:
    _check_common(args)
    problem = _problem_from_args(args)
    code = EX_OK
    try:
        samples = sample_pareto(
            problem, simplex_grid(problem.m, args.resolution), args.tol_x, args.rank_threshold
        )
    except ParetoSamplingError as exc:
        print(f"warning: {exc}", file=sys.stderr)
        samples, code = exc.samples, EX_PARTIAL
    header, rows = pareto_table(problem, samples)
    if args.format == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])
        text = buf.getvalue()
    else:
        doc = {
            "schema_version": SCHEMA_VERSION,
            "problem": _problem_record(problem),
            "config": {"resolution": args.resolution, "tol_x": args.tol_x,
                       "rank_threshold": args.rank_threshold},
            "columns": header,
            "rows": rows,
            "converged": [bool(s.converged) for s in samples],
        }
        text = json.dumps(doc, indent=2) + "\n"
    _write_output(text, args.output)
    return code


_VERIFY_EXIT = {Verdict.CONSISTENT: 0, Verdict.RANK_FAILS: 1, Verdict.INCONSISTENT: 2}


def cmd_verify(args) -> int:
    _check_common(args)
    problem = _problem_from_args(args)
    config = ReportConfig(
        resolution=args.resolution,
        tol_x=args.tol_x,
        rank_threshold=args.rank_threshold,
        k0_inflation=args.k0_inflation,
        k0=args.k0,
        seed=args.seed,
    )
    report = build_report(problem, config)
    if args.format == "json":
        text = json.dumps(report.to_dict(), indent=2) + "\n"
    else:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["check", "passed", "worst_case", "inconclusive"])
        for c in report.checks:
            writer.writerow([c.name, c.passed, _fmt(float(c.worst_case)), c.inconclusive])
        writer.writerow(["verdict", report.verdict.value, "", ""])
        text = buf.getvalue()
    _write_output(text, args.output)
    print(f"verdict: {report.verdict.value}", file=sys.stderr)
    return _VERIFY_EXIT[report.verdict]


def _int_list(text: str) -> list[int]:
    text = text.strip()
    if not text:
        return []
    try:
        return [int(v) for v in text.replace(" ", "").split(",")]
    except ValueError:
        raise UsageError(f"expected comma-separated integers, got {text!r}") from None


def cmd_perturb(args) -> int:
    _check_common(args)
    problem = _problem_from_args(args)
    zero_rows = _int_list(args.zero_rows)
    if any(not 1 <= i <= problem.m for i in zero_rows):
        raise UsageError(f"--zero-rows must lie in 1..{problem.m}")
    if args.trials < 1:
        raise UsageError("--trials must be at least 1")
    if not args.scale > 0:
        raise UsageError("--scale must be positive")
    stats = genericity_experiment(
        problem,
        zero_rows,
        trials=args.trials,
        resolution=args.resolution,
        tol_x=args.tol_x,
        seed=args.seed,
        scale=args.scale,
        rank_rtol=args.rank_threshold,
    )
    doc = {
        "schema_version": SCHEMA_VERSION,
        "problem": _problem_record(problem),
        "config": {
            "zero_rows": sorted(zero_rows),
            "trials": args.trials,
            "scale": args.scale,
            "seed": args.seed,
            "resolution": args.resolution,
            "tol_x": args.tol_x,
            "rank_threshold": args.rank_threshold,
            "seed_rule": "numpy SeedSequence(seed, spawn_key=(trial,))",
        },
        "hypothesis": {"n": problem.n, "m": problem.m, "n_minus_2m_plus_4": problem.n - 2 * problem.m + 4},
        "stats": stats.to_dict(),
    }
    _write_output(json.dumps(doc, indent=2) + "\n", args.output)
    mode = "exploratory (hypothesis unmet)" if stats.exploratory else "hypothesis met"
    print(
        f"{stats.successes}/{stats.trials} trials satisfied the rank condition; {mode}",
        file=sys.stderr,
    )
    if stats.exploratory:
        return EX_OK
    return EX_OK if stats.failures == 0 else 1


def _weights(text: str, m: int) -> WeightVector:
    try:
        values = [float(v) for v in text.split(",")]
    except ValueError:
        raise UsageError(f"expected comma-separated weights, got {text!r}") from None
    if len(values) != m:
        raise UsageError(f"expected {m} weights, got {len(values)}")
    try:
        return WeightVector(values)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def cmd_diff_probe(args) -> int:
    problem = _problem_from_args(args)
    if not args.h > 0:
        raise UsageError("--h must be positive")
    if not args.tol_x > 0:
        raise UsageError("--tol-x must be positive")
    start = _weights(args.start, problem.m)
    end = _weights(args.end, problem.m)
    points = [float(v) for v in args.at.split(",")]
    if any(not 0 <= s <= 1 for s in points):
        raise UsageError("--at values must lie in [0, 1]")
    results = []
    for s in points:
        try:
            q = path_difference_quotients(problem, start, end, s, args.h, args.tol_x)
        except ParetoSamplingError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EX_PARTIAL
        results.append(
            {
                "s": s,
                "h": args.h,
                "x": [float(v) for v in q.x],
                "right": None if q.right is None else [float(v) for v in q.right],
                "left": None if q.left is None else [float(v) for v in q.left],
            }
        )
    if args.format == "json":
        text = json.dumps({"problem": _problem_record(problem), "probes": results}, indent=2) + "\n"
    else:
        lines = ["s,component,x,right,left"]
        for r in results:
            for j in range(problem.n):
                right = "" if r["right"] is None else _fmt(r["right"][j])
                left = "" if r["left"] is None else _fmt(r["left"][j])
                lines.append(f"{_fmt(r['s'])},{j + 1},{_fmt(r['x'][j])},{right},{left}")
        text = "\n".join(lines) + "\n"
    _write_output(text, args.output)
    return EX_OK


def cmd_catalog(args) -> int:
    entries = describe_catalog()
    if args.format == "json":
        _write_output(json.dumps(entries, indent=2) + "\n", args.output)
        return EX_OK
    lines = []
    for e in entries:
        params = ", ".join(f"{k}:{t}" for k, t in e["params"].items()) or "-"
        lines.append(f"{e['name']}  m={e['m']} n={e['n']}  params: {params}")
    _write_output("\n".join(lines) + "\n", args.output)
    return EX_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="simplicial", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add_problem(p):
        p.add_argument("--problem", default=_env("problem", "example1"))
        p.add_argument("--a", type=float, default=None, help="example1 parameter a > 0")
        p.add_argument("--n", type=int, default=None, help="remark4 decision dimension")
        p.add_argument("--param", action="append", metavar="KEY=VALUE")

    def add_run(p, fmt_default="csv", formats=("csv", "json")):
        p.add_argument("--resolution", type=int, default=_env("resolution", 20, int))
        p.add_argument("--tol-x", type=float, default=_env("tol_x", DEFAULT_TOL_X, float))
        p.add_argument(
            "--rank-threshold", type=float, default=_env("rank_threshold", DEFAULT_RANK_RTOL, float)
        )
        p.add_argument("--seed", type=int, default=_env("seed", 0, int))
        p.add_argument("--format", choices=formats, default=_env("format", fmt_default))
        p.add_argument("--output", "-o", default=_env("output", None))

    p = sub.add_parser("pareto", help="sample the Pareto set on a simplex grid")
    add_problem(p)
    add_run(p)
    p.set_defaults(func=cmd_pareto)

    p = sub.add_parser("verify", help="run the simpliciality checks and emit a report")
    add_problem(p)
    add_run(p, fmt_default="json")
    p.add_argument("--k0", type=float, default=None, help="override the Hoelder constant K0")
    p.add_argument("--k0-inflation", type=float, default=_env("k0_inflation", 1.5, float))
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("perturb", help="Monte-Carlo rank condition under random linear perturbations")
    add_problem(p)
    add_run(p, fmt_default="json", formats=("json",))
    p.add_argument("--zero-rows", default=_env("zero_rows", "1"), help="1-based rows kept at zero, e.g. 2,3")
    p.add_argument("--trials", type=int, default=_env("trials", 100, int))
    p.add_argument("--scale", type=float, default=_env("scale", 1.0, float))
    p.set_defaults(func=cmd_perturb)

    p = sub.add_parser("diff-probe", help="one-sided difference quotients of x* along a weight path")
    add_problem(p)
    p.add_argument("--from", dest="start", required=True, help="start weights, e.g. 0,1")
    p.add_argument("--to", dest="end", required=True, help="end weights, e.g. 1,0")
    p.add_argument("--at", required=True, help="comma-separated path parameters in [0, 1]")
    p.add_argument("--h", type=float, default=_env("h", 1e-4, float))
    p.add_argument("--tol-x", type=float, default=_env("probe_tol_x", 1e-10, float))
    p.add_argument("--format", choices=("csv", "json"), default=_env("format", "csv"))
    p.add_argument("--output", "-o", default=None)
    p.set_defaults(func=cmd_diff_probe)

    p = sub.add_parser("catalog", help="list built-in problems")
    p.add_argument("action", choices=("list",))
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.add_argument("--output", "-o", default=None)
    p.set_defaults(func=cmd_catalog)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    try:
        parser = build_parser()
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"simplicial: error: {exc}", file=sys.stderr)
        return EX_USAGE
    except OSError as exc:
        print(f"simplicial: I/O error: {exc}", file=sys.stderr)
        return EX_IOERR


if __name__ == "__main__":
    sys.exit(main())
