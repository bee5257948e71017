"""Sample-based checks for (weak) simpliciality of a strongly convex problem.

Finite samples can refute but never prove the properties involved, so every
verdict reads "consistent with" rather than "proved".
"""

from __future__ import annotations

import enum
import math
from collections.abc import Sequence
from dataclasses import asdict, dataclass, field, replace
from typing import Any

import numpy as np

from .pareto import (
    DEFAULT_RANK_RTOL,
    ParetoSample,
    ParetoSamplingError,
    WeightVector,
    bounding_region,
    dominance_filter,
    face_embed,
    sample_pareto,
    simplex_grid,
    weak_dominance_filter,
    x_star,
)
from .problems import ProblemInstance, SubsetIndex
from .solver import DEFAULT_TOL_X

SCHEMA_VERSION = 1
KKT_SLACK = 1e-9
REGION_SLACK = 1e-9

CHECK_NAMES = (
    "kkt",
    "rank_condition",
    "holder",
    "x_star_injectivity",
    "f_injectivity",
    "face_consistency",
    "bounding_region",
    "dominance_consistency",
)
# x* is only claimed injective under the rank condition
_RANK_DEPENDENT = {"x_star_injectivity"}


class Verdict(str, enum.Enum):
    CONSISTENT = "consistent_with_simplicial"
    RANK_FAILS = "rank_condition_fails"
    INCONSISTENT = "inconsistent"


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    worst_case: float
    witness: dict[str, Any] | None = None
    details: str = ""
    inconclusive: bool = False

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "passed": self.passed,
            "worst_case": _json_float(self.worst_case),
            "witness": _jsonable(self.witness),
            "details": self.details,
            "inconclusive": self.inconclusive,
        }


@dataclass(frozen=True)
class ReportConfig:
    resolution: int = 20
    tol_x: float = DEFAULT_TOL_X
    rank_threshold: float = DEFAULT_RANK_RTOL
    k0_inflation: float = 1.5
    k0: float | None = None
    seed: int = 0

    def __post_init__(self):
        if self.resolution < 1:
            raise ValueError("resolution must be >= 1")
        if not self.tol_x > 0:
            raise ValueError("tol_x must be positive")
        if not 0 < self.rank_threshold < 1:
            raise ValueError("rank_threshold must lie in (0, 1)")


@dataclass(frozen=True)
class SimplicialityReport:
    problem_name: str
    problem_params: dict[str, Any]
    grid_resolution: int
    config: ReportConfig
    checks: tuple[CheckResult, ...]
    verdict: Verdict
    subproblems: tuple[str, ...] = field(default=())

    def check(self, name: str) -> CheckResult:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_dict(self) -> dict[str, Any]:
        return {
            "schema_version": SCHEMA_VERSION,
            "problem": {"name": self.problem_name, "params": dict(self.problem_params)},
            "config": _jsonable(asdict(self.config)),
            "subproblems": list(self.subproblems),
            "checks": [c.to_dict() for c in self.checks],
            "verdict": self.verdict.value,
        }


def _json_float(v):
    if v is None:
        return None
    v = float(v)
    if math.isfinite(v):
        return v
    return "inf" if v > 0 else ("-inf" if v < 0 else "nan")


def _jsonable(obj):
    if obj is None or isinstance(obj, (bool, str, int)):
        return obj
    if isinstance(obj, (float, np.floating)):
        return _json_float(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, WeightVector):
        return [str(v) for v in obj.exact]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, set, frozenset)):
        items = sorted(obj) if isinstance(obj, (set, frozenset)) else obj
        return [_jsonable(v) for v in items]
    return str(obj)


def _pairs(k: int) -> tuple[np.ndarray, np.ndarray]:
    return np.triu_indices(k, 1)


def _stack(samples: Sequence[ParetoSample], attr: str) -> np.ndarray:
    return np.array([getattr(s, attr) for s in samples], dtype=float)


def check_kkt(samples: Sequence[ParetoSample], tol_x: float, slack: float = KKT_SLACK) -> CheckResult:
    """Weighted gradient sum must vanish up to the solver certificate."""
    excess = [s.kkt_residual - (s.alpha_w * tol_x + slack) for s in samples]
    k = int(np.argmax(excess))
    worst = float(excess[k])
    return CheckResult(
        name="kkt",
        passed=worst <= 0,
        worst_case=worst,
        witness={"w": samples[k].w, "residual": samples[k].kkt_residual},
        details="max over samples of |sum w_i grad f_i(x)| - (alpha_w tol_x + slack)",
    )


def check_rank_condition(samples: Sequence[ParetoSample], m: int) -> CheckResult:
    """Rank of the Jacobian must equal ``m - 1`` at every sampled Pareto point.

    A rank of ``m`` at a Pareto point contradicts criticality of Pareto optima and
    is flagged in the witness as ``rank_exceeds``.
    """
    ranks = np.array([s.jacobian_rank for s in samples])
    dev = np.abs(ranks - (m - 1))
    k = int(np.argmax(dev))
    worst = float(dev[k])
    exceeds = bool(np.any(ranks > m - 1))
    return CheckResult(
        name="rank_condition",
        passed=worst == 0,
        worst_case=worst,
        witness={
            "w": samples[k].w,
            "rank": int(ranks[k]),
            "min_rank": int(ranks.min()),
            "max_rank": int(ranks.max()),
            "rank_exceeds": exceeds,
        },
        details=f"expected rank {m - 1} at every sample",
    )


def estimate_K0(samples: Sequence[ParetoSample]) -> tuple[tuple[float, ...], float]:
    """Per-objective spread ``K_i = max |f_i(x) - f_i(y)|`` over sampled pairs.

    This is a lower bound on the spread over the whole Pareto set.
    """
    if len(samples) < 2:
        raise ValueError("need at least two samples to estimate K0")
    f = _stack(samples, "f_values")
    k = tuple(float(v) for v in f.max(axis=0) - f.min(axis=0))
    return k, max(k)


def check_holder(
    samples: Sequence[ParetoSample], alpha0: float, K0: float, tol_x: float = DEFAULT_TOL_X
) -> CheckResult:
    """``|x*(w) - x*(v)| <= sqrt(K0/alpha0 * |w - v|_1)`` on every sampled pair.

    ``worst_case`` is the largest ratio ``lhs / (rhs + 2 tol_x)``; the check
    passes when it does not exceed 1.
    """
    if len(samples) < 2:
        return CheckResult("holder", True, 0.0, details="fewer than two samples")
    x = _stack(samples, "x")
    w = np.array([s.w.coordinates for s in samples])
    i, j = _pairs(len(samples))
    lhs = np.linalg.norm(x[i] - x[j], axis=1)
    rhs = np.sqrt(K0 / alpha0 * np.abs(w[i] - w[j]).sum(axis=1))
    ratio = lhs / (rhs + 2 * tol_x)
    k = int(np.argmax(ratio))
    worst = float(ratio[k])
    return CheckResult(
        name="holder",
        passed=worst <= 1.0,
        worst_case=worst,
        witness={"w": samples[i[k]].w, "w_other": samples[j[k]].w, "lhs": lhs[k], "rhs": rhs[k]},
        details=f"K0={K0!r}, alpha0={alpha0!r}, violations={int(np.sum(ratio > 1.0))}",
    )


def check_injectivity_x_star(samples: Sequence[ParetoSample], margin: float) -> CheckResult:
    """Distinct weights must give points more than ``margin`` apart."""
    best, witness = math.inf, None
    x = _stack(samples, "x")
    if len(samples) >= 2:
        i, j = _pairs(len(samples))
        distinct = np.array([samples[a].w != samples[b].w for a, b in zip(i, j)], dtype=bool)
        if distinct.any():
            dist = np.linalg.norm(x[i] - x[j], axis=1)
            dist = np.where(distinct, dist, np.inf)
            k = int(np.argmin(dist))
            best = float(dist[k])
            witness = {"w": samples[i[k]].w, "w_other": samples[j[k]].w, "distance": best}
    return CheckResult(
        name="x_star_injectivity",
        passed=best > margin,
        worst_case=best,
        witness=witness,
        details=f"min |x*(w) - x*(v)| over distinct sampled weights; margin={margin!r}",
    )


def check_injectivity_f(samples: Sequence[ParetoSample], margin: float) -> CheckResult:
    """Sampled points more than ``margin`` apart must have images more than ``margin`` apart."""
    best, witness = math.inf, None
    if len(samples) >= 2:
        x = _stack(samples, "x")
        f = _stack(samples, "f_values")
        i, j = _pairs(len(samples))
        dx = np.linalg.norm(x[i] - x[j], axis=1)
        df = np.where(dx > margin, np.linalg.norm(f[i] - f[j], axis=1), np.inf)
        if np.isfinite(df).any():
            k = int(np.argmin(df))
            best = float(df[k])
            witness = {"w": samples[i[k]].w, "w_other": samples[j[k]].w, "image_distance": best}
    return CheckResult(
        name="f_injectivity",
        passed=best > margin,
        worst_case=best,
        witness=witness,
        details=f"min |f(x) - f(y)| over sampled pairs with |x - y| > {margin!r}",
    )


def face_deviation(
    problem: ProblemInstance,
    subset: SubsetIndex,
    sub_samples: Sequence[ParetoSample],
    tol_x: float,
    rank_rtol: float = DEFAULT_RANK_RTOL,
) -> tuple[float, WeightVector | None]:
    """Largest gap between the full problem's ``x*`` on the face and the subproblem's ``x*``."""
    worst, where = 0.0, None
    x0 = np.zeros(problem.n)
    for s in sub_samples:
        full = x_star(problem, face_embed(subset, s.w, problem.m), tol_x, x0=x0, rank_rtol=rank_rtol)
        if not full.converged:
            raise ParetoSamplingError(f"face solve failed at {s.w}", [full])
        x0 = full.x
        d = float(np.linalg.norm(full.x - s.x))
        if where is None or d > worst:
            worst, where = d, s.w
    return worst, where


def check_face_consistency(
    problem: ProblemInstance,
    subset: SubsetIndex,
    resolution: int,
    tol_x: float = DEFAULT_TOL_X,
    slack: float = 0.0,
    sub_samples: Sequence[ParetoSample] | None = None,
) -> CheckResult:
    """On the face ``Delta_I``, ``x*`` of the full problem must match ``x*`` of ``f_I``."""
    if sub_samples is None:
        sub_samples = sample_pareto(
            problem.subproblem(subset), simplex_grid(len(subset), resolution), tol_x
        )
    worst, where = face_deviation(problem, subset, sub_samples, tol_x)
    return CheckResult(
        name="face_consistency",
        passed=worst <= 2 * tol_x + slack,
        worst_case=worst,
        witness={"subset": str(subset), "w_sub": where},
        details=f"bound 2 tol_x + slack = {2 * tol_x + slack!r}",
    )


def check_bounding_region(
    problem: ProblemInstance,
    samples: Sequence[ParetoSample],
    tol_x: float = DEFAULT_TOL_X,
    slack: float = REGION_SLACK,
) -> CheckResult:
    """Every sampled Pareto point must lie in the union of balls ``Omega_i``."""
    region = bounding_region(problem, tol_x)
    margins = np.array([float(np.max(region.slacks(s.x))) for s in samples])
    k = int(np.argmin(margins))
    worst = float(margins[k])
    return CheckResult(
        name="bounding_region",
        passed=worst >= -slack,
        worst_case=worst,
        witness={"w": samples[k].w, "radii": list(region.radii)},
        details="min over samples of the best ball slack (>= -slack means inside)",
    )


def check_dominance_consistency(samples: Sequence[ParetoSample]) -> CheckResult:
    """Images of sampled Pareto points must be mutually non-dominated, weakly and strictly."""
    f = _stack(samples, "f_values")
    strict = dominance_filter(f)
    weak = weak_dominance_filter(f)
    n = len(samples)
    lost = n - min(len(strict), len(weak))
    subset_ok = strict <= weak
    dropped = sorted(set(range(n)) - (strict & weak))
    return CheckResult(
        name="dominance_consistency",
        passed=lost == 0 and subset_ok,
        worst_case=float(lost if subset_ok else n),
        witness={"dropped_weights": [samples[k].w for k in dropped[:5]]} if dropped else None,
        details=f"retained strict={len(strict)}, weak={len(weak)} of {n}",
    )


def _merge(name: str, parts: list[tuple[str, CheckResult]], worse) -> CheckResult:
    """Fold per-subproblem results into one, keeping the worst case."""
    inconclusive = [label for label, r in parts if r.inconclusive]
    failed = [label for label, r in parts if not r.passed]
    conclusive = [(label, r) for label, r in parts if not r.inconclusive]
    if conclusive:
        label, pick = conclusive[0]
        for lab, r in conclusive[1:]:
            if worse(r.worst_case, pick.worst_case):
                label, pick = lab, r
        worst, witness = pick.worst_case, dict(pick.witness or {}, subproblem=label)
        if any((r.witness or {}).get("rank_exceeds") for _, r in conclusive):
            witness["rank_exceeds"] = True
    else:
        worst, witness = math.nan, None
    details = f"subproblems checked: {len(parts)}"
    if failed:
        details += f"; failed on {', '.join(failed)}"
    if inconclusive:
        details += f"; inconclusive on {', '.join(inconclusive)}"
    return CheckResult(
        name=name,
        passed=not failed,
        worst_case=worst,
        witness=witness,
        details=details,
        inconclusive=bool(inconclusive),
    )


_WORSE = {
    "kkt": lambda a, b: a > b,
    "rank_condition": lambda a, b: a > b,
    "holder": lambda a, b: a > b,
    "x_star_injectivity": lambda a, b: a < b,
    "f_injectivity": lambda a, b: a < b,
    "face_consistency": lambda a, b: a > b,
    "bounding_region": lambda a, b: a < b,
    "dominance_consistency": lambda a, b: a > b,
}


def _inconclusive(name: str, exc: Exception) -> CheckResult:
    return CheckResult(name, False, math.nan, details=f"solver failure: {exc}", inconclusive=True)


def decide_verdict(checks: Sequence[CheckResult]) -> Verdict:
    by_name = {c.name: c for c in checks}
    rank = by_name.get("rank_condition")
    if all(c.passed for c in checks):
        return Verdict.CONSISTENT
    if rank is None or rank.passed or rank.inconclusive:
        return Verdict.INCONSISTENT
    if (rank.witness or {}).get("rank_exceeds"):
        return Verdict.INCONSISTENT
    others = [c for c in checks if c.name != "rank_condition" and c.name not in _RANK_DEPENDENT]
    if all(c.passed for c in others):
        return Verdict.RANK_FAILS
    return Verdict.INCONSISTENT


def build_report(problem: ProblemInstance, config: ReportConfig | None = None) -> SimplicialityReport:
    """Run every check on the problem and on each of its ``2^m - 1`` subproblems.

    ``K0`` comes from ``config.k0`` when given, else from the catalog's analytic
    value, else from the full-problem samples inflated by ``config.k0_inflation``.
    The same constant bounds every subproblem since their Pareto sets are nested.
    """
    config = config or ReportConfig()
    tol, res = config.tol_x, config.resolution
    margin = 10 * tol
    full_samples = None
    try:
        full_samples = sample_pareto(
            problem, simplex_grid(problem.m, res), tol, rank_rtol=config.rank_threshold
        )
    except ParetoSamplingError:
        pass

    if config.k0 is not None:
        k0, k0_source = config.k0, "override"
    elif problem.k0 is not None:
        k0, k0_source = problem.k0, "analytic"
    elif full_samples is not None and len(full_samples) >= 2:
        k0 = config.k0_inflation * estimate_K0(full_samples)[1]
        k0_source = f"sampled x {config.k0_inflation}"
    else:
        k0, k0_source = 0.0, "single sample"

    results: dict[str, list[tuple[str, CheckResult]]] = {n: [] for n in CHECK_NAMES}
    labels = []
    for subset in SubsetIndex.all_subsets(problem.m):
        sub = problem.subproblem(subset)
        label = str(subset)
        labels.append(label)
        try:
            if len(subset) == problem.m and full_samples is not None:
                samples = full_samples
            else:
                samples = sample_pareto(
                    sub, simplex_grid(len(subset), res), tol, rank_rtol=config.rank_threshold
                )
        except ParetoSamplingError as exc:
            for name in CHECK_NAMES:
                results[name].append((label, _inconclusive(name, exc)))
            continue

        holder = check_holder(samples, float(sub.alphas.min()), k0, tol)
        results["kkt"].append((label, check_kkt(samples, tol)))
        results["rank_condition"].append((label, check_rank_condition(samples, sub.m)))
        results["holder"].append((label, holder))
        results["x_star_injectivity"].append((label, check_injectivity_x_star(samples, margin)))
        results["f_injectivity"].append((label, check_injectivity_f(samples, margin)))
        try:
            face = check_face_consistency(problem, subset, res, tol, sub_samples=samples)
        except ParetoSamplingError as exc:
            face = _inconclusive("face_consistency", exc)
        results["face_consistency"].append((label, face))
        try:
            region = check_bounding_region(sub, samples, tol)
        except ParetoSamplingError as exc:
            region = _inconclusive("bounding_region", exc)
        results["bounding_region"].append((label, region))
        results["dominance_consistency"].append((label, check_dominance_consistency(samples)))

    checks = tuple(_merge(name, results[name], _WORSE[name]) for name in CHECK_NAMES)
    checks = tuple(
        replace(c, details=f"{c.details}; K0={k0!r} ({k0_source})") if c.name == "holder" else c
        for c in checks
    )
    return SimplicialityReport(
        problem_name=problem.name,
        problem_params=dict(problem.params),
        grid_resolution=res,
        config=config,
        checks=checks,
        verdict=decide_verdict(checks),
        subproblems=tuple(labels),
    )
