"""Linear perturbations ``f + pi`` and Monte-Carlo genericity experiments.

A perturbation adds the linear form ``<row_i, x>`` to objective ``i``. Rows
listed in ``zero_rows`` (1-based) are held at exactly zero, which models the
subspace of perturbations that leave chosen components untouched.

Per-trial randomness comes from ``numpy.random.SeedSequence(seed,
spawn_key=(trial,))``, so trial ``k`` draws the same matrix however the trials
are scheduled.
"""

from __future__ import annotations

import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any

import numpy as np
from numpy.typing import ArrayLike

from .pareto import (
    DEFAULT_RANK_RTOL,
    ParetoSample,
    ParetoSamplingError,
    sample_pareto,
    simplex_grid,
)
from .problems import Matrix, ObjectiveSpec, ProblemInstance, Vector
from .solver import DEFAULT_TOL_X, minimize, weighted_objective
from .verify import CheckResult, _json_float, check_rank_condition


@dataclass(frozen=True)
class LinearPerturbation:
    matrix: Matrix
    zero_rows: frozenset[int] = frozenset()

    def __post_init__(self):
        a = np.array(self.matrix, dtype=float)
        if a.ndim != 2:
            raise ValueError(f"perturbation matrix must be 2-D, got shape {a.shape}")
        rows = frozenset(int(i) for i in self.zero_rows)
        if any(not 1 <= i <= a.shape[0] for i in rows):
            raise ValueError(f"zero rows {sorted(rows)} outside 1..{a.shape[0]}")
        for i in rows:
            if np.any(a[i - 1] != 0.0):
                raise ValueError(f"row {i} is declared zero but has entries {a[i - 1]}")
        a.setflags(write=False)
        object.__setattr__(self, "matrix", a)
        object.__setattr__(self, "zero_rows", rows)

    @classmethod
    def zeros(cls, m: int, n: int) -> LinearPerturbation:
        return cls(np.zeros((m, n)), frozenset(range(1, m + 1)))

    @property
    def free_rows(self) -> tuple[int, ...]:
        return tuple(i for i in range(1, self.matrix.shape[0] + 1) if i not in self.zero_rows)

    def to_dict(self) -> dict[str, Any]:
        return {"matrix": self.matrix.tolist(), "zero_rows": sorted(self.zero_rows)}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> LinearPerturbation:
        return cls(np.array(data["matrix"], dtype=float), frozenset(data.get("zero_rows", ())))


def _shifted(obj: ObjectiveSpec, row: Vector) -> ObjectiveSpec:
    if not np.any(row):
        return obj
    row = row.copy()
    f, g = obj.evaluate, obj.gradient

    return ObjectiveSpec(
        evaluate=lambda x: f(x) + float(row @ x),
        gradient=lambda x: np.asarray(g(x), dtype=float) + row,
        hessian=obj.hessian,
        alpha=obj.alpha,
        smoothness=obj.smoothness,
        label=f"{obj.label} + <pi, x>" if obj.label else "",
    )


def apply_perturbation(problem: ProblemInstance, pi: LinearPerturbation) -> ProblemInstance:
    """``f + pi``: linear terms shift gradients and leave Hessians and ``alpha_i`` alone."""
    if pi.matrix.shape != (problem.m, problem.n):
        raise ValueError(
            f"perturbation shape {pi.matrix.shape} does not match ({problem.m}, {problem.n})"
        )
    if not np.any(pi.matrix):
        return problem
    objectives = tuple(_shifted(o, pi.matrix[i]) for i, o in enumerate(problem.objectives))
    return ProblemInstance(
        objectives=objectives,
        n=problem.n,
        name=f"{problem.name}+pi",
        params=problem.params,
    )


def _generator(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def sample_perturbation(
    m: int,
    n: int,
    zero_rows: Iterable[int] = (),
    scale: float = 1.0,
    seed: int | np.random.SeedSequence | np.random.Generator = 0,
) -> LinearPerturbation:
    """Draw the free rows i.i.d. uniform on ``[-scale, scale]^n``."""
    zero_rows = frozenset(int(i) for i in zero_rows)
    if any(not 1 <= i <= m for i in zero_rows):
        raise ValueError(f"zero rows {sorted(zero_rows)} outside 1..{m}")
    if not scale > 0:
        raise ValueError(f"scale must be positive, got {scale}")
    rng = _generator(seed)
    a = np.zeros((m, n))
    for i in range(1, m + 1):
        if i not in zero_rows:
            a[i - 1] = rng.uniform(-scale, scale, size=n)
    return LinearPerturbation(a, zero_rows)


def trial_seed(seed: int, trial: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(seed, spawn_key=(trial,))


def hypothesis_met(n: int, m: int) -> bool:
    """The dimension condition ``n >= m`` and ``n - 2m + 4 > 0`` of the genericity result."""
    return n >= m and n - 2 * m + 4 > 0


def segment_check(
    samples: Sequence[ParetoSample],
    p: ArrayLike,
    tol: float,
    max_gap: float | None = None,
) -> CheckResult:
    """All sampled points lie within ``tol`` of ``{t p : t in [0, 1]}`` and cover it.

    Coverage means sorted segment parameters start within ``max_gap`` of 0, end
    within ``max_gap`` of 1 and never jump by more than ``max_gap``. By default
    ``max_gap`` is one lattice step of the sampled weights plus ``tol``.
    """
    p = np.asarray(p, dtype=float)
    pp = float(p @ p)
    if pp == 0.0:
        raise ValueError("segment direction p must be non-zero")
    if max_gap is None:
        denom = 1
        for s in samples:
            for v in s.w.exact:
                denom = math.lcm(denom, Fraction(v).denominator)
        max_gap = 1.0 / denom + tol
    x = np.array([s.x for s in samples], dtype=float)
    t = x @ p / pp
    proj = np.clip(t, 0.0, 1.0)[:, None] * p
    dist = np.linalg.norm(x - proj, axis=1)
    k = int(np.argmax(dist))
    worst = float(dist[k])
    ts = np.sort(np.clip(t, 0.0, 1.0))
    gaps = np.diff(np.concatenate([[0.0], ts, [1.0]]))
    covered = bool(gaps.max() <= max_gap)
    return CheckResult(
        name="segment",
        passed=worst <= tol and covered,
        worst_case=worst,
        witness={"w": samples[k].w, "t": float(t[k]), "largest_gap": float(gaps.max())},
        details=f"max distance to segment; coverage {'ok' if covered else 'fails'} (max_gap={max_gap!r})",
    )


@dataclass(frozen=True)
class TrialRecord:
    index: int
    seed_entropy: int
    spawn_key: tuple[int, ...]
    perturbation: LinearPerturbation
    status: str  # "success", "failure" or "inconclusive"
    min_rank: int | None = None
    max_rank: int | None = None
    min_singular_gap: float | None = None
    segment: CheckResult | None = None
    message: str = ""

    def to_dict(self) -> dict[str, Any]:
        out = {
            "index": self.index,
            "seed": {"entropy": self.seed_entropy, "spawn_key": list(self.spawn_key)},
            "perturbation": self.perturbation.to_dict(),
            "status": self.status,
            "min_rank": self.min_rank,
            "max_rank": self.max_rank,
            "min_singular_gap": _json_float(self.min_singular_gap),
        }
        if self.segment is not None:
            out["segment"] = self.segment.to_dict()
        if self.message:
            out["message"] = self.message
        return out


@dataclass(frozen=True)
class GenericityStats:
    trials: int
    successes: int
    failures: int
    inconclusive: int
    worst_min_singular_gap: float
    hypothesis_met: bool
    records: tuple[TrialRecord, ...] = field(default=())

    @property
    def exploratory(self) -> bool:
        return not self.hypothesis_met

    def to_dict(self) -> dict[str, Any]:
        gap = self.worst_min_singular_gap
        return {
            "trials": self.trials,
            "successes": self.successes,
            "failures": self.failures,
            "inconclusive": self.inconclusive,
            "worst_min_singular_gap": gap if math.isfinite(gap) else None,
            "hypothesis_met": self.hypothesis_met,
            "mode": "exploratory" if self.exploratory else "hypothesis-met",
            "records": [r.to_dict() for r in self.records],
        }


def _singular_gap(sample: ParetoSample, m: int) -> float:
    """``sigma_{m-1} / sigma_1``: how far the rank-(m-1) part sits above zero."""
    s = sample.singular_values
    if m < 2:
        return math.inf
    if s.size < m - 1 or s[0] == 0.0:
        return 0.0
    return float(s[m - 2] / s[0])


def run_trial(
    problem: ProblemInstance,
    pi: LinearPerturbation,
    resolution: int,
    tol_x: float = DEFAULT_TOL_X,
    rank_rtol: float = DEFAULT_RANK_RTOL,
) -> tuple[list[ParetoSample], CheckResult]:
    perturbed = apply_perturbation(problem, pi)
    samples = sample_pareto(perturbed, simplex_grid(problem.m, resolution), tol_x, rank_rtol)
    return samples, check_rank_condition(samples, problem.m)


def genericity_experiment(
    problem: ProblemInstance,
    zero_rows: Iterable[int],
    trials: int = 100,
    resolution: int = 20,
    tol_x: float = DEFAULT_TOL_X,
    seed: int = 0,
    scale: float = 1.0,
    rank_rtol: float = DEFAULT_RANK_RTOL,
) -> GenericityStats:
    """Perturb, sample the Pareto set and test the rank condition, ``trials`` times.

    Trials whose sweep does not converge count as failures and are also tallied
    under ``inconclusive``. When exactly one row is free, each trial also runs
    :func:`segment_check` toward the minimizer of the perturbed objective.
    """
    zero_rows = frozenset(int(i) for i in zero_rows)
    met = hypothesis_met(problem.n, problem.m)
    records = []
    successes = failures = inconclusive = 0
    worst_gap = math.inf
    for k in range(trials):
        ss = trial_seed(seed, k)
        pi = sample_perturbation(problem.m, problem.n, zero_rows, scale, ss)
        base = dict(index=k, seed_entropy=int(seed), spawn_key=tuple(ss.spawn_key), perturbation=pi)
        try:
            samples, rank = run_trial(problem, pi, resolution, tol_x, rank_rtol)
        except ParetoSamplingError as exc:
            failures += 1
            inconclusive += 1
            records.append(TrialRecord(status="inconclusive", message=str(exc), **base))
            continue
        gap = min(_singular_gap(s, problem.m) for s in samples)
        segment = None
        free = pi.free_rows
        if len(free) == 1:
            i = free[0]
            perturbed = apply_perturbation(problem, pi)
            w = np.zeros(problem.m)
            w[i - 1] = 1.0
            p = minimize(weighted_objective(perturbed, w), np.zeros(problem.n), tol_x).x
            if np.any(p):
                segment = segment_check(samples, p, tol=10 * tol_x)
        if rank.passed:
            successes += 1
            worst_gap = min(worst_gap, gap)
            status = "success"
        else:
            failures += 1
            status = "failure"
        records.append(
            TrialRecord(
                status=status,
                min_rank=rank.witness["min_rank"],
                max_rank=rank.witness["max_rank"],
                min_singular_gap=gap,
                segment=segment,
                **base,
            )
        )
    return GenericityStats(
        trials=trials,
        successes=successes,
        failures=failures,
        inconclusive=inconclusive,
        worst_min_singular_gap=worst_gap,
        hypothesis_met=met,
        records=tuple(records),
    )
