"""Problem definitions, the built-in catalog, and strong-convexity certificates.

Objectives are plain callbacks on ``numpy`` vectors.  A :class:`ProblemInstance`
bundles ``m`` of them on a common domain ``R^n``.  Objective indices that appear
in user-facing arguments (subsets ``I``, perturbation rows) are 1-based, matching
the usual ``M = {1, ..., m}`` convention; list positions stay 0-based.
"""

from __future__ import annotations

import enum
import math
from collections.abc import Callable, Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Any

import numpy as np
from numpy.typing import ArrayLike, NDArray

Vector = NDArray[np.float64]
Matrix = NDArray[np.float64]

SLACK_TOLERANCE = 1e-9
DEFAULT_BOX = (-2.0, 2.0)


class Smoothness(str, enum.Enum):
    C1 = "C1"
    C2_OR_HIGHER = "C2_or_higher"


class CertificateMethod(str, enum.Enum):
    MIDPOINT = "midpoint_definition"
    SHIFTED = "shifted_convexity"
    HESSIAN = "hessian_eigenvalue"


class DimensionError(ValueError):
    """Raised when a vector does not live in the problem's domain."""


class HessianUnavailableError(ValueError):
    """Raised when the eigenvalue test is requested for a C^1-only objective."""

    def __init__(self, msg: str = "Hessian characterization unavailable"):
        super().__init__(msg)


class UnknownProblemError(KeyError):
    pass


class InvalidParameterError(ValueError):
    pass


@dataclass(frozen=True)
class ObjectiveSpec:
    """One strongly convex objective ``f_i`` with its declared convexity parameter."""

    evaluate: Callable[[Vector], float]
    gradient: Callable[[Vector], Vector]
    alpha: float
    hessian: Callable[[Vector], Matrix] | None = None
    smoothness: Smoothness = Smoothness.C2_OR_HIGHER
    label: str = ""

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError(f"convexity parameter must be positive, got {self.alpha}")
        if self.hessian is None and self.smoothness is Smoothness.C2_OR_HIGHER:
            object.__setattr__(self, "smoothness", Smoothness.C1)


@dataclass(frozen=True)
class ProblemInstance:
    """``m`` objectives on ``R^n``.

    ``k0`` is an analytic upper bound on ``max_i max |f_i(x) - f_i(y)|`` over
    the Pareto set when one is known, and ``x_star_oracle`` a closed form of the
    scalarization map. Both are optional and only used for verification.
    """

    objectives: tuple[ObjectiveSpec, ...]
    n: int
    name: str
    params: Mapping[str, Any] = field(default_factory=dict)
    k0: float | None = None
    x_star_oracle: Callable[[Vector], Vector] | None = None

    def __post_init__(self):
        object.__setattr__(self, "objectives", tuple(self.objectives))
        object.__setattr__(self, "params", MappingProxyType(dict(self.params)))
        if len(self.objectives) < 1:
            raise ValueError("a problem needs at least one objective")
        if self.n < 1:
            raise ValueError(f"decision dimension must be positive, got {self.n}")

    @property
    def m(self) -> int:
        return len(self.objectives)

    @property
    def alphas(self) -> Vector:
        return np.array([obj.alpha for obj in self.objectives], dtype=float)

    @property
    def has_hessians(self) -> bool:
        return all(obj.hessian is not None for obj in self.objectives)

    def check_point(self, x: ArrayLike) -> Vector:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.n,):
            raise DimensionError(f"expected a point in R^{self.n}, got shape {x.shape}")
        return x

    def subproblem(self, subset: SubsetIndex) -> ProblemInstance:
        """The problem ``f_I`` keeping only the objectives listed in ``subset``."""
        if subset.members[-1] > self.m:
            raise ValueError(f"subset {subset} is not contained in M = 1..{self.m}")
        if len(subset) == self.m:
            return self
        objectives = tuple(self.objectives[i] for i in subset.positions)
        oracle = None
        if self.x_star_oracle is not None:
            full_oracle = self.x_star_oracle
            m = self.m

            def oracle(w_sub: Vector) -> Vector:
                w = np.zeros(m)
                w[list(subset.positions)] = w_sub
                return full_oracle(w)

        return ProblemInstance(
            objectives=objectives,
            n=self.n,
            name=f"{self.name}{subset}",
            params=self.params,
            k0=self.k0,
            x_star_oracle=oracle,
        )


@dataclass(frozen=True)
class SubsetIndex:
    """A non-empty, strictly increasing subset ``I`` of ``{1, ..., m}``."""

    members: tuple[int, ...]

    def __init__(self, members: Iterable[int]):
        members = tuple(int(i) for i in members)
        if not members:
            raise ValueError("subset must be non-empty")
        if any(i < 1 for i in members):
            raise ValueError("objective indices are 1-based")
        if any(b <= a for a, b in zip(members, members[1:])):
            raise ValueError(f"subset members must be strictly increasing: {members}")
        object.__setattr__(self, "members", members)

    @property
    def positions(self) -> tuple[int, ...]:
        return tuple(i - 1 for i in self.members)

    def __len__(self) -> int:
        return len(self.members)

    def __iter__(self):
        return iter(self.members)

    def __str__(self) -> str:
        return "{" + ",".join(map(str, self.members)) + "}"

    @classmethod
    def all_subsets(cls, m: int) -> list[SubsetIndex]:
        """All ``2^m - 1`` non-empty subsets, ordered by size then lexicographically."""
        from itertools import combinations

        return [cls(c) for k in range(1, m + 1) for c in combinations(range(1, m + 1), k)]


@dataclass(frozen=True)
class ConvexityCertificate:
    method: CertificateMethod
    alpha_tested: float
    samples_used: int
    worst_margin: float
    passed: bool
    witness: tuple | None = None


def evaluate_all(problem: ProblemInstance, x: ArrayLike) -> Vector:
    x = problem.check_point(x)
    return np.array([obj.evaluate(x) for obj in problem.objectives], dtype=float)


def jacobian(problem: ProblemInstance, x: ArrayLike) -> Matrix:
    """Stacked gradients, an ``m x n`` matrix whose row ``i`` is ``grad f_i(x)``."""
    x = problem.check_point(x)
    return np.vstack([np.asarray(obj.gradient(x), dtype=float) for obj in problem.objectives])


# -- convexity certificates --------------------------------------------------


def _validate_triples(pairs, alpha: float):
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    triples = []
    for x, y, t in pairs:
        t = float(t)
        if not 0.0 <= t <= 1.0:
            raise ValueError(f"interpolation weight {t} outside [0, 1]")
        x = np.atleast_1d(np.asarray(x, dtype=float))
        y = np.atleast_1d(np.asarray(y, dtype=float))
        if x.shape != y.shape:
            raise DimensionError(f"pair shapes differ: {x.shape} vs {y.shape}")
        triples.append((x, y, t))
    return triples


def _certificate(method, alpha, margins, triples, slack) -> ConvexityCertificate:
    if not margins:
        return ConvexityCertificate(method, alpha, 0, math.inf, True)
    k = int(np.argmin(margins))
    worst = float(margins[k])
    return ConvexityCertificate(
        method=method,
        alpha_tested=alpha,
        samples_used=len(margins),
        worst_margin=worst,
        passed=worst >= -slack,
        witness=triples[k],
    )


def certify_midpoint(
    objective: ObjectiveSpec,
    alpha: float,
    pairs: Iterable[tuple[ArrayLike, ArrayLike, float]],
    slack: float = SLACK_TOLERANCE,
) -> ConvexityCertificate:
    """Check the defining inequality of strong convexity on each ``(x, y, t)``.

    The margin of a triple is
    ``t f(x) + (1-t) f(y) - alpha/2 t(1-t) |x-y|^2 - f(tx + (1-t)y)``;
    the certificate passes when no margin falls below ``-slack``.
    """
    triples = _validate_triples(pairs, alpha)
    f = objective.evaluate
    margins = []
    for x, y, t in triples:
        d = x - y
        rhs = t * f(x) + (1 - t) * f(y) - 0.5 * alpha * t * (1 - t) * float(d @ d)
        margins.append(rhs - f(t * x + (1 - t) * y))
    return _certificate(CertificateMethod.MIDPOINT, alpha, margins, triples, slack)


def certify_shifted_convexity(
    objective: ObjectiveSpec,
    alpha: float,
    pairs: Iterable[tuple[ArrayLike, ArrayLike, float]],
    slack: float = SLACK_TOLERANCE,
) -> ConvexityCertificate:
    """Check plain convexity of ``g(x) = f(x) - alpha/2 |x|^2`` on each triple."""
    triples = _validate_triples(pairs, alpha)

    def g(z):
        return objective.evaluate(z) - 0.5 * alpha * float(z @ z)

    margins = [t * g(x) + (1 - t) * g(y) - g(t * x + (1 - t) * y) for x, y, t in triples]
    return _certificate(CertificateMethod.SHIFTED, alpha, margins, triples, slack)


def certify_hessian(
    objective: ObjectiveSpec,
    alpha: float,
    probe_points: Iterable[ArrayLike],
    slack: float = SLACK_TOLERANCE,
) -> ConvexityCertificate:
    """Check that the smallest Hessian eigenvalue is at least ``alpha`` at every probe."""
    if objective.hessian is None or objective.smoothness is not Smoothness.C2_OR_HIGHER:
        raise HessianUnavailableError()
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    points = [np.atleast_1d(np.asarray(p, dtype=float)) for p in probe_points]
    margins = []
    for p in points:
        h = np.atleast_2d(np.asarray(objective.hessian(p), dtype=float))
        margins.append(float(np.linalg.eigvalsh(0.5 * (h + h.T))[0]) - alpha)
    return _certificate(
        CertificateMethod.HESSIAN, alpha, margins, [(p,) for p in points], slack
    )


def norm_identity_residual(x: ArrayLike, y: ArrayLike, t: float) -> float:
    """``t|x|^2 + (1-t)|y|^2 - |tx+(1-t)y|^2 - t(1-t)|x-y|^2``, zero for any real ``t``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    z = t * x + (1 - t) * y
    d = x - y
    return float(t * (x @ x) + (1 - t) * (y @ y) - z @ z - t * (1 - t) * (d @ d))


def random_triples(
    n: int,
    count: int,
    seed: int = 0,
    box: tuple[float, float] = DEFAULT_BOX,
) -> list[tuple[Vector, Vector, float]]:
    """Seeded ``(x, y, t)`` triples with ``x, y`` uniform in ``box^n`` and ``t`` in [0, 1]."""
    rng = np.random.default_rng(seed)
    lo, hi = box
    xs = rng.uniform(lo, hi, size=(count, n))
    ys = rng.uniform(lo, hi, size=(count, n))
    ts = rng.uniform(0.0, 1.0, size=count)
    return [(xs[k], ys[k], float(ts[k])) for k in range(count)]


def random_points(
    n: int, count: int, seed: int = 0, box: tuple[float, float] = DEFAULT_BOX
) -> Matrix:
    rng = np.random.default_rng(seed)
    return rng.uniform(box[0], box[1], size=(count, n))


def gradient_error(objective: ObjectiveSpec, x: ArrayLike, h: float = 1e-6) -> float:
    """Relative mismatch between ``gradient`` and central differences of ``evaluate``."""
    x = np.asarray(x, dtype=float)
    g = np.asarray(objective.gradient(x), dtype=float)
    fd = np.empty_like(x)
    for j in range(x.size):
        e = np.zeros_like(x)
        e[j] = h
        fd[j] = (objective.evaluate(x + e) - objective.evaluate(x - e)) / (2 * h)
    return float(np.linalg.norm(fd - g) / max(1.0, np.linalg.norm(g)))


def hessian_error(objective: ObjectiveSpec, x: ArrayLike, h: float = 1e-6) -> float:
    """Relative mismatch between ``hessian`` and central differences of ``gradient``."""
    if objective.hessian is None:
        raise HessianUnavailableError()
    x = np.asarray(x, dtype=float)
    hess = np.atleast_2d(np.asarray(objective.hessian(x), dtype=float))
    fd = np.empty_like(hess)
    for j in range(x.size):
        e = np.zeros_like(x)
        e[j] = h
        fd[:, j] = (objective.gradient(x + e) - objective.gradient(x - e)) / (2 * h)
    return float(np.linalg.norm(fd - hess) / max(1.0, np.linalg.norm(hess)))


# -- catalog -----------------------------------------------------------------


def separable_quadratic(coeffs: ArrayLike, center: ArrayLike, label: str = "") -> ObjectiveSpec:
    """``sum_j c_j (x_j - p_j)^2`` with convexity parameter ``2 min c_j``."""
    c = np.asarray(coeffs, dtype=float)
    p = np.asarray(center, dtype=float)
    if c.shape != p.shape or c.ndim != 1:
        raise ValueError("coefficients and center must be vectors of equal length")
    if np.any(c <= 0):
        raise InvalidParameterError("quadratic coefficients must be positive")
    hess = np.diag(2.0 * c)

    def evaluate(x):
        d = x - p
        return float(np.sum(c * d * d))

    def gradient(x):
        return 2.0 * c * (x - p)

    return ObjectiveSpec(
        evaluate=evaluate,
        gradient=gradient,
        hessian=lambda x: hess,
        alpha=float(2.0 * c.min()),
        label=label,
    )


def _example1(a: float = 1.0) -> ProblemInstance:
    a = float(a)
    if not (a > 0 and math.isfinite(a)):
        raise InvalidParameterError(f"example1 requires a > 0, got {a}")
    objectives = (
        separable_quadratic([a, 1, 1], [1, 0, 0], "a(x1-1)^2 + x2^2 + x3^2"),
        separable_quadratic([1, 1, 1], [0, 1, 0], "x1^2 + (x2-1)^2 + x3^2"),
        separable_quadratic([1, 1, 1], [0, 0, 1], "x1^2 + x2^2 + (x3-1)^2"),
    )

    def oracle(w):
        w1 = w[0]
        return np.array([a * w1 / (a * w1 + (1 - w1)), w[1], w[2]])

    return ProblemInstance(
        objectives=objectives,
        n=3,
        name="example1",
        params={"a": a},
        k0=2.0 if a == 1.0 else None,
        x_star_oracle=oracle,
    )


def _example2_f2(x):
    x0 = x[0]
    if x0 < 1:
        return x0 * x0
    return x0 * x0 + (x0 - 1) ** 2


def _example2_df2(x):
    x0 = x[0]
    if x0 < 1:
        return np.array([2 * x0])
    return np.array([2 * x0 + 2 * (x0 - 1)])


def _example2() -> ProblemInstance:
    f1 = separable_quadratic([1.0], [2.0], "(x-2)^2")
    f2 = ObjectiveSpec(
        evaluate=_example2_f2,
        gradient=_example2_df2,
        alpha=2.0,
        smoothness=Smoothness.C1,
        label="x^2 (x<1); x^2 + (x-1)^2 (x>=1)",
    )

    def oracle(w):
        w1 = w[0]
        if w1 < 0.5:
            return np.array([2 * w1])
        return np.array([(w1 + 1) / (2 - w1)])

    # Pareto set is [0, 2]: |f1(0) - f1(2)| = 4, |f2(2) - f2(0)| = 5
    return ProblemInstance(
        objectives=(f1, f2), n=1, name="example2", k0=5.0, x_star_oracle=oracle
    )


def _remark3() -> ProblemInstance:
    f = separable_quadratic([1.0], [0.0], "x^2")
    return ProblemInstance(
        objectives=(f, f),
        n=1,
        name="remark3_rank_deficient",
        k0=0.0,
        x_star_oracle=lambda w: np.zeros(1),
    )


def _remark4(n: int = 3) -> ProblemInstance:
    n = int(n)
    if n < 1:
        raise InvalidParameterError(f"remark4 requires n >= 1, got {n}")
    f = separable_quadratic(np.ones(n), np.zeros(n), "|x|^2")
    return ProblemInstance(
        objectives=(f, f, f),
        n=n,
        name="remark4_identical_norms",
        params={"n": n},
        k0=0.0,
        x_star_oracle=lambda w: np.zeros(n),
    )


CATALOG: dict[str, tuple[Callable[..., ProblemInstance], dict[str, type]]] = {
    "example1": (_example1, {"a": float}),
    "example2": (_example2, {}),
    "remark3_rank_deficient": (_remark3, {}),
    "remark4_identical_norms": (_remark4, {"n": int}),
}


def catalog_names() -> list[str]:
    return list(CATALOG)


def catalog_get(name: str, params: Mapping[str, Any] | None = None) -> ProblemInstance:
    """Build a catalog problem.

    Raises:
        UnknownProblemError: ``name`` is not in the catalog.
        InvalidParameterError: a parameter is unknown or out of range.
    """
    try:
        factory, accepted = CATALOG[name]
    except KeyError:
        raise UnknownProblemError(
            f"unknown problem {name!r}; choose from {', '.join(CATALOG)}"
        ) from None
    params = dict(params or {})
    unknown = set(params) - set(accepted)
    if unknown:
        raise InvalidParameterError(f"{name} does not take parameters {sorted(unknown)}")
    try:
        kwargs = {k: accepted[k](v) for k, v in params.items()}
    except (TypeError, ValueError) as exc:
        raise InvalidParameterError(str(exc)) from exc
    return factory(**kwargs)


def describe_catalog() -> list[dict[str, Any]]:
    out = []
    for name in CATALOG:
        problem = catalog_get(name)
        out.append(
            {
                "name": name,
                "m": problem.m,
                "n": problem.n,
                "params": {k: t.__name__ for k, t in CATALOG[name][1].items()},
                "alphas": [float(a) for a in problem.alphas],
                "objectives": [obj.label for obj in problem.objectives],
            }
        )
    return out


def as_points(xs: Sequence[ArrayLike]) -> Matrix:
    return np.atleast_2d(np.asarray(xs, dtype=float))
