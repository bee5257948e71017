"""The scalarization map ``x*(w)`` and everything needed to sample it.

Weights are stored as exact fractions so that membership of a lattice point in a
face of the simplex (which coordinates are exactly zero) never depends on
rounding.
"""

from __future__ import annotations

import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from numpy.typing import ArrayLike

from .problems import Matrix, ProblemInstance, SubsetIndex, Vector, evaluate_all, jacobian
from .solver import DEFAULT_TOL_X, minimize, weighted_objective

DEFAULT_RANK_RTOL = 1e-8
DEFAULT_GRID_CAP = 1_000_000


class GridTooLargeError(ValueError):
    pass


class ParetoSamplingError(RuntimeError):
    """Some weights of a sweep did not reach a certified minimizer.

    The full list of samples, converged or not, is kept on ``samples``.
    """

    def __init__(self, msg: str, samples: list[ParetoSample]):
        super().__init__(msg)
        self.samples = samples


def _as_fraction(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, (int, np.integer)):
        return Fraction(int(value))
    value = float(value)
    if not math.isfinite(value):
        raise ValueError(f"weight {value} is not finite")
    return Fraction(value)


@dataclass(frozen=True)
class WeightVector:
    """A point of the standard simplex with exact coordinates."""

    exact: tuple[Fraction, ...]

    def __init__(self, values: Iterable):
        values = tuple(_as_fraction(v) for v in values)
        if not values:
            raise ValueError("weight vector must have at least one coordinate")
        if any(v < 0 for v in values):
            raise ValueError(f"weights must be non-negative: {[float(v) for v in values]}")
        total = sum(values)
        if total == 0:
            raise ValueError("weights must not all be zero")
        if total != 1:
            values = tuple(v / total for v in values)
        object.__setattr__(self, "exact", values)

    @classmethod
    def vertex(cls, i: int, m: int) -> WeightVector:
        """The vertex ``e_i`` (1-based) of the ``(m-1)``-simplex."""
        if not 1 <= i <= m:
            raise ValueError(f"vertex index {i} outside 1..{m}")
        return cls(Fraction(int(k == i - 1)) for k in range(m))

    @property
    def m(self) -> int:
        return len(self.exact)

    @property
    def coordinates(self) -> Vector:
        return np.array([float(v) for v in self.exact])

    @property
    def support(self) -> frozenset[int]:
        """1-based indices of the non-zero coordinates."""
        return frozenset(i + 1 for i, v in enumerate(self.exact) if v != 0)

    def l1_distance(self, other: WeightVector) -> float:
        return float(sum(abs(a - b) for a, b in zip(self.exact, other.exact)))

    def __len__(self) -> int:
        return len(self.exact)

    def __repr__(self) -> str:
        return "WeightVector(" + ", ".join(str(v) for v in self.exact) + ")"


@dataclass(frozen=True)
class ParetoSample:
    w: WeightVector
    x: Vector
    f_values: Vector
    kkt_residual: float
    jacobian_rank: int
    singular_values: Vector
    error_radius: float
    converged: bool
    alpha_w: float


@dataclass(frozen=True)
class BoundingRegion:
    """Union of the balls ``Omega_i`` that contains the Pareto set.

    ``Omega_i = {x : f_i(x_i) + alpha_i/2 |x - x_i|^2 <= f_i(x_r)}`` where ``x_i``
    minimizes ``f_i`` and ``x_r`` is the minimizer of the reference objective.
    """

    centers: tuple[Vector, ...]
    radii: tuple[float, ...]
    minimum_values: tuple[float, ...]
    reference_values: tuple[float, ...]
    alphas: tuple[float, ...]
    reference_index: int = 1

    @property
    def reference_value(self) -> float:
        return self.reference_values[self.reference_index - 1]

    def slacks(self, x: ArrayLike) -> Vector:
        """``f_i(x_r) - f_i(x_i) - alpha_i/2 |x - x_i|^2`` per ball (>= 0 inside)."""
        x = np.asarray(x, dtype=float)
        out = []
        for c, fmin, ref, a in zip(self.centers, self.minimum_values, self.reference_values, self.alphas):
            d = x - c
            out.append(ref - (fmin + 0.5 * a * float(d @ d)))
        return np.array(out)

    def contains(self, x: ArrayLike, slack: float = 0.0) -> bool:
        return bool(np.max(self.slacks(x)) >= -slack)


def numerical_rank(
    matrix: ArrayLike, rtol: float = DEFAULT_RANK_RTOL, atol: float = 0.0
) -> tuple[int, Vector]:
    """Count singular values above ``max(rtol * sigma_1, atol)``.

    Returns the rank and the singular values in descending order. A zero matrix
    has rank 0.
    """
    a = np.atleast_2d(np.asarray(matrix, dtype=float))
    s = np.linalg.svd(a, compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0, s
    cutoff = max(rtol * s[0], atol)
    return int(np.count_nonzero(s > cutoff)), s


def simplex_grid(m: int, resolution: int, cap: int = DEFAULT_GRID_CAP) -> list[WeightVector]:
    """All lattice points ``k / resolution`` of the ``(m-1)``-simplex.

    Points come in descending lexicographic order of the integer multi-index, so
    consecutive points are usually lattice neighbours; the first is ``e_1``.
    """
    if m < 1 or resolution < 1:
        raise ValueError(f"need m >= 1 and resolution >= 1, got m={m}, resolution={resolution}")
    count = math.comb(resolution + m - 1, m - 1)
    if count > cap:
        raise GridTooLargeError(f"grid has {count} points, above the cap of {cap}")
    out = []
    for k in _compositions(resolution, m):
        out.append(WeightVector(Fraction(ki, resolution) for ki in k))
    return out


def _compositions(total: int, parts: int):
    if parts == 1:
        yield (total,)
        return
    for first in range(total, -1, -1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


def face_embed(subset: SubsetIndex, w_sub: WeightVector, m: int) -> WeightVector:
    """Place ``w_sub`` on the coordinates listed in ``subset``; all others are zero."""
    if len(subset) != w_sub.m:
        raise ValueError(f"subset {subset} has {len(subset)} members, weights have {w_sub.m}")
    if subset.members[-1] > m:
        raise ValueError(f"subset {subset} not contained in 1..{m}")
    values = [Fraction(0)] * m
    for pos, v in zip(subset.positions, w_sub.exact):
        values[pos] = v
    return WeightVector(values)


def face_restrict(w: WeightVector, subset: SubsetIndex) -> WeightVector:
    """Inverse of :func:`face_embed` for weights supported in ``subset``."""
    if not w.support <= set(subset.members):
        raise ValueError(f"support {sorted(w.support)} not contained in {subset}")
    return WeightVector(w.exact[i] for i in subset.positions)


def make_sample(
    problem: ProblemInstance,
    w: WeightVector,
    x: Vector,
    error_radius: float,
    converged: bool,
    rank_rtol: float = DEFAULT_RANK_RTOL,
    tol_x: float = DEFAULT_TOL_X,
) -> ParetoSample:
    coords = w.coordinates
    jac = jacobian(problem, x)
    alpha_w = float(coords @ problem.alphas)
    # singular values below the certified residual level are indistinguishable from zero
    rank, s = numerical_rank(jac, rtol=rank_rtol, atol=alpha_w * tol_x)
    return ParetoSample(
        w=w,
        x=x,
        f_values=evaluate_all(problem, x),
        kkt_residual=float(np.linalg.norm(coords @ jac)),
        jacobian_rank=rank,
        singular_values=s,
        error_radius=error_radius,
        converged=converged,
        alpha_w=alpha_w,
    )


def x_star(
    problem: ProblemInstance,
    w: WeightVector | Sequence[float],
    tol_x: float = DEFAULT_TOL_X,
    x0: ArrayLike | None = None,
    rank_rtol: float = DEFAULT_RANK_RTOL,
    max_iter: int | None = None,
) -> ParetoSample:
    """Solve for the unique minimizer of ``sum_i w_i f_i`` and package it as a sample."""
    if not isinstance(w, WeightVector):
        w = WeightVector(w)
    if w.m != problem.m:
        raise ValueError(f"problem has {problem.m} objectives, weights have {w.m}")
    start = np.zeros(problem.n) if x0 is None else problem.check_point(x0)
    kwargs = {} if max_iter is None else {"max_iter": max_iter}
    result = minimize(weighted_objective(problem, w), start, tol_x, **kwargs)
    return make_sample(
        problem, w, result.x, result.error_radius, result.converged, rank_rtol, tol_x
    )


def sample_pareto(
    problem: ProblemInstance,
    grid: Sequence[WeightVector],
    tol_x: float = DEFAULT_TOL_X,
    rank_rtol: float = DEFAULT_RANK_RTOL,
    warm_start: bool = True,
    strict: bool = True,
) -> list[ParetoSample]:
    """Evaluate ``x*`` on every weight of ``grid`` in order.

    With ``warm_start`` each solve starts from the previous solution. When
    ``strict`` is set, any unconverged sample raises :class:`ParetoSamplingError`.
    """
    if not grid:
        raise ValueError("weight grid is empty")
    samples = []
    x0 = np.zeros(problem.n)
    for w in grid:
        s = x_star(problem, w, tol_x, x0=x0, rank_rtol=rank_rtol)
        samples.append(s)
        if warm_start and s.converged:
            x0 = s.x
    failed = [s for s in samples if not s.converged]
    if strict and failed:
        raise ParetoSamplingError(
            f"{len(failed)} of {len(samples)} weights did not converge on {problem.name}", samples
        )
    return samples


def bounding_region(
    problem: ProblemInstance, tol_x: float = DEFAULT_TOL_X, reference_index: int = 1
) -> BoundingRegion:
    """Build the balls ``Omega_i`` around certified minimizers of each objective."""
    if not 1 <= reference_index <= problem.m:
        raise ValueError(f"reference index {reference_index} outside 1..{problem.m}")
    centers, fmins = [], []
    for i in range(1, problem.m + 1):
        res = minimize(
            weighted_objective(problem, WeightVector.vertex(i, problem.m)),
            np.zeros(problem.n),
            tol_x,
        )
        if not res.converged:
            raise ParetoSamplingError(f"could not minimize objective {i} of {problem.name}", [])
        centers.append(res.x)
        fmins.append(problem.objectives[i - 1].evaluate(res.x))
    ref_point = centers[reference_index - 1]
    refs = [float(obj.evaluate(ref_point)) for obj in problem.objectives]
    alphas = [float(a) for a in problem.alphas]
    radii = tuple(
        math.sqrt(max(0.0, 2.0 * (r - fm) / a)) for r, fm, a in zip(refs, fmins, alphas)
    )
    return BoundingRegion(
        centers=tuple(centers),
        radii=radii,
        minimum_values=tuple(float(v) for v in fmins),
        reference_values=tuple(refs),
        alphas=tuple(alphas),
        reference_index=reference_index,
    )


def _points(points) -> Matrix:
    p = np.asarray(points, dtype=float)
    if p.size == 0:
        return p.reshape(0, 0)
    return np.atleast_2d(p)


def dominance_filter(points: Sequence[ArrayLike]) -> set[int]:
    """Indices of vectors not dominated by any other (``<=`` everywhere, ``<`` somewhere)."""
    p = _points(points)
    keep = set()
    for i in range(len(p)):
        le = np.all(p <= p[i], axis=1)
        lt = np.any(p < p[i], axis=1)
        if not np.any(le & lt):
            keep.add(i)
    return keep


def weak_dominance_filter(points: Sequence[ArrayLike]) -> set[int]:
    """Indices of vectors that no other vector beats strictly in every coordinate."""
    p = _points(points)
    keep = set()
    for i in range(len(p)):
        if not np.any(np.all(p < p[i], axis=1)):
            keep.add(i)
    return keep


def weight_path(start: WeightVector, end: WeightVector, s: float) -> WeightVector:
    """The point ``(1 - s) start + s end`` of the segment between two weights."""
    if not 0.0 <= s <= 1.0:
        raise ValueError(f"path parameter {s} outside [0, 1]")
    s = _as_fraction(s)
    return WeightVector((1 - s) * a + s * b for a, b in zip(start.exact, end.exact))


@dataclass(frozen=True)
class DifferenceQuotients:
    s: float
    h: float
    x: Vector
    right: Vector | None
    left: Vector | None


def path_difference_quotients(
    problem: ProblemInstance,
    start: WeightVector,
    end: WeightVector,
    s: float,
    h: float,
    tol_x: float = 1e-10,
) -> DifferenceQuotients:
    """One-sided difference quotients of ``x*`` along a straight path in the simplex.

    ``right = (x*(s+h) - x*(s)) / h`` and ``left = (x*(s-h) - x*(s)) / (-h)``; a
    side whose step leaves ``[0, 1]`` is reported as ``None``. Purely descriptive:
    a kink shows up as unequal sides but nothing is decided here.
    """
    if not h > 0:
        raise ValueError(f"step h must be positive, got {h}")
    if start.m != problem.m or end.m != problem.m:
        raise ValueError("path endpoints must have one weight per objective")

    def solve(t):
        sample = x_star(problem, weight_path(start, end, t), tol_x)
        if not sample.converged:
            raise ParetoSamplingError(f"x* did not converge at path parameter {t}", [sample])
        return sample.x

    center = solve(s)
    right = (solve(s + h) - center) / h if s + h <= 1.0 else None
    left = (solve(s - h) - center) / (-h) if s - h >= 0.0 else None
    return DifferenceQuotients(s=s, h=h, x=center, right=right, left=left)
