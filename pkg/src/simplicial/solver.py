"""Certified minimization of strongly convex C^1 functions.

For an ``alpha``-strongly convex ``F`` with minimizer ``x*``,
``|x - x*| <= |grad F(x)| / alpha``, so stopping once the gradient norm drops to
``alpha * tol_x`` certifies the iterate to within ``tol_x``.
"""

from __future__ import annotations

from collections.abc import Callable, Sequence
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike

from .problems import Matrix, ProblemInstance, Vector

DEFAULT_TOL_X = 1e-8
DEFAULT_MAX_ITER = 10_000

_ARMIJO_C = 1e-4
_MAX_HALVINGS = 80
_EPS = np.finfo(float).eps


@dataclass(frozen=True)
class ScalarObjective:
    evaluate: Callable[[Vector], float]
    gradient: Callable[[Vector], Vector]
    alpha: float
    hessian: Callable[[Vector], Matrix] | None = None

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError(f"convexity parameter must be positive, got {self.alpha}")


@dataclass(frozen=True)
class CertifiedMinimizer:
    x: Vector
    value: float
    gradient_norm: float
    error_radius: float
    iterations: int
    converged: bool


def weighted_objective(problem: ProblemInstance, w) -> ScalarObjective:
    """The scalarization ``sum_i w_i f_i`` with convexity parameter ``sum_i w_i alpha_i``.

    ``w`` is a :class:`~simplicial.pareto.WeightVector` or any length-``m`` sequence
    of non-negative weights. Objectives with zero weight are dropped from the sum,
    so a weight on a face of the simplex yields exactly the subproblem's objective.
    """
    coords = np.asarray(getattr(w, "coordinates", w), dtype=float)
    if coords.shape != (problem.m,):
        raise ValueError(f"expected {problem.m} weights, got shape {coords.shape}")
    if np.any(coords < 0):
        raise ValueError("weights must be non-negative")
    terms = [(float(c), obj) for c, obj in zip(coords, problem.objectives) if c > 0]
    if not terms:
        raise ValueError("weights must not all be zero")
    alpha = sum(c * obj.alpha for c, obj in terms)

    def evaluate(x):
        total = 0.0
        for c, obj in terms:
            total += c * obj.evaluate(x)
        return total

    def gradient(x):
        total = np.zeros(problem.n)
        for c, obj in terms:
            total += c * np.asarray(obj.gradient(x), dtype=float)
        return total

    hessian = None
    if all(obj.hessian is not None for _, obj in terms):

        def hessian(x):
            total = np.zeros((problem.n, problem.n))
            for c, obj in terms:
                total += c * np.atleast_2d(obj.hessian(x))
            return total

    return ScalarObjective(evaluate=evaluate, gradient=gradient, alpha=alpha, hessian=hessian)


def _newton_direction(hess: Matrix, g: Vector) -> Vector | None:
    try:
        d = -np.linalg.solve(hess, g)
    except np.linalg.LinAlgError:
        return None
    if not np.all(np.isfinite(d)) or not g @ d < 0:
        return None
    return d


def minimize(
    objective: ScalarObjective,
    x0: ArrayLike,
    tol_x: float = DEFAULT_TOL_X,
    max_iter: int = DEFAULT_MAX_ITER,
    trace: list[float] | None = None,
) -> CertifiedMinimizer:
    """Minimize a strongly convex function with a certified error radius.

    Takes Newton steps when a Hessian is available and gradient steps otherwise,
    both safeguarded by a halving backtracking search. Gradient steps start from
    length ``1/alpha``, an upper bound on the exact line-search step for an
    ``alpha``-strongly convex function.

    Near the optimum, function differences drop below rounding while the gradient
    is still above the stopping threshold. There a step is also accepted when the
    directional derivative has shrunk by the Armijo factor and the value has not
    increased beyond a few ulps.

    If ``trace`` is given, accepted objective values are appended to it.
    """
    if not tol_x > 0:
        raise ValueError(f"tol_x must be positive, got {tol_x}")
    alpha = objective.alpha
    x = np.array(x0, dtype=float, copy=True)
    fx = float(objective.evaluate(x))
    g = np.asarray(objective.gradient(x), dtype=float)
    gnorm = float(np.linalg.norm(g))
    if trace is not None:
        trace.append(fx)
    threshold = alpha * tol_x

    it = 0
    while gnorm > threshold and it < max_iter:
        d = None
        if objective.hessian is not None:
            d = _newton_direction(np.atleast_2d(objective.hessian(x)), g)
        step = 1.0
        if d is None:
            d = -g
            step = 1.0 / alpha
        slope = float(g @ d)

        accepted = False
        for _ in range(_MAX_HALVINGS):
            x_new = x + step * d
            f_new = float(objective.evaluate(x_new))
            if f_new <= fx + _ARMIJO_C * step * slope:
                accepted = True
            elif f_new <= fx + 4 * _EPS * abs(fx):
                g_try = np.asarray(objective.gradient(x_new), dtype=float)
                if abs(float(g_try @ d)) <= (1 - _ARMIJO_C) * abs(slope):
                    accepted = True
            if accepted:
                break
            step *= 0.5
        if not accepted:
            break

        it += 1
        x, fx = x_new, f_new
        g = np.asarray(objective.gradient(x), dtype=float)
        gnorm = float(np.linalg.norm(g))
        if trace is not None:
            trace.append(fx)

    return CertifiedMinimizer(
        x=x,
        value=fx,
        gradient_norm=gnorm,
        error_radius=gnorm / alpha,
        iterations=it,
        converged=gnorm <= threshold,
    )


def minimize_problem_objectives(
    problem: ProblemInstance, tol_x: float = DEFAULT_TOL_X, x0: Sequence[float] | None = None
) -> list[CertifiedMinimizer]:
    """Certified minimizers of every ``f_i`` separately."""
    start = np.zeros(problem.n) if x0 is None else np.asarray(x0, dtype=float)
    out = []
    for i in range(problem.m):
        w = np.zeros(problem.m)
        w[i] = 1.0
        out.append(minimize(weighted_objective(problem, w), start, tol_x))
    return out
