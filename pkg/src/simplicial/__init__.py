"""Sampling and falsification checks for simplicial multi-objective problems."""

from __future__ import annotations

from .pareto import (
    BoundingRegion,
    ParetoSample,
    ParetoSamplingError,
    WeightVector,
    bounding_region,
    dominance_filter,
    face_embed,
    face_restrict,
    numerical_rank,
    path_difference_quotients,
    sample_pareto,
    simplex_grid,
    weak_dominance_filter,
    x_star,
)
from .perturbation import (
    GenericityStats,
    LinearPerturbation,
    apply_perturbation,
    genericity_experiment,
    sample_perturbation,
    segment_check,
)
from .problems import (
    ObjectiveSpec,
    ProblemInstance,
    SubsetIndex,
    catalog_get,
    catalog_names,
)
from .solver import CertifiedMinimizer, ScalarObjective, minimize, weighted_objective
from .verify import CheckResult, ReportConfig, SimplicialityReport, Verdict, build_report

__version__ = "0.1.0"

__all__ = [
    "BoundingRegion", "CertifiedMinimizer", "CheckResult", "GenericityStats",
    "LinearPerturbation", "ObjectiveSpec", "ParetoSample", "ParetoSamplingError",
    "ProblemInstance", "ReportConfig", "ScalarObjective", "SimplicialityReport",
    "SubsetIndex", "Verdict", "WeightVector", "apply_perturbation", "bounding_region",
    "build_report", "catalog_get", "catalog_names", "dominance_filter", "face_embed",
    "face_restrict", "genericity_experiment", "minimize", "numerical_rank",
    "path_difference_quotients", "sample_pareto", "sample_perturbation", "segment_check",
    "simplex_grid", "weak_dominance_filter", "weighted_objective", "x_star",
]
