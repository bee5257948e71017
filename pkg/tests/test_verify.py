from __future__ import annotations

import json
import math
from dataclasses import replace

import numpy as np
import pytest

from simplicial.pareto import WeightVector, sample_pareto, simplex_grid, x_star
from simplicial.perturbation import LinearPerturbation, apply_perturbation
from simplicial.problems import SubsetIndex, catalog_get
from simplicial.verify import (
    CHECK_NAMES,
    SCHEMA_VERSION,
    CheckResult,
    ReportConfig,
    Verdict,
    build_report,
    check_bounding_region,
    check_dominance_consistency,
    check_face_consistency,
    check_holder,
    check_injectivity_f,
    check_injectivity_x_star,
    check_kkt,
    check_rank_condition,
    decide_verdict,
    estimate_K0,
)

TOL = 1e-8


def samples_for(name, params=None, res=10):
    p = catalog_get(name, params)
    return p, sample_pareto(p, simplex_grid(p.m, res), TOL)


def ok(name):
    return CheckResult(name, True, 0.0)


def bad(name, witness=None):
    return CheckResult(name, False, 1.0, witness=witness)


class TestRankCondition:
    def test_example1_full_rank(self):
        p, s = samples_for("example1", {"a": 4.0})
        r = check_rank_condition(s, p.m)
        assert r.passed and r.witness["min_rank"] == r.witness["max_rank"] == 2

    def test_remark3_rank_zero(self):
        p, s = samples_for("remark3_rank_deficient")
        r = check_rank_condition(s, p.m)
        assert not r.passed and r.witness["max_rank"] == 0
        assert not r.witness["rank_exceeds"]

    def test_remark4_segment_rank_one(self):
        p = catalog_get("remark4_identical_norms")
        pi = LinearPerturbation(np.array([[1.0, 0, 0], [0, 0, 0], [0, 0, 0]]), {2, 3})
        s = sample_pareto(apply_perturbation(p, pi), simplex_grid(3, 10), TOL)
        r = check_rank_condition(s, 3)
        assert not r.passed and r.witness["min_rank"] == r.witness["max_rank"] == 1

    def test_rank_exceeds_flagged(self):
        # an off-Pareto point of example1 has full-rank Jacobian
        p = catalog_get("example1", {"a": 1.0})
        s = x_star(p, WeightVector([1, 1, 1]), TOL)
        fake = replace(s, jacobian_rank=3)
        r = check_rank_condition([s, fake], 3)
        assert not r.passed and r.witness["rank_exceeds"]


class TestK0:
    def test_example1_converges_to_two(self):
        values = [estimate_K0(samples_for("example1", {"a": 1.0}, res)[1])[1] for res in (4, 10, 20)]
        assert all(v <= 2.0 + 1e-7 for v in values)
        assert values[-1] == pytest.approx(2.0, abs=1e-7)

    def test_duplicate_sample(self):
        s = x_star(catalog_get("example2"), WeightVector([1, 1]), TOL)
        ks, k0 = estimate_K0([s, s])
        assert k0 == 0.0 and ks == (0.0, 0.0)

    def test_example2_k1(self):
        _, s = samples_for("example2", res=100)
        ks, k0 = estimate_K0(s)
        assert ks[0] == pytest.approx(4.0, abs=1e-7)
        assert ks[1] == pytest.approx(5.0, abs=1e-7)

    def test_too_few(self):
        _, s = samples_for("example2", res=1)
        with pytest.raises(ValueError):
            estimate_K0(s[:1])


class TestHolder:
    def test_example1_analytic(self):
        _, s = samples_for("example1", {"a": 1.0}, 10)
        r = check_holder(s, 2.0, 2.0, TOL)
        assert r.passed and r.worst_case <= 1.0

    def test_identical_weights(self):
        s = x_star(catalog_get("example2"), WeightVector([1, 1]), TOL)
        assert check_holder([s, s], 2.0, 4.0, TOL).worst_case == 0.0

    def test_example2_straddling_half(self):
        p = catalog_get("example2")
        s = [x_star(p, WeightVector([w, 1 - w]), TOL) for w in (0.3, 0.45, 0.5, 0.55, 0.8)]
        assert check_holder(s, 2.0, 4.0, TOL).passed

    def test_underestimated_k0_fails(self):
        _, s = samples_for("example1", {"a": 1.0}, 10)
        assert not check_holder(s, 2.0, 0.5, TOL).passed


class TestInjectivity:
    def test_example1(self):
        _, s = samples_for("example1", {"a": 4.0})
        assert check_injectivity_x_star(s, 10 * TOL).passed
        assert check_injectivity_f(s, 10 * TOL).passed

    def test_remark3_collapses(self):
        _, s = samples_for("remark3_rank_deficient")
        assert not check_injectivity_x_star(s, 10 * TOL).passed

    def test_single_point_vacuous(self):
        _, s = samples_for("example2", res=1)
        assert check_injectivity_x_star(s[:1], 10 * TOL).passed

    def test_duplicate_weights_excluded(self):
        s = x_star(catalog_get("example2"), WeightVector([1, 3]), TOL)
        assert check_injectivity_x_star([s, s], 10 * TOL).passed
        assert check_injectivity_f([s, s], 10 * TOL).passed

    def test_remark4_single_point_f_vacuous(self):
        _, s = samples_for("remark4_identical_norms")
        assert check_injectivity_f(s, 10 * TOL).passed


class TestFaceConsistency:
    def test_example1_pair(self):
        p = catalog_get("example1", {"a": 4.0})
        r = check_face_consistency(p, SubsetIndex([2, 3]), 10, TOL)
        assert r.passed and r.worst_case <= 2 * TOL

    def test_full_set_identical(self):
        p = catalog_get("example1", {"a": 4.0})
        assert check_face_consistency(p, SubsetIndex([1, 2, 3]), 5, TOL).worst_case == 0.0

    def test_example2_vertex(self):
        p = catalog_get("example2")
        sub = p.subproblem(SubsetIndex([1]))
        s = sample_pareto(sub, simplex_grid(1, 5), TOL)
        assert abs(s[0].x[0] - 2.0) <= TOL
        assert check_face_consistency(p, SubsetIndex([1]), 5, TOL, sub_samples=s).passed

    def test_wrong_subproblem_detected(self):
        p = catalog_get("example1", {"a": 4.0})
        other = sample_pareto(p.subproblem(SubsetIndex([1, 2])), simplex_grid(2, 5), TOL)
        r = check_face_consistency(p, SubsetIndex([1, 3]), 5, TOL, sub_samples=other)
        assert not r.passed


class TestOtherChecks:
    @pytest.mark.parametrize("name", ["example1", "example2", "remark3_rank_deficient"])
    def test_kkt(self, name):
        p, s = samples_for(name, {"a": 2.0} if name == "example1" else None)
        assert check_kkt(s, TOL).passed

    def test_kkt_detects_off_optimum(self):
        p = catalog_get("example1", {"a": 1.0})
        s = x_star(p, WeightVector([1, 1, 1]), TOL)
        moved = replace(s, kkt_residual=1e-3)
        assert not check_kkt([s, moved], TOL).passed

    def test_bounding_region(self):
        p, s = samples_for("example2")
        assert check_bounding_region(p, s, TOL).passed

    def test_bounding_region_detects_outlier(self):
        p, s = samples_for("example2")
        far = replace(s[0], x=np.array([50.0]))
        assert not check_bounding_region(p, s + [far], TOL).passed

    def test_dominance(self):
        _, s = samples_for("example1", {"a": 0.25})
        assert check_dominance_consistency(s).passed

    def test_dominance_detects_dominated(self):
        _, s = samples_for("example2")
        worse = replace(s[3], f_values=s[3].f_values + 1.0)
        assert not check_dominance_consistency(s + [worse]).passed


class TestVerdict:
    def test_all_pass(self):
        assert decide_verdict([ok(n) for n in CHECK_NAMES]) is Verdict.CONSISTENT

    def test_only_rank(self):
        checks = [ok(n) for n in CHECK_NAMES if n != "rank_condition"] + [bad("rank_condition")]
        assert decide_verdict(checks) is Verdict.RANK_FAILS

    def test_rank_and_dependent(self):
        checks = [ok(n) for n in CHECK_NAMES if n not in ("rank_condition", "x_star_injectivity")]
        checks += [bad("rank_condition"), bad("x_star_injectivity")]
        assert decide_verdict(checks) is Verdict.RANK_FAILS

    def test_rank_and_other(self):
        checks = [ok(n) for n in CHECK_NAMES if n not in ("rank_condition", "kkt")]
        checks += [bad("rank_condition"), bad("kkt")]
        assert decide_verdict(checks) is Verdict.INCONSISTENT

    def test_other_only(self):
        checks = [ok(n) for n in CHECK_NAMES if n != "holder"] + [bad("holder")]
        assert decide_verdict(checks) is Verdict.INCONSISTENT

    def test_rank_exceeds(self):
        checks = [ok(n) for n in CHECK_NAMES if n != "rank_condition"]
        checks.append(bad("rank_condition", {"rank_exceeds": True}))
        assert decide_verdict(checks) is Verdict.INCONSISTENT


class TestBuildReport:
    @pytest.mark.parametrize("a", [1.0, 4.0, 0.25])
    def test_example1(self, a):
        r = build_report(catalog_get("example1", {"a": a}), ReportConfig(resolution=10))
        assert r.verdict is Verdict.CONSISTENT
        assert len(r.subproblems) == 7
        assert [c.name for c in r.checks] == list(CHECK_NAMES)

    def test_example2(self):
        r = build_report(catalog_get("example2"), ReportConfig(resolution=50))
        assert r.verdict is Verdict.CONSISTENT
        assert "analytic" in r.check("holder").details

    @pytest.mark.parametrize("name", ["remark3_rank_deficient", "remark4_identical_norms"])
    def test_counterexamples(self, name):
        r = build_report(catalog_get(name), ReportConfig(resolution=10))
        assert r.verdict is Verdict.RANK_FAILS
        assert not r.check("rank_condition").passed

    def test_sampled_k0_recorded(self):
        r = build_report(catalog_get("example1", {"a": 4.0}), ReportConfig(resolution=6))
        assert "sampled x 1.5" in r.check("holder").details

    def test_k0_override(self):
        r = build_report(catalog_get("example2"), ReportConfig(resolution=20, k0=4.0))
        assert r.check("holder").passed and "override" in r.check("holder").details

    def test_deterministic_json(self):
        p = catalog_get("example1", {"a": 4.0})
        a = json.dumps(build_report(p, ReportConfig(resolution=6)).to_dict())
        b = json.dumps(build_report(p, ReportConfig(resolution=6)).to_dict())
        assert a == b
        doc = json.loads(a)
        assert doc["schema_version"] == SCHEMA_VERSION == 1
        assert set(doc) >= {"schema_version", "problem", "config", "checks", "verdict"}

    def test_inconclusive_on_solver_failure(self, monkeypatch):
        import simplicial.verify as verify
        from simplicial.pareto import ParetoSamplingError

        def boom(*args, **kwargs):
            raise ParetoSamplingError("forced", [])

        monkeypatch.setattr(verify, "sample_pareto", boom)
        r = verify.build_report(catalog_get("example2"), ReportConfig(resolution=4))
        assert all(c.inconclusive for c in r.checks)
        assert r.verdict is Verdict.INCONSISTENT
        assert math.isnan(r.check("kkt").worst_case)
        json.dumps(r.to_dict())

    @pytest.mark.parametrize(
        "kwargs", [{"resolution": 0}, {"tol_x": 0.0}, {"rank_threshold": 1.0}, {"rank_threshold": 0.0}]
    )
    def test_config_validation(self, kwargs):
        with pytest.raises(ValueError):
            ReportConfig(**kwargs)
