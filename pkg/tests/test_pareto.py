from __future__ import annotations

import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from simplicial.pareto import (
    GridTooLargeError,
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
    weight_path,
    x_star,
)
from simplicial.problems import ProblemInstance, SubsetIndex, catalog_get, separable_quadratic

TOL = 1e-8


def brute_force_lattice(m, r):
    return {
        tuple(Fraction(k, r) for k in ks)
        for ks in itertools.product(range(r + 1), repeat=m)
        if sum(ks) == r
    }


class TestWeightVector:
    def test_normalizes_exactly(self):
        w = WeightVector([1, 1, 1])
        assert sum(w.exact) == 1 and w.exact[0] == Fraction(1, 3)

    def test_support_exact_zeros(self):
        w = WeightVector([0, Fraction(1, 2), Fraction(1, 2)])
        assert w.support == frozenset({2, 3})

    @pytest.mark.parametrize("bad", [[], [0, 0], [-1, 2], [float("nan"), 1]])
    def test_invalid(self, bad):
        with pytest.raises(ValueError):
            WeightVector(bad)

    def test_vertex(self):
        assert WeightVector.vertex(2, 3).exact == (0, 1, 0)

    def test_l1_distance(self):
        assert WeightVector([1, 0]).l1_distance(WeightVector([0, 1])) == 2.0


class TestSimplexGrid:
    def test_m2_r2(self):
        grid = simplex_grid(2, 2)
        assert [w.exact for w in grid] == [(1, 0), (Fraction(1, 2), Fraction(1, 2)), (0, 1)]

    @pytest.mark.parametrize("m,r", [(3, 2), (3, 20), (2, 100), (1, 5), (4, 6), (2, 1)])
    def test_matches_enumeration(self, m, r):
        grid = simplex_grid(m, r)
        assert len(grid) == math.comb(r + m - 1, m - 1)
        assert {w.exact for w in grid} == brute_force_lattice(m, r)

    def test_counts(self):
        assert len(simplex_grid(3, 2)) == 6
        assert len(simplex_grid(3, 20)) == 231
        assert len(simplex_grid(2, 100)) == 101

    def test_lexicographic_order(self):
        grid = simplex_grid(3, 5)
        keys = [w.exact for w in grid]
        assert keys == sorted(keys, reverse=True)

    def test_cap(self):
        with pytest.raises(GridTooLargeError):
            simplex_grid(6, 100, cap=1000)

    @pytest.mark.parametrize("m,r", [(0, 3), (2, 0)])
    def test_invalid(self, m, r):
        with pytest.raises(ValueError):
            simplex_grid(m, r)


class TestFaces:
    def test_vertex_embed(self):
        assert face_embed(SubsetIndex([2]), WeightVector([1]), 3).exact == (0, 1, 0)

    def test_pair_embed(self):
        w = face_embed(SubsetIndex([1, 3]), WeightVector([1, 1]), 3)
        assert w.exact == (Fraction(1, 2), 0, Fraction(1, 2))
        assert w.support <= {1, 3}

    def test_size_mismatch(self):
        with pytest.raises(ValueError):
            face_embed(SubsetIndex([1, 2]), WeightVector([1]), 3)

    @settings(max_examples=100, deadline=None)
    @given(
        m=st.integers(1, 5),
        data=st.data(),
    )
    def test_round_trip(self, m, data):
        members = data.draw(st.lists(st.integers(1, m), min_size=1, unique=True).map(sorted))
        raw = data.draw(
            st.lists(st.integers(0, 9), min_size=len(members), max_size=len(members)).filter(any)
        )
        subset = SubsetIndex(members)
        w_sub = WeightVector(raw)
        embedded = face_embed(subset, w_sub, m)
        assert face_restrict(embedded, subset) == w_sub
        assert embedded.support <= set(members)


class TestNumericalRank:
    def test_zero_matrix(self):
        assert numerical_rank(np.zeros((2, 3)))[0] == 0

    def test_relative_threshold(self):
        a = np.diag([1.0, 1e-10, 0.5])
        assert numerical_rank(a, rtol=1e-8)[0] == 2

    def test_absolute_floor(self):
        a = np.full((2, 1), 1e-14)
        assert numerical_rank(a, rtol=1e-8)[0] == 1
        assert numerical_rank(a, rtol=1e-8, atol=1e-9)[0] == 0


class TestXStar:
    def test_example1_a4(self):
        s = x_star(catalog_get("example1", {"a": 4.0}), WeightVector([1, 1, 0]), TOL)
        np.testing.assert_allclose(s.x, [0.8, 0.5, 0.0], atol=TOL)
        assert s.converged and s.jacobian_rank == 2

    @pytest.mark.parametrize("a", [0.25, 1.0, 4.0, 10.0])
    def test_example1_vertex(self, a):
        s = x_star(catalog_get("example1", {"a": a}), WeightVector.vertex(2, 3), TOL)
        np.testing.assert_allclose(s.x, [0, 1, 0], atol=TOL)

    def test_example2_quarter(self):
        s = x_star(catalog_get("example2"), WeightVector([Fraction(1, 4), Fraction(3, 4)]), TOL)
        assert abs(s.x[0] - 0.5) <= TOL

    def test_sample_fields(self):
        p = catalog_get("example1", {"a": 2.0})
        s = x_star(p, WeightVector([1, 2, 3]), TOL)
        grad = sum(w * obj.gradient(s.x) for w, obj in zip(s.w.coordinates, p.objectives))
        assert s.kkt_residual == pytest.approx(np.linalg.norm(grad), abs=1e-15)
        assert s.kkt_residual <= s.alpha_w * TOL + 1e-9
        assert s.jacobian_rank <= min(p.m, p.n)
        np.testing.assert_array_equal(s.f_values, [o.evaluate(s.x) for o in p.objectives])

    def test_weight_count_mismatch(self):
        with pytest.raises(ValueError):
            x_star(catalog_get("example2"), WeightVector([1, 1, 1]))

    @settings(max_examples=50, deadline=None)
    @given(
        a=st.floats(0.05, 20.0),
        ks=st.lists(st.integers(0, 50), min_size=3, max_size=3).filter(any),
    )
    def test_example1_oracle_property(self, a, ks):
        p = catalog_get("example1", {"a": a})
        s = x_star(p, WeightVector(ks), TOL)
        assert np.linalg.norm(s.x - p.x_star_oracle(s.w.coordinates)) <= TOL


class TestSamplePareto:
    def test_example1_identity(self):
        samples = sample_pareto(catalog_get("example1", {"a": 1.0}), simplex_grid(3, 20), TOL)
        assert len(samples) == 231
        for s in samples:
            np.testing.assert_allclose(s.x, s.w.coordinates, atol=TOL)

    def test_remark3_origin(self):
        samples = sample_pareto(catalog_get("remark3_rank_deficient"), simplex_grid(2, 10), TOL)
        assert all(abs(s.x[0]) <= TOL for s in samples)
        assert {s.jacobian_rank for s in samples} == {0}

    def test_single_objective(self):
        p = ProblemInstance((separable_quadratic([1, 2], [3, -1]),), n=2, name="single")
        samples = sample_pareto(p, simplex_grid(1, 4), TOL)
        assert len(samples) == 1
        np.testing.assert_allclose(samples[0].x, [3, -1], atol=TOL)

    def test_empty_grid(self):
        with pytest.raises(ValueError):
            sample_pareto(catalog_get("example2"), [])

    def test_strict_failure_carries_samples(self, monkeypatch):
        import simplicial.pareto as pareto

        monkeypatch.setattr(pareto, "minimize", lambda obj, x0, tol, **kw: _unconverged(x0))
        with pytest.raises(ParetoSamplingError) as exc:
            pareto.sample_pareto(catalog_get("example2"), simplex_grid(2, 3), TOL)
        assert len(exc.value.samples) == 4
        loose = pareto.sample_pareto(catalog_get("example2"), simplex_grid(2, 3), TOL, strict=False)
        assert not any(s.converged for s in loose)

    def test_deterministic(self):
        p = catalog_get("example2")
        a = sample_pareto(p, simplex_grid(2, 30), TOL)
        b = sample_pareto(p, simplex_grid(2, 30), TOL)
        assert all(s.x.tobytes() == t.x.tobytes() for s, t in zip(a, b))

    def test_surjectivity_probe(self):
        p = catalog_get("example1", {"a": 4.0})
        samples = sample_pareto(p, simplex_grid(3, 20), TOL)
        xs = np.array([s.x for s in samples])
        # every closed-form Pareto point on the same lattice has a sampled point within tolerance
        for w in simplex_grid(3, 20):
            target = p.x_star_oracle(w.coordinates)
            assert np.min(np.linalg.norm(xs - target, axis=1)) <= 1e-6


def _unconverged(x0):
    from simplicial.solver import CertifiedMinimizer

    return CertifiedMinimizer(x=np.asarray(x0, float), value=0.0, gradient_norm=1.0,
                              error_radius=1.0, iterations=0, converged=False)


class TestBoundingRegion:
    def test_example1_a1(self):
        r = bounding_region(catalog_get("example1", {"a": 1.0}), TOL)
        for c, e in zip(r.centers, np.eye(3)):
            np.testing.assert_allclose(c, e, atol=TOL)
        np.testing.assert_allclose(r.radii, [0.0, math.sqrt(2), math.sqrt(2)], atol=1e-7)
        assert r.radii[0] >= 0.0

    def test_single_objective_is_point(self):
        p = ProblemInstance((separable_quadratic([1.0], [2.0]),), n=1, name="single")
        r = bounding_region(p, TOL)
        assert r.radii == (0.0,)
        assert r.contains(np.array([2.0]), slack=1e-9)
        assert not r.contains(np.array([2.1]), slack=1e-9)

    @pytest.mark.parametrize(
        "name,params",
        [("example1", {"a": 4.0}), ("example1", {"a": 0.25}), ("example2", None),
         ("remark3_rank_deficient", None), ("remark4_identical_norms", None)],
    )
    def test_contains_samples(self, name, params):
        p = catalog_get(name, params)
        r = bounding_region(p, TOL)
        for s in sample_pareto(p, simplex_grid(p.m, 12), TOL):
            assert r.contains(s.x, slack=1e-9)

    def test_reference_index(self):
        p = catalog_get("example1", {"a": 1.0})
        with pytest.raises(ValueError):
            bounding_region(p, TOL, reference_index=4)
        r = bounding_region(p, TOL, reference_index=2)
        assert r.radii[1] == pytest.approx(0.0, abs=1e-7)


class TestDominance:
    def test_basic(self):
        assert dominance_filter([(0, 1), (1, 0), (1, 1)]) == {0, 1}

    def test_singleton(self):
        assert dominance_filter([(0, 0)]) == {0}
        assert weak_dominance_filter([(0, 0)]) == {0}

    def test_tie(self):
        pts = [(0, 1), (0, 2)]
        assert weak_dominance_filter(pts) == {0, 1}
        assert dominance_filter(pts) == {0}

    def test_both_definitions(self):
        assert dominance_filter([(0, 0), (1, 1)]) == {0}
        assert weak_dominance_filter([(0, 0), (1, 1)]) == {0}

    def test_empty(self):
        assert dominance_filter([]) == set()

    def test_example1_images_retained(self):
        samples = sample_pareto(catalog_get("example1", {"a": 4.0}), simplex_grid(3, 20), TOL)
        images = [s.f_values for s in samples]
        assert dominance_filter(images) == set(range(231)) == weak_dominance_filter(images)

    @settings(max_examples=200, deadline=None)
    @given(
        st.integers(1, 4).flatmap(
            lambda m: st.lists(
                st.lists(st.integers(-3, 3), min_size=m, max_size=m), min_size=0, max_size=25
            )
        )
    )
    def test_strict_subset_of_weak(self, pts):
        strict = dominance_filter(pts)
        weak = weak_dominance_filter(pts)
        assert strict <= weak
        # brute-force cross-check of the strict definition
        for i, p in enumerate(pts):
            dominated = any(
                all(a <= b for a, b in zip(q, p)) and any(a < b for a, b in zip(q, p))
                for q in pts
            )
            assert (i in strict) == (not dominated)


class TestDifferenceQuotients:
    def test_example2_kink(self):
        q = path_difference_quotients(
            catalog_get("example2"), WeightVector([0, 1]), WeightVector([1, 0]), 0.5, 1e-4
        )
        assert abs(q.right[0] - 4 / 3) <= 1e-2
        assert abs(q.left[0] - 2) <= 1e-2

    def test_example1_smooth_edge(self):
        q = path_difference_quotients(
            catalog_get("example1", {"a": 1.0}), WeightVector([0, 1, 0]), WeightVector([1, 0, 0]),
            0.3, 1e-4,
        )
        np.testing.assert_allclose(q.right, q.left, atol=1e-5)
        np.testing.assert_allclose(q.right, [1, -1, 0], atol=1e-5)

    def test_endpoint_one_sided(self):
        q = path_difference_quotients(
            catalog_get("example2"), WeightVector([0, 1]), WeightVector([1, 0]), 0.0, 1e-3
        )
        assert q.left is None and q.right is not None

    @pytest.mark.parametrize("h", [0.0, -1e-3])
    def test_nonpositive_step(self, h):
        with pytest.raises(ValueError):
            path_difference_quotients(
                catalog_get("example2"), WeightVector([0, 1]), WeightVector([1, 0]), 0.5, h
            )

    def test_weight_path(self):
        w = weight_path(WeightVector([1, 0]), WeightVector([0, 1]), 0.25)
        assert w.exact == (Fraction(3, 4), Fraction(1, 4))
        with pytest.raises(ValueError):
            weight_path(WeightVector([1, 0]), WeightVector([0, 1]), 1.5)
