"""
Tests for the phase-one simplex and the zero-membership certificates.
"""
import numpy as np
import pytest

from src.geometry.membership import (
    Verdict,
    cone_contains,
    cones_equal,
    contains_zero,
    distance_to_origin,
)
from src.geometry.polytope import PolyhedralCone, Polytope
from src.geometry.simplex import LPStatus, solve_lp
from src.nsdp.exceptions import DimensionMismatchError, IllConditionedError

LINE = PolyhedralCone.zero(1)


def point(*values):
    return Polytope.singleton(values)


def reconstruct(parts, cone, certificate):
    total = np.zeros(cone.dimension)
    for part, weights in zip(parts, certificate.witness.part_weights):
        total += np.asarray(weights) @ part.matrix
    if cone.rays:
        total += np.asarray(certificate.witness.ray_weights) @ cone.matrix
    return total


def random_instance(rng):
    dim = int(rng.integers(1, 5))
    parts = [
        Polytope.from_points(
            rng.normal(loc=rng.normal(scale=0.7, size=dim), size=(int(rng.integers(1, 5)), dim))
        )
        for _ in range(int(rng.integers(1, 4)))
    ]
    rays = rng.normal(size=(int(rng.integers(0, 3)), dim))
    return parts, PolyhedralCone.from_rays(rays, dimension=dim)


class TestSolveLP:
    def test_optimal(self):
        """min x1 + 2 x2 with x1 + x2 = 1 picks x1 = 1."""
        result = solve_lp([1.0, 2.0], np.array([[1.0, 1.0]]), [1.0])
        assert result.status == LPStatus.OPTIMAL
        assert result.objective == pytest.approx(1.0)
        assert result.x == pytest.approx([1.0, 0.0])

    def test_infeasible_farkas(self):
        """x >= 0 with x = -1 is infeasible and the certificate proves it."""
        A = np.array([[1.0]])
        result = solve_lp([0.0], A, [-1.0])
        assert result.status == LPStatus.INFEASIBLE
        assert float(A.T @ result.duals) <= 1e-9
        assert float(np.dot([-1.0], result.duals)) > 0.0

    def test_unbounded(self):
        """min -x1 with x1 - x2 = 0 is unbounded."""
        result = solve_lp([-1.0, 0.0], np.array([[1.0, -1.0]]), [0.0])
        assert result.status == LPStatus.UNBOUNDED

    def test_redundant_rows(self):
        """A repeated row leaves a zero artificial in the basis; the primal still solves A x = b."""
        A = np.array([[1.0, 1.0, 0.0], [2.0, 2.0, 0.0], [0.0, 1.0, 1.0]])
        b = np.array([1.0, 2.0, 0.5])
        result = solve_lp([1.0, 0.0, 0.0], A, b)
        assert result.status == LPStatus.OPTIMAL
        assert np.all(np.asarray(result.x) >= 0.0)
        assert A @ np.asarray(result.x) == pytest.approx(b, abs=1e-12)
        assert result.objective == pytest.approx(0.5)

    def test_shape_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            solve_lp([1.0, 1.0], np.array([[1.0, 1.0]]), [1.0, 2.0])


class TestContainsZero:
    def test_opposite_points(self):
        """{1} + {-1} contains 0 with unit weights."""
        parts = [point(1.0), point(-1.0)]
        certificate = contains_zero(parts, LINE)
        assert certificate.verdict == Verdict.MEMBER
        assert [w[0] for w in certificate.witness.part_weights] == pytest.approx([1.0, 1.0])

    def test_shifted_half_line(self):
        """[2, 3] + cone(+1) misses 0 and h = -1 separates."""
        cone = PolyhedralCone.from_rays([[1.0]], dimension=1)
        certificate = contains_zero([Polytope.from_points([[2.0], [3.0]])], cone)
        assert certificate.verdict == Verdict.NON_MEMBER
        assert certificate.separator == pytest.approx((-1.0,))
        assert certificate.scale == pytest.approx(3.0)
        assert certificate.margin == pytest.approx(2.0 / 3.0)

    def test_cone_reaches_origin(self):
        """[2, 3] + cone(-1) contains 0."""
        cone = PolyhedralCone.from_rays([[-1.0]], dimension=1)
        assert contains_zero([Polytope.from_points([[2.0], [3.0]])], cone).is_member

    def test_no_parts(self):
        """The cone alone always contains 0."""
        assert contains_zero([], PolyhedralCone.zero(2)).is_member

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            contains_zero([point(1.0, 2.0)], LINE)

    def test_huge_generators(self):
        with pytest.raises(IllConditionedError):
            contains_zero([point(1e13)], LINE)

    def test_random_certificates(self):
        """Witnesses reconstruct 0 and separators have positive margin on random instances."""
        rng = np.random.default_rng(5)
        for _ in range(200):
            parts, cone = random_instance(rng)
            certificate = contains_zero(parts, cone)
            if certificate.is_member:
                assert np.max(np.abs(reconstruct(parts, cone, certificate))) <= 1e-9
                assert distance_to_origin(parts, cone) <= 1e-8
            else:
                h = np.asarray(certificate.separator)
                assert np.max(np.abs(h)) == pytest.approx(1.0)
                assert sum(part.support(h) for part in parts) < 0.0
                assert all(float(np.dot(r, h)) <= 1e-9 for r in cone.rays)
                assert certificate.margin > 0.0
                assert distance_to_origin(parts, cone) > 0.0

    @pytest.mark.parametrize("factor", [1e-6, 1.0, 1e6])
    def test_scale_invariant_verdicts(self, factor):
        """Rescaling every generator leaves the verdict of each random instance unchanged."""
        rng = np.random.default_rng(11)
        for _ in range(100):
            parts, cone = random_instance(rng)
            expected = contains_zero(parts, cone).verdict
            certificate = contains_zero([scaled(part, factor) for part in parts], cone)
            assert certificate.verdict == expected
            if certificate.is_member:
                total = reconstruct([scaled(p, factor) for p in parts], cone, certificate)
                assert np.max(np.abs(total)) <= 2e-9 * certificate.scale

    def test_tiny_segment(self):
        """[-2e-9, -1e-9] misses 0 and h = +1 separates after normalization."""
        certificate = contains_zero([hull(-2e-9, -1e-9)], LINE)
        assert certificate.verdict == Verdict.NON_MEMBER
        assert certificate.separator == pytest.approx((1.0,))
        assert certificate.scale == pytest.approx(2e-9)
        assert certificate.margin == pytest.approx(0.5)

    def test_tiny_sum(self):
        """[-2e-9, -1e-9] + [-3e-9, 0.9e-9] misses 0 by 1e-10."""
        certificate = contains_zero([hull(-2e-9, -1e-9), hull(-3e-9, 0.9e-9)], LINE)
        assert certificate.verdict == Verdict.NON_MEMBER
        assert certificate.separator == pytest.approx((1.0,))
        assert certificate.margin == pytest.approx(1.0 / 30.0)

    def test_tiny_sum_touching_origin(self):
        """[-2e-9, -1e-9] + [-3e-9, 1e-9] contains 0 at the shared endpoint."""
        parts = [hull(-2e-9, -1e-9), hull(-3e-9, 1e-9)]
        certificate = contains_zero(parts, LINE)
        assert certificate.is_member
        assert abs(float(reconstruct(parts, LINE, certificate)[0])) <= 1e-18

    def test_small_generators_give_sound_separators(self):
        """Separators found on generators of size 1e-9 to 1e-7 hold for the original data."""
        rng = np.random.default_rng(17)
        for _ in range(150):
            parts, cone = random_instance(rng)
            size = 10.0 ** rng.uniform(-9.0, -7.0)
            parts = [scaled(part, size) for part in parts]
            certificate = contains_zero(parts, cone)
            if certificate.is_member:
                continue
            h = np.asarray(certificate.separator)
            assert np.max(np.abs(h)) == pytest.approx(1.0)
            assert sum(part.support(h) for part in parts) / certificate.scale <= -1e-9 + 1e-12
            for ray in cone.rays:
                assert float(np.dot(np.asarray(ray) / np.linalg.norm(ray), h)) <= 1e-9

    def test_sampled_sum_points(self):
        """Every sampled point of a separated sum lies strictly on one side."""
        rng = np.random.default_rng(9)
        parts = [Polytope.from_points(rng.uniform(1.0, 2.0, (4, 2))) for _ in range(3)]
        cone = PolyhedralCone.zero(2)
        certificate = contains_zero(parts, cone)
        assert certificate.verdict == Verdict.NON_MEMBER
        h = np.asarray(certificate.separator)
        for _ in range(200):
            total = sum(rng.dirichlet(np.ones(len(p.generators))) @ p.matrix for p in parts)
            assert float(total @ h) < 0.0


class TestDistanceToOrigin:
    def test_point(self):
        """dist({3}) = 3."""
        assert distance_to_origin([point(3.0)], LINE) == pytest.approx(3.0)

    def test_segment(self):
        """dist([-1, 1]) = 0."""
        assert distance_to_origin([Polytope.from_points([[-1.0], [1.0]])], LINE) == pytest.approx(
            0.0
        )

    def test_l1_norm(self):
        """The residual is measured in the ℓ¹ norm."""
        assert distance_to_origin([point(1.0, -2.0)], PolyhedralCone.zero(2)) == pytest.approx(3.0)

    def test_bound_must_be_positive(self):
        with pytest.raises(ValueError):
            distance_to_origin([point(1.0)], LINE, bound=0.0)


class TestCones:
    def test_cone_contains(self):
        cone = PolyhedralCone.from_rays([[1.0, 0.0], [0.0, 1.0]], dimension=2)
        assert cone_contains(cone, [2.0, 3.0])
        assert not cone_contains(cone, [-1.0, 0.5])
        assert cone_contains(PolyhedralCone.zero(2), [0.0, 0.0])

    def test_cones_equal(self):
        first = PolyhedralCone.from_rays([[1.0, 0.0], [0.0, 1.0]], dimension=2)
        second = PolyhedralCone.from_rays([[2.0, 0.0], [0.0, 3.0], [1.0, 1.0]], dimension=2)
        assert cones_equal(first, second)
        assert not cones_equal(first, PolyhedralCone.from_rays([[1.0, 0.0]], dimension=2))
