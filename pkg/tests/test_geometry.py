import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import anisotropic_cloud, random_rotation
from struct2func.geometry import (
    PLANES, DegenerateCloud, NonPositiveResolution, PointCloud, QuadrantCloud, check_extent,
    merge_quadrants, normalize_resolution, octant_ids, principal_tilt, project, split_quadrants)


class TestResolution:
    def test_examples(self):
        assert normalize_resolution([[2.0, 4.0, 6.0]], 2.0, 2.25).tolist() == [[2.25, 4.5, 6.75]]
        # a structure at the reference resolution keeps its coordinates
        np.testing.assert_allclose(normalize_resolution([[1, 2, 3]], 2.25), [[1, 2, 3]])

    @pytest.mark.parametrize("bad", [0.0, -1.0, float("nan")])
    def test_rejects_non_positive(self, bad):
        with pytest.raises(NonPositiveResolution):
            normalize_resolution([[0, 0, 0]], bad)

    @given(st.floats(0.3, 10), st.floats(0.3, 10))
    def test_linear(self, r1, r2):
        p = np.array([[1.0, -2.0, 3.0]])
        ratio = normalize_resolution(p, r1) / normalize_resolution(p, r2)
        np.testing.assert_allclose(ratio, r2 / r1, rtol=1e-12)


class TestTilt:
    def test_covariance_becomes_diagonal(self, rng):
        pts = anisotropic_cloud(rng, 400) @ random_rotation(rng).T + 12.0
        t = principal_tilt(PointCloud(pts))
        X = t.rotated.points
        np.testing.assert_allclose(X.mean(axis=0), 0, atol=1e-9)
        cov = X.T @ X
        off = cov - np.diag(np.diag(cov))
        assert np.abs(off).max() < 1e-8 * np.abs(cov).max()
        np.testing.assert_allclose(np.diag(cov), t.eigenvalues, rtol=1e-9)
        assert t.eigenvalues[0] >= t.eigenvalues[1] >= t.eigenvalues[2]

    def test_basis_orthonormal(self, rng):
        t = principal_tilt(PointCloud(anisotropic_cloud(rng, 100)))
        np.testing.assert_allclose(t.basis.T @ t.basis, np.eye(3), atol=1e-12)

    def test_sign_convention(self, rng):
        t = principal_tilt(PointCloud(anisotropic_cloud(rng, 200)))
        cubes = (t.rotated.points ** 3).sum(axis=0)
        assert (cubes >= 0).all()

    @settings(max_examples=30)
    @given(st.integers(0, 2**31 - 1))
    def test_rotation_invariance(self, seed):
        rng = np.random.default_rng(seed)
        pts = anisotropic_cloud(rng, 60, ratio=2.0)
        R = random_rotation(rng)
        a = principal_tilt(PointCloud(pts)).rotated.points
        b = principal_tilt(PointCloud(pts @ R.T + rng.normal(size=3))).rotated.points
        np.testing.assert_allclose(a, b, atol=1e-6)

    def test_degenerate(self):
        with pytest.raises(DegenerateCloud):
            principal_tilt(PointCloud([[i, 2 * i, 0] for i in range(5)]))
        with pytest.raises(DegenerateCloud):
            principal_tilt(PointCloud([[0, 0, 0], [1, 1, 1]]))

    def test_payload_follows_points(self, rng):
        pts = anisotropic_cloud(rng, 20)
        t = principal_tilt(PointCloud(pts, np.arange(20)[::-1]))
        assert t.rotated.payload.tolist() == list(range(19, -1, -1))


class TestQuadrants:
    def test_octant_examples(self):
        assert octant_ids(np.array([[1, 1, 1], [-1, 1, 1], [1, -1, 1], [-1, -1, -1], [0, 0, 0]])).tolist() \
            == [0, 1, 2, 7, 0]

    def test_reflection(self):
        qs = split_quadrants(PointCloud([[-1.0, 2.0, -3.0]]))
        (q,) = [q for q in qs if len(q)]
        assert q.octant_id == 5
        assert q.points.tolist() == [[1.0, 2.0, 3.0]]
        assert q.signs.tolist() == [-1.0, 1.0, -1.0]

    @given(st.lists(st.tuples(*[st.floats(-60, 60, allow_nan=False)] * 3), min_size=1, max_size=40))
    def test_partition_round_trip(self, pts):
        cloud = PointCloud(pts)
        qs = split_quadrants(cloud)
        assert len(qs) == 8 and sum(len(q) for q in qs) == len(pts)
        assert sorted(np.concatenate([q.payload for q in qs]).tolist()) == list(range(len(pts)))
        assert all((q.points >= 0).all() for q in qs)
        back = merge_quadrants(qs)
        np.testing.assert_allclose(back.points, cloud.points)


class TestProjection:
    def test_three_planes(self):
        q = QuadrantCloud(0, np.array([[1.0, 2.0, 3.0]]), np.array([0]), clearance=5.0)
        got = {p.plane: p.coords.tolist() for p in project(q)}
        assert tuple(got) == PLANES
        assert got == {"xy": [[6.0, 7.0]], "yz": [[7.0, 8.0]], "xz": [[6.0, 8.0]]}

    def test_extent(self):
        q = QuadrantCloud(0, np.array([[122.9, 0, 0]]), np.array([0]), clearance=5.0)
        assert check_extent(q).ok
        q = QuadrantCloud(0, np.array([[0, 123.0, 0]]), np.array([0]), clearance=5.0)
        c = check_extent(q)
        assert not c.ok and c.axis == "y" and c.extent == 129 and str(c) == "Oversize(y, 129)"

    def test_empty_quadrant_ok(self):
        assert check_extent(QuadrantCloud(3, np.zeros((0, 3)), np.zeros(0, dtype=int))).ok
