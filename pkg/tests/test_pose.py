import numpy as np
import pytest

from sprkit.errors import ContractError
from sprkit.pose import (Pose, PoseError, UnitQuaternion, aggregate_errors,
                         compose, inverse, pose_error, pose_from_csv_row,
                         pose_to_csv_row, quat_exp, quat_log, relative)


def random_quat(rng) -> UnitQuaternion:
    v = rng.normal(size=4)
    v /= np.linalg.norm(v)
    return UnitQuaternion(v[0], tuple(v[1:]))


def random_pose(rng) -> Pose:
    return Pose(tuple(rng.normal(scale=5.0, size=3)), random_quat(rng))


def pose_close(a: Pose, b: Pose, tol=1e-9) -> bool:
    dt = np.linalg.norm(a.t_array() - b.t_array())
    dq = min(np.linalg.norm(a.q.as_array() - b.q.as_array()),
             np.linalg.norm(a.q.as_array() + b.q.as_array()))
    return dt < tol and dq < tol


class TestUnitQuaternion:
    def test_canonical_sign_enforced(self):
        q = UnitQuaternion(-0.5, (0.5, 0.5, 0.5))
        assert q.u >= 0.0

    def test_norm_checked(self):
        with pytest.raises(ContractError):
            UnitQuaternion(1.0, (1.0, 0.0, 0.0))

    def test_rotate_matches_matrix(self, rng):
        for _ in range(100):
            q = random_quat(rng)
            p = rng.normal(size=3)
            np.testing.assert_allclose(q.rotate(p), q.rotation_matrix() @ p,
                                       atol=1e-12)


class TestQuatLog:
    def test_identity_maps_to_zero(self):
        w = quat_log(UnitQuaternion.identity())
        np.testing.assert_array_equal(w, np.zeros(3))

    def test_half_turn_about_z(self):
        # arccos(0) = pi/2 for the 180-degree rotation about z.
        w = quat_log(UnitQuaternion(0.0, (0.0, 0.0, 1.0)))
        np.testing.assert_allclose(w, [0.0, 0.0, np.pi / 2], atol=1e-12)

    def test_quarter_turn_about_x(self):
        c = np.cos(np.pi / 4)
        w = quat_log(UnitQuaternion(c, (c, 0.0, 0.0)))
        np.testing.assert_allclose(w, [np.pi / 4, 0.0, 0.0], atol=1e-12)

    def test_log_norm_bounded_for_canonical(self, rng):
        for _ in range(500):
            w = quat_log(random_quat(rng))
            assert np.linalg.norm(w) <= np.pi / 2 + 1e-9


class TestQuatExp:
    def test_zero_gives_identity(self):
        q = quat_exp(np.zeros(3))
        assert q.u == 1.0 and q.v == (0.0, 0.0, 0.0)

    def test_quarter_turn(self):
        q = quat_exp([np.pi / 2, 0.0, 0.0])
        np.testing.assert_allclose([q.u, *q.v], [0.0, 1.0, 0.0, 0.0], atol=1e-12)

    def test_roundtrip_thousand_quats(self, rng):
        worst = 0.0
        for _ in range(1000):
            q = random_quat(rng)
            back = quat_exp(quat_log(q))
            dev = min(np.linalg.norm(back.as_array() - q.as_array()),
                      np.linalg.norm(back.as_array() + q.as_array()))
            worst = max(worst, dev)
        assert worst < 1e-9


class TestGroupLaws:
    def test_compose_with_identity(self, rng):
        p = random_pose(rng)
        assert pose_close(compose(p, Pose.identity()), p)
        assert pose_close(compose(Pose.identity(), p), p)

    def test_translations_add(self):
        a = Pose((1.0, 2.0, 3.0), UnitQuaternion.identity())
        b = Pose((0.5, -1.0, 2.0), UnitQuaternion.identity())
        assert pose_close(compose(a, b), Pose((1.5, 1.0, 5.0), UnitQuaternion.identity()))

    def test_associativity(self, rng):
        for _ in range(1000):
            a, b, c = (random_pose(rng) for _ in range(3))
            assert pose_close(compose(compose(a, b), c), compose(a, compose(b, c)))

    def test_inverse_identity(self):
        assert pose_close(inverse(Pose.identity()), Pose.identity())

    def test_inverse_of_translation(self):
        p = Pose((1.0, -2.0, 0.5), UnitQuaternion.identity())
        assert pose_close(inverse(p), Pose((-1.0, 2.0, -0.5), UnitQuaternion.identity()))

    def test_compose_inverse_is_identity(self, rng):
        for _ in range(1000):
            p = random_pose(rng)
            assert pose_close(compose(p, inverse(p)), Pose.identity())
            assert pose_close(inverse(inverse(p)), p)


class TestRelative:
    def test_relative_to_self_is_identity(self, rng):
        p = random_pose(rng)
        assert pose_close(relative(p, p), Pose.identity())

    def test_identity_origin_passthrough(self, rng):
        p = random_pose(rng)
        assert pose_close(relative(Pose.identity(), p), p)

    def test_defining_identity(self, rng):
        for _ in range(200):
            origin, query = random_pose(rng), random_pose(rng)
            assert pose_close(compose(origin, relative(origin, query)), query)


class TestPoseError:
    def test_identical_poses(self, rng):
        p = random_pose(rng)
        err = pose_error(p, p)
        assert err.te == 0.0 and err.re < 1e-9

    def test_sign_invariance(self, rng):
        p = random_pose(rng)
        arr = p.q.as_array()
        flipped = Pose(p.t, UnitQuaternion.from_wxyz(-arr))
        err = pose_error(p, flipped)
        assert err.re < 1e-9

    def test_half_turn_is_180_degrees(self):
        a = Pose((0.0, 0.0, 0.0), UnitQuaternion.identity())
        b = Pose((0.0, 0.0, 0.0), UnitQuaternion(0.0, (0.0, 0.0, 1.0)))
        assert pose_error(a, b).re == pytest.approx(180.0)

    def test_symmetry_and_zero_diagonal(self, rng):
        for _ in range(100):
            a, b = random_pose(rng), random_pose(rng)
            ab, ba = pose_error(a, b), pose_error(b, a)
            assert ab.re == pytest.approx(ba.re, abs=1e-9)
            assert ab.te == pytest.approx(ba.te, abs=1e-9)


class TestAggregate:
    def test_single_element(self):
        e = PoseError(1.5, 20.0)
        assert aggregate_errors([e], "median") == e

    def test_median_robust_to_outlier(self):
        errs = [PoseError(1.0, 1.0), PoseError(2.0, 2.0), PoseError(100.0, 90.0)]
        assert aggregate_errors(errs, "median").te == 2.0

    def test_mean(self):
        errs = [PoseError(1.0, 3.0), PoseError(2.0, 2.0), PoseError(3.0, 1.0)]
        agg = aggregate_errors(errs, "mean")
        assert agg.te == 2.0 and agg.re == 2.0

    def test_even_count_median_is_midpoint(self):
        errs = [PoseError(1.0, 0.0), PoseError(3.0, 0.0)]
        assert aggregate_errors(errs, "median").te == 2.0

    def test_empty_rejected(self):
        with pytest.raises(ContractError):
            aggregate_errors([], "median")


class TestCsv:
    def test_roundtrip_17_digits(self, rng):
        for _ in range(50):
            p = random_pose(rng)
            row = pose_to_csv_row(p)
            assert len(row.split(",")) == 7
            back = pose_from_csv_row(row)
            assert pose_close(back, p, tol=1e-15)
