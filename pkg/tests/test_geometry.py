import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from semfuse.errors import EmptyTrack, FormatError, InvalidParameter, TimestampOutOfRange
from semfuse.geometry import (
    OdometryTrack,
    RigidTransform,
    StampedPose,
    apply,
    compose,
    ego_motion_between,
    interpolate,
    invert,
    read_odometry_csv,
    write_odometry_csv,
)

from conftest import points, random_transform, transforms

I = RigidTransform.identity()


def close(a, b, tol=1e-12):
    return np.abs(a.as_matrix() - b.as_matrix()).max() <= tol


def test_compose_identity(rng):
    t = random_transform(rng)
    assert close(compose(I, t), t)
    assert close(compose(t, I), t)


def test_compose_with_inverse(rng):
    t = random_transform(rng)
    assert close(compose(t, invert(t)), I)


def test_compose_rotation_after_translation():
    t = compose(RigidTransform.rot_z(90, degrees=True), RigidTransform.from_translation(1, 0, 0))
    np.testing.assert_allclose(apply(t, np.zeros(3)), [0, 1, 0], atol=1e-12)


def test_invert_identity_and_translation():
    assert close(invert(I), I)
    assert close(invert(RigidTransform.from_translation(1, 2, 3)), RigidTransform.from_translation(-1, -2, -3))


def test_invert_round_trip_random(rng):
    for _ in range(100):
        t = random_transform(rng)
        p = rng.uniform(-50, 50, 3)
        np.testing.assert_allclose(apply(invert(t), apply(t, p)), p, atol=1e-12)
        assert close(compose(invert(t), t), I)


def test_apply_examples():
    np.testing.assert_array_equal(apply(I, [1, 2, 3]), [1, 2, 3])
    np.testing.assert_array_equal(apply(RigidTransform.from_translation(0, 0, 5), np.zeros(3)), [0, 0, 5])
    np.testing.assert_allclose(apply(RigidTransform.rot_z(np.pi / 2), [1, 0, 0]), [0, 1, 0], atol=1e-12)


def test_apply_batch_matches_single(rng):
    t = random_transform(rng)
    pts = rng.normal(size=(20, 3))
    batch = apply(t, pts)
    for p, q in zip(pts, batch):
        np.testing.assert_allclose(apply(t, p), q, atol=0)


def test_rejects_improper_rotation():
    with pytest.raises(InvalidParameter):
        RigidTransform(np.diag([1.0, 1.0, -1.0]), np.zeros(3))
    with pytest.raises(InvalidParameter):
        RigidTransform(np.eye(3) * 1.01, np.zeros(3))
    with pytest.raises(InvalidParameter):
        RigidTransform(np.eye(3), [np.nan, 0, 0])


def test_matrix_round_trip(rng):
    t = random_transform(rng)
    assert close(RigidTransform.from_matrix(t.as_matrix().ravel().tolist()), t, 0)
    with pytest.raises(InvalidParameter):
        RigidTransform.from_matrix(np.ones(16))


@given(transforms())
def test_inverse_property(t):
    assert close(compose(t, invert(t)), I)
    assert close(compose(invert(t), t), I)


@given(transforms(), points, points)
def test_apply_preserves_distance(t, p, q):
    d0 = np.linalg.norm(p - q)
    d1 = np.linalg.norm(apply(t, p) - apply(t, q))
    assert abs(d0 - d1) <= 1e-9


@given(st.lists(transforms(scale=1.0), min_size=2, max_size=40))
def test_long_compose_chain_stays_orthonormal(chain):
    acc = I
    for t in chain:
        acc = compose(acc, t)
    r = acc.rotation
    assert np.abs(r.T @ r - np.eye(3)).max() <= 1e-9
    assert abs(np.linalg.det(r) - 1) <= 1e-9


def two_pose_track():
    return OdometryTrack([StampedPose(0.0, I), StampedPose(1.0, RigidTransform.from_translation(1, 0, 0))])


def test_ego_motion_same_time_is_identity():
    track = two_pose_track()
    assert close(ego_motion_between(track, 0.3, 0.3, "interpolated"), I, 0)


def test_ego_motion_interpolated_midpoint():
    m = ego_motion_between(two_pose_track(), 0.0, 0.5, "interpolated")
    assert close(m, RigidTransform.from_translation(0.5, 0, 0))


def test_ego_motion_nearest_snaps():
    assert close(ego_motion_between(two_pose_track(), 0.0, 0.4, "nearest"), I, 0)


def test_nearest_tie_goes_to_earlier_sample():
    track = two_pose_track()
    assert close(track.pose_at(0.5, "nearest"), I, 0)


def test_ego_motion_out_of_range():
    with pytest.raises(TimestampOutOfRange):
        ego_motion_between(two_pose_track(), 0.0, 1.5)
    with pytest.raises(TimestampOutOfRange):
        ego_motion_between(two_pose_track(), -0.1, -0.1)


def test_empty_track_rejected():
    with pytest.raises(EmptyTrack):
        OdometryTrack([])


def test_track_needs_increasing_times():
    with pytest.raises(InvalidParameter):
        OdometryTrack([StampedPose(1.0, I), StampedPose(1.0, I)])


def test_interpolation_takes_short_arc():
    a = RigidTransform.rot_z(170, degrees=True)
    b = RigidTransform.rot_z(-170, degrees=True)
    mid = interpolate(a, b, 0.5)
    # the short way round passes through 180 deg, not 0 deg
    np.testing.assert_allclose(mid.rotation, RigidTransform.rot_z(180, degrees=True).rotation, atol=1e-12)


def circular_track(speed=5.0, yaw_rate=0.3, n=11):
    samples = []
    for t in np.linspace(0, 1, n):
        yaw = yaw_rate * t
        pos = [speed / yaw_rate * np.sin(yaw), speed / yaw_rate * (1 - np.cos(yaw)), 0.0]
        samples.append(StampedPose(float(t), compose(RigidTransform.from_translation(*pos), RigidTransform.rot_z(yaw))))
    return OdometryTrack(samples)


@given(st.floats(0, 1), st.floats(0, 1), st.floats(0, 1))
@settings(max_examples=50)
def test_straight_line_path_consistency(t0, t1, t2):
    samples = [StampedPose(float(t), RigidTransform.from_translation(3 * t, -t, 0.5 * t)) for t in np.linspace(0, 1, 7)]
    track = OdometryTrack(samples)
    m02 = ego_motion_between(track, t0, t2, "interpolated")
    m = compose(ego_motion_between(track, t0, t1, "interpolated"), ego_motion_between(track, t1, t2, "interpolated"))
    assert close(m02, m, 1e-9)


def test_path_consistency_on_turning_track():
    track = circular_track()
    for t0, t1, t2 in [(0.05, 0.42, 0.93), (0.9, 0.1, 0.5)]:
        m02 = ego_motion_between(track, t0, t2, "interpolated")
        m = compose(ego_motion_between(track, t0, t1, "interpolated"), ego_motion_between(track, t1, t2, "interpolated"))
        assert close(m02, m, 1e-9)


def test_ego_motion_identity_at_every_sample():
    track = circular_track()
    for s in track.samples:
        for mode in ("nearest", "interpolated"):
            assert close(ego_motion_between(track, s.t, s.t, mode), I, 0)


def test_odometry_csv_round_trip(tmp_path):
    track = circular_track()
    path = tmp_path / "odo.csv"
    write_odometry_csv(track, path)
    back = read_odometry_csv(path)
    assert len(back) == len(track)
    for a, b in zip(track.samples, back.samples):
        assert a.t == b.t
        assert close(a.pose, b.pose, 1e-14)
    # identical input gives identical bytes
    write_odometry_csv(track, tmp_path / "again.csv")
    assert (tmp_path / "again.csv").read_bytes() == path.read_bytes()


def test_odometry_csv_normalises_near_unit_quaternion(tmp_path):
    path = tmp_path / "odo.csv"
    path.write_text("t,x,y,z,qx,qy,qz,qw\n0,1,2,3,0,0,0,1.0000004\n")
    track = read_odometry_csv(path)
    np.testing.assert_allclose(track.samples[0].pose.rotation, np.eye(3), atol=1e-15)


@pytest.mark.parametrize(
    "body",
    ["t,x,y\n0,1,2\n", "t,x,y,z,qx,qy,qz,qw\n0,1,2,3,0,0,0,2\n", "t,x,y,z,qx,qy,qz,qw\n0,1,2,3,0,0,zz,1\n",
     "t,x,y,z,qx,qy,qz,qw\n"],
)
def test_odometry_csv_errors(tmp_path, body):
    path = tmp_path / "bad.csv"
    path.write_text(body)
    with pytest.raises(FormatError):
        read_odometry_csv(path)
