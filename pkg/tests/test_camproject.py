import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from semfuse.camproject import (
    CameraModel,
    in_image,
    project,
    project_many,
    read_calibration,
    round_half_away,
    to_camera_frame,
    unproject_many,
    write_calibration,
)
from semfuse.errors import BehindCamera, FormatError, InvalidParameter
from semfuse.geometry import RigidTransform, apply

from conftest import random_transform
from reference_projection import project_point


def cam(**kw):
    base = dict(id="c", width=640, height=480, fx=400.0, fy=410.0, cx=320.0, cy=240.0)
    base.update(kw)
    return CameraModel(**base)


def ref(p, m):
    return project_point(*p, m.fx, m.fy, m.cx, m.cy, m.alpha, m.k1, m.k2, m.k3, m.k4)


def test_to_camera_frame():
    p = np.array([1.0, 2.0, 3.0])
    np.testing.assert_array_equal(to_camera_frame(p, cam()), p)
    m = cam(T_l_cn=RigidTransform.from_translation(0, 0, -1))
    np.testing.assert_array_equal(to_camera_frame(np.array([0, 0, 1.0]), m), [0, 0, 0])


def test_to_camera_frame_matches_apply(rng):
    for _ in range(20):
        t = random_transform(rng)
        p = rng.normal(size=(5, 3))
        np.testing.assert_array_equal(to_camera_frame(p, cam(T_l_cn=t)), apply(t, p))


def test_on_axis_hits_principal_point():
    m = cam(k1=0.3, k2=-0.1, k3=0.02, k4=0.001, alpha=0.01)
    np.testing.assert_array_equal(project([0, 0, 5], m), [m.cx, m.cy])


def test_forty_five_degrees_undistorted():
    m = cam(fx=1000.0, cx=500.0)
    u, v = project([1, 0, 1], m)
    assert u == pytest.approx(1000 * math.pi / 4 + 500, abs=1e-9)
    assert round(u, 2) == 1285.40
    assert v == m.cy


def test_behind_camera_rejected():
    with pytest.raises(BehindCamera):
        project([0, 0, 0], cam())
    with pytest.raises(BehindCamera):
        project_many(np.array([[0, 0, 1.0], [1, 1, -1.0]]), cam())


def test_agrees_with_reference(rng):
    m = cam(alpha=0.002, k1=-0.04, k2=0.004, k3=-0.0005, k4=0.00002)
    pts = np.column_stack([rng.uniform(-2, 2, 500), rng.uniform(-2, 2, 500), rng.uniform(0.5, 5, 500)])
    got = project_many(pts, m)
    for p, g in zip(pts, got):
        assert np.abs(np.array(ref(p, m)) - g).max() < 1e-9


def test_axis_neighbourhood_agrees_with_reference():
    m = cam(k1=0.1, alpha=0.01)
    for eps in (0.0, 1e-15, 1e-13, 5e-12, 2e-12, 1e-9, 1e-6):
        p = np.array([eps, -eps, 1.0])
        assert np.abs(np.array(ref(p, m)) - project(p, m)).max() < 1e-9


def test_equidistant_limit(rng):
    m = cam()
    pts = np.column_stack([rng.uniform(-3, 3, 1000), rng.uniform(-3, 3, 1000), rng.uniform(0.1, 3, 1000)])
    a, b = pts[:, 0] / pts[:, 2], pts[:, 1] / pts[:, 2]
    r = np.hypot(a, b)
    th = np.arctan(r)
    expect = np.column_stack([m.fx * th * a / r + m.cx, m.fy * th * b / r + m.cy])
    np.testing.assert_allclose(project_many(pts, m), expect, atol=1e-9)


@given(st.floats(0, 2 * math.pi), st.floats(0.01, 1.5), st.floats(0, 2 * math.pi))
def test_radial_symmetry(phi0, r, phi):
    m = cam(fx=300.0, fy=300.0, k1=-0.05, k2=0.01)
    a = np.array([r * math.cos(phi0), r * math.sin(phi0), 1.0])
    b = np.array([r * math.cos(phi0 + phi), r * math.sin(phi0 + phi), 1.0])
    pa = (project(a, m) - [m.cx, m.cy]) / m.fx
    pb = (project(b, m) - [m.cx, m.cy]) / m.fx
    rot = np.array([[math.cos(phi), -math.sin(phi)], [math.sin(phi), math.cos(phi)]])
    np.testing.assert_allclose(rot @ pa, pb, atol=1e-9)


def test_continuity_at_axis():
    m = cam(k1=0.2, k2=0.05)
    centre = project([0, 0, 1], m)
    prev = np.inf
    for eps in 10.0 ** -np.arange(2, 16):
        d = np.linalg.norm(project([eps, 0, 1], m) - centre)
        assert d <= prev
        prev = d
    assert prev < 1e-10


def test_in_image_rounding():
    m = cam()
    assert in_image(np.array([0.0, 0.0]), m)
    assert not in_image(np.array([-0.6, 10.0]), m)
    assert in_image(np.array([-0.4, 10.0]), m)
    assert in_image(np.array([639.4, 479.4]), m)
    assert not in_image(np.array([639.5, 10]), m)
    np.testing.assert_array_equal(in_image(np.array([[0, 0], [700, 0]]), m), [True, False])


def test_round_half_away():
    np.testing.assert_array_equal(round_half_away([-1.5, -0.5, 0.5, 1.5, 2.4999]), [-2, -1, 1, 2, 2])


def test_unproject_round_trip(rng):
    m = cam(k1=-0.05, k2=0.005, alpha=0.003)
    theta = rng.uniform(0, math.radians(60), 500)
    phi = rng.uniform(0, 2 * math.pi, 500)
    d = np.column_stack([np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi), np.cos(theta)])
    pts = d * rng.uniform(1, 20, (500, 1))
    back = unproject_many(project_many(pts, m), m)
    ang = np.arccos(np.clip(np.einsum("ij,ij->i", back, d), -1, 1))
    assert ang.max() < 1e-6


def test_unproject_beyond_fold_is_nan():
    m = cam(k1=-0.5)
    far = unproject_many(np.array([[m.cx + 5 * m.fx, m.cy]]), m)
    assert np.isnan(far).all()


def test_camera_validation():
    with pytest.raises(InvalidParameter):
        cam(fx=0.0)
    with pytest.raises(InvalidParameter):
        cam(width=0)


def test_calibration_round_trip(tmp_path, rng):
    cams = [cam(id="a", k1=0.1, T_l_cn=random_transform(rng)), cam(id="b", alpha=0.01)]
    t = random_transform(rng)
    path = tmp_path / "calib.json"
    write_calibration(path, t, cams)
    t2, cams2 = read_calibration(path)
    np.testing.assert_array_equal(t2.as_matrix(), t.as_matrix())
    assert [c.to_json() for c in cams2] == [c.to_json() for c in cams]


def test_calibration_errors(tmp_path):
    path = tmp_path / "calib.json"
    good = {"T_veh_l": np.eye(4).ravel().tolist(), "cameras": [cam().to_json(), cam().to_json()]}
    path.write_text(json.dumps(good))
    with pytest.raises(FormatError):
        read_calibration(path)  # duplicate ids
    del good["cameras"][1]["fx"]
    good["cameras"] = good["cameras"][1:]
    path.write_text(json.dumps(good))
    with pytest.raises(FormatError):
        read_calibration(path)
    path.write_text("{not json")
    with pytest.raises(FormatError):
        read_calibration(path)
