import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from tubedetect.rotation import (
    angle_between,
    look_at_rotation,
    matrix_to_quat,
    quat_from_axis_angle,
    quat_multiply,
    quat_normalize,
    quat_rotate,
    quat_to_matrix,
)


def scipy_quat(q_wxyz):
    return Rotation.from_quat(np.roll(q_wxyz, -1))  # wxyz -> xyzw


class TestQuaternions:
    def test_matrix_matches_scipy(self):
        rng = np.random.default_rng(1)
        for _ in range(30):
            q = quat_normalize(rng.normal(size=4))
            assert np.allclose(quat_to_matrix(q), scipy_quat(q).as_matrix(), atol=1e-12)

    def test_matrix_roundtrip(self):
        rng = np.random.default_rng(2)
        for _ in range(30):
            q = quat_normalize(rng.normal(size=4))
            if q[0] < 0:
                q = -q
            back = matrix_to_quat(quat_to_matrix(q))
            assert np.allclose(back, q, atol=1e-9)

    def test_multiply_matches_matrix_product(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            a = quat_normalize(rng.normal(size=4))
            b = quat_normalize(rng.normal(size=4))
            m = quat_to_matrix(quat_multiply(a, b))
            assert np.allclose(m, quat_to_matrix(a) @ quat_to_matrix(b), atol=1e-12)

    def test_rotate_vector(self):
        q = quat_from_axis_angle(np.array([0.0, 0.0, 1.0]), np.pi / 2)
        v = quat_rotate(q, np.array([1.0, 0.0, 0.0]))
        assert np.allclose(v, [0.0, 1.0, 0.0], atol=1e-12)

    def test_zero_quat_rejected(self):
        with pytest.raises(ValueError):
            quat_normalize(np.zeros(4))


class TestLookAt:
    def test_camera_axes(self):
        r = look_at_rotation(np.array([0.0, -2.0, 0.0]), np.zeros(3), up=np.array([0.0, 0.0, 1.0]))
        # rows are right, down, forward in world coordinates
        assert np.allclose(r @ np.array([0.0, 1.0, 0.0]), [0.0, 0.0, 1.0], atol=1e-12)
        assert np.allclose(r[2], [0.0, 1.0, 0.0], atol=1e-12)  # forward toward target
        assert r[1] @ np.array([0.0, 0.0, 1.0]) < 0  # camera down maps away from up

    def test_orthonormal(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            pos = rng.normal(size=3) * 2
            r = look_at_rotation(pos, np.zeros(3), up=np.array([0.0, 0.0, 1.0]))
            assert np.allclose(r @ r.T, np.eye(3), atol=1e-12)
            assert np.linalg.det(r) == pytest.approx(1.0)

    def test_degenerate_pole(self):
        r = look_at_rotation(np.array([0.0, 0.0, 3.0]), np.zeros(3), up=np.array([0.0, 0.0, 1.0]))
        assert np.allclose(r @ r.T, np.eye(3), atol=1e-12)


def test_angle_between():
    assert angle_between([1, 0, 0], [0, 1, 0]) == pytest.approx(90.0)
    assert angle_between([1, 0, 0], [-1, 0, 0]) == pytest.approx(180.0)
    assert angle_between([2, 0, 0], [5, 0, 0]) == pytest.approx(0.0)
