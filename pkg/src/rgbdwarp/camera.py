"""Pinhole camera model and SE(3) pose algebra.

Conventions used throughout the package: right-handed coordinates with x right,
y down, z forward (the rectified stereo convention); distances and depths in
millimeters; pixel coordinates are continuous with integer values falling on
pixel centers.
"""

from dataclasses import dataclass

import numpy as np

from .errors import BehindCameraError, InvalidDepthError, PoseError

# A Pose constructed directly must be orthonormal to this tolerance.
ROTATION_TOL = 1e-9
# Text-file poses carry limited digits: defects up to this are repaired by
# nearest-rotation projection, anything worse is rejected (see dataset.py).
ROTATION_REPAIR_TOL = 1e-6


@dataclass(frozen=True)
class Intrinsics:
    """Pinhole intrinsics without skew: focal lengths and principal point, in pixels."""

    fx: float
    fy: float
    cx: float
    cy: float

    def __post_init__(self):
        if not (np.isfinite(self.fx) and self.fx > 0 and np.isfinite(self.fy) and self.fy > 0):
            raise ValueError(f"focal lengths must be finite and positive, got fx={self.fx}, fy={self.fy}")
        if not (np.isfinite(self.cx) and np.isfinite(self.cy)):
            raise ValueError(f"principal point must be finite, got cx={self.cx}, cy={self.cy}")

    def matrix(self) -> np.ndarray:
        return np.array([[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]])

    def shifted(self, dx: float, dy: float) -> "Intrinsics":
        """Intrinsics after discarding dx columns on the left and dy rows on top (cropping)."""
        return Intrinsics(self.fx, self.fy, self.cx - dx, self.cy - dy)


def rotation_defect(r: np.ndarray) -> float:
    """How far a 3x3 matrix is from a proper rotation: max of |R^T R - I| and |det R - 1|."""
    r = np.asarray(r, dtype=float)
    if r.shape != (3, 3):
        raise PoseError(f"rotation must be 3x3, got shape {r.shape}")
    ortho = np.abs(r.T @ r - np.eye(3)).max()
    det = abs(np.linalg.det(r) - 1.0)
    return max(ortho, det)


def nearest_rotation(m: np.ndarray) -> np.ndarray:
    """Orthogonal Procrustes projection: the rotation closest to m in Frobenius norm."""
    u, _, vt = np.linalg.svd(np.asarray(m, dtype=float))
    r = u @ vt
    if np.linalg.det(r) < 0:
        r = u @ np.diag([1.0, 1.0, -1.0]) @ vt
    return r


@dataclass(frozen=True)
class Pose:
    """Rigid transform: p -> rotation @ p + translation, translation in millimeters.

    Acting on a point expressed in frame B, a pose "A from B" yields the same
    point expressed in frame A. World poses from tracking files map camera
    coordinates into the world frame.
    """

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        r = np.array(self.rotation, dtype=float)
        t = np.array(self.translation, dtype=float).reshape(-1)
        if t.shape != (3,):
            raise PoseError(f"translation must be a 3-vector, got shape {np.shape(self.translation)}")
        if not (np.isfinite(r).all() and np.isfinite(t).all()):
            raise PoseError("pose contains non-finite values")
        defect = rotation_defect(r)
        if defect > ROTATION_TOL:
            raise PoseError(
                f"rotation is not orthonormal within {ROTATION_TOL:g} (defect {defect:.3g}); "
                "use nearest_rotation to repair parsed matrices"
            )
        r.flags.writeable = False
        t.flags.writeable = False
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)

    @staticmethod
    def identity() -> "Pose":
        return Pose(np.eye(3), np.zeros(3))

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Transform points of shape (..., 3)."""
        p = np.asarray(points, dtype=float)
        return p @ self.rotation.T + self.translation

    def matrix(self) -> np.ndarray:
        """The 4x4 homogeneous form [R t; 0 1]."""
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation
        return m

    @staticmethod
    def from_matrix(m: np.ndarray) -> "Pose":
        m = np.asarray(m, dtype=float)
        if m.shape != (4, 4) or not np.allclose(m[3], [0, 0, 0, 1], atol=1e-12):
            raise PoseError("expected a 4x4 homogeneous rigid transform")
        return Pose(m[:3, :3], m[:3, 3])


def compose(t1: Pose, t2: Pose) -> Pose:
    """The transform applying t2 first, then t1."""
    return Pose(t1.rotation @ t2.rotation, t1.rotation @ t2.translation + t1.translation)


def invert(t: Pose) -> Pose:
    rt = t.rotation.T
    return Pose(rt, -(rt @ t.translation))


def backproject(u, v, depth, intrinsics: Intrinsics) -> np.ndarray:
    """Lift pixel coordinates with known depth to camera-frame 3D points.

    Computes K^-1 * depth * [u, v, 1]^T elementwise, so the returned z equals
    depth exactly. Inputs broadcast; output has shape (..., 3).
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    d = np.asarray(depth, dtype=float)
    if not np.isfinite(d).all() or np.any(d <= 0):
        raise InvalidDepthError("backproject requires finite positive depth")
    x = (u - intrinsics.cx) * d / intrinsics.fx
    y = (v - intrinsics.cy) * d / intrinsics.fy
    return np.stack(np.broadcast_arrays(x, y, d), axis=-1)


def project(points: np.ndarray, intrinsics: Intrinsics):
    """Project camera-frame points (..., 3) onto the image plane; returns (u, v)."""
    p = np.asarray(points, dtype=float)
    z = p[..., 2]
    if np.any(z <= 0) or not np.isfinite(z).all():
        raise BehindCameraError("project requires z > 0 for every point")
    u = intrinsics.fx * p[..., 0] / z + intrinsics.cx
    v = intrinsics.fy * p[..., 1] / z + intrinsics.cy
    return u, v


def transform_point(points: np.ndarray, t: Pose) -> np.ndarray:
    """Apply a rigid transform to one point or an array of points (..., 3)."""
    return t.apply(points)


def transform_latent(z: np.ndarray, t: Pose) -> np.ndarray:
    """Row-wise rigid transform of an (n, 3) latent point set."""
    z = np.asarray(z, dtype=float)
    if z.ndim != 2 or z.shape[1] != 3 or z.shape[0] < 1:
        raise ValueError(f"latent point set must have shape (n, 3) with n >= 1, got {z.shape}")
    return t.apply(z)
