"""Rigid transforms on SE(3) and the pinhole camera model.

A pose maps object-frame points into the camera frame, x_cam = R @ x + T.
Twists keep the rotation part first, xi = (phi, rho). The exponential and
logarithm use the closed-form Rodrigues expressions, falling back to a
quadratic series below the small-angle threshold. Every Jacobian in this
package is taken with respect to a left-multiplied perturbation,
P <- exp(delta^) @ P.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AngleNearPi, BehindCamera

SMALL_ANGLE = 1e-8
MIN_DEPTH = 1e-6


def skew(v) -> np.ndarray:
    """Cross-product matrix, skew(a) @ b == np.cross(a, b)."""
    x, y, z = v
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def _vee(m) -> np.ndarray:
    return np.array([m[2, 1], m[0, 2], m[1, 0]])


@dataclass(frozen=True)
class Twist:
    """se(3) element: rotational part phi (rad), translational part rho (m)."""

    phi: np.ndarray
    rho: np.ndarray

    @staticmethod
    def from_vector(xi) -> "Twist":
        xi = np.asarray(xi, dtype=float)
        return Twist(xi[:3].copy(), xi[3:6].copy())

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.phi, self.rho]).astype(float)


@dataclass(frozen=True)
class Pose:
    """Rigid transform: x_cam = rotation @ x_obj + translation."""

    rotation: np.ndarray
    translation: np.ndarray

    @staticmethod
    def identity() -> "Pose":
        return Pose(np.eye(3), np.zeros(3))

    @staticmethod
    def from_matrix(m) -> "Pose":
        m = np.asarray(m, dtype=float)
        return Pose(m[:3, :3].copy(), m[:3, 3].copy())

    def matrix(self) -> np.ndarray:
        out = np.eye(4)
        out[:3, :3] = self.rotation
        out[:3, 3] = self.translation
        return out

    def compose(self, other: "Pose") -> "Pose":
        """self applied after other: (self @ other)(x) = self(other(x))."""
        return Pose(self.rotation @ other.rotation,
                    self.rotation @ other.translation + self.translation)

    def inverse(self) -> "Pose":
        rt = self.rotation.T
        return Pose(rt, -rt @ self.translation)

    def apply(self, points) -> np.ndarray:
        """Transform one (3,) point or an (N, 3) block into the camera frame."""
        points = np.asarray(points, dtype=float)
        return points @ self.rotation.T + self.translation


def compose(a: Pose, b: Pose) -> Pose:
    return a.compose(b)


def invert(p: Pose) -> Pose:
    return p.inverse()


def exp_so3(phi) -> np.ndarray:
    phi = np.asarray(phi, dtype=float)
    theta = float(np.linalg.norm(phi))
    k = skew(phi)
    if theta < SMALL_ANGLE:
        return np.eye(3) + k + 0.5 * (k @ k)
    k2 = k @ k
    return (np.eye(3)
            + (np.sin(theta) / theta) * k
            + ((1.0 - np.cos(theta)) / theta**2) * k2)


def log_so3(rot) -> np.ndarray:
    """Rotation vector of a rotation matrix. Raises AngleNearPi close to pi."""
    rot = np.asarray(rot, dtype=float)
    cos_theta = np.clip((np.trace(rot) - 1.0) / 2.0, -1.0, 1.0)
    theta = float(np.arccos(cos_theta))
    if theta >= np.pi - 1e-6:
        raise AngleNearPi(f"rotation angle {theta:.9f} too close to pi")
    w = _vee(rot - rot.T)
    if theta < SMALL_ANGLE:
        return 0.5 * w
    return (theta / (2.0 * np.sin(theta))) * w


def _left_jacobian(phi) -> np.ndarray:
    theta = float(np.linalg.norm(phi))
    k = skew(phi)
    if theta < SMALL_ANGLE:
        return np.eye(3) + 0.5 * k + (k @ k) / 6.0
    k2 = k @ k
    return (np.eye(3)
            + ((1.0 - np.cos(theta)) / theta**2) * k
            + ((theta - np.sin(theta)) / theta**3) * k2)


def _left_jacobian_inv(phi) -> np.ndarray:
    theta = float(np.linalg.norm(phi))
    k = skew(phi)
    if theta < SMALL_ANGLE:
        return np.eye(3) - 0.5 * k + (k @ k) / 12.0
    k2 = k @ k
    coeff = 1.0 / theta**2 - (1.0 + np.cos(theta)) / (2.0 * theta * np.sin(theta))
    return np.eye(3) - 0.5 * k + coeff * k2


def exp_se3(xi: Twist) -> Pose:
    """Exponential map of a twist, Rodrigues form with small-angle series."""
    rot = exp_so3(xi.phi)
    t = _left_jacobian(xi.phi) @ np.asarray(xi.rho, dtype=float)
    return Pose(rot, t)


def log_se3(pose: Pose) -> Twist:
    """Inverse of exp_se3. Raises AngleNearPi for angles at or beyond pi - 1e-6."""
    phi = log_so3(pose.rotation)
    rho = _left_jacobian_inv(phi) @ pose.translation
    return Twist(phi, rho)


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole camera: focal lengths and principal point in pixels."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")
        if self.width <= 0 or self.height <= 0:
            raise ValueError("sensor size must be positive")

    def matrix(self) -> np.ndarray:
        return np.array([[self.fx, 0.0, self.cx],
                         [0.0, self.fy, self.cy],
                         [0.0, 0.0, 1.0]])


def project(cam: CameraIntrinsics, pose: Pose, point) -> np.ndarray:
    """Pixel position of one object-frame point. Raises BehindCamera."""
    pc = pose.apply(point)
    if pc[2] <= MIN_DEPTH:
        raise BehindCamera(f"depth {pc[2]:.3e} at or below minimum")
    return np.array([cam.fx * pc[0] / pc[2] + cam.cx,
                     cam.fy * pc[1] / pc[2] + cam.cy])


def project_points(cam: CameraIntrinsics, pose: Pose, points):
    """Vectorized projection of (N, 3) object points.

    Returns (pixels (N, 2), depths (N,)). Rows with depth <= MIN_DEPTH hold
    unusable pixel values; callers must mask on the returned depths.
    """
    pc = pose.apply(points)
    z = pc[:, 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        u = cam.fx * pc[:, 0] / z + cam.cx
        v = cam.fy * pc[:, 1] / z + cam.cy
    return np.column_stack([u, v]), z


def projection_jacobian(cam: CameraIntrinsics, pose: Pose, point) -> np.ndarray:
    """2x6 derivative of the pixel w.r.t. a left twist perturbation.

    Columns are ordered (phi, rho). Raises BehindCamera for non-positive
    depth.
    """
    pc = pose.apply(point)
    x, y, z = pc
    if z <= MIN_DEPTH:
        raise BehindCamera(f"depth {z:.3e} at or below minimum")
    d_pix = np.array([[cam.fx / z, 0.0, -cam.fx * x / z**2],
                      [0.0, cam.fy / z, -cam.fy * y / z**2]])
    d_point = np.hstack([-skew(pc), np.eye(3)])
    return d_pix @ d_point


def quat_to_rotation(q) -> np.ndarray:
    """Rotation matrix of a (w, x, y, z) quaternion; normalizes first."""
    q = np.asarray(q, dtype=float)
    n = np.linalg.norm(q)
    if n == 0:
        raise ValueError("zero quaternion")
    w, x, y, z = q / n
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


def rotation_to_quat(rot) -> np.ndarray:
    """(w, x, y, z) unit quaternion of a rotation matrix, w >= 0."""
    rot = np.asarray(rot, dtype=float)
    tr = np.trace(rot)
    if tr > 0:
        s = np.sqrt(tr + 1.0) * 2.0
        q = np.array([0.25 * s,
                      (rot[2, 1] - rot[1, 2]) / s,
                      (rot[0, 2] - rot[2, 0]) / s,
                      (rot[1, 0] - rot[0, 1]) / s])
    else:
        i = int(np.argmax(np.diag(rot)))
        j, k = (i + 1) % 3, (i + 2) % 3
        s = np.sqrt(rot[i, i] - rot[j, j] - rot[k, k] + 1.0) * 2.0
        q = np.empty(4)
        q[0] = (rot[k, j] - rot[j, k]) / s
        q[1 + i] = 0.25 * s
        q[1 + j] = (rot[j, i] + rot[i, j]) / s
        q[1 + k] = (rot[k, i] + rot[i, k]) / s
    if q[0] < 0:
        q = -q
    return q / np.linalg.norm(q)
