"""Anisotropic 3D Gaussian primitives and their projection to screen space.

Each primitive carries mean, rotation quaternion, per-axis log scales,
an opacity logit, and a base RGB color. The covariance is reconstructed
as Sigma = R diag(exp(2 s)) R^T so it stays positive definite under
unconstrained optimization. Projection transforms the covariance with the
camera rotation and the perspective Jacobian, Sigma' = J W Sigma W^T J^T,
then dilates by a small isotropic floor so screen-space footprints never
collapse below a pixel.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..geometry import quat_to_rotmat

# screen-space covariance dilation, px^2
COV_EIGENVALUE_FLOOR = 0.3
# per-splat opacity cap keeping compositing gradients finite
ALPHA_MAX = 0.995


def sigmoid(x):
    return 1.0 / (1.0 + np.exp(-np.asarray(x, dtype=float)))


def logit(p):
    p = np.asarray(p, dtype=float)
    return np.log(p) - np.log1p(-p)


@dataclass
class Gaussian3D:
    mean: np.ndarray          # (3,) meters
    rotation: np.ndarray      # (4,) quaternion, scalar-first
    log_scale: np.ndarray     # (3,)
    opacity_logit: float
    base_color: np.ndarray    # (3,) in [0, 1]

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=float)
        self.rotation = np.asarray(self.rotation, dtype=float)
        self.log_scale = np.asarray(self.log_scale, dtype=float)
        self.base_color = np.asarray(self.base_color, dtype=float)

    @property
    def opacity(self):
        return float(sigmoid(self.opacity_logit))

    def covariance(self):
        return covariance_from_params(self.rotation, self.log_scale)


@dataclass
class Gaussian2D:
    """A projected splat: pixel mean, 2x2 covariance, depth, opacity, color."""

    mean: np.ndarray
    cov: np.ndarray
    depth: float
    alpha: float
    color: np.ndarray
    source_index: int = field(default=-1)


def covariance_from_params(q, log_scale):
    """Sigma = R diag(exp(2 s)) R^T for quaternion q and log scales s."""
    R = quat_to_rotmat(q)
    return (R * np.exp(2.0 * np.asarray(log_scale, dtype=float))) @ R.T


def perspective_jacobian(x_cam, fx, fy):
    """2x3 Jacobian of (x, y, z) -> (fx x / z + cx, fy y / z + cy)."""
    x, y, z = x_cam
    return np.array(
        [
            [fx / z, 0.0, -fx * x / (z * z)],
            [0.0, fy / z, -fy * y / (z * z)],
        ]
    )


def project_gaussian(gaussian, pose, intrinsics, z_near=0.01, color=None):
    """Project one 3D Gaussian into a camera; returns None when culled.

    The covariance transform uses the rotation part of the pose only
    (translation does not move a covariance) followed by the perspective
    Jacobian evaluated at the camera-frame mean.
    """
    R = pose.rotation_matrix()
    x_cam = R @ gaussian.mean + pose.translation
    if x_cam[2] <= z_near:
        return None
    fx, fy = intrinsics.fx, intrinsics.fy
    mean2d = np.array(
        [fx * x_cam[0] / x_cam[2] + intrinsics.cx, fy * x_cam[1] / x_cam[2] + intrinsics.cy]
    )
    J = perspective_jacobian(x_cam, fx, fy)
    M = J @ R
    cov2d = M @ gaussian.covariance() @ M.T
    cov2d = 0.5 * (cov2d + cov2d.T) + COV_EIGENVALUE_FLOOR * np.eye(2)
    alpha = min(float(sigmoid(gaussian.opacity_logit)), ALPHA_MAX)
    used_color = gaussian.base_color if color is None else color
    return Gaussian2D(
        mean=mean2d,
        cov=cov2d,
        depth=float(x_cam[2]),
        alpha=alpha,
        color=np.clip(used_color, 0.0, 1.0),
    )
