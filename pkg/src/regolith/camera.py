"""Camera intrinsics and pose types shared across the pipeline."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import project_points, quat_normalize, quat_to_rotmat, rotmat_to_quat


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole intrinsics with up to 4 radial/tangential coefficients."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int
    distortion: tuple = (0.0, 0.0, 0.0, 0.0)

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")
        if not (0 < self.cx < self.width and 0 < self.cy < self.height):
            raise ValueError("principal point must lie inside the image")
        d = tuple(float(v) for v in self.distortion)
        if len(d) > 4:
            raise ValueError("at most 4 distortion coefficients supported")
        object.__setattr__(self, "distortion", d + (0.0,) * (4 - len(d)))

    @property
    def K(self):
        return np.array([[self.fx, 0, self.cx], [0, self.fy, self.cy], [0, 0, 1.0]])

    def to_dict(self):
        return {
            "fx": self.fx,
            "fy": self.fy,
            "cx": self.cx,
            "cy": self.cy,
            "width": self.width,
            "height": self.height,
            "distortion": list(self.distortion),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            fx=float(d["fx"]),
            fy=float(d["fy"]),
            cx=float(d["cx"]),
            cy=float(d["cy"]),
            width=int(d["width"]),
            height=int(d["height"]),
            distortion=tuple(d.get("distortion", ())),
        )


@dataclass
class CameraPose:
    """World-to-camera transform: x_cam = R(q) @ x_world + t."""

    rotation: np.ndarray      # (4,) quaternion, scalar-first, unit norm
    translation: np.ndarray   # (3,) meters

    def __post_init__(self):
        self.rotation = quat_normalize(np.asarray(self.rotation, dtype=float))
        self.translation = np.asarray(self.translation, dtype=float)

    @classmethod
    def from_matrix(cls, R, t):
        return cls(rotation=rotmat_to_quat(R), translation=np.asarray(t, dtype=float))

    @classmethod
    def identity(cls):
        return cls(rotation=np.array([1.0, 0, 0, 0]), translation=np.zeros(3))

    def rotation_matrix(self):
        return quat_to_rotmat(self.rotation)

    def camera_center(self):
        R = self.rotation_matrix()
        return -R.T @ self.translation

    def transform(self, points_world):
        R = self.rotation_matrix()
        return np.asarray(points_world, dtype=float) @ R.T + self.translation

    def project(self, points_world, intrinsics):
        return project_points(self.transform(points_world), intrinsics.fx, intrinsics.fy,
                              intrinsics.cx, intrinsics.cy)

    def compose_left(self, R_delta, t_delta):
        """Return the pose (R_delta, t_delta) applied after this pose."""
        R = R_delta @ self.rotation_matrix()
        t = R_delta @ self.translation + t_delta
        return CameraPose.from_matrix(R, t)

    def inverse_matrix(self):
        """4x4 camera-to-world matrix."""
        R = self.rotation_matrix()
        m = np.eye(4)
        m[:3, :3] = R.T
        m[:3, 3] = -R.T @ self.translation
        return m
