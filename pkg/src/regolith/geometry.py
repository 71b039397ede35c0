"""Shared geometry helpers: quaternions, pinhole projection, ENU frames.

Quaternions are scalar-first (w, x, y, z) throughout the package.
Camera poses map world points into the camera frame: x_cam = R @ x_world + t,
with the camera looking down +z and y pointing down in the image.
"""

from __future__ import annotations

import numpy as np

WGS84_A = 6378137.0
WGS84_E2 = 6.69437999014e-3


def quat_normalize(q):
    q = np.asarray(q, dtype=float)
    n = np.linalg.norm(q)
    if n == 0.0:
        raise ValueError("zero-norm quaternion")
    q = q / n
    # canonical sign: nonnegative scalar part
    return -q if q[0] < 0 else q


def quat_to_rotmat(q):
    """Rotation matrix from a (w, x, y, z) quaternion (normalized internally)."""
    w, x, y, z = quat_normalize(q)
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
            [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
            [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
        ]
    )


def rotmat_to_quat(R):
    """Scalar-first quaternion from a rotation matrix (Shepperd / eigenvalue form)."""
    R = np.asarray(R, dtype=float)
    Rxx, Ryx, Rzx, Rxy, Ryy, Rzy, Rxz, Ryz, Rzz = R.flat
    K = (
        np.array(
            [
                [Rxx - Ryy - Rzz, 0, 0, 0],
                [Ryx + Rxy, Ryy - Rxx - Rzz, 0, 0],
                [Rzx + Rxz, Rzy + Ryz, Rzz - Rxx - Ryy, 0],
                [Ryz - Rzy, Rzx - Rxz, Rxy - Ryx, Rxx + Ryy + Rzz],
            ]
        )
        / 3.0
    )
    eigvals, eigvecs = np.linalg.eigh(K)
    q = eigvecs[[3, 0, 1, 2], np.argmax(eigvals)]
    return quat_normalize(q)


def quat_multiply(a, b):
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ]
    )


def rotvec_to_quat(v):
    """Quaternion for a rotation vector (axis * angle)."""
    v = np.asarray(v, dtype=float)
    angle = np.linalg.norm(v)
    if angle < 1e-12:
        # first-order expansion keeps small updates smooth
        q = np.concatenate(([1.0], 0.5 * v))
        return quat_normalize(q)
    axis = v / angle
    return np.concatenate(([np.cos(angle / 2.0)], np.sin(angle / 2.0) * axis))


def rotvec_to_rotmat(v):
    return quat_to_rotmat(rotvec_to_quat(v))


def skew(v):
    x, y, z = v
    return np.array([[0, -z, y], [z, 0, -x], [-y, x, 0]], dtype=float)


def project_points(points_cam, fx, fy, cx, cy):
    """Pinhole projection of camera-frame points (N, 3) to pixels (N, 2)."""
    p = np.asarray(points_cam, dtype=float)
    z = p[..., 2]
    return np.stack([fx * p[..., 0] / z + cx, fy * p[..., 1] / z + cy], axis=-1)


def look_at_pose(camera_center, target, up=(0.0, 0.0, 1.0)):
    """World->camera (R, t) for a camera at `camera_center` looking at `target`.

    Camera convention: +z forward, +x right, +y down.
    """
    c = np.asarray(camera_center, dtype=float)
    fwd = np.asarray(target, dtype=float) - c
    fwd = fwd / np.linalg.norm(fwd)
    upv = np.asarray(up, dtype=float)
    right = np.cross(fwd, upv)
    if np.linalg.norm(right) < 1e-9:
        right = np.cross(fwd, np.array([0.0, 1.0, 0.0]))
    right = right / np.linalg.norm(right)
    down = np.cross(fwd, right)
    R = np.stack([right, down, fwd], axis=0)
    t = -R @ c
    return R, t


def geodetic_to_ecef(lat_deg, lon_deg, alt_m):
    lat = np.deg2rad(lat_deg)
    lon = np.deg2rad(lon_deg)
    n = WGS84_A / np.sqrt(1.0 - WGS84_E2 * np.sin(lat) ** 2)
    x = (n + alt_m) * np.cos(lat) * np.cos(lon)
    y = (n + alt_m) * np.cos(lat) * np.sin(lon)
    z = (n * (1.0 - WGS84_E2) + alt_m) * np.sin(lat)
    return np.array([x, y, z])


def geodetic_to_enu(lat_deg, lon_deg, alt_m, anchor):
    """East-North-Up coordinates of a geodetic fix relative to an anchor fix.

    `anchor` is (lat_deg, lon_deg, alt_m) of the tangent-plane origin.
    """
    lat0, lon0, alt0 = anchor
    dx = geodetic_to_ecef(lat_deg, lon_deg, alt_m) - geodetic_to_ecef(lat0, lon0, alt0)
    lat = np.deg2rad(lat0)
    lon = np.deg2rad(lon0)
    sl, cl = np.sin(lat), np.cos(lat)
    so, co = np.sin(lon), np.cos(lon)
    rot = np.array(
        [
            [-so, co, 0.0],
            [-sl * co, -sl * so, cl],
            [cl * co, cl * so, sl],
        ]
    )
    return rot @ dx
