"""Rigid-body transforms, pinhole intrinsics, and pixel projection.

Conventions (fixed for the whole package):

* Camera frame: x right, y down, z forward. Positive depth is in front of
  the camera.
* Pixel (i, j) of an array (row i, column j) has continuous coordinate
  (u, v) = (j, i), top-left origin, u along width.
* Rotations are intrinsic Euler rotations composed as
  R = Rz(rz) @ Ry(ry) @ Rx(rx).
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

# Source-frame z at or below this is treated as behind the camera.
BEHIND_EPS = 1e-6

_RIGID_TOL = 1e-9


@dataclass(frozen=True)
class Intrinsics:
    """Pinhole camera parameters, all in pixel units."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError("focal lengths must be positive")
        if not (0 < self.cx < self.width and 0 < self.cy < self.height):
            raise ValueError("principal point must lie inside the image")

    def matrix(self) -> np.ndarray:
        return np.array(
            [[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]]
        )


@dataclass(frozen=True)
class PoseParams:
    """6-DoF pose: Euler angles (radians) plus translation (scene units)."""

    rx: float = 0.0
    ry: float = 0.0
    rz: float = 0.0
    tx: float = 0.0
    ty: float = 0.0
    tz: float = 0.0

    def __post_init__(self):
        vals = (self.rx, self.ry, self.rz, self.tx, self.ty, self.tz)
        if not all(np.isfinite(vals)):
            raise ValueError("pose parameters must be finite")

    def as_array(self) -> np.ndarray:
        return np.array([self.rx, self.ry, self.rz, self.tx, self.ty, self.tz])

    @staticmethod
    def from_array(a) -> "PoseParams":
        a = np.asarray(a, dtype=float)
        return PoseParams(*a.tolist())


def check_rigid(T: np.ndarray, tol: float = _RIGID_TOL) -> np.ndarray:
    """Validate a 4x4 rigid transform matrix; returns it as float64."""
    T = np.asarray(T, dtype=float)
    if T.shape != (4, 4):
        raise ValueError(f"expected 4x4 matrix, got {T.shape}")
    R = T[:3, :3]
    if np.max(np.abs(R.T @ R - np.eye(3))) > tol:
        raise ValueError("rotation block is not orthonormal")
    if abs(np.linalg.det(R) - 1.0) > tol:
        raise ValueError("rotation block must have determinant +1")
    if not np.array_equal(T[3], [0.0, 0.0, 0.0, 1.0]):
        raise ValueError("bottom row must be exactly (0, 0, 0, 1)")
    return T


def _elemental_rotations(rx, ry, rz):
    cx, sx = np.cos(rx), np.sin(rx)
    cy, sy = np.cos(ry), np.sin(ry)
    cz, sz = np.cos(rz), np.sin(rz)
    Rx = np.array([[1, 0, 0], [0, cx, -sx], [0, sx, cx]])
    Ry = np.array([[cy, 0, sy], [0, 1, 0], [-sy, 0, cy]])
    Rz = np.array([[cz, -sz, 0], [sz, cz, 0], [0, 0, 1]])
    return Rx, Ry, Rz


def euler_to_rotation(rx: float, ry: float, rz: float) -> np.ndarray:
    Rx, Ry, Rz = _elemental_rotations(rx, ry, rz)
    return Rz @ Ry @ Rx


def rotation_to_euler(R: np.ndarray) -> tuple[float, float, float]:
    """Inverse of euler_to_rotation away from the ry = +-pi/2 singularity."""
    R = np.asarray(R, dtype=float)
    ry = np.arcsin(np.clip(-R[2, 0], -1.0, 1.0))
    rx = np.arctan2(R[2, 1], R[2, 2])
    rz = np.arctan2(R[1, 0], R[0, 0])
    return float(rx), float(ry), float(rz)


def pose_to_transform(p: PoseParams) -> np.ndarray:
    """4x4 rigid transform with R = Rz @ Ry @ Rx and the given translation."""
    T = np.eye(4)
    T[:3, :3] = euler_to_rotation(p.rx, p.ry, p.rz)
    T[:3, 3] = (p.tx, p.ty, p.tz)
    return T


def rotation_jacobians(rx: float, ry: float, rz: float):
    """dR/drx, dR/dry, dR/drz for R = Rz @ Ry @ Rx."""
    Rx, Ry, Rz = _elemental_rotations(rx, ry, rz)
    cx, sx = np.cos(rx), np.sin(rx)
    cy, sy = np.cos(ry), np.sin(ry)
    cz, sz = np.cos(rz), np.sin(rz)
    dRx = np.array([[0, 0, 0], [0, -sx, -cx], [0, cx, -sx]])
    dRy = np.array([[-sy, 0, cy], [0, 0, 0], [-cy, 0, -sy]])
    dRz = np.array([[-sz, -cz, 0], [cz, -sz, 0], [0, 0, 0]])
    return Rz @ Ry @ dRx, Rz @ dRy @ Rx, dRz @ Ry @ Rx


def invert(T: np.ndarray) -> np.ndarray:
    T = check_rigid(T)
    R = T[:3, :3]
    out = np.eye(4)
    out[:3, :3] = R.T
    out[:3, 3] = -R.T @ T[:3, 3]
    return out


def backproject(u, v, depth, K: Intrinsics) -> np.ndarray:
    """Lift pixel coordinates at the given depth to camera-frame 3D points.

    Returns an array of shape (..., 3).
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    depth = np.asarray(depth, dtype=float)
    x = depth * (u - K.cx) / K.fx
    y = depth * (v - K.cy) / K.fy
    z = depth * np.ones_like(x)
    return np.stack([x, y, z], axis=-1)


def transform_points(T: np.ndarray, pts: np.ndarray) -> np.ndarray:
    return pts @ T[:3, :3].T + T[:3, 3]


def project_points(pts: np.ndarray, K: Intrinsics):
    """Perspective projection; returns (u, v, z). Caller must mask z <= BEHIND_EPS."""
    z = pts[..., 2]
    safe_z = np.where(z > BEHIND_EPS, z, 1.0)
    u = K.fx * pts[..., 0] / safe_z + K.cx
    v = K.fy * pts[..., 1] / safe_z + K.cy
    return u, v, z


def project(u, v, depth, K: Intrinsics, T: np.ndarray):
    """Map target pixels to source pixels through depth and a rigid transform.

    Back-projects (u, v) at the given depth, applies T, re-projects with K.
    Returns (u_s, v_s, z_s); z_s <= BEHIND_EPS marks behind-camera pixels
    (the returned u_s, v_s are meaningless there).
    """
    depth = np.asarray(depth, dtype=float)
    if np.any(depth <= 0):
        raise ValueError("depth must be positive")
    pts = transform_points(T, backproject(u, v, depth, K))
    return project_points(pts, K)


def scale_intrinsics(K: Intrinsics, level: int) -> Intrinsics:
    """Intrinsics for pyramid level `level` (each level halves both dims)."""
    if level < 0:
        raise ValueError("level must be >= 0")
    out = K
    for _ in range(level):
        w, h = out.width // 2, out.height // 2
        if w < 2 or h < 2:
            raise ValueError(f"image too small at pyramid level {level}")
        out = replace(
            out, fx=out.fx / 2, fy=out.fy / 2, cx=out.cx / 2, cy=out.cy / 2,
            width=w, height=h,
        )
    return out
