"""Rigid pose estimation and tracking on point clouds via point-to-point ICP."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .core import DegenerateGeometryError, PointCloud, _freeze

ORTHONORMAL_TOL = 1e-9


@dataclass(frozen=True)
class Pose:
    """Proper rigid transform: p -> rotation @ p + translation."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.rotation, dtype=np.float64)
        t = np.asarray(self.translation, dtype=np.float64).reshape(3)
        if r.shape != (3, 3):
            raise ValueError(f"rotation must be 3x3, got {r.shape}")
        if np.abs(r.T @ r - np.eye(3)).max() > ORTHONORMAL_TOL:
            raise ValueError("rotation is not orthonormal")
        if abs(np.linalg.det(r) - 1.0) > ORTHONORMAL_TOL:
            raise ValueError("rotation determinant is not +1")
        object.__setattr__(self, "rotation", _freeze(r))
        object.__setattr__(self, "translation", _freeze(t))

    @classmethod
    def identity(cls) -> "Pose":
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def rot_z(cls, angle_deg: float, translation=(0.0, 0.0, 0.0)) -> "Pose":
        a = math.radians(angle_deg)
        c, s = math.cos(a), math.sin(a)
        r = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
        return cls(r, np.asarray(translation, dtype=np.float64))

    def apply(self, points: np.ndarray) -> np.ndarray:
        return np.asarray(points) @ self.rotation.T + self.translation

    def compose(self, other: "Pose") -> "Pose":
        """self after other: (self @ other)(p) = self(other(p))."""
        return Pose(self.rotation @ other.rotation,
                    self.rotation @ other.translation + self.translation)

    def inverse(self) -> "Pose":
        return Pose(self.rotation.T, -self.rotation.T @ self.translation)

    def rotation_angle_deg(self) -> float:
        """Magnitude of the rotation, in degrees."""
        c = (np.trace(self.rotation) - 1.0) / 2.0
        return math.degrees(math.acos(min(1.0, max(-1.0, c))))

    def z_angle_deg(self) -> float:
        """In-plane rotation about z, in degrees."""
        return math.degrees(math.atan2(self.rotation[1, 0], self.rotation[0, 0]))


@dataclass(frozen=True)
class IcpReport:
    pose: Pose
    rmse: float
    iterations: int
    converged: bool


def nearest_neighbors(query: PointCloud, target: PointCloud) -> tuple[np.ndarray, np.ndarray]:
    """Exact nearest neighbor in `target` for each query point.

    Returns (indices, distances).
    """
    if len(target) == 0:
        raise ValueError("target cloud is empty")
    tree = cKDTree(target.points)
    distances, indices = tree.query(query.points, k=1)
    return np.asarray(indices), np.asarray(distances)


def best_rigid_transform(src: PointCloud, dst: PointCloud,
                         pairs: np.ndarray | None = None) -> Pose:
    """Least-squares rigid alignment src -> dst over correspondence pairs.

    `pairs` is an (n, 2) array of (src index, dst index); None pairs the
    clouds index-to-index. SVD solution with reflection correction.
    """
    if pairs is None:
        a = src.points
        b = dst.points
    else:
        pairs = np.asarray(pairs)
        a = src.points[pairs[:, 0]]
        b = dst.points[pairs[:, 1]]
    if a.shape[0] < 3:
        raise DegenerateGeometryError(f"need >= 3 correspondences, got {a.shape[0]}")
    ca = a.mean(axis=0)
    cb = b.mean(axis=0)
    h = (a - ca).T @ (b - cb)
    u, s, vt = np.linalg.svd(h)
    # Collinear correspondences leave the rotation about the line unconstrained.
    if s[1] < 1e-12 * max(s[0], 1e-300):
        raise DegenerateGeometryError("correspondences are collinear")
    d = np.sign(np.linalg.det(vt.T @ u.T))
    flip = np.diag([1.0, 1.0, d])
    r = vt.T @ flip @ u.T
    t = cb - r @ ca
    return Pose(r, t)


def icp(source: PointCloud, target: PointCloud, init: Pose | None = None,
        max_iter: int = 50, tol_mm: float = 1e-5,
        reject_ratio: float | None = 5.0) -> IcpReport:
    """Point-to-point ICP aligning `source` onto `target`.

    Alternates nearest-neighbor correspondence and closed-form rigid
    alignment, starting from `init`. Pairs farther than reject_ratio times
    the median pair distance are dropped each iteration. Stops when the
    RMSE improvement falls below tol_mm.
    """
    if len(source) == 0 or len(target) == 0:
        raise ValueError("ICP requires non-empty clouds")
    pose = init if init is not None else Pose.identity()
    tree = cKDTree(target.points)
    prev_rmse = math.inf
    rmse = math.inf
    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        moved = pose.apply(source.points)
        distances, indices = tree.query(moved, k=1)
        if reject_ratio is not None:
            med = np.median(distances)
            keep = distances <= reject_ratio * max(med, 1e-12)
        else:
            keep = np.ones(len(distances), dtype=bool)
        if keep.sum() < 3:
            raise DegenerateGeometryError("fewer than 3 usable correspondences")
        pairs = np.column_stack([np.nonzero(keep)[0], indices[keep]])
        pose = best_rigid_transform(source, target, pairs)
        residual = pose.apply(source.points[pairs[:, 0]]) - target.points[pairs[:, 1]]
        rmse = float(np.sqrt(np.mean(np.sum(residual ** 2, axis=1))))
        if prev_rmse - rmse < tol_mm:
            converged = True
            break
        prev_rmse = rmse
    return IcpReport(pose=pose, rmse=rmse, iterations=iterations, converged=converged)


def track_pose(frames: list[PointCloud], model: PointCloud,
               init: Pose | None = None, **icp_kwargs) -> list[IcpReport]:
    """Track the model's pose across frames, seeding each ICP from the last pose.

    Empty frames yield a not-converged report carrying the last good pose.
    """
    if not frames:
        raise ValueError("need at least one frame")
    pose = init if init is not None else Pose.identity()
    reports = []
    for cloud in frames:
        if len(cloud) < 3:
            reports.append(IcpReport(pose=pose, rmse=math.inf,
                                     iterations=0, converged=False))
            continue
        report = icp(model, cloud, init=pose, **icp_kwargs)
        pose = report.pose
        reports.append(report)
    return reports
