"""Shared domain types: images, depth maps, sensor geometry, camera model, point clouds."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# BT.601 luma weights; conventional camera-pipeline grayscale conversion.
LUMA_WEIGHTS = (0.299, 0.587, 0.114)


class SensorError(Exception):
    """Base class for all domain errors."""


class NoContactError(SensorError):
    pass


class InsufficientContactError(SensorError):
    pass


class DegenerateFitError(SensorError):
    pass


class GeometryError(SensorError):
    pass


class DegenerateGeometryError(SensorError):
    pass


def _freeze(arr: np.ndarray) -> np.ndarray:
    out = np.array(arr, copy=True)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class GrayImage:
    """8-bit single-channel image, shape (height, width)."""

    pixels: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.pixels)
        if p.ndim != 2:
            raise ValueError(f"gray image must be 2-D, got shape {p.shape}")
        if p.dtype != np.uint8:
            raise ValueError(f"gray image must be uint8, got {p.dtype}")
        object.__setattr__(self, "pixels", _freeze(p))

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @classmethod
    def from_float(cls, arr: np.ndarray) -> "GrayImage":
        """Round and clamp a float array into [0, 255]."""
        return cls(np.clip(np.round(arr), 0, 255).astype(np.uint8))


@dataclass(frozen=True)
class RgbImage:
    """8-bit three-channel image, shape (height, width, 3)."""

    pixels: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.pixels)
        if p.ndim != 3 or p.shape[2] != 3:
            raise ValueError(f"rgb image must have shape (h, w, 3), got {p.shape}")
        if p.dtype != np.uint8:
            raise ValueError(f"rgb image must be uint8, got {p.dtype}")
        object.__setattr__(self, "pixels", _freeze(p))

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]


@dataclass(frozen=True)
class DifferenceImage:
    """Non-negative intensity drop from reference to contact frame."""

    pixels: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.pixels)
        if p.ndim != 2:
            raise ValueError(f"difference image must be 2-D, got shape {p.shape}")
        if p.dtype != np.uint8:
            raise ValueError(f"difference image must be uint8, got {p.dtype}")
        object.__setattr__(self, "pixels", _freeze(p))

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]


@dataclass(frozen=True)
class DepthMap:
    """Per-pixel pressed depth in mm; non-negative and finite."""

    data: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.data, dtype=np.float64)
        if d.ndim != 2:
            raise ValueError(f"depth map must be 2-D, got shape {d.shape}")
        if not np.all(np.isfinite(d)):
            raise ValueError("depth map contains non-finite values")
        if d.size and d.min() < 0:
            raise ValueError("depth map contains negative values")
        object.__setattr__(self, "data", _freeze(d))

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]


@dataclass(frozen=True)
class SensorGeometry:
    """Raw frame size, centered crop window, and pixel-to-mm scale."""

    raw_width: int = 800
    raw_height: int = 600
    crop_size: int = 580
    field_mm: float = 24.0

    def __post_init__(self):
        if self.crop_size > self.raw_width or self.crop_size > self.raw_height:
            raise ValueError("crop window does not fit inside the raw frame")
        if self.field_mm <= 0:
            raise ValueError("field size must be positive")

    @property
    def pixel_pitch(self) -> float:
        """mm per pixel on the sensing field."""
        return self.field_mm / self.crop_size

    @property
    def crop_origin(self) -> tuple[int, int]:
        """(u, v) of the crop window's top-left corner in the raw frame."""
        return ((self.raw_width - self.crop_size) // 2,
                (self.raw_height - self.crop_size) // 2)


def pixel_to_surface(geom: SensorGeometry, u: float, v: float) -> tuple[float, float]:
    """Map a crop-frame pixel to surface mm, origin at crop center.

    x runs rightward with u, y downward with v. Accepts the closed range
    [0, crop_size] so both field edges are addressable.
    """
    if not (0 <= u <= geom.crop_size and 0 <= v <= geom.crop_size):
        raise GeometryError(f"pixel ({u}, {v}) outside crop of size {geom.crop_size}")
    half = geom.crop_size / 2.0
    return ((u - half) * geom.pixel_pitch, (v - half) * geom.pixel_pitch)


def surface_grid(geom: SensorGeometry) -> tuple[np.ndarray, np.ndarray]:
    """(X, Y) mm coordinate arrays of shape (crop_size, crop_size)."""
    c = np.arange(geom.crop_size, dtype=np.float64) - geom.crop_size / 2.0
    c *= geom.pixel_pitch
    return np.meshgrid(c, c)


@dataclass(frozen=True)
class CameraModel:
    """Pinhole intrinsics with Brown-Conrady radial/tangential distortion."""

    fx: float
    fy: float
    cx: float
    cy: float
    k1: float = 0.0
    k2: float = 0.0
    k3: float = 0.0
    p1: float = 0.0
    p2: float = 0.0

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")

    @property
    def is_identity(self) -> bool:
        return self.k1 == self.k2 == self.k3 == self.p1 == self.p2 == 0.0

    @classmethod
    def identity(cls, width: int = 800, height: int = 600, focal: float = 600.0) -> "CameraModel":
        return cls(fx=focal, fy=focal, cx=width / 2.0, cy=height / 2.0)


@dataclass(frozen=True)
class Planar:
    """Flat nominal sensing surface at z = 0."""


@dataclass(frozen=True)
class Sphere:
    """Spherical nominal surface; the sensing cap faces +z."""

    radius: float
    center: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("sphere radius must be positive")


@dataclass(frozen=True)
class Cylinder:
    """Cylindrical nominal surface around a unit axis through a point."""

    radius: float
    axis: tuple[float, float, float] = (0.0, 1.0, 0.0)
    point: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("cylinder radius must be positive")
        n = float(np.linalg.norm(self.axis))
        if abs(n - 1.0) > 1e-9:
            raise ValueError(f"cylinder axis must be unit length, |axis| = {n}")


SurfaceShape = Planar | Sphere | Cylinder


@dataclass(frozen=True)
class PointCloud:
    """Set of 3-D points in mm, shape (n, 3)."""

    points: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.points, dtype=np.float64)
        if p.ndim != 2 or p.shape[1] != 3:
            raise ValueError(f"point cloud must have shape (n, 3), got {p.shape}")
        if not np.all(np.isfinite(p)):
            raise ValueError("point cloud contains non-finite coordinates")
        object.__setattr__(self, "points", _freeze(p))

    def __len__(self) -> int:
        return self.points.shape[0]


def gray_from_rgb(img: RgbImage) -> GrayImage:
    """BT.601 luma conversion, rounded to the nearest integer."""
    wr, wg, wb = LUMA_WEIGHTS
    p = img.pixels.astype(np.float64)
    gray = wr * p[:, :, 0] + wg * p[:, :, 1] + wb * p[:, :, 2]
    return GrayImage.from_float(gray)


def image_mean_std(img: GrayImage) -> tuple[float, float]:
    """Mean and population standard deviation over all pixels."""
    if img.pixels.size == 0:
        raise ValueError("cannot compute statistics of an empty image")
    p = img.pixels.astype(np.float64)
    return float(p.mean()), float(p.std())
