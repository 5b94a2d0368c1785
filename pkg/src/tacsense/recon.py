"""Depth reconstruction pipeline: rectify, crop, difference, map, denoise, project."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import correlate1d

from .calib import MappingList, RegressionModel
from .core import (
    CameraModel,
    Cylinder,
    DepthMap,
    DifferenceImage,
    GrayImage,
    Planar,
    PointCloud,
    SensorGeometry,
    Sphere,
    SurfaceShape,
    surface_grid,
)

DEFAULT_CONTACT_MIN_DEPTH = 0.05  # mm


@dataclass(frozen=True)
class PipelineConfig:
    """Everything the per-frame pipeline needs besides the two images."""

    model: MappingList | RegressionModel
    geom: SensorGeometry = field(default_factory=SensorGeometry)
    camera: CameraModel | None = None
    kernel_size: int = 7
    passes: int = 2
    sigma: float = 1.5
    depth_clamp: float = 2.0

    def __post_init__(self):
        if self.kernel_size % 2 != 1:
            raise ValueError("gaussian kernel size must be odd")
        if self.passes < 0:
            raise ValueError("passes must be >= 0")
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")
        if self.depth_clamp <= 0:
            raise ValueError("depth clamp must be positive")


def distort_normalized(cam: CameraModel, x: np.ndarray, y: np.ndarray):
    """Brown-Conrady forward distortion on normalized camera coordinates."""
    r2 = x * x + y * y
    radial = 1.0 + cam.k1 * r2 + cam.k2 * r2 ** 2 + cam.k3 * r2 ** 3
    xd = x * radial + 2.0 * cam.p1 * x * y + cam.p2 * (r2 + 2.0 * x * x)
    yd = y * radial + cam.p1 * (r2 + 2.0 * y * y) + 2.0 * cam.p2 * x * y
    return xd, yd


def _bilinear_sample(img: np.ndarray, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    h, w = img.shape
    u = np.clip(u, 0.0, w - 1.0)
    v = np.clip(v, 0.0, h - 1.0)
    u0 = np.floor(u).astype(np.intp)
    v0 = np.floor(v).astype(np.intp)
    u1 = np.minimum(u0 + 1, w - 1)
    v1 = np.minimum(v0 + 1, h - 1)
    fu = u - u0
    fv = v - v0
    img = img.astype(np.float64)
    top = img[v0, u0] * (1 - fu) + img[v0, u1] * fu
    bot = img[v1, u0] * (1 - fu) + img[v1, u1] * fu
    return top * (1 - fv) + bot * fv


def undistort(img: GrayImage, cam: CameraModel | None) -> GrayImage:
    """Rectify a raw frame; identity coefficients return the input unchanged."""
    if cam is None or cam.is_identity:
        return img
    h, w = img.pixels.shape
    uu, vv = np.meshgrid(np.arange(w, dtype=np.float64),
                         np.arange(h, dtype=np.float64))
    x = (uu - cam.cx) / cam.fx
    y = (vv - cam.cy) / cam.fy
    xd, yd = distort_normalized(cam, x, y)
    src_u = xd * cam.fx + cam.cx
    src_v = yd * cam.fy + cam.cy
    return GrayImage.from_float(_bilinear_sample(img.pixels, src_u, src_v))


def crop_center(img: GrayImage, geom: SensorGeometry) -> GrayImage:
    """Centered crop to the sensing field window."""
    if img.height < geom.crop_size or img.width < geom.crop_size:
        raise ValueError(
            f"cannot crop {geom.crop_size} px window from {img.width}x{img.height}")
    u0 = (img.width - geom.crop_size) // 2
    v0 = (img.height - geom.crop_size) // 2
    return GrayImage(img.pixels[v0:v0 + geom.crop_size, u0:u0 + geom.crop_size])


def difference(reference: GrayImage, contact: GrayImage) -> DifferenceImage:
    """Per-pixel intensity drop, negative values clamped to zero."""
    if reference.pixels.shape != contact.pixels.shape:
        raise ValueError("reference and contact image dimensions differ")
    d = reference.pixels.astype(np.int16) - contact.pixels.astype(np.int16)
    return DifferenceImage(np.maximum(d, 0).astype(np.uint8))


def map_depth(diff: DifferenceImage, config: PipelineConfig) -> DepthMap:
    """Intensity-to-depth mapping by table lookup or the radial linear model."""
    model = config.model
    if isinstance(model, MappingList):
        depth = model.lookup(diff.pixels)
    else:
        vv, uu = np.mgrid[0:diff.height, 0:diff.width]
        depth = model.slope(uu, vv) * diff.pixels
    return DepthMap(np.clip(depth, 0.0, config.depth_clamp))


def gaussian_kernel(size: int, sigma: float) -> np.ndarray:
    """1-D Gaussian taps normalized to sum 1."""
    half = size // 2
    x = np.arange(-half, half + 1, dtype=np.float64)
    k = np.exp(-x ** 2 / (2.0 * sigma ** 2))
    return k / k.sum()


def gaussian_denoise(depth: DepthMap, config: PipelineConfig) -> DepthMap:
    """Sequential separable Gaussian passes with reflection padding."""
    k = gaussian_kernel(config.kernel_size, config.sigma)
    out = depth.data.copy()
    for _ in range(config.passes):
        out = correlate1d(out, k, axis=0, mode="reflect")
        out = correlate1d(out, k, axis=1, mode="reflect")
    return DepthMap(np.maximum(out, 0.0))


def reconstruct(reference: GrayImage, contact: GrayImage,
                config: PipelineConfig) -> DepthMap:
    """Full per-frame pipeline on already-cropped grayscale images."""
    diff = difference(reference, contact)
    depth = map_depth(diff, config)
    return gaussian_denoise(depth, config)


def preprocess_raw(img: GrayImage, config: PipelineConfig) -> GrayImage:
    """Rectify and crop a raw full-frame image down to the sensing field."""
    return crop_center(undistort(img, config.camera), config.geom)


def depth_to_pointcloud(depth: DepthMap, geom: SensorGeometry,
                        contact_only: bool = False,
                        min_depth: float = DEFAULT_CONTACT_MIN_DEPTH) -> PointCloud:
    """One point per pixel at (x, y, -depth); z = 0 is the undeformed surface."""
    xx, yy = surface_grid(geom)
    pts = np.column_stack([xx.ravel(), yy.ravel(), -depth.data.ravel()])
    if contact_only:
        pts = pts[depth.data.ravel() > min_depth]
    return PointCloud(pts)


def depth_rim_pointcloud(depth: DepthMap, geom: SensorGeometry,
                         min_depth: float = DEFAULT_CONTACT_MIN_DEPTH,
                         plateau_frac: float = 0.92) -> PointCloud:
    """Points on the sloped rim between contact onset and the flat plateau.

    Flat-topped objects produce large constant-depth regions that are
    uninformative for in-plane registration; the rim band carries the
    object's outline geometry instead.
    """
    if not 0.0 < plateau_frac <= 1.0:
        raise ValueError("plateau_frac must be in (0, 1]")
    xx, yy = surface_grid(geom)
    d = depth.data
    keep = (d > min_depth) & (d < plateau_frac * d.max())
    return PointCloud(np.column_stack([xx[keep], yy[keep], -d[keep]]))


def raycast_project(depth: DepthMap, shape: SurfaceShape, geom: SensorGeometry,
                    contact_only: bool = False,
                    min_depth: float = DEFAULT_CONTACT_MIN_DEPTH
                    ) -> tuple[PointCloud, int]:
    """Project a depth map onto the nominal surface along per-pixel view rays.

    Each pixel's ray hits the nominal surface, then the point is moved the
    pressed depth along the ray toward the surface interior. Rays that miss
    the surface are skipped and counted. Returns (cloud, skipped count).
    """
    xx, yy = surface_grid(geom)
    x = xx.ravel()
    y = yy.ravel()
    d = depth.data.ravel()
    if contact_only:
        keep = d > min_depth
        x, y, d = x[keep], y[keep], d[keep]

    if isinstance(shape, Planar):
        pts = np.column_stack([x, y, -d])
        return PointCloud(pts), 0

    if isinstance(shape, Sphere):
        r = shape.radius
        center = np.asarray(shape.center, dtype=np.float64)
        rho2 = x * x + y * y
        hit = rho2 < r * r
        skipped = int((~hit).sum())
        # Radial rays from the sphere center through the field coordinates;
        # (x, y) are arc-equivalent offsets of the cap around +z.
        dz = np.sqrt(np.maximum(r * r - rho2[hit], 0.0))
        dirs = np.column_stack([x[hit], y[hit], dz]) / r
        pts = center + dirs * (r - d[hit])[:, None]
        return PointCloud(pts), skipped

    if isinstance(shape, Cylinder):
        r = shape.radius
        axis = np.asarray(shape.axis, dtype=np.float64)
        point = np.asarray(shape.point, dtype=np.float64)
        # Outward direction at the field center: z component orthogonal to the axis.
        n0 = np.array([0.0, 0.0, 1.0]) - axis[2] * axis
        if np.linalg.norm(n0) < 1e-9:
            raise ValueError("cylinder axis may not be parallel to the view axis z")
        n0 /= np.linalg.norm(n0)
        e = np.cross(axis, n0)
        # x wraps around the circumference (arc length), y runs along the axis.
        phi = x / r
        hit = np.abs(phi) <= math.pi
        skipped = int((~hit).sum())
        dirs = np.cos(phi[hit])[:, None] * n0 + np.sin(phi[hit])[:, None] * e
        base = point + y[hit, None] * axis
        pts = base + dirs * (r - d[hit])[:, None]
        return PointCloud(pts), skipped

    raise TypeError(f"unknown surface shape {type(shape).__name__}")
