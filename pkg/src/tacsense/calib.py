"""Intensity-to-depth calibration from ball-press images.

Two models are produced: a 256-entry mapping list built from a single
press, and a radial linear-regression model fitted across many presses.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .core import (
    DegenerateFitError,
    DepthMap,
    DifferenceImage,
    GrayImage,
    GeometryError,
    InsufficientContactError,
    NoContactError,
    SensorGeometry,
    _freeze,
    pixel_to_surface,
)
from .sim import sphere_press_depth

DEFAULT_CONTACT_THRESHOLD = 5
MIN_CONTACT_PIXELS = 32
MIN_BOUNDARY_PIXELS = 8
MIN_REGRESSION_SAMPLES = 100


@dataclass(frozen=True)
class ContactCircle:
    """Sub-pixel contact circle in crop-frame pixel coordinates."""

    center_u: float
    center_v: float
    radius: float

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("circle radius must be positive")


@dataclass(frozen=True)
class MappingList:
    """256 depth entries indexed by integer intensity difference."""

    depths: np.ndarray
    max_calibrated: int

    def __post_init__(self):
        d = np.asarray(self.depths, dtype=np.float64)
        if d.shape != (256,):
            raise ValueError(f"mapping list must have 256 entries, got {d.shape}")
        if d[0] != 0.0:
            raise ValueError("mapping list entry for zero difference must be zero")
        if np.any(np.diff(d) < 0):
            raise ValueError("mapping list entries must be monotone non-decreasing")
        if not 0 <= self.max_calibrated <= 255:
            raise ValueError("max_calibrated out of range")
        object.__setattr__(self, "depths", _freeze(d))

    def lookup(self, deltas: np.ndarray) -> np.ndarray:
        return self.depths[np.asarray(deltas, dtype=np.intp)]


@dataclass(frozen=True)
class RegressionModel:
    """Depth = (k_c * distance-to-center + b_c) * intensity difference."""

    k_c: float
    b_c: float
    center_u: float
    center_v: float

    def slope(self, u, v):
        r = np.hypot(np.asarray(u, dtype=np.float64) - self.center_u,
                     np.asarray(v, dtype=np.float64) - self.center_v)
        return self.k_c * r + self.b_c


@dataclass(frozen=True)
class CalibrationSample:
    """One pixel's (intensity difference, true depth, radius) observation."""

    delta: float
    depth: float
    radius_px: float

    def __post_init__(self):
        if self.delta < 1:
            raise ValueError("zero-difference samples carry no slope information")
        if self.depth <= 0:
            raise ValueError("sample depth must be positive")


def average_frames(frames: list[GrayImage]) -> GrayImage:
    """Per-pixel arithmetic mean of frames, rounded to the nearest integer."""
    if not frames:
        raise ValueError("cannot average zero frames")
    shape = frames[0].pixels.shape
    for f in frames[1:]:
        if f.pixels.shape != shape:
            raise ValueError("frame dimensions differ")
    acc = np.zeros(shape, dtype=np.float64)
    for f in frames:
        acc += f.pixels
    return GrayImage.from_float(acc / len(frames))


def fit_circle_kasa(us: np.ndarray, vs: np.ndarray) -> tuple[float, float, float]:
    """Algebraic least-squares circle fit (Kasa method)."""
    us = np.asarray(us, dtype=np.float64)
    vs = np.asarray(vs, dtype=np.float64)
    a = np.column_stack([us, vs, np.ones_like(us)])
    b = us ** 2 + vs ** 2
    sol, *_ = np.linalg.lstsq(a, b, rcond=None)
    cu = sol[0] / 2.0
    cv = sol[1] / 2.0
    r2 = sol[2] + cu ** 2 + cv ** 2
    if r2 <= 0:
        raise GeometryError("degenerate circle fit")
    return cu, cv, math.sqrt(r2)


def _boundary_mask(mask: np.ndarray) -> np.ndarray:
    interior = mask.copy()
    interior[1:, :] &= mask[:-1, :]
    interior[:-1, :] &= mask[1:, :]
    interior[:, 1:] &= mask[:, :-1]
    interior[:, :-1] &= mask[:, 1:]
    return mask & ~interior


def _refine_radius(delta: np.ndarray, cu: float, cv: float, r0: float,
                   threshold: int) -> float:
    """Extrapolate the radial intensity profile to its zero crossing.

    The threshold contour sits inside the true contact edge wherever the
    intensity ramps up gradually; extrapolating the near-edge annulus means
    down to zero recovers the contact radius at sub-pixel accuracy.
    """
    band_half = 20.0
    vv, uu = np.mgrid[0:delta.shape[0], 0:delta.shape[1]]
    rad = np.hypot(uu - cu, vv - cv)
    r_lo = max(r0 - band_half, 0.0)
    band = (rad > r_lo) & (rad < r0 + band_half)
    bins = np.floor(rad[band] - r_lo).astype(np.intp)
    sums = np.bincount(bins, weights=delta[band].astype(np.float64))
    counts = np.bincount(bins)
    profile = sums / np.maximum(counts, 1)
    centers = np.arange(len(profile)) + 0.5 + r_lo
    # Noise clamping lifts the zero-contact floor; reference it out using
    # the outermost annuli of the band.
    tail = profile[centers > r0 + band_half / 2.0]
    if tail.size:
        profile = profile - tail.mean()
    near_edge = (profile >= 0.4 * threshold) & (profile <= 2.0 * threshold)
    if near_edge.sum() < 3:
        return r0
    slope, intercept = np.polyfit(centers[near_edge], profile[near_edge], 1)
    if slope >= 0:
        return r0
    root = -intercept / slope
    if not (r_lo < root < r0 + band_half):
        return r0
    return float(root)


def detect_contact_circle(diff: DifferenceImage,
                          threshold: int = DEFAULT_CONTACT_THRESHOLD) -> ContactCircle:
    """Fit a circle to the boundary of the thresholded contact blob.

    The center comes from an algebraic circle fit of the contour; the
    radius is then refined to the zero crossing of the radial profile so it
    tracks the true contact edge rather than the threshold contour.
    """
    mask = diff.pixels >= threshold
    if not mask.any():
        raise NoContactError(f"no pixel reaches threshold {threshold}")
    # Salt noise can clear the threshold in isolated pixels; keep only the
    # largest connected blob.
    labels, count = ndimage.label(mask)
    if count > 1:
        sizes = np.bincount(labels.ravel())[1:]
        mask = labels == (int(sizes.argmax()) + 1)
    boundary = _boundary_mask(mask)
    vs, us = np.nonzero(boundary)
    if len(us) < MIN_BOUNDARY_PIXELS:
        raise InsufficientContactError(
            f"only {len(us)} boundary pixels, need {MIN_BOUNDARY_PIXELS}")
    cu, cv, r = fit_circle_kasa(us, vs)
    r = _refine_radius(diff.pixels, cu, cv, r, threshold)
    return ContactCircle(center_u=cu, center_v=cv, radius=r)


def analytic_ball_depth(circle: ContactCircle, ball_radius: float,
                        geom: SensorGeometry) -> DepthMap:
    """Ground-truth depth map implied by a detected contact circle.

    The contact radius in mm fixes the press depth of a ball of known
    radius; the spherical-cap profile is then evaluated on the pixel grid.
    """
    a_mm = circle.radius * geom.pixel_pitch
    if a_mm >= ball_radius:
        raise GeometryError(
            f"contact radius {a_mm:.3f} mm not smaller than ball radius {ball_radius}")
    d_max = ball_radius - math.sqrt(ball_radius ** 2 - a_mm ** 2)
    center = pixel_to_surface(geom, circle.center_u, circle.center_v)
    return sphere_press_depth(geom, ball_radius, d_max, center=center)


def isotonic_non_decreasing(values: np.ndarray,
                            weights: np.ndarray | None = None) -> np.ndarray:
    """Pool-adjacent-violators projection onto non-decreasing sequences."""
    values = np.asarray(values, dtype=np.float64)
    if weights is None:
        weights = np.ones_like(values)
    else:
        weights = np.asarray(weights, dtype=np.float64)
    # Blocks of (mean, weight, count), merged while the tail decreases.
    means: list[float] = []
    wts: list[float] = []
    counts: list[int] = []
    for v, w in zip(values, weights):
        means.append(float(v))
        wts.append(float(w))
        counts.append(1)
        while len(means) > 1 and means[-2] > means[-1]:
            m2, w2, c2 = means.pop(), wts.pop(), counts.pop()
            m1, w1, c1 = means.pop(), wts.pop(), counts.pop()
            w = w1 + w2
            means.append((m1 * w1 + m2 * w2) / w)
            wts.append(w)
            counts.append(c1 + c2)
    out = np.empty_like(values)
    pos = 0
    for m, c in zip(means, counts):
        out[pos:pos + c] = m
        pos += c
    return out


def build_mapping_list(diff: DifferenceImage, truth: DepthMap,
                       circle: ContactCircle) -> MappingList:
    """Single-press mapping list: mean true depth per observed intensity value.

    Gaps between observed values are filled by linear interpolation, the
    result is made monotone by isotonic regression, and entries above the
    largest calibrated value are held constant.
    """
    if diff.pixels.shape != truth.data.shape:
        raise ValueError("difference image and truth depth map are not aligned")
    vv, uu = np.mgrid[0:diff.height, 0:diff.width]
    inside = (uu - circle.center_u) ** 2 + (vv - circle.center_v) ** 2 <= circle.radius ** 2
    if inside.sum() < MIN_CONTACT_PIXELS:
        raise InsufficientContactError(
            f"contact circle covers {int(inside.sum())} pixels, "
            f"need {MIN_CONTACT_PIXELS}")
    deltas = diff.pixels[inside].astype(np.intp)
    depths = truth.data[inside]
    sums = np.bincount(deltas, weights=depths, minlength=256)
    counts = np.bincount(deltas, minlength=256)
    observed = counts > 0
    observed[0] = True  # zero difference is zero depth by definition
    sums[0] = 0.0
    counts[0] = max(counts[0], 1)
    idx = np.nonzero(observed)[0]
    max_calibrated = int(idx.max())
    entries = np.zeros(256)
    means = sums[idx] / counts[idx]
    means[0] = 0.0
    # Interpolate interior gaps, clamp above the calibrated range.
    entries[: max_calibrated + 1] = np.interp(
        np.arange(max_calibrated + 1), idx, means)
    entries[max_calibrated + 1:] = entries[max_calibrated]
    weights = np.ones(256)
    weights[idx] = counts[idx]
    entries = isotonic_non_decreasing(entries, weights)
    entries = np.maximum(entries, 0.0)
    entries[0] = 0.0
    return MappingList(depths=entries, max_calibrated=max_calibrated)


def collect_samples(diff: DifferenceImage, truth: DepthMap,
                    center: tuple[float, float],
                    max_samples: int | None = 1000,
                    rng: np.random.Generator | None = None) -> list[CalibrationSample]:
    """Extract regression samples from one press; zero-difference pixels are dropped."""
    if diff.pixels.shape != truth.data.shape:
        raise ValueError("difference image and truth depth map are not aligned")
    valid = (diff.pixels >= 1) & (truth.data > 0)
    vs, us = np.nonzero(valid)
    if max_samples is not None and len(us) > max_samples:
        if rng is None:
            rng = np.random.default_rng(0)
        pick = rng.choice(len(us), size=max_samples, replace=False)
        us, vs = us[pick], vs[pick]
    r = np.hypot(us - center[0], vs - center[1])
    deltas = diff.pixels[vs, us].astype(np.float64)
    depths = truth.data[vs, us]
    return [CalibrationSample(delta=d, depth=z, radius_px=rr)
            for d, z, rr in zip(deltas, depths, r)]


def fit_regression(samples: list[CalibrationSample],
                   center: tuple[float, float]) -> RegressionModel:
    """Two-stage radial fit: per-sample slope depth/delta, then OLS slope vs radius."""
    if len(samples) < MIN_REGRESSION_SAMPLES:
        raise DegenerateFitError(
            f"need >= {MIN_REGRESSION_SAMPLES} samples, got {len(samples)}")
    r = np.array([s.radius_px for s in samples])
    slope = np.array([s.depth / s.delta for s in samples])
    if np.ptp(r) < 1e-9:
        raise DegenerateFitError("samples span a single radius")
    k_c, b_c = np.polyfit(r, slope, 1)
    model = RegressionModel(k_c=float(k_c), b_c=float(b_c),
                            center_u=center[0], center_v=center[1])
    if model.slope(0, 0) <= 0 or model.slope(r.max() + center[0], center[1]) <= 0:
        raise DegenerateFitError("fitted slope is not positive over the sampled range")
    return model
