"""Forward sensor model: renders tactile grayscale images from depth fields.

The optical law is a saturating-reflectance stand-in: a pixel over remaining
layer thickness t reflects C + A * (1 - exp(-beta * t)). It is monotone
(deeper press -> darker pixel) and deliberately nonlinear, so a linear
intensity-to-depth model exhibits visible mismatch.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core import DepthMap, GrayImage, SensorGeometry, _freeze, surface_grid
from .pose import Pose

SCHEMES = ("standard", "s1", "s2", "s3", "s4")

DEFAULT_LED_SIGMA = 700.0
DEFAULT_RING_RADIUS_FRAC = 0.8


@dataclass(frozen=True)
class OpticalModel:
    """Parameters of the intensity law I(t) = ambient + gain * (1 - exp(-attenuation * t))."""

    thickness: float = 2.0      # mm, semitransparent layer
    attenuation: float = 1.2    # 1/mm
    gain: float = 180.0         # gray levels
    ambient: float = 10.0       # gray levels

    def __post_init__(self):
        if self.thickness <= 0 or self.attenuation <= 0 or self.gain <= 0:
            raise ValueError("thickness, attenuation, and gain must be positive")
        if self.ambient < 0:
            raise ValueError("ambient offset must be non-negative")
        if self.ambient + self.gain > 255:
            raise ValueError("ambient + gain must not exceed 255 (reference would clip)")

    def intensity(self, depth):
        """Pre-noise, unit-illumination intensity for pressed depth in mm."""
        t = self.thickness - np.asarray(depth, dtype=np.float64)
        return self.ambient + self.gain * (1.0 - np.exp(-self.attenuation * t))

    def delta_from_depth(self, depth):
        """Intensity drop relative to the unpressed reference."""
        return self.intensity(0.0) - self.intensity(depth)

    def depth_from_delta(self, delta):
        """Analytic inverse of delta_from_depth, for oracle use."""
        scale = self.gain * math.exp(-self.attenuation * self.thickness)
        return np.log1p(np.asarray(delta, dtype=np.float64) / scale) / self.attenuation


@dataclass(frozen=True)
class IlluminationField:
    """Per-pixel multiplicative gain in (0, 1], normalized so max = 1."""

    gains: np.ndarray
    scheme: str = "uniform"

    def __post_init__(self):
        g = np.asarray(self.gains, dtype=np.float64)
        if g.ndim != 2:
            raise ValueError("illumination field must be 2-D")
        if g.min() <= 0 or g.max() > 1:
            raise ValueError("illumination gains must lie in (0, 1]")
        if abs(g.max() - 1.0) > 1e-12:
            raise ValueError("illumination field must be normalized to max 1")
        object.__setattr__(self, "gains", _freeze(g))


def _led_angles(scheme: str) -> np.ndarray:
    base = np.arange(8) * (2.0 * math.pi / 8.0)
    if scheme == "standard":
        return base
    if scheme == "s1":          # adjacent half ring
        return base[:4]
    if scheme == "s2":          # alternating
        return base[::2]
    if scheme == "s3":          # two opposing adjacent pairs
        return base[[0, 1, 4, 5]]
    if scheme == "s4":          # clustered in the upper-right octant
        return -math.pi / 4.0 + np.deg2rad(np.linspace(-11.25, 11.25, 4))
    raise ValueError(f"unknown illumination scheme {scheme!r}")


def make_illumination(scheme: str, crop_size: int,
                      led_sigma: float = DEFAULT_LED_SIGMA,
                      ring_radius: float | None = None) -> IlluminationField:
    """Sum-of-Gaussians field from LEDs on a ring around the image center.

    The standard scheme lights all eight ring positions; s1..s4 are
    four-LED subsets (half ring, alternating, opposing pairs, corner
    cluster). The field is normalized so its maximum gain is 1.
    """
    angles = _led_angles(scheme)
    if ring_radius is None:
        ring_radius = DEFAULT_RING_RADIUS_FRAC * crop_size
    center = (crop_size - 1) / 2.0
    uu, vv = np.meshgrid(np.arange(crop_size, dtype=np.float64),
                         np.arange(crop_size, dtype=np.float64))
    gains = np.zeros((crop_size, crop_size))
    for a in angles:
        lu = center + ring_radius * math.cos(a)
        lv = center + ring_radius * math.sin(a)
        gains += np.exp(-((uu - lu) ** 2 + (vv - lv) ** 2) / (2.0 * led_sigma ** 2))
    gains /= gains.max()
    return IlluminationField(gains=gains, scheme=scheme)


def uniform_illumination(crop_size: int) -> IlluminationField:
    return IlluminationField(gains=np.ones((crop_size, crop_size)), scheme="uniform")


def sphere_press_depth(geom: SensorGeometry, radius: float, d_max: float,
                       center: tuple[float, float] = (0.0, 0.0),
                       thickness: float | None = None) -> DepthMap:
    """Spherical-cap indentation depth field of a rigid ball press.

    D(r) = d_max - radius + sqrt(radius^2 - r^2) inside the contact circle
    of radius sqrt(2 * radius * d_max - d_max^2), zero outside.
    """
    if d_max <= 0 or d_max > radius:
        raise ValueError(f"press depth {d_max} must be in (0, ball radius {radius}]")
    if thickness is not None and d_max > thickness:
        raise ValueError(f"press depth {d_max} exceeds layer thickness {thickness}")
    half = geom.field_mm / 2.0
    if not (-half <= center[0] <= half and -half <= center[1] <= half):
        raise ValueError(f"press center {center} outside sensing field")
    xx, yy = surface_grid(geom)
    r2 = (xx - center[0]) ** 2 + (yy - center[1]) ** 2
    depth = d_max - radius + np.sqrt(np.maximum(radius ** 2 - r2, 0.0))
    return DepthMap(np.maximum(depth, 0.0))


def render_tactile(depth: DepthMap, model: OpticalModel, illum: IlluminationField,
                   noise_sigma: float = 0.0,
                   rng: np.random.Generator | None = None) -> GrayImage:
    """Render a tactile frame: illumination-scaled reflectance plus noise."""
    if depth.data.shape != illum.gains.shape:
        raise ValueError("depth map and illumination field dimensions differ")
    if depth.data.max() > model.thickness + 1e-12:
        raise ValueError("depth exceeds the layer thickness of the optical model")
    img = illum.gains * model.intensity(depth.data)
    if noise_sigma > 0:
        if rng is None:
            rng = np.random.default_rng()
        img = img + rng.normal(0.0, noise_sigma, size=img.shape)
    return GrayImage.from_float(img)


def reference_image(model: OpticalModel, illum: IlluminationField,
                    noise_sigma: float = 0.0,
                    rng: np.random.Generator | None = None) -> GrayImage:
    """Frame with no contact anywhere."""
    zeros = DepthMap(np.zeros_like(illum.gains))
    return render_tactile(zeros, model, illum, noise_sigma=noise_sigma, rng=rng)


DepthField = Callable[[np.ndarray, np.ndarray], np.ndarray]
"""Depth in mm as a function of surface coordinates (x, y) in mm."""


def slab_field(depth: float = 0.5, half_size: float = 6.0) -> DepthField:
    def f(x, y):
        inside = (np.abs(x) <= half_size) & (np.abs(y) <= half_size)
        return np.where(inside, depth, 0.0)
    return f


def ball_array_field(ball_radius: float = 1.5, d_max: float = 0.8,
                     spacing: float = 5.0, n: int = 3) -> DepthField:
    offsets = (np.arange(n) - (n - 1) / 2.0) * spacing

    def f(x, y):
        depth = np.zeros_like(x)
        for ox in offsets:
            for oy in offsets:
                r2 = (x - ox) ** 2 + (y - oy) ** 2
                cap = d_max - ball_radius + np.sqrt(
                    np.maximum(ball_radius ** 2 - r2, 0.0))
                depth = np.maximum(depth, np.maximum(cap, 0.0))
        return depth
    return f


def star_field(outer: float = 7.0, inner: float = 3.0, depth: float = 0.8,
               points: int = 5) -> DepthField:
    def f(x, y):
        theta = np.arctan2(y, x)
        r = np.hypot(x, y)
        # Star boundary radius oscillates between inner and outer with the arm count.
        phase = (theta * points) % (2.0 * math.pi)
        tri = np.abs(phase - math.pi) / math.pi  # 1 at arm tip, 0 between arms
        boundary = inner + (outer - inner) * tri
        return np.where(r <= boundary, depth, 0.0)
    return f


def hex_nut_field(across_flats: float = 8.0, hole_radius: float = 2.0,
                  depth: float = 0.6, rotation_deg: float = 0.0) -> DepthField:
    """Hexagonal ring imprint; 6-fold symmetric under 60 degree rotation."""
    apothem = across_flats / 2.0
    a = math.radians(rotation_deg)
    normals = [(math.cos(a + k * math.pi / 3.0), math.sin(a + k * math.pi / 3.0))
               for k in range(6)]

    def f(x, y):
        proj = np.full_like(x, -np.inf)
        for nx, ny in normals:
            proj = np.maximum(proj, nx * x + ny * y)
        inside = (proj <= apothem) & (np.hypot(x, y) >= hole_radius)
        return np.where(inside, depth, 0.0)
    return f


def set_screw_field(diameter: float = 4.0, depth: float = 3.0,
                    tip_frac: float = 0.3) -> DepthField:
    """Cylindrical screw tip with a conical chamfer; depth may exceed the layer."""
    radius = diameter / 2.0

    def f(x, y):
        r = np.hypot(x, y)
        core = np.where(r <= radius * (1.0 - tip_frac), depth, 0.0)
        ramp = depth * (radius - r) / (radius * tip_frac)
        cone = np.where((r > radius * (1.0 - tip_frac)) & (r <= radius),
                        np.maximum(ramp, 0.0), 0.0)
        return core + cone
    return f


_OBJECT_FIELDS = {
    "slab": slab_field,
    "ball_array": ball_array_field,
    "star": star_field,
    "hex_nut": hex_nut_field,
    "set_screw": set_screw_field,
}


def object_depth_field(kind: str, **params) -> DepthField:
    try:
        factory = _OBJECT_FIELDS[kind]
    except KeyError:
        raise ValueError(f"unknown object kind {kind!r}; "
                         f"known: {sorted(_OBJECT_FIELDS)}") from None
    return factory(**params)


def synth_object_depth(kind: str, geom: SensorGeometry, thickness: float = 2.0,
                       **params) -> DepthMap:
    """Evaluate a synthetic object's depth field on the pixel grid, clamped to the layer."""
    field = object_depth_field(kind, **params)
    xx, yy = surface_grid(geom)
    return DepthMap(np.clip(field(xx, yy), 0.0, thickness))


@dataclass(frozen=True)
class PressScene:
    """A single simulated press: ground truth plus rendering noise level."""

    depth: DepthMap
    label: str = ""
    noise_sigma: float = 0.0


@dataclass(frozen=True)
class SceneFrame:
    """One rendered frame of a sequence with its ground-truth pose."""

    image: GrayImage
    depth: DepthMap
    pose: Pose
    in_field: bool


def _posed_depth(field: DepthField, pose: Pose, geom: SensorGeometry,
                 thickness: float) -> tuple[DepthMap, bool]:
    xx, yy = surface_grid(geom)
    inv = pose.inverse()
    # In-plane motion: transform surface coordinates back into object frame.
    ox = inv.rotation[0, 0] * xx + inv.rotation[0, 1] * yy + inv.translation[0]
    oy = inv.rotation[1, 0] * xx + inv.rotation[1, 1] * yy + inv.translation[1]
    depth = np.clip(field(ox, oy), 0.0, thickness)
    contact = depth > 0
    in_field = bool(contact.any()) and not (
        contact[0, :].any() or contact[-1, :].any()
        or contact[:, 0].any() or contact[:, -1].any())
    return DepthMap(depth), in_field


def render_sequence(field: DepthField, poses: list[Pose], geom: SensorGeometry,
                    model: OpticalModel, illum: IlluminationField,
                    noise_sigma: float = 0.0,
                    rng: np.random.Generator | None = None) -> list[SceneFrame]:
    """Render one frame per pose, each paired with its ground-truth pose.

    Frames whose contact region is empty or touches the field border are
    flagged via in_field=False rather than raising.
    """
    frames = []
    for pose in poses:
        depth, in_field = _posed_depth(field, pose, geom, model.thickness)
        img = render_tactile(depth, model, illum, noise_sigma=noise_sigma, rng=rng)
        frames.append(SceneFrame(image=img, depth=depth, pose=pose, in_field=in_field))
    return frames
