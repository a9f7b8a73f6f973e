"""Rig geometry: placido cone, pinhole camera and distance bookkeeping.

Camera frame: origin at the pinhole, +z toward the eye, +x along image
columns, +y along image rows (down). Lengths are mm and angles are degrees
at the API boundary; radians are used internally.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace
from importlib import resources
from pathlib import Path

import numpy as np

# Pixel pitch of the 4000x3000 capture sensor (6.4 mm / 4000 px).
CAPTURE_PIXEL_PITCH_MM = 0.0016
NOMINAL_CORNEA_RADIUS_MM = 7.8


class GeometryError(ValueError):
    """Raised for out-of-range geometric queries."""


@dataclass(frozen=True)
class PlacidoSpec:
    """Conical placido head.

    ``ring_axial_positions`` holds one ``(start, end)`` pair per dark ring,
    measured along the cone axis from the base (mm). ``ring_reference_positions``
    is the axial position of the point each detected mire is mapped to; ring 0
    sits at the base (radius 4 mm) and the last ring at the top (15 mm).
    ``bright_limits`` bounds the illuminated region: the base disc ends at the
    first value, the cone wall at the second.
    """

    ring_count: int = 28
    cone_length: float = 70.0
    smallest_ring_radius: float = 4.0
    largest_ring_radius: float = 15.0
    semi_vertical_angle: float = 8.93
    ring_thickness_on_cone: float = 1.0
    ring_axial_positions: tuple = ()
    ring_reference_positions: tuple = ()
    bright_limits: tuple = (0.0, 70.0)
    support_angles: tuple = (0.0, 180.0)
    support_width: float = 2.0

    def __post_init__(self):
        if len(self.ring_axial_positions) != self.ring_count:
            raise GeometryError(
                f"expected {self.ring_count} ring position pairs, "
                f"got {len(self.ring_axial_positions)}")
        if len(self.ring_reference_positions) != self.ring_count:
            raise GeometryError("ring_reference_positions length != ring_count")
        flat = np.asarray(self.ring_axial_positions, dtype=float).ravel()
        if np.any(np.diff(flat) <= 0):
            raise GeometryError("ring_axial_positions must be strictly increasing")
        refs = np.asarray(self.ring_reference_positions, dtype=float)
        if np.any(np.diff(refs) <= 0):
            raise GeometryError("ring_reference_positions must be strictly increasing")
        radii = self.radius_at(refs)
        tol = 1e-3
        if radii.min() < self.smallest_ring_radius - tol or \
                radii.max() > self.largest_ring_radius + tol:
            raise GeometryError("ring radii fall outside the cone's radius range")

    @property
    def tan_angle(self) -> float:
        return math.tan(math.radians(self.semi_vertical_angle))

    def radius_at(self, axial):
        """Cone radius (mm) at an axial offset from the base."""
        return self.smallest_ring_radius + np.asarray(axial, dtype=float) * self.tan_angle

    def ring_radius(self, ring_index: int) -> float:
        self._check_index(ring_index)
        return float(self.radius_at(self.ring_reference_positions[ring_index]))

    def ring_radii(self) -> np.ndarray:
        return self.radius_at(self.ring_reference_positions)

    def band_edges(self) -> np.ndarray:
        """All dark-band edges, flattened: [s0, e0, s1, e1, ...]."""
        return np.asarray(self.ring_axial_positions, dtype=float).ravel()

    def _check_index(self, ring_index: int):
        if not 0 <= ring_index < self.ring_count:
            raise GeometryError(
                f"ring_index {ring_index} outside [0, {self.ring_count})")


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole camera with square pixels and zero skew.

    ``sensor_width``/``sensor_height`` describe the area imaged by
    ``image_width``x``image_height`` pixels, so a crop of a larger frame keeps
    the capture pixel pitch.
    """

    focal_length: float = 4.76
    sensor_width: float = 0.8
    sensor_height: float = 0.8
    image_width: int = 500
    image_height: int = 500
    principal_point: tuple | None = None

    def __post_init__(self):
        if self.focal_length <= 0:
            raise GeometryError("focal_length must be positive")
        if self.image_width <= 0 or self.image_height <= 0:
            raise GeometryError("image dimensions must be positive")
        if self.principal_point is None:
            object.__setattr__(self, "principal_point",
                               ((self.image_width - 1) / 2.0,
                                (self.image_height - 1) / 2.0))
        else:
            object.__setattr__(self, "principal_point",
                               tuple(float(v) for v in self.principal_point))

    @property
    def pixel_pitch(self) -> float:
        return self.sensor_width / self.image_width

    @property
    def focal_px(self) -> float:
        return self.focal_length / self.pixel_pitch

    @classmethod
    def smartphone_crop(cls, size: int = 500, full_width: int = 3000,
                        full_height: int = 4000, offset=(0.0, 0.0)):
        """Intrinsics for the central ``size`` x ``size`` crop of a full capture.

        ``offset`` shifts the crop window (px) relative to the frame centre;
        the principal point moves the opposite way.
        """
        pitch = CAPTURE_PIXEL_PITCH_MM
        c = (size - 1) / 2.0
        del full_width, full_height  # crop is centred, pitch is what matters
        return cls(sensor_width=size * pitch, sensor_height=size * pitch,
                   image_width=size, image_height=size,
                   principal_point=(c - offset[0], c - offset[1]))


@dataclass(frozen=True)
class RigConfig:
    placido: PlacidoSpec
    camera: CameraIntrinsics = field(default_factory=CameraIntrinsics)
    gap_base: float = 5.0
    gap_top: float = 0.0

    def __post_init__(self):
        if self.working_distance() <= 0:
            raise GeometryError("working distance must be positive")

    def working_distance(self) -> float:
        return self.placido.cone_length + self.gap_base + self.gap_top

    def with_gaps(self, gap_base=None, gap_top=None) -> "RigConfig":
        return replace(self,
                       gap_base=self.gap_base if gap_base is None else float(gap_base),
                       gap_top=self.gap_top if gap_top is None else float(gap_top))


@dataclass(frozen=True)
class RingPoint3D:
    ring_index: int
    meridian_angle: float
    position: tuple


def ring_point(spec: PlacidoSpec, gap_base: float, ring_index: int,
               meridian_angle: float) -> RingPoint3D:
    """Reference point of a placido ring at the given meridian, camera frame."""
    spec._check_index(ring_index)
    axial = spec.ring_reference_positions[ring_index]
    rho = float(spec.radius_at(axial))
    t = math.radians(meridian_angle)
    pos = (rho * math.cos(t), rho * math.sin(t), gap_base + axial)
    return RingPoint3D(ring_index, float(meridian_angle), pos)


def pixel_to_ray(cam: CameraIntrinsics, pixel) -> np.ndarray:
    """Unit direction through the pinhole for pixel ``(u, v)``.

    Accepts an ``(..., 2)`` array and returns ``(..., 3)``.
    """
    p = np.asarray(pixel, dtype=float)
    cx, cy = cam.principal_point
    f = cam.focal_px
    d = np.stack([(p[..., 0] - cx) / f, (p[..., 1] - cy) / f,
                  np.ones(p.shape[:-1])], axis=-1)
    return d / np.linalg.norm(d, axis=-1, keepdims=True)


def project(cam: CameraIntrinsics, point) -> np.ndarray:
    """Perspective projection of camera-frame points to pixel coordinates."""
    q = np.asarray(point, dtype=float)
    z = q[..., 2]
    if np.any(z <= 0):
        raise GeometryError("point at or behind the pinhole plane")
    cx, cy = cam.principal_point
    f = cam.focal_px
    return np.stack([cx + f * q[..., 0] / z, cy + f * q[..., 1] / z], axis=-1)


# --- meridian-plane reflection off a sphere -------------------------------

def sphere_reflection_point(radius: float, apex_z: float, source_rho, source_z,
                            tol: float = 1e-13):
    """Point on an on-axis sphere that reflects a source into the pinhole.

    Works in a meridian plane ``(rho, z)``; the sphere has its apex at
    ``(0, apex_z)`` and centre at ``(0, apex_z + radius)``. Returns the polar
    angle ``phi`` of the reflection point measured at the sphere centre
    (vectorised over sources). Raises ``GeometryError`` if any source has no
    reflection on the front hemisphere.
    """
    src_rho = np.atleast_1d(np.asarray(source_rho, dtype=float))
    src_z = np.broadcast_to(np.asarray(source_z, dtype=float), src_rho.shape)

    def residual(phi):
        s, c = np.sin(phi), np.cos(phi)
        px, pz = radius * s, apex_z + radius - radius * c
        # outward normal (s, -c); unit vectors to camera and to source
        lc = np.hypot(px, pz)
        ox, oz = src_rho - px, src_z - pz
        lo = np.hypot(ox, oz)
        bx = -px / lc + ox / lo
        bz = -pz / lc + oz / lo
        return s * bz + c * bx

    lo = np.full(src_rho.shape, 1e-12)
    hi = np.full(src_rho.shape, math.pi / 2 - 1e-9)
    flo, fhi = residual(lo), residual(hi)
    if np.any(np.sign(flo) == np.sign(fhi)):
        raise GeometryError("source has no reflection on the sphere cap")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        fm = residual(mid)
        left = np.sign(fm) == np.sign(flo)
        lo = np.where(left, mid, lo)
        flo = np.where(left, fm, flo)
        hi = np.where(left, hi, mid)
        if np.max(hi - lo) < tol:
            break
    return 0.5 * (lo + hi)


def sphere_image_radius(radius: float, apex_z: float, source_rho, source_z,
                        focal_px: float) -> np.ndarray:
    """Image radius (px) of an on-axis ring source reflected by a sphere."""
    phi = sphere_reflection_point(radius, apex_z, source_rho, source_z)
    px = radius * np.sin(phi)
    pz = apex_z + radius - radius * np.cos(phi)
    return focal_px * px / pz


def design_ring_positions(ring_count=28, cone_length=70.0, smallest_ring_radius=4.0,
                          semi_vertical_angle=8.93, gap_base=5.0, gap_top=0.0,
                          sphere_radius=NOMINAL_CORNEA_RADIUS_MM, focal_px=2975.0):
    """Place dark rings so their mires on the nominal sphere have equal thickness.

    Ring reference points run from the cone base to its top; their mire images
    are equally spaced, and every dark band and bright gap occupies half a
    spacing in the image. Returns ``(pairs, references, bright_limits)`` in
    axial mm from the cone base.
    """
    tan_a = math.tan(math.radians(semi_vertical_angle))
    apex_z = cone_length + gap_base + gap_top

    def image_r(a):
        a = np.asarray(a, dtype=float)
        return sphere_image_radius(sphere_radius, apex_z,
                                   smallest_ring_radius + a * tan_a, gap_base + a,
                                   focal_px)

    def invert(r_target):
        r_target = np.asarray(r_target, dtype=float)
        lo = np.full(r_target.shape, -0.5 * cone_length)
        hi = np.full(r_target.shape, 1.5 * cone_length)
        for _ in range(100):
            mid = 0.5 * (lo + hi)
            below = image_r(mid) < r_target
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
        return 0.5 * (lo + hi)

    r0, r1 = image_r([0.0, cone_length])
    spacing = (r1 - r0) / (ring_count - 1)
    ref_r = r0 + spacing * np.arange(ring_count)
    refs = invert(ref_r)
    refs[0], refs[-1] = 0.0, cone_length
    starts = invert(ref_r - spacing / 4)
    ends = invert(ref_r + spacing / 4)
    limits = invert([r0 - spacing / 4, r1 + 3 * spacing / 4])
    pairs = tuple((float(s), float(e)) for s, e in zip(starts, ends))
    return pairs, tuple(float(v) for v in refs), (float(limits[0]), float(limits[1]))


# --- config files -----------------------------------------------------------

def default_rig() -> RigConfig:
    """The shipped SmartKC-like rig."""
    with resources.files("corneatopo.data").joinpath("default_rig.json").open() as fh:
        return rig_from_dict(json.load(fh))


def rig_from_dict(d: dict) -> RigConfig:
    p = dict(d["placido"])
    p["ring_axial_positions"] = tuple(tuple(v) for v in p["ring_axial_positions"])
    for key in ("ring_reference_positions", "bright_limits", "support_angles"):
        if key in p:
            p[key] = tuple(p[key])
    cam = dict(d.get("camera", {}))
    if cam.get("principal_point") is not None:
        cam["principal_point"] = tuple(cam["principal_point"])
    return RigConfig(placido=PlacidoSpec(**p), camera=CameraIntrinsics(**cam),
                     gap_base=float(d.get("gap_base", 5.0)),
                     gap_top=float(d.get("gap_top", 0.0)))


def rig_to_dict(rig: RigConfig) -> dict:
    p = asdict(rig.placido)
    p["ring_axial_positions"] = [list(v) for v in rig.placido.ring_axial_positions]
    for key in ("ring_reference_positions", "bright_limits", "support_angles"):
        p[key] = list(p[key])
    cam = asdict(rig.camera)
    cam["principal_point"] = list(rig.camera.principal_point)
    return {"placido": p, "camera": cam, "gap_base": rig.gap_base,
            "gap_top": rig.gap_top}


def load_rig(path) -> RigConfig:
    with open(path) as fh:
        return rig_from_dict(json.load(fh))


def save_rig(rig: RigConfig, path):
    Path(path).write_text(json.dumps(rig_to_dict(rig), indent=2) + "\n")


def build_default_rig(gap_base=5.0) -> RigConfig:
    """Run the ring design procedure and assemble the default rig."""
    cam = CameraIntrinsics.smartphone_crop()
    pairs, refs, limits = design_ring_positions(gap_base=gap_base,
                                                focal_px=cam.focal_px)
    spec = PlacidoSpec(ring_axial_positions=pairs, ring_reference_positions=refs,
                       bright_limits=limits)
    return RigConfig(placido=spec, camera=cam, gap_base=gap_base, gap_top=0.0)
