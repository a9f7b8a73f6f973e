"""Forward model: placido rings reflected off a synthetic cornea.

Rays are cast from the pinhole through each pixel (4x4 supersampled),
intersected with the surface, reflected, and tested against the lit bands of
the cone. A pixel's intensity is the lit fraction of its sub-samples.
"""

from __future__ import annotations

import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .geometry import (GeometryError, RigConfig, sphere_reflection_point)
from .zernike import ZernikeSurface

log = logging.getLogger(__name__)

SUPERSAMPLE = 4
DEFAULT_BRIGHTNESS = 0.7

# ray labels
BACKGROUND, DARK, LIT = 0, 1, 2


class SimulationError(RuntimeError):
    pass


# --- surfaces ---------------------------------------------------------------
# Each shape lives in its own frame: apex at the origin, +z into the eye,
# sag(x, y) >= 0 over the cap.

@dataclass(frozen=True)
class Sphere:
    radius: float

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("sphere radius must be positive")

    def sag(self, x, y):
        r2 = np.asarray(x) ** 2 + np.asarray(y) ** 2
        return self.radius - np.sqrt(self.radius ** 2 - r2)

    def sag_gradient(self, x, y):
        w = np.sqrt(self.radius ** 2 - np.asarray(x) ** 2 - np.asarray(y) ** 2)
        return x / w, y / w

    def sag_hessian(self, x, y):
        R2 = self.radius ** 2
        w2 = R2 - np.asarray(x) ** 2 - np.asarray(y) ** 2
        w3 = w2 ** 1.5
        return (R2 - y ** 2) / w3, x * y / w3, (R2 - x ** 2) / w3

    def aperture(self):
        return self.radius

    def intersect(self, o, d):
        c = np.array([0.0, 0.0, self.radius])
        oc = o - c
        b = np.einsum("...i,...i", oc, d)
        cc = np.einsum("...i,...i", oc, oc) - self.radius ** 2
        disc = b * b - cc
        hit = disc >= 0
        t = -b - np.sqrt(np.where(hit, disc, 0.0))
        p = o + t[..., None] * d
        n = (p - c) / self.radius
        hit &= p[..., 2] < self.radius
        return np.where(hit, t, np.nan), -n, np.zeros(hit.shape, bool)


@dataclass(frozen=True)
class Ellipsoid:
    """Semi-axes ``a`` (x), ``b`` (y) and ``c`` along the optical axis."""

    a: float
    b: float
    c: float

    def __post_init__(self):
        if min(self.a, self.b, self.c) <= 0:
            raise ValueError("semi-axes must be positive")

    def sag(self, x, y):
        u = 1.0 - np.asarray(x) ** 2 / self.a ** 2 - np.asarray(y) ** 2 / self.b ** 2
        return self.c - self.c * np.sqrt(u)

    def sag_gradient(self, x, y):
        u = np.sqrt(1.0 - x ** 2 / self.a ** 2 - y ** 2 / self.b ** 2)
        return self.c * x / (self.a ** 2 * u), self.c * y / (self.b ** 2 * u)

    def sag_hessian(self, x, y):
        a2, b2, c = self.a ** 2, self.b ** 2, self.c
        u = 1.0 - x ** 2 / a2 - y ** 2 / b2
        u3 = u ** 1.5
        hxx = c / a2 * (u + x ** 2 / a2) / u3
        hyy = c / b2 * (u + y ** 2 / b2) / u3
        hxy = c * x * y / (a2 * b2 * u3)
        return hxx, hxy, hyy

    def aperture(self):
        return min(self.a, self.b)

    def intersect(self, o, d):
        s = np.array([1 / self.a, 1 / self.b, 1 / self.c])
        c = np.array([0.0, 0.0, self.c])
        os_ = (o - c) * s
        ds = d * s
        A = np.einsum("...i,...i", ds, ds)
        B = np.einsum("...i,...i", os_, ds)
        C = np.einsum("...i,...i", os_, os_) - 1.0
        disc = B * B - A * C
        hit = disc >= 0
        t = (-B - np.sqrt(np.where(hit, disc, 0.0))) / A
        p = o + t[..., None] * d
        n = (p - c) * s * s
        n /= np.linalg.norm(n, axis=-1, keepdims=True)
        hit &= p[..., 2] < self.c
        return np.where(hit, t, np.nan), -n, np.zeros(hit.shape, bool)


@dataclass(frozen=True)
class ZernikeSag:
    """Height field from Zernike coefficients (mm of sag) over an aperture."""

    coefficients: tuple
    aperture_radius: float
    _poly: ZernikeSurface = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "coefficients", tuple(float(c) for c in self.coefficients))
        object.__setattr__(self, "_poly", ZernikeSurface(self.coefficients,
                                                         self.aperture_radius))

    def sag(self, x, y):
        return self._poly(x, y)

    def sag_gradient(self, x, y):
        return self._poly.gradient(x, y)

    def sag_hessian(self, x, y):
        return self._poly.hessian(x, y)

    def aperture(self):
        return self.aperture_radius

    def intersect(self, o, d, max_iter: int = 50, tol: float = 1e-12):
        # safeguarded Newton on F(t) = z(t) - sag(x(t), y(t)), started on the
        # osculating sphere and iterated only on unconverged rays
        shape = o.shape[:-1]
        o = np.broadcast_to(o, d.shape).reshape(-1, 3)
        d = d.reshape(-1, 3)
        n_ray = len(d)
        dz = d[:, 2]
        lo = (-1.0 - o[:, 2]) / dz
        hi = (4.0 - o[:, 2]) / dz
        hxx, _, hyy = self._poly.hessian(0.0, 0.0)
        R0 = 2.0 / max(float(hxx + hyy), 1e-3)
        oc = o - np.array([0.0, 0.0, R0])
        bq = np.einsum("ij,ij->i", oc, d)
        disc = bq * bq - (np.einsum("ij,ij->i", oc, oc) - R0 * R0)
        t = np.where(disc >= 0, -bq - np.sqrt(np.abs(disc)), -o[:, 2] / dz)
        t = np.clip(t, lo, hi)

        def F(idx, tt):
            p = o[idx] + tt[:, None] * d[idx]
            gx, gy = self._poly.gradient(p[:, 0], p[:, 1])
            val = p[:, 2] - self._poly(p[:, 0], p[:, 1])
            return val, dz[idx] - gx * d[idx, 0] - gy * d[idx, 1]

        idx = np.arange(n_ray)
        # rays that never reach the sag inside the depth window are misses
        f_lo, _ = F(idx, lo)
        f_hi, _ = F(idx, hi)
        ok = (f_lo < 0) & (f_hi > 0)
        active = idx[ok]
        conv = np.zeros(n_ray, bool)
        for _ in range(max_iter):
            if len(active) == 0:
                break
            ta = t[active]
            f, df = F(active, ta)
            neg = f < 0
            lo[active] = np.where(neg, ta, lo[active])
            hi[active] = np.where(neg, hi[active], ta)
            with np.errstate(divide="ignore", invalid="ignore"):
                tn = ta - f / df
            bad = ~np.isfinite(tn) | (tn < lo[active]) | (tn > hi[active])
            tn = np.where(bad, 0.5 * (lo[active] + hi[active]), tn)
            t[active] = tn
            done = (np.abs(tn - ta) < tol) | (f == 0)
            conv[active[done]] = True
            active = active[~done]
        p = o + t[:, None] * d
        f = p[:, 2] - self._poly(p[:, 0], p[:, 1])
        conv &= ok & (np.abs(f) < 1e-9)
        inside = p[:, 0] ** 2 + p[:, 1] ** 2 <= self.aperture_radius ** 2
        gx, gy = self._poly.gradient(p[:, 0], p[:, 1])
        n = np.stack([-gx, -gy, np.ones_like(gx)], axis=-1)  # into the eye, as for quadrics
        n /= np.linalg.norm(n, axis=-1, keepdims=True)
        t = np.where(conv & inside, t, np.nan)
        failed = ok & ~conv
        return t.reshape(shape), n.reshape(shape + (3,)), failed.reshape(shape)


@dataclass(frozen=True)
class SyntheticSurface:
    """A shape plus its pose. ``apex_position`` is in the camera frame;
    ``tilt`` (degrees) rotates the shape about the apex in the x-z plane.
    A ``None`` apex means "on axis at the rig's working distance"."""

    shape: object
    apex_position: tuple | None = None
    tilt: float = 0.0

    @property
    def variant(self) -> str:
        return type(self.shape).__name__


@dataclass(frozen=True)
class PerturbationSpec:
    offset_s: float = 0.0
    tilt_theta: float = 0.0
    working_distance_error: float = 0.0

    def is_ideal(self) -> bool:
        return not (self.offset_s or self.tilt_theta or self.working_distance_error)


@dataclass
class MireImage:
    pixels: np.ndarray
    provenance: str = "simulated"
    failed_pixels: int = 0

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]


def _rot_y(deg: float) -> np.ndarray:
    t = math.radians(deg)
    c, s = math.cos(t), math.sin(t)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def posed(rig: RigConfig, surface, perturb: PerturbationSpec | None = None):
    """Resolve apex position and rotation of a surface in the camera frame."""
    perturb = perturb or PerturbationSpec()
    if not isinstance(surface, SyntheticSurface):
        surface = SyntheticSurface(surface)
    if surface.apex_position is None:
        apex = np.array([0.0, 0.0, rig.working_distance()])
    else:
        apex = np.asarray(surface.apex_position, dtype=float)
    apex = apex + np.array([perturb.offset_s, 0.0, perturb.working_distance_error])
    rot = _rot_y(surface.tilt + perturb.tilt_theta)
    return surface.shape, apex, rot


# --- tracing ------------------------------------------------------------------

def _cone_hit(rig: RigConfig, p, r):
    """First hit of rays ``p + t r`` on the lit part of the cone wall.

    Returns ``(on_wall, axial, hx, hy)`` with ``axial`` measured from the base.
    """
    spec = rig.placido
    T = spec.tan_angle
    gb = rig.gap_base
    rho0 = spec.smallest_ring_radius
    a_min, a_max = spec.bright_limits
    px, py, pz = p[..., 0], p[..., 1], p[..., 2]
    rx, ry, rz = r[..., 0], r[..., 1], r[..., 2]
    q0 = rho0 + (pz - gb) * T
    A = rx * rx + ry * ry - T * T * rz * rz
    B = 2.0 * (px * rx + py * ry - q0 * T * rz)
    C = px * px + py * py - q0 * q0
    disc = B * B - 4 * A * C
    ok = disc >= 0
    sq = np.sqrt(np.where(ok, disc, 0.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        t1 = (-B - sq) / (2 * A)
        t2 = (-B + sq) / (2 * A)
    best = np.full(px.shape, np.inf)
    for t in (t1, t2):
        z = pz + t * rz
        a = z - gb
        valid = ok & np.isfinite(t) & (t > 1e-9) & (q0 + t * rz * T > 0) \
            & (a >= a_min) & (a <= a_max)
        best = np.where(valid & (t < best), t, best)
    on_wall = np.isfinite(best)
    tw = np.where(on_wall, best, 0.0)
    hx, hy = px + tw * rx, py + tw * ry
    axial = np.where(on_wall, pz + tw * rz - gb, np.nan)
    return on_wall, axial, hx, hy


def _cone_label(rig: RigConfig, p, r):
    """Label reflected rays by what they hit on the placido head."""
    spec = rig.placido
    gb = rig.gap_base
    rho0 = spec.smallest_ring_radius
    a_min = spec.bright_limits[0]
    on_wall, axial, hx, hy = _cone_hit(rig, p, r)
    k = np.searchsorted(spec.band_edges(), np.where(on_wall, axial, 0.0), side="right")
    dark = (k % 2) == 1
    for ang in spec.support_angles:
        ca, sa = math.cos(math.radians(ang)), math.sin(math.radians(ang))
        along = hx * ca + hy * sa
        across = -hx * sa + hy * ca
        dark |= (along > 0) & (np.abs(across) < spec.support_width / 2)
    label = np.where(on_wall, np.where(dark, DARK, LIT), BACKGROUND)
    # rays heading back past the wall through the base disc
    px, py, pz = p[..., 0], p[..., 1], p[..., 2]
    rx, ry, rz = r[..., 0], r[..., 1], r[..., 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        tb = (gb + a_min - pz) / rz
    bx, by = px + tb * rx, py + tb * ry
    base = ~on_wall & (rz < 0) & (bx * bx + by * by <= (rho0 + a_min * spec.tan_angle) ** 2)
    return np.where(base, LIT, label)


def trace_geometry(rig: RigConfig, surface, perturb: PerturbationSpec | None, dirs):
    """Surface hit, normal and reflected direction for camera rays ``dirs``.

    Returns ``(hit, point, normal, reflected, failed)`` in the camera frame.
    """
    shape, apex, rot = posed(rig, surface, perturb)
    o_l = np.broadcast_to(rot.T @ (-apex), dirs.shape)
    d_l = dirs @ rot  # rows of rot.T @ d
    t, n_l, failed = shape.intersect(o_l, d_l)
    hit = np.isfinite(t)
    p = apex + (o_l + np.where(hit, t, 0.0)[..., None] * d_l) @ rot.T
    n = n_l @ rot.T
    dn = np.einsum("...i,...i", dirs, n)
    refl = dirs - 2.0 * dn[..., None] * n
    return hit, p, n, refl, failed


def trace(rig: RigConfig, surface, perturb: PerturbationSpec | None, dirs):
    """Trace camera rays with directions ``dirs`` (..., 3).

    Returns ``(label, hit_point, normal, reflected, failed)`` in the camera frame.
    """
    hit, p, n, refl, failed = trace_geometry(rig, surface, perturb, dirs)
    label = np.where(hit, _cone_label(rig, p, refl), BACKGROUND)
    return label, p, n, refl, failed


def _pixel_dirs(rig: RigConfig, rows: np.ndarray, ss: int) -> np.ndarray:
    cam = rig.camera
    offs = (np.arange(ss) + 0.5) / ss - 0.5
    u = np.arange(cam.image_width)[None, :, None, None] + offs[None, None, None, :]
    v = rows[:, None, None, None] + offs[None, None, :, None]
    u, v = np.broadcast_arrays(u, v)
    cx, cy = cam.principal_point
    f = cam.focal_px
    d = np.stack([(u - cx) / f, (v - cy) / f, np.ones(u.shape)], axis=-1)
    return d / np.linalg.norm(d, axis=-1, keepdims=True)


def render_float(rig: RigConfig, surface, perturb: PerturbationSpec | None = None,
                 supersample: int = SUPERSAMPLE, rows_per_chunk: int = 20,
                 threads: int = 1):
    """Lit-coverage fraction per pixel in [0, 1] plus the failed-pixel count."""
    cam = rig.camera
    H = cam.image_height
    out = np.zeros((H, cam.image_width))
    failed = np.zeros((H, cam.image_width), bool)

    def work(r0):
        rows = np.arange(r0, min(r0 + rows_per_chunk, H))
        d = _pixel_dirs(rig, rows, supersample)
        label, _, _, _, bad = trace(rig, surface, perturb, d)
        out[rows] = (label == LIT).mean(axis=(2, 3))
        failed[rows] = bad.any(axis=(2, 3))

    starts = range(0, H, rows_per_chunk)
    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            list(ex.map(work, starts))
    else:
        for r0 in starts:
            work(r0)
    return out, int(failed.sum())


def render(rig: RigConfig, surface, perturb: PerturbationSpec | None = None,
           brightness: float = DEFAULT_BRIGHTNESS, threads: int = 1) -> MireImage:
    """Render an 8-bit grayscale mire image.

    Raises ``SimulationError`` when the surface is not seen by the camera.
    """
    cov, failed = render_float(rig, surface, perturb, threads=threads)
    if not np.any(cov > 0) and brightness > 0:
        raise SimulationError("surface does not reflect the placido into the camera")
    if failed:
        log.warning("%d pixels failed to converge and were rendered dark", failed)
    pix = np.clip(np.rint(cov * 255.0 * brightness), 0, 255).astype(np.uint8)
    return MireImage(pix, provenance="simulated", failed_pixels=failed)


def ring_card(size: int = 500, center=(249.5, 249.5), radii=None, band_width: float = 3.25,
              disc_radius: float | None = None, outer_radius: float | None = None,
              brightness: float = DEFAULT_BRIGHTNESS, supersample: int = 8) -> np.ndarray:
    """Concentric dark bands of known centre radius on a bright field.

    Pixel values are area coverage (box-filtered on a ``supersample`` grid),
    so band edges are anti-aliased like a real capture.
    """
    if radii is None:
        radii = 8.0 + 6.5 * np.arange(28)
    radii = np.asarray(radii, dtype=float)
    half = band_width / 2.0
    disc = radii[0] - band_width if disc_radius is None else disc_radius
    outer = radii[-1] + band_width if outer_radius is None else outer_radius
    offs = (np.arange(supersample) + 0.5) / supersample - 0.5
    out = np.zeros((size, size))
    cols = np.arange(size)
    for r0 in range(size):
        ys = (r0 + offs)[:, None, None, None]
        xs = (cols[None, :] + offs[:, None])[None, :, :, None]  # (1, ss, W, 1)
        r = np.hypot(xs - center[0], ys - center[1])[..., 0]     # (ss, ss, W)
        dark = np.zeros(r.shape, bool)
        for rc in radii:
            dark |= np.abs(r - rc) <= half
        lit = (r <= outer) & ~dark
        lit |= r < disc
        out[r0] = lit.mean(axis=(0, 1))
    return np.clip(np.rint(out * 255.0 * brightness), 0, 255).astype(np.uint8)


# --- oracles ------------------------------------------------------------------

def analytic_mire_radii(rig: RigConfig, surface, which: str = "reference") -> np.ndarray:
    """Exact image radii (px) of each ring's mire on an aligned sphere.

    ``which`` selects ring reference points, or "start"/"end" band edges.
    """
    shape = surface.shape if isinstance(surface, SyntheticSurface) else surface
    if not isinstance(shape, Sphere):
        raise SimulationError("closed-form mire radii need a sphere")
    spec = rig.placido
    if which == "reference":
        a = np.asarray(spec.ring_reference_positions)
    else:
        pairs = np.asarray(spec.ring_axial_positions)
        a = pairs[:, 0] if which == "start" else pairs[:, 1]
    W = rig.working_distance()
    R = shape.radius
    try:
        phi = sphere_reflection_point(R, W, spec.radius_at(a), rig.gap_base + a)
    except GeometryError as exc:
        raise SimulationError(str(exc)) from exc
    px = R * np.sin(phi)
    pz = W + R - R * np.cos(phi)
    return rig.camera.focal_px * px / pz


def traced_mire_radii(rig: RigConfig, surface, perturb: PerturbationSpec | None = None,
                      angles_deg=None, center=None, which: str = "reference",
                      r_max: float | None = None, iterations: int = 60) -> np.ndarray:
    """Image radii (px) of each ring's mire along image meridians, any surface.

    For meridian angle ``theta`` about ``center`` (default: principal point),
    the radius whose camera ray reflects onto the ring's axial position is
    found by bisection. Shape ``(len(angles), ring_count)``, NaN where the
    ring is not seen.
    """
    spec = rig.placido
    cam = rig.camera
    if angles_deg is None:
        angles_deg = np.arange(360.0)
    th = np.radians(np.asarray(angles_deg, dtype=float))
    cx, cy = cam.principal_point if center is None else center
    if which == "reference":
        target = np.asarray(spec.ring_reference_positions)
    else:
        pairs = np.asarray(spec.ring_axial_positions)
        target = pairs[:, 0] if which == "start" else pairs[:, 1]
    r_max = r_max or 0.5 * min(cam.image_width, cam.image_height)
    f = cam.focal_px

    def axial_at(r):
        u = cx + r * np.cos(th)[:, None] - cam.principal_point[0]
        v = cy + r * np.sin(th)[:, None] - cam.principal_point[1]
        d = np.stack([u / f, v / f, np.ones(np.broadcast(u, r).shape)], axis=-1)
        d /= np.linalg.norm(d, axis=-1, keepdims=True)
        hit, p, _, refl, _ = trace_geometry(rig, surface, perturb, d)
        _, ax, _, _ = _cone_hit(rig, p, refl)
        return np.where(hit, ax, np.nan)

    # coarse profile brackets each ring, bisection refines
    rs = np.linspace(0.0, r_max, 801)
    prof = axial_at(np.broadcast_to(rs, (len(th), len(rs))))
    out = np.full((len(th), len(target)), np.nan)
    for i, a in enumerate(target):
        above = np.nan_to_num(prof, nan=-np.inf) >= a
        has = above.any(axis=1)
        j = np.argmax(above, axis=1)
        ok = has & (j > 0)
        jj = np.where(ok, j, 1)
        lo = rs[jj - 1].copy()
        hi = rs[jj].copy()
        valid_lo = np.isfinite(prof[np.arange(len(th)), jj - 1])
        ok &= valid_lo
        for _ in range(iterations):
            mid = 0.5 * (lo + hi)
            am = axial_at(mid[:, None])[:, 0]
            up = np.nan_to_num(am, nan=np.inf) >= a
            hi = np.where(up, mid, hi)
            lo = np.where(up, lo, mid)
        out[ok, i] = 0.5 * (lo + hi)[ok]
    return out


def surface_elevation(surface, x, y, rig: RigConfig | None = None,
                      perturb: PerturbationSpec | None = None):
    """Height of the (posed) surface above the camera plane at lateral (x, y).

    With no rig and no explicit apex, the apex sits at the origin and the
    result is the sag.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if not isinstance(surface, SyntheticSurface):
        surface = SyntheticSurface(surface, apex_position=(0.0, 0.0, 0.0))
    if rig is None and surface.apex_position is None:
        surface = SyntheticSurface(surface.shape, (0.0, 0.0, 0.0), surface.tilt)
    shape = surface.shape
    if rig is None and surface.tilt == 0 and (perturb is None or perturb.is_ideal()):
        ax, ay, az = surface.apex_position
        lx, ly = x - ax, y - ay
        if np.any(lx ** 2 + ly ** 2 > shape.aperture() ** 2):
            raise GeometryError("point outside the surface aperture")
        return az + shape.sag(lx, ly)
    # general pose: cast a line along +z
    shape_, apex, rot = posed(rig or _dummy_rig(), surface, perturb)
    o = np.stack([x, y, np.full(x.shape, apex[2] - 50.0)], axis=-1)
    d = np.broadcast_to(np.array([0.0, 0.0, 1.0]), o.shape)
    o_l = (o - apex) @ rot
    d_l = d @ rot
    res = shape_.intersect(o_l, d_l)
    t = res[0]
    if np.any(~np.isfinite(t)):
        raise GeometryError("point outside the surface aperture")
    return o[..., 2] + t


def _dummy_rig():
    from .geometry import default_rig
    return default_rig()


# --- scene files ----------------------------------------------------------------

def shape_from_dict(d: dict):
    kind = d["variant"].lower()
    if kind == "sphere":
        return Sphere(float(d["radius"]))
    if kind == "ellipsoid":
        return Ellipsoid(float(d["a"]), float(d["b"]), float(d["c"]))
    if kind == "zernike":
        if "fixture" in d:
            return zernike_fixture(int(d["fixture"]))
        return ZernikeSag(tuple(d["coefficients"]), float(d["aperture_radius"]))
    raise ValueError(f"unknown surface variant {d['variant']!r}")


def shape_to_dict(shape) -> dict:
    if isinstance(shape, Sphere):
        return {"variant": "sphere", "radius": shape.radius}
    if isinstance(shape, Ellipsoid):
        return {"variant": "ellipsoid", "a": shape.a, "b": shape.b, "c": shape.c}
    return {"variant": "zernike", "aperture_radius": shape.aperture_radius,
            "coefficients": list(shape.coefficients)}


def load_scene(path):
    """Scene file: ``{"surface": {...}, "perturbation": {...}, "brightness": x}``."""
    with open(path) as fh:
        d = json.load(fh)
    if "surface" not in d:
        raise ValueError("scene file needs a 'surface' entry")
    shape = shape_from_dict(d["surface"])
    pert = PerturbationSpec(**d.get("perturbation", {}))
    return shape, pert, float(d.get("brightness", DEFAULT_BRIGHTNESS))


def zernike_fixtures() -> list[ZernikeSag]:
    """The five frozen cornea-like Zernike test surfaces."""
    with resources.files("corneatopo.data").joinpath("zernike_fixtures.json").open() as fh:
        data = json.load(fh)
    return [ZernikeSag(tuple(f["coefficients"]), f["aperture_radius"])
            for f in data["fixtures"]]


def zernike_fixture(i: int) -> ZernikeSag:
    return zernike_fixtures()[i]
