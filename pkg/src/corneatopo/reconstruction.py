"""Corneal surface from indexed mire points.

Per meridian, the surface profile is grown outward from the apex as a chain
of C2-continuous cubics. Each new knot lies on the camera ray of its mire
and satisfies the law of reflection towards the ring that produced it. The
pooled knots are then fitted with an orthonormal Zernike expansion, from
which axial and tangential dioptric maps and sim-K are derived.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import RigConfig
from .pipeline import MirePointSet
from .zernike import ZernikeSurface, design_matrix, n_terms

log = logging.getLogger(__name__)

KERATOMETRIC_INDEX = 1.3375
POWER_FACTOR = (KERATOMETRIC_INDEX - 1.0) * 1000.0  # D * mm
ROOT_TOL = 1e-10
MAX_TRUNCATED_FRACTION = 0.2


class ReconstructionError(RuntimeError):
    pass


def diopters(radius_mm):
    """Keratometric power (D) of a radius of curvature in mm."""
    return POWER_FACTOR / np.asarray(radius_mm, dtype=float)


@dataclass
class MeridianCurve:
    """Profile ``h(rho)`` (sag, mm) along one meridian.

    Knot ``0`` is the apex. Segment ``i`` spans knots ``i`` to ``i+1`` and is
    stored in Taylor form about its start: ``h0 + s*d + c2*d**2 + c3*d**3``.
    """

    meridian_angle: float
    rho: np.ndarray
    z: np.ndarray
    dz: np.ndarray
    d2z: np.ndarray
    coefficients: np.ndarray          # (n_segments, 4)
    mire_index: np.ndarray            # -1 for the apex
    interpolated: np.ndarray          # knot came from a gap-filled radius
    reflection_residual: np.ndarray   # rad, per knot (apex 0)
    truncated_at: int | None = None

    @property
    def samples(self) -> list:
        return list(zip(self.rho.tolist(), self.z.tolist(), self.dz.tolist(),
                        self.d2z.tolist()))

    def evaluate(self, rho):
        """Height, slope and curvature of the piecewise cubic at ``rho``."""
        rho = np.asarray(rho, dtype=float)
        seg = np.clip(np.searchsorted(self.rho, rho, side="right") - 1, 0,
                      len(self.coefficients) - 1)
        c = self.coefficients[seg]
        d = rho - self.rho[seg]
        h = c[..., 0] + d * (c[..., 1] + d * (c[..., 2] + d * c[..., 3]))
        hp = c[..., 1] + d * (2 * c[..., 2] + 3 * d * c[..., 3])
        hpp = 2 * c[..., 2] + 6 * d * c[..., 3]
        return h, hp, hpp


def c2_residuals(curve: MeridianCurve) -> np.ndarray:
    """|jump| in value, slope and curvature at each interior knot, shape (n, 3)."""
    c = curve.coefficients
    if len(c) < 2:
        return np.zeros((0, 3))
    d = np.diff(curve.rho)[:-1]
    a = c[:-1]
    end = np.stack([a[:, 0] + d * (a[:, 1] + d * (a[:, 2] + d * a[:, 3])),
                    a[:, 1] + d * (2 * a[:, 2] + 3 * d * a[:, 3]),
                    2 * a[:, 2] + 6 * d * a[:, 3]], axis=1)
    start = np.stack([c[1:, 0], c[1:, 1], 2 * c[1:, 2]], axis=1)
    return np.abs(end - start)


# --- arc step -------------------------------------------------------------------

def _ring_miss(rho, z, slope, tslope, o_rho, o_z, exact: bool = False):
    """How far the reflected camera ray misses the ring circle.

    Works in the meridian frame: the knot is at ``(rho, 0, z)`` and the sag
    has radial slope ``slope`` and azimuthal slope ``tslope`` (``dh/ds``
    across the meridian). Returns the signed miss at the ring's depth
    divided by the travel distance (rad, to first order), or the exact
    unsigned angle between the reflected ray and the nearest ring point.
    """
    nrm = np.sqrt(slope * slope + tslope * tslope + 1.0)
    nx, ny, nz = slope / nrm, tslope / nrm, -1.0 / nrm
    dl = np.hypot(rho, z)
    dx, dz = rho / dl, z / dl
    dn = dx * nx + dz * nz
    rx, ry, rz = dx - 2 * dn * nx, -2 * dn * ny, dz - 2 * dn * nz
    t = (o_z - z) / rz
    qx, qy = rho + t * rx, t * ry
    q_rho = np.hypot(qx, qy)
    travel = t * np.sqrt(rx * rx + ry * ry + rz * rz)
    if not exact:
        return (q_rho - o_rho) / travel
    ox, oy = o_rho * qx / q_rho, o_rho * qy / q_rho
    vx, vy, vz = ox - rho, oy, o_z - z
    cx = ry * vz - rz * vy
    cy = rz * vx - rx * vz
    cz = rx * vy - ry * vx
    return np.arctan2(np.sqrt(cx * cx + cy * cy + cz * cz), rx * vx + ry * vy + rz * vz)


def _segment_state(h, W, k, prev, first):
    """Cubic through the previous knot ending at depth ``W + h`` on ray ``k``.

    Returns (rho, slope, curvature, c2, c3) at the new knot.
    """
    z = W + h
    rho = k * z
    if first:
        q = 2.0 * h / (rho * rho)
        return rho, q * rho, q, 0.5 * q, np.zeros_like(q)
    r0, h0, s0, cc0 = prev
    d = rho - r0
    c2 = 0.5 * cc0
    c3 = (h - h0 - s0 * d - c2 * d * d) / (d * d * d)
    slope = s0 + 2 * c2 * d + 3 * c3 * d * d
    curv = 2 * c2 + 6 * c3 * d
    return rho, slope, curv, c2, c3


def _azimuthal_slope(guide, theta, rho):
    """Cross-meridian slope of ``guide`` at radius ``rho`` on meridians ``theta``."""
    if guide is None:
        return np.zeros_like(rho)
    th = np.reshape(theta, (-1,) + (1,) * (np.ndim(rho) - 1))
    c, s = np.cos(th), np.sin(th)
    gx, gy = guide.sag_gradient(rho * c, rho * s)
    return -gx * s + gy * c


def _residual(h, W, k, prev, first, o_rho, o_z, guide=None, theta=None):
    rho, slope, *_ = _segment_state(h, W, k, prev, first)
    return _ring_miss(rho, W + h, slope, _azimuthal_slope(guide, theta, rho), o_rho, o_z)


def _solve_segment(W, k, prev, first, o_rho, o_z, h_pred, half_width,
                   guide=None, theta=None, n_grid: int = 81, max_iter: int = 200):
    """Root of the reflection residual in the knot height, vectorised.

    A grid around the predicted height brackets the sign change closest to
    the prediction; Illinois false position refines it. Returns (h, ok).
    """
    m = len(k)
    offs = np.linspace(-1.0, 1.0, n_grid)
    H = h_pred[:, None] + half_width[:, None] * offs[None, :]
    bc = lambda a: a[:, None]  # noqa: E731
    prev_b = None if first else tuple(bc(p) for p in prev)
    with np.errstate(all="ignore"):
        F = _residual(H, W, bc(k), prev_b, first, o_rho, o_z, guide, theta)
        if not first:
            rho = bc(k) * (W + H)
            F = np.where(rho > bc(prev[0]), F, np.nan)
    sc = (np.sign(F[:, :-1]) * np.sign(F[:, 1:]) <= 0) & np.isfinite(F[:, :-1]) \
        & np.isfinite(F[:, 1:]) & (np.abs(F[:, :-1] - F[:, 1:]) < 1.0)
    ok = sc.any(axis=1)
    dist = np.where(sc, np.abs(0.5 * (offs[:-1] + offs[1:]))[None, :], np.inf)
    idx = np.argmin(dist, axis=1)
    rows = np.arange(m)
    a = np.where(ok, H[rows, idx], np.nan)
    b = np.where(ok, H[rows, idx + 1], np.nan)
    fa = np.where(ok, F[rows, idx], np.nan)
    fb = np.where(ok, F[rows, idx + 1], np.nan)
    side = np.zeros(m)
    with np.errstate(all="ignore"):
        for _ in range(max_iter):
            active = ok & (np.abs(b - a) > ROOT_TOL)
            if not active.any():
                break
            c = np.where(fb != fa, (a * fb - b * fa) / (fb - fa), 0.5 * (a + b))
            c = np.where((c <= np.minimum(a, b)) | (c >= np.maximum(a, b)),
                         0.5 * (a + b), c)
            fc = _residual(c, W, k, prev, first, o_rho, o_z, guide, theta)
            left = np.sign(fc) == np.sign(fa)
            # Illinois: halve the stale end's value when the same side repeats
            fb_new = np.where(left & (side == 1), 0.5 * fb, fb)
            fa_new = np.where(~left & (side == -1), 0.5 * fa, fa)
            a = np.where(active & left, c, a)
            fa = np.where(active & left, fc, fa_new)
            b = np.where(active & ~left, c, b)
            fb = np.where(active & ~left, fc, fb_new)
            side = np.where(active, np.where(left, 1, -1), side)
            exact = active & (fc == 0)
            a = np.where(exact, c, a)
            b = np.where(exact, c, b)
    h = 0.5 * (a + b)
    ok &= np.abs(b - a) <= 10 * ROOT_TOL
    return h, ok


def arc_step(scan: MirePointSet, rig: RigConfig, prior_radius: float = 7.8,
             max_truncated: float = MAX_TRUNCATED_FRACTION, guide=None) -> list:
    """Grow one C2 cubic chain per meridian, knot by knot, from the apex.

    The apex sits on the reference axis at the working distance with zero
    slope; the first arc is a parabola fixed by the innermost mire. Ray
    slopes are taken relative to the detected mire centre. Each knot is
    placed where the reflected camera ray meets its ring. The surface normal
    there uses the cubic's radial slope and, when a ``guide`` surface is
    given, its slope across the meridian (zero otherwise).
    """
    spec = rig.placido
    W = rig.working_distance()
    f = rig.camera.focal_px
    kmer, nmire = scan.radii.shape
    nmire = min(nmire, spec.ring_count)
    a_ref = np.asarray(spec.ring_reference_positions)[:nmire]
    o_rho = spec.radius_at(a_ref)
    o_z = rig.gap_base + a_ref
    slopes = scan.radii[:, :nmire] / f
    theta = np.radians(scan.angles)

    rho = np.zeros((kmer, nmire + 1))
    h = np.zeros((kmer, nmire + 1))
    hp = np.zeros((kmer, nmire + 1))
    hpp = np.zeros((kmer, nmire + 1))
    coef = np.full((kmer, nmire, 4), np.nan)
    resid = np.zeros((kmer, nmire + 1))
    alive = np.ones(kmer, bool)
    n_knots = np.ones(kmer, int)
    truncated = np.full(kmer, -1)

    for i in range(nmire):
        kk = slopes[:, i]
        have = alive & np.isfinite(kk) & (kk > 0)
        if i > 0:
            have &= kk > slopes[:, i - 1]
            bad_order = alive & np.isfinite(kk) & ~(kk > slopes[:, i - 1])
            truncated[bad_order & (truncated < 0)] = i
            alive &= ~bad_order
        alive &= np.isfinite(kk)
        if not have.any():
            break
        idx = np.nonzero(have)[0]
        first = i == 0
        if first:
            # prior sphere seeds the bracket
            z0 = W + prior_radius * (1 - np.sqrt(np.clip(
                1 - (kk[idx] * W / prior_radius) ** 2, 0, None)))
            h_pred = z0 - W
            half = np.maximum(4 * np.abs(h_pred), 0.02)
            prev = None
        else:
            r0, h0, s0, c0 = rho[idx, i], h[idx, i], hp[idx, i], hpp[idx, i]
            # quadratic extrapolation of the current arc onto the new ray:
            # h0 + s0 d + A d^2 = (r0 + d) / k - W
            kk_i = kk[idx]
            A = 0.5 * c0
            Bq = s0 - 1.0 / kk_i
            Cq = h0 - r0 / kk_i + W
            with np.errstate(all="ignore"):
                disc = Bq * Bq - 4 * A * Cq
                d_pred = np.where(np.abs(A) > 1e-12,
                                  (-Bq - np.sqrt(np.clip(disc, 0, None))) / (2 * A),
                                  -Cq / Bq)
            d_pred = np.where(np.isfinite(d_pred) & (d_pred > 0), d_pred,
                              kk_i * W - r0)
            rho_pred = r0 + d_pred
            h_pred = rho_pred / kk_i - W
            half = np.maximum(np.abs(d_pred), 0.01)
            prev = (r0, h0, s0, c0)
        hs, ok = _solve_segment(W, kk[idx], prev, first, o_rho[i], o_z[i], h_pred, half,
                                guide, theta[idx])
        if not first:
            prev_ok = tuple(p[ok] for p in prev)
        good = idx[ok]
        fail = idx[~ok]
        truncated[fail[truncated[fail] < 0]] = i
        alive[fail] = False
        if len(good) == 0:
            continue
        r_new, s_new, c_new, c2, c3 = _segment_state(
            hs[ok], W, kk[good], None if first else prev_ok, first)
        if first:
            start = (np.zeros(len(good)), np.zeros(len(good)), np.zeros(len(good)))
            hpp[good, 0] = 2 * c2
        else:
            start = (h[good, i], hp[good, i], hpp[good, i])
        coef[good, i] = np.column_stack([start[0], start[1], c2, c3])
        d = r_new - rho[good, i]
        # carry the knot state through the cubic so continuity is exact
        rho[good, i + 1] = r_new
        h[good, i + 1] = start[0] + d * (start[1] + d * (c2 + d * c3))
        hp[good, i + 1] = start[1] + d * (2 * c2 + 3 * d * c3)
        hpp[good, i + 1] = 2 * c2 + 6 * d * c3
        ts = _azimuthal_slope(guide, theta[good], r_new)
        resid[good, i + 1] = _ring_miss(r_new, W + h[good, i + 1], hp[good, i + 1], ts,
                                        o_rho[i], o_z[i], exact=True)
        n_knots[good] = i + 2

    n_trunc = int(np.sum(truncated >= 0))
    if n_trunc > max_truncated * kmer:
        raise ReconstructionError(
            f"{n_trunc} of {kmer} meridians truncated (limit {max_truncated:.0%})")
    if n_trunc:
        log.info("%d meridians truncated", n_trunc)

    curves = []
    angles = scan.angles
    for j in range(kmer):
        n = n_knots[j]
        if n < 2:
            continue
        gm = scan.gap_mask[j, :n - 1]
        curves.append(MeridianCurve(
            meridian_angle=float(angles[j]),
            rho=rho[j, :n].copy(), z=h[j, :n].copy(), dz=hp[j, :n].copy(),
            d2z=hpp[j, :n].copy(), coefficients=coef[j, :n - 1].copy(),
            mire_index=np.arange(-1, n - 1), interpolated=np.concatenate([[False], gm]),
            reflection_residual=resid[j, :n].copy(),
            truncated_at=int(truncated[j]) if truncated[j] >= 0 else None))
    if not curves:
        raise ReconstructionError("no meridian could be reconstructed")
    return curves


# --- surface fit ----------------------------------------------------------------

@dataclass
class CornealSurface:
    zernike_coefficients: np.ndarray
    aperture_radius: float
    residual_rms: float
    meridian_curves: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        self.zernike_coefficients = np.asarray(self.zernike_coefficients, float)
        self._poly = ZernikeSurface(self.zernike_coefficients, self.aperture_radius)

    @property
    def degree(self) -> int:
        return self._poly.degree

    def sag(self, x, y):
        return self._poly(x, y)

    def sag_gradient(self, x, y):
        return self._poly.gradient(x, y)

    def sag_hessian(self, x, y):
        return self._poly.hessian(x, y)

    def to_dict(self) -> dict:
        d = self._poly.to_dict()
        d["residual_rms_mm"] = self.residual_rms
        d["units"] = "mm of sag, +z into the eye, x/y in the camera frame"
        return d


def fit_zernike_points(x, y, z, aperture_radius: float, degree: int = 8):
    """Least-squares Zernike coefficients and RMS residual for scattered samples."""
    x = np.asarray(x, float).ravel()
    y = np.asarray(y, float).ravel()
    z = np.asarray(z, float).ravel()
    nt = n_terms(degree)
    if len(z) < nt:
        raise ReconstructionError(f"{len(z)} samples cannot determine {nt} terms")
    A = design_matrix(x / aperture_radius, y / aperture_radius, degree)
    coef, _, rank, sv = np.linalg.lstsq(A, z, rcond=None)
    if rank < nt or sv[-1] < 1e-10 * sv[0]:
        raise ReconstructionError("degenerate sampling: design matrix is rank deficient")
    rms = float(np.sqrt(np.mean((A @ coef - z) ** 2)))
    return coef, rms


def surface_aperture(curves: list) -> float:
    """Largest radius covered on every meridian."""
    full = [c for c in curves if c.truncated_at is None] or curves
    return float(min(c.rho[-1] for c in full))


def fit_zernike(curves: list, degree: int = 8, aperture_radius: float | None = None,
                include_interpolated: bool = False) -> CornealSurface:
    """Pool knots from all meridians and fit the Zernike expansion of given degree."""
    if not curves:
        raise ReconstructionError("no meridian curves to fit")
    ap = aperture_radius or surface_aperture(curves)
    xs, ys, zs = [np.zeros(1)], [np.zeros(1)], [np.zeros(1)]
    for c in curves:
        sel = (c.rho > 0) & (c.rho <= ap * (1 + 1e-12))
        if not include_interpolated:
            sel &= ~c.interpolated
        t = math.radians(c.meridian_angle)
        xs.append(c.rho[sel] * math.cos(t))
        ys.append(c.rho[sel] * math.sin(t))
        zs.append(c.z[sel])
    coef, rms = fit_zernike_points(np.concatenate(xs), np.concatenate(ys),
                                   np.concatenate(zs), ap, degree)
    return CornealSurface(coef, ap, rms, list(curves))


def reconstruct_surface(scan: MirePointSet, rig: RigConfig, degree: int = 8,
                        passes: int = 4, tol: float = 1e-7,
                        prior_radius: float = 7.8) -> CornealSurface:
    """Arc-step and Zernike fit, repeated with the cross-meridian slopes of
    the previous fit until the coefficients settle (max change < ``tol`` mm)."""
    guide = None
    surf = None
    for _ in range(max(1, passes)):
        curves = arc_step(scan, rig, prior_radius, guide=guide)
        new = fit_zernike(curves, degree)
        if surf is not None and len(new.zernike_coefficients) == len(surf.zernike_coefficients) \
                and np.max(np.abs(new.zernike_coefficients - surf.zernike_coefficients)) < tol:
            return new
        surf = guide = new
    return surf


# --- curvature ------------------------------------------------------------------

def meridional_derivatives(surface, x, y):
    """Radial slope and curvature of the sag along the meridian through (x, y)."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    rho = np.hypot(x, y)
    safe = np.where(rho > 0, rho, 1.0)
    c = np.where(rho > 0, x / safe, 1.0)
    s = np.where(rho > 0, y / safe, 0.0)
    gx, gy = surface.sag_gradient(x, y)
    hxx, hxy, hyy = surface.sag_hessian(x, y)
    hp = gx * c + gy * s
    hpp = hxx * c * c + 2 * hxy * c * s + hyy * s * s
    return rho, hp, hpp


def axial_power(surface, x, y):
    """Axial power (D): normal distance to the z axis, apex limit = tangential."""
    rho, hp, hpp = meridional_derivatives(surface, x, y)
    near = rho < 1e-6
    with np.errstate(divide="ignore", invalid="ignore"):
        inv_r = np.where(near, hpp, hp / (np.where(near, 1.0, rho) * np.sqrt(1 + hp * hp)))
    return POWER_FACTOR * inv_r


def tangential_power(surface, x, y):
    """Tangential power (D) from the in-meridian curvature of the sag."""
    _, hp, hpp = meridional_derivatives(surface, x, y)
    return POWER_FACTOR * hpp / (1 + hp * hp) ** 1.5


@dataclass
class CurvatureMaps:
    axial: np.ndarray
    tangential: np.ndarray
    zone_diameter: float
    mask: np.ndarray
    extent: tuple  # (xmin, xmax, ymin, ymax) mm, rows follow +y

    def summary(self) -> dict:
        def stats(a):
            v = a[self.mask]
            return {"min": float(v.min()), "max": float(v.max()), "mean": float(v.mean())}
        return {"zone_diameter_mm": self.zone_diameter, "axial": stats(self.axial),
                "tangential": stats(self.tangential)}


def _grid(zone_diameter: float, size: int):
    r = zone_diameter / 2
    c = (np.arange(size) + 0.5) / size * 2 * r - r
    X, Y = np.meshgrid(c, c)
    return X, Y, np.hypot(X, Y) <= r


def axial_map(surface: CornealSurface, zone_diameter: float | None = None,
              size: int = 512):
    zone = _check_zone(surface, zone_diameter)
    X, Y, inside = _grid(zone, size)
    D = axial_power(surface, X, Y)
    valid = inside & np.isfinite(D) & (D > 0)
    return np.where(valid, D, np.nan), valid


def tangential_map(surface: CornealSurface, zone_diameter: float | None = None,
                   size: int = 512, floor: float = 1.0):
    zone = _check_zone(surface, zone_diameter)
    X, Y, inside = _grid(zone, size)
    D = tangential_power(surface, X, Y)
    valid = inside & np.isfinite(D) & (D >= floor)
    return np.where(valid, D, np.nan), valid


def _check_zone(surface, zone_diameter):
    ap = surface.aperture_radius
    zone = 2 * ap if zone_diameter is None else float(zone_diameter)
    if zone <= 0 or zone / 2 > ap * (1 + 1e-9):
        raise ReconstructionError(
            f"zone {zone:.2f} mm exceeds reconstructed diameter {2 * ap:.2f} mm")
    return zone


def curvature_maps(surface: CornealSurface, zone_diameter: float | None = None,
                   size: int = 512) -> CurvatureMaps:
    zone = _check_zone(surface, zone_diameter)
    ax, mask_a = axial_map(surface, zone, size)
    tg, mask_t = tangential_map(surface, zone, size)
    r = zone / 2
    return CurvatureMaps(ax, tg, zone, mask_a & mask_t, (-r, r, -r, r))


# --- sim-K ----------------------------------------------------------------------

@dataclass
class SimK:
    sim_k1: float
    sim_k2: float
    flat_meridian_axis: float
    zone_diameter: float = 3.0

    @property
    def steep_meridian_axis(self) -> float:
        return (self.flat_meridian_axis + 90.0) % 180.0

    @property
    def cylinder(self) -> float:
        return self.sim_k1 - self.sim_k2

    def to_dict(self) -> dict:
        return {"sim_k1": self.sim_k1, "sim_k2": self.sim_k2,
                "flat_axis_deg": self.flat_meridian_axis,
                "steep_axis_deg": self.steep_meridian_axis,
                "zone_diameter_mm": self.zone_diameter}


def meridian_powers(surface, zone_diameter: float = 3.0, n_radial: int = 30):
    """Mean axial power per axis 0..179 deg over both half-meridians.

    Axes are measured counter-clockwise from +x with +y pointing up on the
    displayed map (image rows grow downward, hence the sign flip).
    """
    r = zone_diameter / 2
    rr = (np.arange(n_radial) + 1) * r / n_radial
    ax = np.radians(np.arange(180))
    out = np.zeros(180)
    for sgn in (1.0, -1.0):
        X = sgn * np.outer(np.cos(ax), rr)
        Y = -sgn * np.outer(np.sin(ax), rr)
        out += axial_power(surface, X, Y).mean(axis=1)
    return out / 2


def sim_k(surface: CornealSurface, zone_diameter: float = 3.0) -> SimK:
    """Flattest axis average power (K2) and the power 90 deg away (K1)."""
    if surface.aperture_radius < zone_diameter / 2:
        raise ReconstructionError(
            f"surface covers {2 * surface.aperture_radius:.2f} mm, "
            f"sim-K needs {zone_diameter} mm")
    p = meridian_powers(surface, zone_diameter)
    flat = int(np.argmin(p))  # first minimum: lowest angle wins ties
    steep = (flat + 90) % 180
    return SimK(float(p[steep]), float(p[flat]), float(flat), float(zone_diameter))


# --- evaluation against truth ---------------------------------------------------

@dataclass
class ReconError:
    mean_percent: float
    radius_percent: float
    zone_diameter: float

    def to_dict(self):
        return {"mean_percent": self.mean_percent, "radius_percent": self.radius_percent,
                "zone_diameter_mm": self.zone_diameter}


def axial_radius(surface, x, y):
    return POWER_FACTOR / axial_power(surface, x, y)


def reconstruction_error(surface: CornealSurface, truth, zone: float | None = None,
                         n: int = 101) -> ReconError:
    """Percent error of the recovered shape against the true intrinsic shape.

    Both shapes are compared apex-aligned on a uniform grid over the zone
    (diameter, mm): elevation error is mean |dz| over mean |z_true|, and the
    radius error is the mean relative error of the axial radius.
    """
    shape = getattr(truth, "shape", truth)
    zone = 2 * surface.aperture_radius if zone is None else float(zone)
    if zone / 2 > surface.aperture_radius * (1 + 1e-9):
        raise ReconstructionError("zone exceeds reconstructed aperture")
    r = zone / 2
    c = np.linspace(-r, r, n)
    X, Y = np.meshgrid(c, c)
    m = np.hypot(X, Y) <= r
    x, y = X[m], Y[m]
    zt = shape.sag(x, y)
    zf = surface.sag(x, y)
    mean_pct = 100.0 * np.mean(np.abs(zf - zt)) / np.mean(np.abs(zt))
    rt = axial_radius(shape, x, y)
    rf = axial_radius(surface, x, y)
    roc_pct = 100.0 * np.mean(np.abs(rf - rt) / np.abs(rt))
    return ReconError(float(mean_pct), float(roc_pct), float(zone))


def sphere_radius_fit(curves: list, include_interpolated: bool = False) -> float:
    """Radius of the apex-tangent sphere best fitting the knots (algebraic LSQ)."""
    num = den = 0.0
    for c in curves:
        sel = c.rho > 0
        if not include_interpolated:
            sel &= ~c.interpolated
        r, z = c.rho[sel], c.z[sel]
        num += float(np.sum((r * r + z * z) * z))
        den += float(np.sum(2 * z * z))
    if den <= 0:
        raise ReconstructionError("no elevation samples for a sphere fit")
    return num / den
