"""Mire image -> centre + indexed, anti-aliased mire points.

Steps: central crop and CCIR-601 grayscale, 7x7 Gaussian smoothing,
orientation-guided Gabor enhancement, fixed threshold, Hough centre, and a
radial scan that walks outward along ``k`` meridians collecting dark bands.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field

import cv2
import numpy as np
from scipy.interpolate import CubicSpline
from scipy.ndimage import map_coordinates

from .geometry import PlacidoSpec

log = logging.getLogger(__name__)


class PipelineError(RuntimeError):
    pass


class BlankImageError(PipelineError):
    """The image carries no usable structure."""


class NoCircleError(PipelineError):
    """No innermost mire could be located; supply the centre manually."""


@dataclass
class EnhancedImage:
    binary: np.ndarray          # True on dark-band (mire) pixels
    gray: np.ndarray            # input intensity scaled to ~[0, 1]
    enhanced: np.ndarray        # Gabor response, zero mean
    wavelength: float           # mire period used by the filters, px


@dataclass
class ScanParams:
    step: float = 0.25
    median_window: int = 5
    min_contrast: float = 0.25
    max_width_factor: float = 1.8
    support_margin_deg: float = 2.0
    support_half_width_deg: float | None = None
    qc_support_half_width_deg: float = 6.0
    min_mires: int = 24
    weighted: bool = True
    max_radius: float | None = None


@dataclass
class MirePointSet:
    """Per-meridian mire radii around a centre.

    ``radii[j, i]`` is the distance (px) of mire ``i`` on meridian ``j``; NaN
    when absent. ``gap_mask`` marks values filled by angular interpolation,
    ``weights`` is the normalised intensity mass of each detection (0 for
    gaps), and ``counts`` the mires seen per meridian with support losses
    counted as present.
    """

    center: tuple
    meridian_count: int
    radii: np.ndarray
    weights: np.ndarray
    gap_mask: np.ndarray
    counts: np.ndarray
    support_meridians: np.ndarray = field(default=None)
    flagged: list = field(default_factory=list)

    @property
    def angles(self) -> np.ndarray:
        return np.arange(self.meridian_count) * 360.0 / self.meridian_count

    @property
    def ring_count(self) -> int:
        return self.radii.shape[1]

    @property
    def gaps(self) -> list:
        return [(int(j), int(i)) for j, i in zip(*np.nonzero(self.gap_mask))]

    def points(self, meridian: int) -> list:
        out = []
        for i, r in enumerate(self.radii[meridian]):
            if np.isfinite(r):
                out.append((i, float(r), float(self.weights[meridian, i])))
        return out

    def to_dict(self) -> dict:
        def clean(a):
            return [[None if not np.isfinite(v) else round(float(v), 6) for v in row]
                    for row in a]
        return {"center": [float(c) for c in self.center],
                "meridian_count": self.meridian_count,
                "angles_deg": [float(a) for a in self.angles],
                "radii_px": clean(self.radii),
                "weights": clean(self.weights),
                "gaps": self.gaps,
                "counts": [int(c) for c in self.counts],
                "flagged_meridians": list(self.flagged)}


# --- preprocessing ------------------------------------------------------------

def crop_and_gray(image, size: int = 500, offset=(0, 0)) -> np.ndarray:
    """Central ``size`` crop converted to 8-bit gray (0.299 R + 0.587 G + 0.114 B).

    RGB channel order is assumed for colour input; gray input passes through.
    """
    pix = getattr(image, "pixels", image)
    pix = np.asarray(pix)
    h, w = pix.shape[:2]
    if h < size or w < size:
        raise PipelineError(f"image {w}x{h} smaller than the {size}px crop")
    top = (h - size) // 2 + int(offset[1])
    left = (w - size) // 2 + int(offset[0])
    if top < 0 or left < 0 or top + size > h or left + size > w:
        raise PipelineError("crop window falls outside the image")
    crop = pix[top:top + size, left:left + size]
    if crop.ndim == 2:
        return crop.astype(np.uint8, copy=True)
    rgb = crop[..., :3].astype(np.float64)
    gray = 0.299 * rgb[..., 0] + 0.587 * rgb[..., 1] + 0.114 * rgb[..., 2]
    return np.clip(np.rint(gray), 0, 255).astype(np.uint8)


def estimate_wavelength(norm: np.ndarray, theta: np.ndarray, lo: float = 3.0,
                        hi: float = 40.0) -> float:
    """Median mire period (px) measured across the bands.

    Zero crossings of the locally centred image are taken along rows and
    columns; each half-period is projected onto the local gradient direction
    and only crossings within ~37 deg of it are kept.
    """
    local = norm - cv2.GaussianBlur(norm, (0, 0), 10.0)
    gx = cv2.Sobel(norm, cv2.CV_64F, 1, 0, ksize=3)
    gy = cv2.Sobel(norm, cv2.CV_64F, 0, 1, ksize=3)
    energy = cv2.boxFilter(gx * gx + gy * gy, -1, (9, 9))
    active = energy > 0.1 * np.percentile(energy, 95)
    halves = []
    for arr, proj, act in ((local, np.abs(np.cos(theta)), active),
                           (local.T, np.abs(np.sin(theta)).T, active.T)):
        sg = arr > 0
        for r in range(arr.shape[0]):
            row = arr[r]
            idx = np.nonzero(sg[r, 1:] != sg[r, :-1])[0]
            if len(idx) < 3:
                continue
            x = idx + row[idx] / (row[idx] - row[idx + 1])
            d = np.diff(x)
            mid = ((x[:-1] + x[1:]) / 2).astype(int)
            c = proj[r, mid]
            keep = (c > 0.8) & act[r, mid]
            halves.append(d[keep] * c[keep])
    h = np.concatenate(halves) if halves else np.array([])
    h = h[(h >= lo / 2) & (h <= hi / 2)]
    if len(h) < 20:
        raise BlankImageError("no periodic mire structure found")
    return float(2.0 * np.median(h))


def orientation_field(norm: np.ndarray, block: int = 16, smooth_sigma: float = 3.0):
    """Dominant gradient direction (radians, mod pi) from block structure tensors."""
    gx = cv2.Sobel(norm, cv2.CV_64F, 1, 0, ksize=3)
    gy = cv2.Sobel(norm, cv2.CV_64F, 0, 1, ksize=3)
    gxx = cv2.boxFilter(gx * gx, -1, (block, block))
    gyy = cv2.boxFilter(gy * gy, -1, (block, block))
    gxy = cv2.boxFilter(gx * gy, -1, (block, block))
    # smooth the doubled-angle vector field
    c = cv2.GaussianBlur(gxx - gyy, (0, 0), smooth_sigma)
    s = cv2.GaussianBlur(2 * gxy, (0, 0), smooth_sigma)
    return 0.5 * np.arctan2(s, c)


def gabor_bank(wavelength: float, n_orient: int = 16, bandwidth: float = 1.0):
    """Even-symmetric, zero-mean Gabor kernels for ``n_orient`` directions."""
    b = 2.0 ** bandwidth
    sigma = wavelength / math.pi * math.sqrt(math.log(2) / 2) * (b + 1) / (b - 1)
    half = int(math.ceil(3 * sigma))
    ksize = 2 * half + 1
    kernels = []
    for k in range(n_orient):
        theta = k * math.pi / n_orient
        kern = cv2.getGaborKernel((ksize, ksize), sigma, theta, wavelength, 1.0, 0.0,
                                  ktype=cv2.CV_64F)
        kern -= kern.mean()
        kern /= np.abs(kern).sum()
        kernels.append(kern)
    return kernels


def enhance(gray: np.ndarray, threshold: float = 0.0, block: int = 16,
            n_orient: int = 16, wavelength: float | None = None) -> EnhancedImage:
    """Smooth, normalise and Gabor-filter a gray mire image, then binarise."""
    g = np.asarray(gray, dtype=np.float64)
    smooth = cv2.GaussianBlur(g, (7, 7), 0)
    sd = smooth.std()
    if not np.isfinite(sd) or sd < 1e-6:
        raise BlankImageError("image has no intensity variation")
    norm = (smooth - smooth.mean()) / sd
    theta = orientation_field(norm, block)
    if wavelength is None:
        wavelength = estimate_wavelength(norm, theta)
    bank = gabor_bank(wavelength, n_orient)
    bins = np.rint(np.mod(theta, math.pi) / (math.pi / n_orient)).astype(int) % n_orient
    resp = np.zeros_like(norm)
    for k, kern in enumerate(bank):
        sel = bins == k
        if sel.any():
            resp[sel] = cv2.filter2D(norm, cv2.CV_64F, kern,
                                     borderType=cv2.BORDER_REFLECT)[sel]
    resp = (resp - resp.mean()) / max(resp.std(), 1e-12)
    bright = np.percentile(g, 99.5)
    gray01 = g / bright if bright > 0 else g
    return EnhancedImage(binary=resp < threshold, gray=gray01, enhanced=resp,
                         wavelength=float(wavelength))


# --- centre ---------------------------------------------------------------------

def _fit_circle(x: np.ndarray, y: np.ndarray):
    A = np.column_stack([x, y, np.ones_like(x)])
    b = x * x + y * y
    sol, *_ = np.linalg.lstsq(A, b, rcond=None)
    cx, cy = sol[0] / 2, sol[1] / 2
    r = math.sqrt(sol[2] + cx * cx + cy * cy)
    return cx, cy, r


def _central_edge(gray: np.ndarray, center, n_rays: int = 180, r_max: float = 60.0,
                  step: float = 0.1):
    """Sub-pixel boundary of the bright central disc along rays from ``center``."""
    cx, cy = center
    level = map_coordinates(gray, [[cy], [cx]], order=1)[0]
    s = np.arange(0.0, r_max, step)
    ang = np.arange(n_rays) * 2 * math.pi / n_rays
    u = cx + np.outer(np.cos(ang), s)
    v = cy + np.outer(np.sin(ang), s)
    prof = map_coordinates(gray, [v.ravel(), u.ravel()], order=1, mode="nearest")
    prof = prof.reshape(u.shape)
    half = 0.5 * level
    pts = []
    for k in range(n_rays):
        below = np.nonzero(prof[k] < half)[0]
        if len(below) == 0 or below[0] == 0:
            continue
        i = below[0]
        p0, p1 = prof[k, i - 1], prof[k, i]
        r = s[i - 1] + step * (p0 - half) / (p0 - p1)
        pts.append((cx + r * math.cos(ang[k]), cy + r * math.sin(ang[k])))
    return np.array(pts), level


def _disc_candidate(smooth: np.ndarray, center, r_max: float, n_rays: int = 180):
    """Check that ``center`` sits inside a compact bright disc.

    Returns the boundary points or None. A point on a bright arc fails
    because rays along the arc run much further than rays across it.
    """
    pts, level = _central_edge(smooth, center, n_rays=n_rays, r_max=r_max)
    if level < 0.3 or len(pts) < 0.9 * n_rays:
        return None
    r = np.hypot(pts[:, 0] - center[0], pts[:, 1] - center[1])
    if r.min() <= 0 or r.max() / max(r.min(), 0.5) > 3.0:
        return None
    return pts


def _center_candidates(enh: EnhancedImage, min_radius: int, max_radius: int):
    g8 = np.clip(enh.gray * 255.0, 0, 255).astype(np.uint8)
    g8 = cv2.GaussianBlur(g8, (3, 3), 0)
    cands = []
    for lo, hi in ((min_radius, max(min_radius + 1, max_radius // 3)),
                   (max(min_radius, max_radius // 4), max_radius)):
        circles = cv2.HoughCircles(g8, cv2.HOUGH_GRADIENT, dp=1, minDist=1,
                                   param1=80, param2=8, minRadius=lo, maxRadius=hi)
        if circles is not None:
            cands.extend((float(x), float(y)) for x, y, _ in circles[0][:30])
    # compact bright blobs whose centroid lies inside themselves
    bright = (enh.gray > 0.5).astype(np.uint8)
    n, lab, stats, cent = cv2.connectedComponentsWithStats(bright, connectivity=8)
    for i in range(1, n):
        area = stats[i, cv2.CC_STAT_AREA]
        x, y = cent[i]
        if 4 <= area <= 4 * max_radius ** 2 and lab[int(round(y)), int(round(x))] == i:
            cands.append((float(x), float(y)))
    return cands


def detect_center(enh: EnhancedImage, min_radius: int = 2, max_radius: int = 40,
                  iterations: int = 3) -> tuple:
    """Centre of the innermost mire, refined to sub-pixel precision.

    Hough circles and compact bright blobs propose centres; each must sit in
    a bright disc ringed by darkness. The smallest such disc is the central
    reflex, and a circle fit to its boundary gives the centre.
    """
    cands = _center_candidates(enh, min_radius, max_radius)
    if not cands:
        raise NoCircleError("Hough transform found no circle")
    smooth = cv2.GaussianBlur(enh.gray, (3, 3), 0)
    best = None
    for c in cands:
        pts = _disc_candidate(smooth, c, r_max=max_radius)
        if pts is None:
            continue
        cx, cy, rad = _fit_circle(pts[:, 0], pts[:, 1])
        if best is None or rad < best[2] - 0.5:
            best = (cx, cy, rad)
    if best is None:
        raise NoCircleError("no candidate circle encloses a bright central disc")
    center, rad = (best[0], best[1]), best[2]
    for _ in range(iterations):
        pts, level = _central_edge(smooth, center, r_max=max(3 * rad, 15.0))
        if len(pts) < 30 or level < 0.3:
            raise NoCircleError("innermost mire boundary not found")
        cx, cy, rad = _fit_circle(pts[:, 0], pts[:, 1])
        resid = np.hypot(pts[:, 0] - cx, pts[:, 1] - cy) - rad
        keep = np.abs(resid) < max(3 * np.std(resid), 0.5)
        cx, cy, rad = _fit_circle(pts[keep, 0], pts[keep, 1])
        center = (cx, cy)
    h, w = enh.gray.shape
    if not (0 <= center[0] < w and 0 <= center[1] < h):
        raise NoCircleError("fitted centre outside the image")
    return (float(center[0]), float(center[1]))


# --- radial scan ----------------------------------------------------------------

def support_half_widths(spec: PlacidoSpec | None, ring_count: int,
                        params: ScanParams) -> np.ndarray:
    """Angular half-width (deg) of the support shadow for each mire."""
    if params.support_half_width_deg is not None or spec is None:
        w = params.support_half_width_deg
        return np.full(ring_count, 6.0 if w is None else w)
    radii = spec.ring_radii()[:ring_count]
    return np.degrees(np.arcsin(np.clip(spec.support_width / 2 / radii, 0, 1))) \
        + params.support_margin_deg


def _runs(mask: np.ndarray):
    d = np.diff(np.concatenate([[0], mask.astype(np.int8), [0]]))
    return np.nonzero(d == 1)[0], np.nonzero(d == -1)[0] - 1


def _scan_ray(b: np.ndarray, g: np.ndarray, s: np.ndarray, params: ScanParams,
              max_width: float):
    """Dark-band candidates along one ray and the central disc edge.

    Candidates are ``(centroid, width, valid, mass)``; the edge is NaN when
    the ray does not start inside a bright disc.
    """
    # bright central disc: ignore the binary inside it
    below = np.nonzero(g < 0.5 * g[0])[0] if g[0] > 0.3 else np.array([], int)
    edge = float(s[below[0]]) if len(below) else math.nan
    if len(below):
        b = b.copy()
        b[: max(below[0] - int(round(1.0 / params.step)), 0)] = False
    starts, ends = _runs(b)
    out = []
    n = len(s)
    for k, (i0, i1) in enumerate(zip(starts, ends)):
        if i0 == 0:
            continue
        prev_end = ends[k - 1] if k > 0 else -1
        if k + 1 >= len(starts):
            if i1 >= n - 1:
                continue
            next_start = n
        else:
            next_start = starts[k + 1]
        if i1 + 1 >= next_start:
            continue
        lo = (prev_end + 1 + i0) // 2 if k > 0 else max(i0 - (i1 - i0 + 1), 0)
        hi = (i1 + next_start) // 2 + 1
        win = g[lo:hi]
        run_min = g[i0:i1 + 1].min()
        left_max = g[max(prev_end + 1, 0):i0].max() if i0 > prev_end + 1 else run_min
        right_max = g[i1 + 1:next_start].max()
        width = (i1 - i0 + 1) * params.step
        valid = (left_max - run_min > params.min_contrast) and \
            (right_max - run_min > params.min_contrast) and width <= max_width
        if params.weighted:
            ref = win.max()
            w = np.clip(ref - win, 0.0, None)
            mass = w.sum()
            if mass <= 0:
                continue
            c = float((w * s[lo:hi]).sum() / mass)
            mass = float(mass * params.step)
        else:
            c = float(s[i0:i1 + 1].mean())
            mass = float((i1 - i0 + 1) * params.step)
        out.append((c, width, valid, mass))
    return out, edge


def _clean_sequence(cands, edge, spacing):
    valid = [c for c in cands if c[2]]
    if len(valid) < 3:
        return None
    # nothing invalid before the last valid band
    last = cands.index(valid[-1])
    if any(not c[2] for c in cands[:last]):
        return None
    r = np.array([c[0] for c in valid])
    sp = np.diff(r)
    med = np.median(sp)
    # the first band must hug the central disc; spacing varies slowly
    if not (r[0] <= edge + spacing) or np.any(sp < 0.7 * med) or np.any(sp > 1.35 * med):
        return None
    ratio = sp[1:] / sp[:-1]
    if np.any(ratio < 0.75) or np.any(ratio > 1.33):
        return None
    widths = np.array([c[1] for c in valid])
    if np.any(widths > 2.0 * np.median(widths)):
        return None
    return valid


def _prune_clean(clean: dict, spacing: float, window: int = 9, tol: float = 0.3):
    """Drop clean meridians that disagree with their clean neighbours.

    A shifted index shows up as a jump of about one spacing against the
    running median of neighbouring meridians.
    """
    js = sorted(clean)
    if len(js) < window:
        return clean
    n = max(len(v) for v in clean.values())
    R = np.full((len(js), n), np.nan)
    for q, j in enumerate(js):
        R[q, :len(clean[j])] = [c[0] for c in clean[j]]
    hw = window // 2
    stack = np.stack([np.roll(R, sh, axis=0) for sh in range(-hw, hw + 1)])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        med = np.nanmedian(stack, axis=0)
        dev = np.nanmax(np.abs(R - med), axis=1)
    return {j: clean[j] for q, j in enumerate(js) if not dev[q] > tol * spacing}


def _circ_interp(angles_valid, values, angles_all, period=360.0):
    """Periodic interpolation in angle: cubic spline, linear when sparse."""
    order = np.argsort(angles_valid)
    a = np.asarray(angles_valid, dtype=float)[order]
    v = np.asarray(values, dtype=float)[order]
    if len(a) >= 4:
        spl = CubicSpline(np.append(a, a[0] + period), np.append(v, v[0]),
                          bc_type="periodic")
        return spl(a[0] + np.mod(np.asarray(angles_all) - a[0], period))
    a_ext = np.concatenate([a - period, a, a + period])
    v_ext = np.concatenate([v, v, v])
    return np.interp(angles_all, a_ext, v_ext)


def median_across_meridians(radii: np.ndarray, window: int = 5) -> np.ndarray:
    """Circular running median of each mire's radius over neighbouring meridians.

    Missing entries stay missing and are ignored inside the window.
    """
    filt = radii.copy()
    hw = window // 2
    for i in range(radii.shape[1]):
        col = radii[:, i]
        if not np.isfinite(col).any():
            continue
        stack = np.stack([np.roll(col, sft) for sft in range(-hw, hw + 1)])
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            med = np.nanmedian(stack, axis=0)
        filt[:, i] = np.where(np.isfinite(col), med, np.nan)
    return filt


def radial_scan(enh: EnhancedImage, center, k: int = 360, ring_count: int = 28,
                spec: PlacidoSpec | None = None,
                params: ScanParams | None = None) -> MirePointSet:
    """Walk ``k`` rays outward from ``center`` and index the dark bands.

    Mire locations are intensity-weighted centroids along the ray. Bands are
    numbered outward from the central bright disc on clean meridians; the
    remaining meridians are matched to the angularly interpolated clean radii.
    """
    params = params or ScanParams()
    cx, cy = center
    h, w = enh.gray.shape
    if not (0 <= cx < w and 0 <= cy < h):
        raise PipelineError("centre outside the image")
    angles = np.arange(k) * 360.0 / k
    rad = np.radians(angles)
    binf = enh.binary.astype(np.float64)
    cands_all = []
    for j in range(k):
        ca, sa = math.cos(rad[j]), math.sin(rad[j])
        lim = []
        for c0, d, size in ((cx, ca, w), (cy, sa, h)):
            if d > 1e-12:
                lim.append((size - 1 - c0) / d)
            elif d < -1e-12:
                lim.append(-c0 / d)
        r_max = min(lim)
        if params.max_radius is not None:
            r_max = min(r_max, params.max_radius)
        s = np.arange(0.0, r_max, params.step)
        coords = [cy + s * sa, cx + s * ca]
        b = map_coordinates(binf, coords, order=1) >= 0.5
        g = map_coordinates(enh.gray, coords, order=1)
        cands_all.append(_scan_ray(b, g, s, params,
                                   params.max_width_factor * enh.wavelength / 2))

    spacing = enh.wavelength
    clean = {}
    for j, (cands, edge) in enumerate(cands_all):
        seq = _clean_sequence(cands, edge, spacing)
        if seq is not None:
            clean[j] = seq
    clean = _prune_clean(clean, spacing)

    radii = np.full((k, ring_count), np.nan)
    mass = np.zeros((k, ring_count))
    half = support_half_widths(spec, ring_count, params)
    if params.support_half_width_deg is None and spec is None:
        half = np.full(ring_count, 6.0)
    sup_angles = spec.support_angles if spec is not None else (0.0, 180.0)

    def ang_dist(a, b):
        return np.abs((a - b + 180.0) % 360.0 - 180.0)

    in_support = np.zeros((k, ring_count), bool)
    for sa_ in sup_angles:
        in_support |= ang_dist(angles[:, None], sa_) <= half[None, :]

    if len(clean) >= max(3, k // 20):
        # expected radius of every index on every meridian
        n_idx = min(ring_count, max(len(v) for v in clean.values()))
        expected = np.full((k, ring_count), np.nan)
        for i in range(n_idx):
            js = [j for j, v in clean.items() if len(v) > i and not in_support[j, i]]
            if len(js) < max(3, k // 20):
                continue
            vals = [clean[j][i][0] for j in js]
            expected[:, i] = _circ_interp(angles[js], vals, angles)
        for j, (cands, _) in enumerate(cands_all):
            exp = expected[j]
            ok = np.isfinite(exp)
            if not ok.any():
                continue
            idx_ok = np.nonzero(ok)[0]
            e = exp[ok]
            loc_sp = np.gradient(e) if len(e) > 1 else np.array([spacing])
            best = {}
            for c, width, valid, m in cands:
                if not valid:
                    continue
                q = int(np.argmin(np.abs(e - c)))
                if abs(e[q] - c) > 0.3 * abs(loc_sp[q]):
                    continue
                i = int(idx_ok[q])
                if i not in best or abs(e[q] - c) < abs(e[q] - best[i][0]):
                    best[i] = (c, m)
            for i, (c, m) in best.items():
                radii[j, i] = c
                mass[j, i] = m
    else:
        log.warning("few clean meridians (%d); indexing sequentially", len(clean))
        for j, (cands, _) in enumerate(cands_all):
            for i, (c, width, valid, m) in enumerate([c for c in cands if c[2]][:ring_count]):
                radii[j, i] = c
                mass[j, i] = m

    # grow each support sector over the shadow actually observed, plus margin
    margin = int(round(params.support_margin_deg * k / 360.0))
    missing = ~np.isfinite(radii) | in_support
    for sa_ in sup_angles:
        j0 = int(round(sa_ * k / 360.0)) % k
        for i in range(ring_count):
            if not missing[j0, i] or missing[:, i].all():
                continue
            jl = j0
            while missing[(jl - 1) % k, i] and (j0 - jl) < k // 4:
                jl -= 1
            jr = j0
            while missing[(jr + 1) % k, i] and (jr - j0) < k // 4:
                jr += 1
            in_support[np.arange(jl - margin, jr + margin + 1) % k, i] = True

    radii[in_support] = np.nan
    mass[in_support] = 0.0
    detected = np.isfinite(radii)
    counts = (detected | in_support).sum(axis=1)

    filt = median_across_meridians(radii, params.median_window)

    # fill gaps by angular interpolation where a mire is mostly present
    gap_mask = np.zeros((k, ring_count), bool)
    for i in range(ring_count):
        col = filt[:, i]
        good = np.isfinite(col)
        coverage = good.sum() / max((~in_support[:, i]).sum(), 1)
        if good.sum() < 3 or coverage < 0.5:
            filt[:, i] = np.nan
            continue
        miss = ~good
        if miss.any():
            filt[miss, i] = _circ_interp(angles[good], col[good], angles[miss])
            gap_mask[miss, i] = True
    total = mass.sum()
    weights = np.where(gap_mask | ~np.isfinite(filt), 0.0,
                       mass / (total / max(detected.sum(), 1)) if total > 0 else 0.0)

    flagged = [int(j) for j in range(k) if counts[j] < params.min_mires]
    sup_mer = np.zeros(k, bool)
    for sa_ in sup_angles:
        sup_mer |= ang_dist(angles, sa_) <= params.qc_support_half_width_deg
    return MirePointSet(center=(float(cx), float(cy)), meridian_count=k, radii=filt,
                        weights=weights, gap_mask=gap_mask, counts=counts,
                        support_meridians=sup_mer, flagged=flagged)


def monotone_violations(scan: MirePointSet) -> int:
    d = np.diff(scan.radii, axis=1)
    return int(np.sum(d[np.isfinite(d)] <= 0))


def analyze_image(image, spec: PlacidoSpec | None = None, k: int = 360,
                  center=None, params: ScanParams | None = None,
                  crop: int | None = None):
    """Crop/gray, enhance, locate the centre (unless given) and scan."""
    pix = getattr(image, "pixels", image)
    size = crop or min(pix.shape[:2])
    gray = crop_and_gray(pix, size=size)
    enh = enhance(gray)
    if center is None:
        center = detect_center(enh)
    ring_count = spec.ring_count if spec is not None else 28
    scan = radial_scan(enh, center, k=k, ring_count=ring_count, spec=spec, params=params)
    return enh, scan
