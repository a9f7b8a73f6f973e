"""Image quality gates: exposure, sharpness, offset and broken mires.

Every gate is a pure function of its inputs and returns a small verdict
object; ``QualityReport.overall`` is the conjunction of the four.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from importlib import resources

import cv2
import numpy as np

from .geometry import RigConfig
from .pipeline import (MirePointSet, PipelineError, crop_and_gray, detect_center,
                       enhance)

UNDER_MAX_L = 125.0
OVER_LEVEL = 200.0
OVER_FRACTION = 0.20
SHARPNESS_RATIO = 0.8
MAX_OFFSET_MM = 1.0
MIN_MIRES = 24
MAX_BROKEN_FRACTION = 0.05


@dataclass
class ExposureVerdict:
    status: str            # "under", "over" or "ok"
    max_l: float
    over_fraction: float
    mean_l: float

    @property
    def passed(self) -> bool:
        return self.status == "ok"


@dataclass
class SharpnessVerdict:
    passed: bool
    edge_variance: float
    reference: float
    ratio: float


@dataclass
class OffsetVerdict:
    passed: bool
    distance_mm: float
    mire_center: tuple | None
    attachment_center: tuple | None
    reason: str = ""


@dataclass
class BrokenMiresVerdict:
    passed: bool
    fraction: float
    deficient: int
    considered: int


@dataclass
class QualityReport:
    exposure: ExposureVerdict
    sharpness: SharpnessVerdict
    offset: OffsetVerdict
    broken_mires: BrokenMiresVerdict

    @property
    def overall(self) -> bool:
        return (self.exposure.passed and self.sharpness.passed and self.offset.passed
                and self.broken_mires.passed)

    @property
    def failed_gates(self) -> list:
        names = ("exposure", "sharpness", "offset", "broken_mires")
        return [n for n in names if not getattr(self, n).passed]

    def to_dict(self) -> dict:
        d = {"overall": "pass" if self.overall else "fail",
             "failed_gates": self.failed_gates}
        for name in ("exposure", "sharpness", "offset", "broken_mires"):
            v = asdict(getattr(self, name))
            v["verdict"] = "pass" if getattr(self, name).passed else "fail"
            d[name] = v
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


# --- exposure -------------------------------------------------------------------

def lab_lightness(image) -> np.ndarray:
    """L channel of CIE LAB (D65) scaled to [0, 255]; gray or RGB uint8 input."""
    pix = np.asarray(getattr(image, "pixels", image))
    if pix.ndim == 2:
        pix = np.repeat(pix[..., None], 3, axis=2)
    rgb = pix[..., :3].astype(np.float32) / 255.0
    lab = cv2.cvtColor(rgb, cv2.COLOR_RGB2Lab)
    return lab[..., 0].astype(np.float64) * 255.0 / 100.0


def exposure_verdict(lightness) -> ExposureVerdict:
    """Classify an L-channel array; over-exposure takes precedence."""
    L = np.asarray(lightness, dtype=float)
    max_l = float(L.max())
    over = float(np.mean(L > OVER_LEVEL))
    if over > OVER_FRACTION:
        status = "over"
    elif max_l < UNDER_MAX_L:
        status = "under"
    else:
        status = "ok"
    return ExposureVerdict(status, max_l, over, float(L.mean()))


def check_exposure(image) -> ExposureVerdict:
    return exposure_verdict(lab_lightness(image))


# --- sharpness ------------------------------------------------------------------

def _gray_float(image) -> np.ndarray:
    pix = np.asarray(getattr(image, "pixels", image))
    if pix.ndim == 3:
        pix = crop_and_gray(pix, size=min(pix.shape[:2]))
    return pix.astype(np.float64)


def edge_variance(image) -> float:
    """Variance of the Laplacian response of the gray image."""
    return float(cv2.Laplacian(_gray_float(image), cv2.CV_64F).var())


def default_reference_edge_variance() -> float:
    with resources.files("corneatopo.data").joinpath("qc_reference.json").open() as fh:
        return float(json.load(fh)["reference_edge_variance"])


def check_sharpness(image, reference_edge_variance: float | None = None) -> SharpnessVerdict:
    ref = default_reference_edge_variance() if reference_edge_variance is None \
        else float(reference_edge_variance)
    return sharpness_verdict(edge_variance(image), ref)


def sharpness_verdict(edge_var: float, reference: float) -> SharpnessVerdict:
    """Pass iff ``edge_var >= 0.8 * reference``."""
    if not reference > 0:
        raise ValueError("reference edge variance must be positive")
    ratio = edge_var / reference
    return SharpnessVerdict(ratio >= SHARPNESS_RATIO, edge_var, reference, ratio)


# --- offset ---------------------------------------------------------------------

def rim_radius_px(rig: RigConfig) -> float:
    """Expected image radius of the attachment's top rim."""
    spec = rig.placido
    return rig.camera.focal_px * spec.largest_ring_radius / (rig.gap_base + spec.cone_length)


def detect_attachment_center(gray: np.ndarray, rig: RigConfig):
    """Centre of the attachment rim, or the principal point when the rim lies
    outside the frame (the attachment is rigidly coaxial with the camera).

    Returns ``(center, reason)``; ``center`` is None when the rim should be
    visible but is not found.
    """
    cam = rig.camera
    r = rim_radius_px(rig)
    cx, cy = cam.principal_point
    h, w = gray.shape[:2]
    if r > max(w, h):
        return (float(cx), float(cy)), "rim outside frame; principal point used"
    g8 = cv2.GaussianBlur(np.clip(gray, 0, 255).astype(np.uint8), (5, 5), 0)
    circles = cv2.HoughCircles(g8, cv2.HOUGH_GRADIENT, dp=1, minDist=w,
                               param1=80, param2=30, minRadius=int(0.9 * r),
                               maxRadius=int(math.ceil(1.1 * r)))
    if circles is None:
        return None, "attachment rim not detected"
    x, y, _ = circles[0][0]
    return (float(x), float(y)), "rim detected"


def offset_mm(mire_center, attachment_center, rig: RigConfig,
              prior_radius: float = 7.8) -> float:
    """Lateral offset (mm) of the cornea from the attachment axis.

    The mire centre images the corneal centre of curvature, so the pixel
    distance is scaled at depth ``working distance + prior radius``.
    """
    d = math.hypot(mire_center[0] - attachment_center[0],
                   mire_center[1] - attachment_center[1])
    return d * (rig.working_distance() + prior_radius) / rig.camera.focal_px


def check_offset(image, rig: RigConfig, mire_center=None,
                 prior_radius: float = 7.8) -> OffsetVerdict:
    gray = _gray_float(image)
    att, reason = detect_attachment_center(gray, rig)
    if att is None:
        return OffsetVerdict(False, math.inf, None, None, reason)
    if mire_center is None:
        try:
            mire_center = detect_center(enhance(gray))
        except PipelineError as exc:
            return OffsetVerdict(False, math.inf, None, att, f"innermost mire: {exc}")
    dist = offset_mm(mire_center, att, rig, prior_radius)
    return OffsetVerdict(offset_passed(dist), dist, tuple(mire_center), att, reason)


def offset_passed(distance_mm: float) -> bool:
    return distance_mm < MAX_OFFSET_MM


# --- broken mires ---------------------------------------------------------------

def check_broken_mires(scan: MirePointSet, min_mires: int = MIN_MIRES,
                       max_fraction: float = MAX_BROKEN_FRACTION) -> BrokenMiresVerdict:
    """Fraction of meridians with fewer than ``min_mires`` mires; fail iff above
    ``max_fraction``. Only per-meridian counts are read; meridians flagged as
    support sectors are left out of the count.
    """
    counts = np.asarray(scan.counts)
    keep = np.ones(len(counts), bool)
    if scan.support_meridians is not None:
        keep &= ~np.asarray(scan.support_meridians, bool)
    n = int(keep.sum())
    bad = int(np.sum(counts[keep] < min_mires))
    frac = bad / n if n else 1.0
    return BrokenMiresVerdict(frac <= max_fraction, frac, bad, n)


def run_quality_checks(image, rig: RigConfig, scan: MirePointSet | None = None,
                       reference_edge_variance: float | None = None,
                       k: int = 360) -> QualityReport:
    """All four gates. The scan is computed here when not supplied."""
    from .pipeline import radial_scan

    exposure = check_exposure(image)
    sharp = check_sharpness(image, reference_edge_variance)
    center = scan.center if scan is not None else None
    if scan is None:
        try:
            enh = enhance(_gray_float(image))
            center = detect_center(enh)
            scan = radial_scan(enh, center, k=k, ring_count=rig.placido.ring_count,
                               spec=rig.placido)
        except PipelineError:
            scan = None
    offset = check_offset(image, rig, center)
    if scan is None:
        broken = BrokenMiresVerdict(False, 1.0, k, k)
    else:
        broken = check_broken_mires(scan)
    return QualityReport(exposure, sharp, offset, broken)
