"""End-to-end analysis of one mire image."""

from __future__ import annotations

from dataclasses import dataclass

from .geometry import RigConfig
from .pipeline import (EnhancedImage, MirePointSet, ScanParams, crop_and_gray,
                       detect_center, enhance, radial_scan)
from .reconstruction import (CornealSurface, CurvatureMaps, SimK,
                             curvature_maps, reconstruct_surface, sim_k)


@dataclass
class Analysis:
    enhanced: EnhancedImage
    scan: MirePointSet
    curves: list
    surface: CornealSurface
    maps: CurvatureMaps
    simk: SimK
    rig: RigConfig

    @property
    def truncated(self) -> list:
        return [c.meridian_angle for c in self.curves if c.truncated_at is not None]


def scan_image(image, rig: RigConfig, k: int = 360, center=None,
               params: ScanParams | None = None):
    """Grayscale, enhance, locate the centre (unless given) and scan mires."""
    cam = rig.camera
    pix = getattr(image, "pixels", image)
    gray = crop_and_gray(pix, size=min(cam.image_width, cam.image_height))
    enh = enhance(gray)
    if center is None:
        center = detect_center(enh)
    scan = radial_scan(enh, center, k=k, ring_count=rig.placido.ring_count,
                       spec=rig.placido, params=params)
    return enh, scan


def reconstruct(enh: EnhancedImage, scan: MirePointSet, rig: RigConfig,
                degree: int = 8, zone: float | None = None) -> Analysis:
    surface = reconstruct_surface(scan, rig, degree)
    maps = curvature_maps(surface, zone)
    return Analysis(enh, scan, surface.meridian_curves, surface, maps, sim_k(surface), rig)


def analyze(image, rig: RigConfig, k: int = 360, center=None,
            params: ScanParams | None = None, degree: int = 8,
            zone: float | None = None) -> Analysis:
    """Image -> surface, curvature maps and sim-K, with ``rig`` distances as given."""
    enh, scan = scan_image(image, rig, k, center, params)
    return reconstruct(enh, scan, rig, degree, zone)
