"""Shared, session-cached renders and analyses for the test suite."""

from __future__ import annotations

import time
from functools import lru_cache
from pathlib import Path

import numpy as np

from corneatopo.analysis import analyze, scan_image
from corneatopo.geometry import default_rig
from corneatopo.pipeline import MirePointSet
from corneatopo.simulator import (Ellipsoid, PerturbationSpec, Sphere, render,
                                  zernike_fixtures)

DATA = Path(__file__).parent / "data"
GOLDEN_PIXEL_SHA256 = "40be984bcfd85891ed8c453b4ea7fc164004bcc16aeab9d98d630bf049dbee44"

# wall-clock seconds of the first (uncached) render / analysis, keyed like the caches
ACCEPTANCE: list = []   # one PASS/FAIL line per acceptance criterion
RENDER_SECONDS: dict = {}
ANALYSIS_SECONDS: dict = {}


@lru_cache(None)
def rig():
    return default_rig()


def shape(name: str):
    if name.startswith("sphere"):
        return Sphere(float(name[len("sphere"):]))
    if name == "ellipsoid":
        return Ellipsoid(8.0, 10.0, 12.0)
    if name.startswith("z"):
        return zernike_fixtures()[int(name[1:])]
    raise KeyError(name)


def _key(v: float) -> float:
    return round(float(v), 9)


@lru_cache(None)
def _image(name, offset, tilt, wd, gap_top, gap_base):
    r = rig().with_gaps(gap_base=gap_base, gap_top=gap_top)
    p = PerturbationSpec(offset_s=offset, tilt_theta=tilt, working_distance_error=wd)
    t = time.perf_counter()
    img = render(r, shape(name), p)
    RENDER_SECONDS[(name, offset, tilt, wd, gap_top, gap_base)] = time.perf_counter() - t
    return img


def image(name="sphere7.8", offset=0.0, tilt=0.0, wd=0.0, gap_top=0.0, gap_base=None):
    gb = rig().gap_base if gap_base is None else gap_base
    return _image(name, _key(offset), _key(tilt), _key(wd), _key(gap_top), _key(gb))


@lru_cache(None)
def _analysis(name, offset, tilt, wd):
    img = _image(name, offset, tilt, wd, 0.0, _key(rig().gap_base))
    t = time.perf_counter()
    a = analyze(img, rig())
    ANALYSIS_SECONDS[(name, offset, tilt, wd)] = time.perf_counter() - t
    return a


def round_trip_seconds(name="sphere7.8", offset=0.0, tilt=0.0, wd=0.0) -> float:
    """Render plus analysis time of a nominal-rig case (computing it if needed)."""
    analysis(name, offset, tilt, wd)
    k = (name, _key(offset), _key(tilt), _key(wd))
    return RENDER_SECONDS[k + (0.0, _key(rig().gap_base))] + ANALYSIS_SECONDS[k]


def analysis(name="sphere7.8", offset=0.0, tilt=0.0, wd=0.0):
    """Analysis with the nominal rig (the perturbation is unknown to it)."""
    return _analysis(name, _key(offset), _key(tilt), _key(wd))


@lru_cache(None)
def _scan(name, offset):
    return scan_image(_image(name, offset, 0.0, 0.0, 0.0, _key(rig().gap_base)), rig())


def scan(name="sphere7.8", offset=0.0):
    return _scan(name, _key(offset))


def synthetic_scan(counts, k=360, ring_count=28, support=None, radii=None) -> MirePointSet:
    """A MirePointSet carrying only the given per-meridian counts."""
    counts = np.asarray(counts, dtype=int)
    if radii is None:
        radii = np.tile(10.0 + 6.5 * np.arange(ring_count), (k, 1))
    return MirePointSet(center=(249.5, 249.5), meridian_count=k, radii=np.asarray(radii),
                        weights=np.ones((k, ring_count)),
                        gap_mask=np.zeros((k, ring_count), bool), counts=counts,
                        support_meridians=support)


def verdict(tag: str, ok: bool, detail: str) -> bool:
    line = f"{tag} {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE.append(line)
    print(line)
    return ok
