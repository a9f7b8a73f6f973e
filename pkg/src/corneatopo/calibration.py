"""Rig distance calibration.

``gap_base`` (camera to attachment base) is fixed once per rig from images
of a sphere of known radius seated on the attachment. ``gap_top`` (attachment
top to corneal apex) is estimated per image from the mean radius of an outer
mire through a ``y = a/x + b`` regression learned on simulated spheres.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .geometry import RigConfig
from .pipeline import MirePointSet, PipelineError
from .reconstruction import ReconstructionError, arc_step, sphere_radius_fit

log = logging.getLogger(__name__)

GAP_TOP_MIRE = 20  # 0-based index of the outer mire used as the distance cue


class CalibrationError(RuntimeError):
    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


# --- gap_top ----------------------------------------------------------------------

@dataclass
class GapTopModel:
    """``gap_top = a / x + b`` with ``x`` the mean radius (px) of mire ``mire_index``."""

    a: float
    b: float
    fit_range: tuple = (-5.0, 5.0)
    fit_residual: float = 0.0
    x_range: tuple = (0.0, math.inf)
    mire_index: int = GAP_TOP_MIRE
    sphere_radius: float = 7.8
    samples: list = field(default_factory=list)   # (gap_top, x) pairs used
    dropped: list = field(default_factory=list)   # gap_top values that failed

    def predict(self, x):
        return self.a / np.asarray(x, dtype=float) + self.b

    def is_extrapolation(self, x: float) -> bool:
        lo, hi = self.x_range
        return not (lo <= x <= hi)

    def to_text(self) -> str:
        lines = ["# gap_top = a / x + b, x = mean radius (px) of mire mire_index",
                 f"a {self.a!r}", f"b {self.b!r}",
                 f"fit_range {self.fit_range[0]!r} {self.fit_range[1]!r}",
                 f"x_range {self.x_range[0]!r} {self.x_range[1]!r}",
                 f"fit_residual {self.fit_residual!r}",
                 f"mire_index {self.mire_index}",
                 f"sphere_radius {self.sphere_radius!r}"]
        for gt, x in self.samples:
            lines.append(f"sample {gt!r} {x!r}")
        for gt in self.dropped:
            lines.append(f"dropped {gt!r}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "GapTopModel":
        vals, samples, dropped = {}, [], []
        for line in text.splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, *rest = line.split()
            if key == "sample":
                samples.append((float(rest[0]), float(rest[1])))
            elif key == "dropped":
                dropped.append(float(rest[0]))
            else:
                vals[key] = rest
        try:
            return cls(a=float(vals["a"][0]), b=float(vals["b"][0]),
                       fit_range=tuple(float(v) for v in vals["fit_range"]),
                       fit_residual=float(vals["fit_residual"][0]),
                       x_range=tuple(float(v) for v in vals["x_range"]),
                       mire_index=int(vals["mire_index"][0]),
                       sphere_radius=float(vals["sphere_radius"][0]),
                       samples=samples, dropped=dropped)
        except (KeyError, IndexError, ValueError) as exc:
            raise CalibrationError(f"malformed gap-top model: {exc}") from exc

    def save(self, path):
        Path(path).write_text(self.to_text())

    @classmethod
    def load(cls, path) -> "GapTopModel":
        return cls.from_text(Path(path).read_text())


def default_gap_top_model() -> GapTopModel:
    with resources.files("corneatopo.data").joinpath("gap_top_model.txt").open() as fh:
        return GapTopModel.from_text(fh.read())


def mire_feature(scan: MirePointSet, mire_index: int = GAP_TOP_MIRE,
                 min_coverage: float = 0.5) -> float:
    """Mean radius (px) of one mire over meridians where it was detected."""
    if mire_index >= scan.radii.shape[1]:
        raise CalibrationError(f"scan has no mire {mire_index}")
    col = scan.radii[:, mire_index]
    seen = np.isfinite(col) & ~scan.gap_mask[:, mire_index]
    if seen.sum() < min_coverage * len(col):
        raise CalibrationError(
            f"mire {mire_index} present on {seen.sum()} of {len(col)} meridians; "
            "run the quality checks on this image")
    return float(col[seen].mean())


def fit_gap_top_samples(gap_tops, xs, fit_range=None, mire_index=GAP_TOP_MIRE,
                        sphere_radius=7.8, dropped=()) -> GapTopModel:
    """Linear least squares of gap_top on ``1/x``."""
    y = np.asarray(gap_tops, dtype=float)
    x = np.asarray(xs, dtype=float)
    if len(y) < 5:
        raise CalibrationError(f"only {len(y)} usable training samples (need 5)")
    A = np.column_stack([1.0 / x, np.ones_like(x)])
    (a, b), *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = float(np.sqrt(np.mean((A @ np.array([a, b]) - y) ** 2)))
    fr = fit_range or (float(y.min()), float(y.max()))
    return GapTopModel(float(a), float(b), tuple(fr), resid,
                       (float(x.min()), float(x.max())), mire_index, sphere_radius,
                       [(float(g), float(v)) for g, v in zip(y, x)], list(dropped))


def fit_gap_top_model(rig: RigConfig, sphere_radius: float = 7.8, gap_tops=None,
                      mire_index: int = GAP_TOP_MIRE, threads: int = 1) -> GapTopModel:
    """Render a sphere at each gap_top, measure the mire feature, fit the model."""
    from .analysis import scan_image
    from .simulator import SimulationError, Sphere, render

    if gap_tops is None:
        gap_tops = np.round(np.arange(-5.0, 5.0 + 1e-9, 0.5), 6)
    ys, xs, dropped = [], [], []
    for gt in gap_tops:
        r = rig.with_gaps(gap_top=float(gt))
        try:
            img = render(r, Sphere(sphere_radius), threads=threads)
            _, scan = scan_image(img, r)
            xs.append(mire_feature(scan, mire_index))
            ys.append(float(gt))
        except (SimulationError, PipelineError, CalibrationError) as exc:
            log.warning("gap_top %.2f dropped: %s", gt, exc)
            dropped.append(float(gt))
    return fit_gap_top_samples(ys, xs, (float(min(gap_tops)), float(max(gap_tops))),
                               mire_index, sphere_radius, dropped)


@dataclass
class GapTopEstimate:
    gap_top: float
    feature_px: float
    extrapolated: bool


def estimate_gap_top(model: GapTopModel, scan: MirePointSet) -> GapTopEstimate:
    x = mire_feature(scan, model.mire_index)
    gt = float(model.predict(x))
    extra = model.is_extrapolation(x)
    if extra:
        log.warning("mire radius %.2f px outside the training range %s", x, model.x_range)
    return GapTopEstimate(gt, x, extra)


# --- gap_base ---------------------------------------------------------------------

@dataclass
class GapBaseResult:
    gap_base: float
    radius_error: float                  # mm at the optimum
    grid: np.ndarray
    errors: np.ndarray                   # |R_est - R_true| on the grid, mm
    unimodal: bool

    def diagnostics(self) -> dict:
        return {"grid": self.grid.tolist(), "errors": self.errors.tolist(),
                "unimodal": self.unimodal}


def estimated_sphere_radius(scans, rig: RigConfig) -> float:
    """Mean apex-sphere radius recovered from the scans under ``rig``."""
    vals = []
    for scan in scans:
        vals.append(sphere_radius_fit(arc_step(scan, rig)))
    return float(np.mean(vals))


def _is_unimodal(err: np.ndarray, rel_tol: float = 1e-9) -> bool:
    i = int(np.argmin(err))
    tol = rel_tol * max(float(np.max(err)), 1e-12)
    left = np.diff(err[:i + 1])
    right = np.diff(err[i:])
    return bool(np.all(left <= tol) and np.all(right >= -tol))


def calibrate_gap_base(images, true_radius: float, rig: RigConfig,
                       bracket: tuple | None = None, step: float = 0.25,
                       k: int = 360) -> GapBaseResult:
    """Find gap_base that makes the reconstructed sphere radius match ``true_radius``.

    Images show the calibration sphere seated on the attachment (gap_top 0).
    A grid over ``bracket`` (default: configured gap_base +- 5 mm) is followed
    by a bracketed root search on the signed radius error.
    """
    from .analysis import scan_image

    images = list(images)
    if not images:
        raise CalibrationError("no calibration images")
    if bracket is None:
        bracket = (max(rig.gap_base - 5.0, 0.0), rig.gap_base + 5.0)
    lo, hi = float(bracket[0]), float(bracket[1])
    if not hi > lo:
        raise CalibrationError("empty gap_base bracket")
    scans = [scan_image(img, rig, k)[1] for img in images]

    def signed(gb):
        try:
            return estimated_sphere_radius(scans, rig.with_gaps(gap_base=gb, gap_top=0.0)) \
                - true_radius
        except ReconstructionError:
            return math.nan

    grid = np.round(np.arange(lo, hi + 1e-9, step), 9)
    sig = np.array([signed(g) for g in grid])
    err = np.abs(sig)
    if not np.all(np.isfinite(err)):
        raise CalibrationError("reconstruction failed on part of the gap_base grid",
                               {"grid": grid.tolist(), "errors": err.tolist()})
    unimodal = _is_unimodal(err)
    if not unimodal:
        raise CalibrationError("radius error is not unimodal over the gap_base bracket",
                               {"grid": grid.tolist(), "errors": err.tolist()})
    i = int(np.argmin(err))
    best = float(grid[i])
    # refine: root of the signed error between neighbouring grid points
    for j in (i - 1, i):
        if 0 <= j < len(grid) - 1 and np.sign(sig[j]) != np.sign(sig[j + 1]):
            best = brentq(signed, grid[j], grid[j + 1], xtol=1e-6)
            break
    else:
        a, b = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]
        if b > a:
            best = float(minimize_scalar(lambda g: abs(signed(g)), bounds=(a, b),
                                         method="bounded",
                                         options={"xatol": 1e-6}).x)
    return GapBaseResult(float(best), abs(signed(best)), grid, err, unimodal)
