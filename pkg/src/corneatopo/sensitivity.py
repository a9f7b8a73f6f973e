"""Reconstruction error under rig misalignment.

A sphere is rendered with one perturbation (lateral offset, tilt or working
distance error) and analysed with the nominal rig, which knows nothing about
the perturbation.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .geometry import RigConfig
from .pipeline import PipelineError
from .reconstruction import ReconstructionError, reconstruction_error
from .simulator import PerturbationSpec, SimulationError, Sphere, render

log = logging.getLogger(__name__)

SWEEPS = {
    "offset": ("offset_s", "mm"),
    "tilt": ("tilt_theta", "deg"),
    "wd": ("working_distance_error", "mm"),
}


@dataclass
class SweepRow:
    kind: str
    value: float
    error_percent: float
    radius_percent: float
    status: str = "ok"

    def as_csv(self) -> list:
        return [self.kind, f"{self.value:g}", f"{self.error_percent:.6f}",
                f"{self.radius_percent:.6f}", self.status]


CSV_HEADER = ["sweep", "value", "reconstruction_error_percent",
              "radius_error_percent", "status"]


def perturbation(kind: str, value: float) -> PerturbationSpec:
    if kind not in SWEEPS:
        raise ValueError(f"unknown sweep {kind!r}; choose from {sorted(SWEEPS)}")
    return PerturbationSpec(**{SWEEPS[kind][0]: float(value)})


def sweep_values(start: float, stop: float, step: float) -> np.ndarray:
    if step <= 0 or stop < start:
        raise ValueError("sweep range needs start <= stop and step > 0")
    n = int(np.floor((stop - start) / step + 1e-9)) + 1
    return np.round(start + step * np.arange(n), 9)


def evaluate(rig: RigConfig, kind: str, value: float, radius: float = 7.8,
             threads: int = 1, zone: float | None = None) -> SweepRow:
    from .analysis import analyze

    shape = Sphere(radius)
    try:
        img = render(rig, shape, perturbation(kind, value), threads=threads)
        a = analyze(img, rig)
        err = reconstruction_error(a.surface, shape, zone)
        return SweepRow(kind, float(value), err.mean_percent, err.radius_percent)
    except (SimulationError, PipelineError, ReconstructionError) as exc:
        log.warning("%s=%g failed: %s", kind, value, exc)
        return SweepRow(kind, float(value), float("nan"), float("nan"),
                        f"failed: {exc}")


def run_sweep(rig: RigConfig, kind: str, values, radius: float = 7.8,
              threads: int = 1) -> list[SweepRow]:
    return [evaluate(rig, kind, v, radius, threads) for v in values]
