"""Figures: curvature heatmaps with a sim-K overlay and sensitivity curves.

Everything renders through the Agg backend straight to PNG files.
"""

from __future__ import annotations

import json
import math
from importlib import resources

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from matplotlib.colors import LinearSegmentedColormap, Normalize  # noqa: E402

from .reconstruction import CurvatureMaps, SimK  # noqa: E402

# fixed metadata so identical inputs give identical PNG bytes
PNG_METADATA = {"Software": None}


def load_palette():
    """Colormap and diopter range from the shipped palette table."""
    with resources.files("corneatopo.data").joinpath("palette.json").open() as fh:
        table = json.load(fh)
    stops = np.array([s[0] for s in table["stops"]], dtype=float)
    colors = [s[1] for s in table["stops"]]
    lo, hi = float(stops[0]), float(stops[-1])
    pos = (stops - lo) / (hi - lo)
    cmap = LinearSegmentedColormap.from_list(table["name"], list(zip(pos, colors)))
    cmap.set_bad("white")
    return cmap, lo, hi


def heatmap(raster: np.ndarray, maps: CurvatureMaps, path, title: str,
            simk: SimK | None = None, dpi: int = 100):
    """One diopter map; camera-view orientation (image rows downward)."""
    cmap, lo, hi = load_palette()
    data = np.ma.masked_where(~maps.mask | ~np.isfinite(raster), raster)
    x0, x1, y0, y1 = maps.extent
    fig, ax = plt.subplots(figsize=(6.0, 5.2))
    im = ax.imshow(data, cmap=cmap, norm=Normalize(lo, hi), origin="upper",
                   extent=(x0, x1, y1, y0), interpolation="nearest")
    ax.set_xlabel("x (mm)")
    ax.set_ylabel("y (mm)")
    ax.set_title(title)
    ax.set_aspect("equal")
    cb = fig.colorbar(im, ax=ax, shrink=0.85)
    cb.set_label("power (D)")
    if simk is not None:
        r = simk.zone_diameter / 2.0
        ax.add_patch(plt.Circle((0, 0), r, fill=False, lw=0.8, ls="--", color="k"))
        for axis, style in ((simk.flat_meridian_axis, "-"), (simk.steep_meridian_axis, ":")):
            t = math.radians(axis)
            # axes are counter-clockwise with y up on the display
            dx, dy = r * math.cos(t), -r * math.sin(t)
            ax.plot([-dx, dx], [-dy, dy], style, color="k", lw=1.0)
        ax.text(0.02, 0.02,
                f"sim-K1 {simk.sim_k1:.2f} D @ {simk.steep_meridian_axis:.0f}°\n"
                f"sim-K2 {simk.sim_k2:.2f} D @ {simk.flat_meridian_axis:.0f}°",
                transform=ax.transAxes, fontsize=9, va="bottom",
                bbox={"facecolor": "white", "alpha": 0.8, "lw": 0})
    fig.tight_layout()
    fig.savefig(path, dpi=dpi, metadata=PNG_METADATA)
    plt.close(fig)


def curvature_figures(maps: CurvatureMaps, simk: SimK, out_dir) -> dict:
    from pathlib import Path

    out = Path(out_dir)
    paths = {"axial": out / "axial.png", "tangential": out / "tangential.png"}
    heatmap(maps.axial, maps, paths["axial"], "Axial power", simk)
    heatmap(maps.tangential, maps, paths["tangential"], "Tangential power", simk)
    return paths


def sensitivity_plot(rows, path, dpi: int = 100):
    """Reconstruction error against perturbation magnitude, one line per sweep."""
    fig, ax = plt.subplots(figsize=(5.5, 4.0))
    units = {"offset": "mm", "tilt": "deg", "wd": "mm"}
    for kind in sorted({r.kind for r in rows}):
        sel = [r for r in rows if r.kind == kind]
        ax.plot([r.value for r in sel], [r.error_percent for r in sel], "o-",
                label=f"{kind} ({units.get(kind, '')})")
    ax.set_xlabel("perturbation")
    ax.set_ylabel("mean reconstruction error (%)")
    ax.grid(alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=dpi, metadata=PNG_METADATA)
    plt.close(fig)
