import cv2
import numpy as np

from corneatopo.plotting import curvature_figures, load_palette, sensitivity_plot
from corneatopo.reconstruction import CornealSurface, curvature_maps, fit_zernike_points, sim_k
from corneatopo.sensitivity import SweepRow
from corneatopo.simulator import Sphere


def small_sphere_surface():
    rng = np.random.default_rng(0)
    r = 4.0 * np.sqrt(rng.uniform(0, 1, 2000))
    t = rng.uniform(0, 2 * np.pi, 2000)
    x, y = r * np.cos(t), r * np.sin(t)
    coef, rms = fit_zernike_points(x, y, Sphere(7.8).sag(x, y), 4.0)
    return CornealSurface(coef, 4.0, rms)


def test_palette_covers_clinical_range():
    cmap, lo, hi = load_palette()
    assert (lo, hi) == (30.0, 62.0)
    a, b = cmap(0.0), cmap(1.0)
    assert len(a) == 4 and a != b


def test_heatmaps_are_deterministic(tmp_path):
    s = small_sphere_surface()
    maps, k = curvature_maps(s, 6.0, size=64), sim_k(s)
    (tmp_path / "a").mkdir()
    (tmp_path / "b").mkdir()
    first = curvature_figures(maps, k, tmp_path / "a")
    second = curvature_figures(maps, k, tmp_path / "b")
    for name in ("axial", "tangential"):
        data = first[name].read_bytes()
        assert data == second[name].read_bytes()
        img = cv2.imdecode(np.frombuffer(data, np.uint8), cv2.IMREAD_COLOR)
        assert img is not None and img.shape[0] > 200


def test_sensitivity_plot_writes_png(tmp_path):
    rows = [SweepRow("offset", v, 2.0 * v, v) for v in range(4)]
    rows.append(SweepRow("offset", 4.0, float("nan"), float("nan"), "failed: test"))
    p = tmp_path / "s.png"
    sensitivity_plot(rows, p)
    assert cv2.imread(str(p)) is not None
