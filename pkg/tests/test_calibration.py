import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import helpers
from corneatopo import calibration
from corneatopo.analysis import scan_image
from corneatopo.calibration import (CalibrationError, GapTopModel, _is_unimodal,
                                    calibrate_gap_base, default_gap_top_model,
                                    estimate_gap_top, estimated_sphere_radius,
                                    fit_gap_top_samples, mire_feature)

RIG = helpers.rig()
MODEL = default_gap_top_model()


def test_model_text_roundtrip(tmp_path):
    p = tmp_path / "m.txt"
    MODEL.save(p)
    back = GapTopModel.load(p)
    assert back == MODEL


def test_malformed_model_rejected():
    with pytest.raises(CalibrationError):
        GapTopModel.from_text("a 1.0\n")


@settings(max_examples=25, deadline=None)
@given(st.floats(500, 5000), st.floats(-30, 30))
def test_exact_hyperbola_is_recovered(a, b):
    x = np.linspace(100, 200, 9)
    m = fit_gap_top_samples(a / x + b, x)
    assert m.a == pytest.approx(a, rel=1e-9) and m.b == pytest.approx(b, abs=1e-7)
    assert m.fit_residual < 1e-9


def test_too_few_samples():
    with pytest.raises(CalibrationError):
        fit_gap_top_samples([0, 1, 2, 3], [150, 140, 130, 120])


def test_shipped_model_is_monotone_decreasing():
    lo, hi = MODEL.x_range
    assert MODEL.a > 0
    assert MODEL.predict(hi) < MODEL.predict(lo)
    xs = np.linspace(lo, hi, 50)
    assert np.all(np.diff(MODEL.predict(xs)) < 0)
    assert not MODEL.dropped and len(MODEL.samples) == 21


def test_shipped_model_residual_is_in_sample_rms():
    gt, x = np.array(MODEL.samples).T
    rms = np.sqrt(np.mean((MODEL.predict(x) - gt) ** 2))
    assert rms == pytest.approx(MODEL.fit_residual, rel=1e-9)
    refit = fit_gap_top_samples(gt, x)
    assert refit.a == pytest.approx(MODEL.a, rel=1e-9)


def test_in_sample_prediction_within_worst_training_error():
    gt, x = np.array(MODEL.samples).T
    worst = np.max(np.abs(MODEL.predict(x) - gt))
    i = int(np.nonzero(gt == 1.0)[0][0])
    assert abs(MODEL.predict(x[i]) - 1.0) <= worst


def test_leave_one_out_at_plus_one():
    gt, x = np.array(MODEL.samples).T
    keep = gt != 1.0
    m = fit_gap_top_samples(gt[keep], x[keep])
    assert abs(m.predict(x[~keep][0]) - 1.0) <= 0.3


def test_extrapolation_flag():
    lo, hi = MODEL.x_range
    assert not MODEL.is_extrapolation(0.5 * (lo + hi))
    assert MODEL.is_extrapolation(hi + 1.0)


def test_missing_mire_20_is_an_error():
    radii = np.tile(10.0 + 6.5 * np.arange(28), (360, 1))
    radii[:, 20] = np.nan
    scan = helpers.synthetic_scan(np.full(360, 28), radii=radii)
    with pytest.raises(CalibrationError):
        estimate_gap_top(MODEL, scan)
    short = helpers.synthetic_scan(np.full(360, 20), ring_count=20)
    with pytest.raises(CalibrationError):
        mire_feature(short)


def test_feature_ignores_gap_filled_values():
    radii = np.tile(10.0 + 6.5 * np.arange(28), (360, 1))
    scan = helpers.synthetic_scan(np.full(360, 28), radii=radii)
    scan.radii[:10, 20] = 1000.0
    scan.gap_mask[:10, 20] = True
    assert mire_feature(scan) == pytest.approx(10.0 + 6.5 * 20)


def test_gap_top_estimate_on_simulated_sphere():
    img = helpers.image("sphere7.8", gap_top=-2.0)
    _, scan = scan_image(img, RIG.with_gaps(gap_top=-2.0))
    est = estimate_gap_top(MODEL, scan)
    assert abs(est.gap_top + 2.0) <= 0.3 and not est.extrapolated


def test_unimodal_detector():
    assert _is_unimodal(np.array([3.0, 2.0, 1.0, 0.5, 1.0, 2.0]))
    assert _is_unimodal(np.array([0.1, 0.5, 2.0]))
    assert not _is_unimodal(np.array([3.0, 1.0, 2.0, 0.5, 2.0]))


def test_gap_base_needs_images():
    with pytest.raises(CalibrationError):
        calibrate_gap_base([], 7.8, RIG)


def test_gap_base_error_lower_at_truth():
    _, scan = helpers.scan()
    err = {gb: abs(estimated_sphere_radius([scan], RIG.with_gaps(gap_base=gb)) - 7.8)
           for gb in (RIG.gap_base - 0.5, RIG.gap_base, RIG.gap_base + 0.5)}
    truth = err.pop(RIG.gap_base)
    assert all(truth < e for e in err.values())


def test_gap_base_rejects_multimodal_error_curve(monkeypatch):
    def w_shaped(scans, rig):
        return 7.8 + min(abs(rig.gap_base - 3.0), abs(rig.gap_base - 7.0))
    monkeypatch.setattr(calibration, "estimated_sphere_radius", w_shaped)
    with pytest.raises(CalibrationError) as exc:
        calibrate_gap_base([helpers.image()], 7.8, RIG, bracket=(1.0, 9.0), step=0.5)
    assert "grid" in exc.value.diagnostics and len(exc.value.diagnostics["errors"]) == 17


def test_gap_base_refinement_on_smooth_curve(monkeypatch):
    def linear(scans, rig):
        return 7.8 + 0.1 * (rig.gap_base - 4.37)
    monkeypatch.setattr(calibration, "estimated_sphere_radius", linear)
    res = calibrate_gap_base([helpers.image()], 7.8, RIG, bracket=(2.0, 8.0), step=0.5)
    assert res.gap_base == pytest.approx(4.37, abs=1e-5) and res.unimodal
