import math

import cv2
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import helpers
from corneatopo.quality import (BrokenMiresVerdict, ExposureVerdict, OffsetVerdict,
                                QualityReport, SharpnessVerdict, check_broken_mires,
                                check_exposure, check_offset, check_sharpness,
                                default_reference_edge_variance, edge_variance,
                                exposure_verdict, lab_lightness, offset_mm, offset_passed,
                                run_quality_checks, sharpness_verdict)

RIG = helpers.rig()


def cie_lightness_255(rgb):
    """CIE L* (D65, sRGB primaries) scaled to 0..255, straight from the definitions."""
    c = np.asarray(rgb, float) / 255.0
    lin = np.where(c <= 0.04045, c / 12.92, ((c + 0.055) / 1.055) ** 2.4)
    y = lin @ np.array([0.2126, 0.7152, 0.0722])
    d = 6.0 / 29.0
    f = np.where(y > d ** 3, np.cbrt(y), y / (3 * d * d) + 4.0 / 29.0)
    return (116.0 * f - 16.0) * 255.0 / 100.0


def gray_for_lightness(target):
    levels = np.arange(256)
    L = cie_lightness_255(np.repeat(levels[:, None], 3, axis=1))
    return int(levels[np.argmin(np.abs(L - target))])


def test_lab_lightness_matches_cie_definition():
    rng = np.random.default_rng(7)
    rgb = np.concatenate([np.repeat(np.arange(256)[:, None], 3, axis=1),
                          rng.integers(0, 256, (500, 3))]).astype(np.uint8)
    ours = lab_lightness(rgb[None])[0]
    # OpenCV approximates the sRGB transfer curve; 0.5 on this scale is 0.2 L*
    np.testing.assert_allclose(ours, cie_lightness_255(rgb), atol=0.5)


def test_uniform_lightness_100_is_under_exposed():
    assert exposure_verdict(np.full((50, 50), 100.0)).status == "under"


def test_uniform_gray_image_near_lightness_100_is_under_exposed():
    g = gray_for_lightness(100.0)
    v = check_exposure(np.full((100, 100), g, np.uint8))
    assert v.max_l == pytest.approx(100.0, abs=1.0) and v.status == "under"


def test_quarter_bright_pixels_is_over_exposed():
    L = np.full((100, 100), 150.0)
    L[:25] = 210.0
    v = exposure_verdict(L)
    assert v.status == "over" and v.over_fraction == pytest.approx(0.25)


def test_uniform_lightness_150_is_ok():
    assert exposure_verdict(np.full((50, 50), 150.0)).passed


def test_under_exposure_boundary():
    assert exposure_verdict(np.full((10, 10), 125.0)).status == "ok"
    assert exposure_verdict(np.full((10, 10), np.nextafter(125.0, 0))).status == "under"


def test_over_exposure_boundary():
    L = np.full((100, 100), 150.0)
    L[:20] = 200.5                  # exactly 20 %: not over
    assert exposure_verdict(L).status == "ok"
    L[20, 0] = 200.5                # one pixel more
    assert exposure_verdict(L).status == "over"
    L[:] = 150.0
    L[:30] = 200.0                  # 200 itself is not "over 200"
    assert exposure_verdict(L).status == "ok"


def test_over_exposure_reported_first():
    # mostly dark, so the mean is low, but a large saturated band means "over"
    L = np.full((100, 100), 10.0)
    L[:40] = 230.0
    assert exposure_verdict(L).status == "over"


def test_golden_image_exposure_ok():
    v = check_exposure(helpers.image())
    assert v.passed and v.over_fraction == 0.0


def test_sharpness_ratio_boundary():
    assert sharpness_verdict(4.0, 5.0).passed
    assert not sharpness_verdict(3.99, 5.0).passed
    with pytest.raises(ValueError):
        sharpness_verdict(1.0, 0.0)


def test_sharpness_against_itself():
    img = helpers.image()
    v = check_sharpness(img, edge_variance(img))
    assert v.passed and v.ratio == pytest.approx(1.0)


def test_shipped_reference_is_the_golden_image():
    assert default_reference_edge_variance() == pytest.approx(edge_variance(helpers.image()),
                                                              rel=1e-6)


def test_blur_fails_sharpness():
    img = helpers.image().pixels
    blurred = cv2.GaussianBlur(img, (7, 7), 0)
    ref = edge_variance(img)
    assert edge_variance(blurred) < ref
    assert not check_sharpness(blurred, ref).passed


def test_half_contrast_quarter_ratio():
    img = helpers.image().pixels.astype(float)
    v = check_sharpness(img * 0.5, edge_variance(img))
    assert v.ratio == pytest.approx(0.25, rel=1e-9) and not v.passed


def test_offset_distance_formula():
    d = offset_mm((249.5 + 30.0, 249.5 + 40.0), (249.5, 249.5), RIG, prior_radius=7.8)
    assert d == pytest.approx(50.0 * (RIG.working_distance() + 7.8) / RIG.camera.focal_px)


def test_offset_pass_boundary():
    assert offset_passed(0.999)
    assert not offset_passed(1.0)


def _offset_verdict(s):
    img = helpers.image("sphere7.8", s)
    return check_offset(img, RIG, helpers.analysis("sphere7.8", s).scan.center)


def test_zero_offset_passes():
    v = _offset_verdict(0.0)
    assert v.distance_mm < 0.1 and v.passed


def test_two_mm_offset_fails():
    v = _offset_verdict(2.0)
    assert 1.5 <= v.distance_mm <= 2.5 and not v.passed


def test_offset_distance_grows_with_offset():
    d = [_offset_verdict(s).distance_mm for s in range(6)]
    assert np.all(np.diff(d) > 0)
    assert [offset_passed(x) for x in d] == [True] + [False] * 5


def test_offset_on_blank_image_fails_with_reason():
    v = check_offset(np.zeros((500, 500), np.uint8), RIG)
    assert not v.passed and math.isinf(v.distance_mm) and v.reason


def test_all_mires_present_passes():
    v = check_broken_mires(helpers.synthetic_scan(np.full(360, 28)))
    assert v.passed and v.fraction == 0.0


@pytest.mark.parametrize("bad,passed", [(20, False), (19, False), (18, True), (17, True)])
def test_broken_fraction_boundary(bad, passed):
    counts = np.full(360, 28)
    counts[:bad] = 20
    v = check_broken_mires(helpers.synthetic_scan(counts))
    assert v.passed is passed and v.fraction == pytest.approx(bad / 360)


def test_broken_mire_count_boundary():
    counts = np.full(360, 28)
    counts[:40] = 24                # exactly 24 mires is not deficient
    assert check_broken_mires(helpers.synthetic_scan(counts)).passed
    counts[:40] = 23
    assert not check_broken_mires(helpers.synthetic_scan(counts)).passed


@settings(max_examples=40, deadline=None)
@given(st.lists(st.integers(0, 28), min_size=360, max_size=360), st.integers(0, 2 ** 31))
def test_broken_mires_reads_only_counts(counts, seed):
    rng = np.random.default_rng(seed)
    a = helpers.synthetic_scan(counts)
    b = helpers.synthetic_scan(counts, radii=rng.uniform(1, 200, (360, 28)))
    va, vb = check_broken_mires(a), check_broken_mires(b)
    assert va == vb
    assert va.passed == (np.mean(np.asarray(counts) < 24) <= 0.05)


def test_support_meridians_left_out():
    counts = np.full(360, 28)
    counts[:30] = 10
    support = np.zeros(360, bool)
    support[:30] = True
    assert not check_broken_mires(helpers.synthetic_scan(counts)).passed
    v = check_broken_mires(helpers.synthetic_scan(counts, support=support))
    assert v.passed and v.considered == 330


@settings(max_examples=16)
@given(st.booleans(), st.booleans(), st.booleans(), st.booleans())
def test_overall_is_conjunction(e, s, o, b):
    rep = QualityReport(ExposureVerdict("ok" if e else "under", 150.0, 0.0, 100.0),
                        SharpnessVerdict(s, 1.0, 1.0, 1.0),
                        OffsetVerdict(o, 0.0, None, None),
                        BrokenMiresVerdict(b, 0.0, 0, 360))
    assert rep.overall == (e and s and o and b)
    assert rep.to_dict()["overall"] == ("pass" if rep.overall else "fail")
    assert len(rep.failed_gates) == 4 - sum((e, s, o, b))


def test_golden_image_passes_all_gates():
    rep = run_quality_checks(helpers.image(), RIG, helpers.analysis().scan)
    assert rep.overall, rep.failed_gates
    assert rep.broken_mires.fraction == 0.0


def test_golden_image_gates_without_scan():
    assert run_quality_checks(helpers.image(), RIG).overall
