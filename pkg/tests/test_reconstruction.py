import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import helpers
from corneatopo.geometry import default_rig
from corneatopo.pipeline import MirePointSet
from corneatopo.reconstruction import (POWER_FACTOR, CornealSurface, ReconstructionError,
                                       arc_step, axial_power, c2_residuals, curvature_maps,
                                       diopters, fit_zernike_points, reconstruction_error,
                                       sim_k, sphere_radius_fit, tangential_power)
from corneatopo.simulator import Sphere, analytic_mire_radii, zernike_fixtures

RIG = default_rig()


def disk_samples(ap=4.0, n=3000, seed=0):
    rng = np.random.default_rng(seed)
    r = ap * np.sqrt(rng.uniform(0, 1, n))
    t = rng.uniform(0, 2 * np.pi, n)
    return r * np.cos(t), r * np.sin(t)


def biconic(x, y, rx, ry, angle_deg=0.0):
    """Apex-tangent biconic sag with principal radii ``rx``/``ry`` rotated by ``angle_deg``."""
    a = math.radians(angle_deg)
    u = x * math.cos(a) + y * math.sin(a)
    v = -x * math.sin(a) + y * math.cos(a)
    cu, cv = 1 / rx, 1 / ry
    return (cu * u * u + cv * v * v) / (1 + np.sqrt(1 - cu * cu * u * u - cv * cv * v * v))


def fitted(fn, ap=4.0, degree=8, **kw):
    x, y = disk_samples(ap)
    coef, rms = fit_zernike_points(x, y, fn(x, y, **kw), ap, degree)
    return CornealSurface(coef, ap, rms)


class Paraboloid:
    def __init__(self, R):
        self.R = R

    def sag(self, x, y):
        return (np.asarray(x) ** 2 + np.asarray(y) ** 2) / (2 * self.R)

    def sag_gradient(self, x, y):
        return np.asarray(x) / self.R, np.asarray(y) / self.R

    def sag_hessian(self, x, y):
        one = np.ones_like(np.asarray(x, float))
        return one / self.R, 0 * one, one / self.R


class DecentredCone:
    """Sphere with a Gaussian steepening off the axis; tilt removed at the apex."""

    def __init__(self, R=7.8, c=(0.0, -1.2), amp=0.02, w=0.8):
        self.R, self.c, self.amp, self.w = R, c, amp, w
        g0 = self._g(0.0, 0.0)
        self.lin = (g0 * c[0] / w ** 2, g0 * c[1] / w ** 2, g0)

    def _g(self, x, y):
        return self.amp * np.exp(-((x - self.c[0]) ** 2 + (y - self.c[1]) ** 2)
                                 / (2 * self.w ** 2))

    def sag(self, x, y):
        gx0, gy0, g0 = self.lin
        return self.R - np.sqrt(self.R ** 2 - x * x - y * y) \
            - (self._g(x, y) - g0 - gx0 * x - gy0 * y)

    def sag_gradient(self, x, y):
        q = np.sqrt(self.R ** 2 - x * x - y * y)
        g, w2 = self._g(x, y), self.w ** 2
        gx0, gy0, _ = self.lin
        return x / q + g * (x - self.c[0]) / w2 + gx0, y / q + g * (y - self.c[1]) / w2 + gy0

    def sag_hessian(self, x, y):
        q3 = (self.R ** 2 - x * x - y * y) ** 1.5
        g, w2 = self._g(x, y), self.w ** 2
        dx, dy = x - self.c[0], y - self.c[1]
        return ((self.R ** 2 - y * y) / q3 - g * (dx * dx / w2 - 1) / w2,
                x * y / q3 - g * dx * dy / w2 ** 2,
                (self.R ** 2 - x * x) / q3 - g * (dy * dy / w2 - 1) / w2)


def fd_powers(shape, x, y, h=1e-4):
    """Axial and tangential power from finite differences of the sag along the meridian."""
    rho = np.hypot(x, y)
    c, s = x / rho, y / rho
    f = [shape.sag((rho + k * h) * c, (rho + k * h) * s) for k in (-1, 0, 1)]
    hp = (f[2] - f[0]) / (2 * h)
    hpp = (f[2] - 2 * f[1] + f[0]) / (h * h)
    return (POWER_FACTOR * hp / (rho * np.sqrt(1 + hp * hp)),
            POWER_FACTOR * hpp / (1 + hp * hp) ** 1.5)


# --- Zernike fit ------------------------------------------------------------------

def test_paraboloid_lies_in_defocus_span():
    s = fitted(lambda x, y: Paraboloid(7.8).sag(x, y))
    assert len(s.zernike_coefficients) == 45
    nonzero = np.nonzero(np.abs(s.zernike_coefficients) > 1e-9)[0]
    assert set(nonzero) == {0, 4}
    assert s.residual_rms < 1e-9


def test_sphere_fit_residual_degree_8():
    s = fitted(lambda x, y: Sphere(7.8).sag(x, y))
    assert s.residual_rms < 1e-4


def test_refit_is_idempotent():
    s = helpers.analysis().surface
    x, y = disk_samples(s.aperture_radius, seed=4)
    coef, rms = fit_zernike_points(x, y, s.sag(x, y), s.aperture_radius, 8)
    np.testing.assert_allclose(coef, s.zernike_coefficients, atol=1e-12, rtol=0)
    assert rms < 1e-12


def test_degenerate_sampling_rejected():
    x = np.linspace(-3, 3, 200)
    with pytest.raises(ReconstructionError):
        fit_zernike_points(x, 0 * x, x * x, 4.0)
    with pytest.raises(ReconstructionError):
        fit_zernike_points(x[:10], x[:10], x[:10], 4.0)


# --- curvature ----------------------------------------------------------------------

def test_diopter_conversion():
    assert diopters(7.8) == pytest.approx(337.5 / 7.8)
    assert diopters(8.0) == pytest.approx(42.1875)


@pytest.mark.parametrize("R,D", [(7.8, 43.27), (8.0, 42.19)])
def test_sphere_maps_uniform(R, D):
    maps = curvature_maps(fitted(lambda x, y: Sphere(R).sag(x, y)), 6.0, size=128)
    for m in (maps.axial, maps.tangential):
        v = m[maps.mask]
        assert np.all(np.isfinite(v)) and np.all(v > 0)
        assert np.max(np.abs(v - D)) <= 0.1


def test_paraboloid_apex_power():
    p = Paraboloid(7.8)
    assert axial_power(p, 0.0, 0.0) == pytest.approx(337.5 / 7.8)
    assert tangential_power(p, 0.0, 0.0) == pytest.approx(337.5 / 7.8)
    s = fitted(lambda x, y: p.sag(x, y))
    assert tangential_power(s, 0.0, 0.0) == pytest.approx(337.5 / 7.8, abs=1e-6)


def test_ellipsoid_axial_equals_tangential_at_apex():
    e = helpers.shape("ellipsoid")
    t = np.radians(np.arange(0, 360, 15))
    x, y = 1e-4 * np.cos(t), 1e-4 * np.sin(t)
    np.testing.assert_allclose(axial_power(e, x, y), tangential_power(e, x, y), atol=1e-3)
    r = np.linspace(0.1, 3.0, 30)
    ax = axial_power(e, r, 0 * r)
    assert np.all(np.isfinite(ax)) and np.all(np.abs(np.diff(ax)) < 0.5)


@pytest.mark.parametrize("name", ["ellipsoid", "z3", "z0"])
def test_curvature_matches_finite_difference_oracle(name):
    shape = helpers.shape(name)
    x, y = disk_samples(3.0, n=300, seed=9)
    keep = np.hypot(x, y) > 0.2
    x, y = x[keep], y[keep]
    ax_fd, tg_fd = fd_powers(shape, x, y)
    assert np.max(np.abs(axial_power(shape, x, y) - ax_fd)) < 0.5
    assert np.max(np.abs(tangential_power(shape, x, y) - tg_fd)) < 0.5


def test_reconstructed_sphere_curvature_matches_oracle():
    s = helpers.analysis().surface
    x, y = disk_samples(3.0, n=300, seed=11)
    truth = Sphere(7.8)
    keep = np.hypot(x, y) > 0.2
    ax_fd, tg_fd = fd_powers(truth, x[keep], y[keep])
    assert np.max(np.abs(axial_power(s, x[keep], y[keep]) - ax_fd)) < 0.5
    assert np.max(np.abs(tangential_power(s, x[keep], y[keep]) - tg_fd)) < 0.5


def _peaks(surface, R=3.0, n=241):
    r = np.linspace(-R, R, n)
    X, Y = np.meshgrid(r, r)
    m = np.hypot(X, Y) <= R
    A = np.where(m, axial_power(surface, X, Y), np.nan)
    T = np.where(m, tangential_power(surface, X, Y), np.nan)
    return X, Y, A, T


def _hot_area(M):
    return np.nansum(M > np.nanmax(M) - 1.0)


def test_tangential_map_localises_a_decentred_cone():
    cone = DecentredCone()
    X, Y, A, T = _peaks(cone)
    ia, it = np.nanargmax(A), np.nanargmax(T)
    assert np.nanmax(T) > np.nanmax(A) + 2.0
    # the axial peak is pulled towards the axis but sits in the same region
    assert math.hypot(X.flat[ia] - X.flat[it], Y.flat[ia] - Y.flat[it]) < 1.0
    assert T.flat[it] > A.flat[it]
    assert _hot_area(T) < 0.5 * _hot_area(A)


def test_central_cone_fixture_more_localised_in_tangential_map():
    # with the steepening at the apex both maps peak there at equal power
    for surface in (zernike_fixtures()[3], helpers.analysis("z3").surface):
        _, _, A, T = _peaks(surface)
        assert abs(np.nanmax(T) - np.nanmax(A)) < 0.2
        assert _hot_area(T) < 0.5 * _hot_area(A)


def test_zone_beyond_aperture_rejected():
    s = fitted(lambda x, y: Sphere(7.8).sag(x, y), ap=2.0)
    with pytest.raises(ReconstructionError):
        curvature_maps(s, 6.0)
    with pytest.raises(ReconstructionError):
        sim_k(fitted(lambda x, y: Sphere(7.8).sag(x, y), ap=1.0))


# --- sim-K --------------------------------------------------------------------------

def test_sphere_sim_k():
    k = sim_k(fitted(lambda x, y: Sphere(7.8).sag(x, y)))
    assert k.sim_k1 == pytest.approx(43.27, abs=0.2) and k.sim_k2 == pytest.approx(43.27, abs=0.2)
    assert abs(k.cylinder) < 1e-3


def test_sim_k_tie_goes_to_lowest_axis(monkeypatch):
    from corneatopo import reconstruction
    monkeypatch.setattr(reconstruction, "meridian_powers", lambda s, z: np.full(180, 43.0))
    k = sim_k(fitted(lambda x, y: Sphere(7.8).sag(x, y)))
    assert k.flat_meridian_axis == 0.0 and k.steep_meridian_axis == 90.0


def test_toric_sim_k():
    k = sim_k(fitted(biconic, rx=7.5, ry=8.1))
    assert k.sim_k1 == pytest.approx(337.5 / 7.5, abs=0.3)
    assert k.sim_k2 == pytest.approx(337.5 / 8.1, abs=0.3)
    assert k.flat_meridian_axis == 90.0 and k.steep_meridian_axis == 0.0


def test_ellipsoid_sim_k_axes():
    k = helpers.analysis("ellipsoid").simk
    assert k.sim_k1 > k.sim_k2
    assert abs(k.steep_meridian_axis - k.flat_meridian_axis) == 90.0


@settings(max_examples=12, deadline=None)
@given(st.floats(7.0, 8.5), st.floats(7.0, 8.5), st.floats(0.0, 179.0))
def test_sim_k_ordering(rx, ry, angle):
    k = sim_k(fitted(biconic, rx=rx, ry=ry, angle_deg=angle))
    assert k.sim_k1 >= k.sim_k2 - 1e-12
    assert (k.steep_meridian_axis - k.flat_meridian_axis) % 180 == 90.0
    assert k.sim_k1 == pytest.approx(337.5 / min(rx, ry), abs=0.3)
    assert k.sim_k2 == pytest.approx(337.5 / max(rx, ry), abs=0.3)


# --- error metric -----------------------------------------------------------------

def test_identical_surfaces_have_zero_error():
    s = fitted(lambda x, y: Sphere(7.8).sag(x, y))
    e = reconstruction_error(s, s, zone=6.0)
    assert e.mean_percent == 0.0 and e.radius_percent == 0.0


def test_error_of_wrong_radius():
    s = fitted(lambda x, y: Sphere(8.0).sag(x, y))
    e = reconstruction_error(s, Sphere(7.8), zone=6.0)
    assert e.radius_percent == pytest.approx(100 * 0.2 / 7.8, rel=1e-3)
    assert e.mean_percent > 1.0


def test_error_zone_beyond_aperture():
    s = fitted(lambda x, y: Sphere(7.8).sag(x, y), ap=2.0)
    with pytest.raises(ReconstructionError):
        reconstruction_error(s, Sphere(7.8), zone=6.0)


# --- arc step ---------------------------------------------------------------------

def exact_scan(R, k=36):
    radii = np.tile(analytic_mire_radii(RIG, Sphere(R)), (k, 1))
    n = radii.shape[1]
    return MirePointSet(center=RIG.camera.principal_point, meridian_count=k, radii=radii,
                        weights=np.ones((k, n)), gap_mask=np.zeros((k, n), bool),
                        counts=np.full(k, n))


@pytest.mark.parametrize("R", [7.2, 7.8, 8.6])
def test_arc_step_on_exact_radii_recovers_sphere(R):
    curves = arc_step(exact_scan(R), RIG, prior_radius=7.8)
    assert sphere_radius_fit(curves) == pytest.approx(R, abs=2e-3)
    for c in curves:
        assert np.all(np.diff(c.rho) > 0)
        assert np.max(c2_residuals(c)) < 1e-9
        assert np.max(c.reflection_residual) < 1e-6


def test_arc_step_invariants_on_rendered_images():
    for name in ("sphere7.8", "ellipsoid"):
        a = helpers.analysis(name)
        assert not a.truncated
        for c in a.curves:
            assert np.all(np.diff(c.rho) > 0)
            assert np.max(c2_residuals(c)) < 1e-9
            assert np.max(c.reflection_residual) < 1e-6


def test_surface_reproduces_knots_within_residual():
    s = helpers.analysis().surface
    xs, ys, zs = [np.zeros(1)], [np.zeros(1)], [np.zeros(1)]
    for c in s.meridian_curves:
        sel = (c.rho > 0) & (c.rho <= s.aperture_radius * (1 + 1e-12)) & ~c.interpolated
        t = math.radians(c.meridian_angle)
        xs.append(c.rho[sel] * math.cos(t))
        ys.append(c.rho[sel] * math.sin(t))
        zs.append(c.z[sel])
    x, y, z = (np.concatenate(v) for v in (xs, ys, zs))
    rms = np.sqrt(np.mean((s.sag(x, y) - z) ** 2))
    assert rms == pytest.approx(s.residual_rms, rel=1e-6)


def test_sphere_round_trip_maps():
    a = helpers.analysis()
    v = a.maps.axial[a.maps.mask]
    assert np.all(np.isfinite(v)) and np.all(v > 0)
    assert abs(np.median(v) - 43.27) < 0.2
