"""Regenerate the frozen Zernike test surfaces in corneatopo/data.

Each fixture is a sphere plus a closed-form perturbation, projected onto the
45-term basis over a 6 mm aperture. Piston and tilt are then adjusted so the
sag and its gradient vanish at the origin (apex on axis, zero slope).
"""

import json
import math
from pathlib import Path

import numpy as np

from corneatopo.zernike import design_matrix, nm_to_osa, ZernikeSurface

APERTURE = 6.0
OUT = Path(__file__).resolve().parents[1] / "src" / "corneatopo" / "data" / "zernike_fixtures.json"


def sphere(R):
    return lambda x, y: R - np.sqrt(R * R - x * x - y * y)


def fixtures():
    s78 = sphere(7.8)
    s76 = sphere(7.6)
    s77 = sphere(7.7)

    def astig(x, y):
        # ~2 D with-the-rule cylinder
        return s78(x, y) + 0.006 / 4 * (x * x - y * y)

    def coma(x, y):
        return s77(x, y) + 3e-4 * (x * x + y * y) * y

    def prolate(x, y):
        return s78(x, y) - 6.6e-5 * (x * x + y * y) ** 2

    def cone(x, y):
        # localized inferior steepening
        return s76(x, y) - 0.02 * np.exp(-((x - 0.3) ** 2 + (y - 0.8) ** 2) / 2.0)

    def mixed(x, y):
        t = math.radians(30)
        u = x * math.cos(t) + y * math.sin(t)
        v = -x * math.sin(t) + y * math.cos(t)
        r2 = x * x + y * y
        th = np.arctan2(y, x)
        return (s76(x, y) + 0.004 / 4 * (u * u - v * v)
                + 2e-4 * r2 ** 1.5 * np.cos(3 * th) - 3e-5 * r2 * r2)

    return [("astigmatic", "sphere 7.8 mm with 2 D regular astigmatism", astig),
            ("coma", "sphere 7.7 mm with vertical coma", coma),
            ("prolate", "sphere 7.8 mm flattening towards the periphery", prolate),
            ("cone", "sphere 7.6 mm with a localized inferior steep cone", cone),
            ("mixed", "oblique astigmatism, trefoil and flattening", mixed)]


def project(fn):
    r = np.sqrt((np.arange(60) + 0.5) / 60) * APERTURE
    t = np.arange(120) * 2 * np.pi / 120
    R, T = np.meshgrid(r, t)
    x, y = (R * np.cos(T)).ravel(), (R * np.sin(T)).ravel()
    A = design_matrix(x / APERTURE, y / APERTURE)
    coef, *_ = np.linalg.lstsq(A, fn(x, y), rcond=None)
    # zero value and slope at the origin via piston and tilt
    surf = ZernikeSurface(coef, APERTURE)
    gx, gy = surf.gradient(0.0, 0.0)
    coef[nm_to_osa(1, 1)] -= gx * APERTURE / 2
    coef[nm_to_osa(1, -1)] -= gy * APERTURE / 2
    coef[0] -= ZernikeSurface(coef, APERTURE)(0.0, 0.0)
    return coef


def main():
    out = []
    for name, desc, fn in fixtures():
        coef = project(fn)
        out.append({"name": name, "description": desc, "aperture_radius": APERTURE,
                    "ordering": "OSA/ANSI", "normalization": "orthonormal",
                    "coefficients": [float(c) for c in coef]})
    OUT.write_text(json.dumps({"fixtures": out}, indent=1) + "\n")
    print(f"wrote {len(out)} fixtures to {OUT}")


if __name__ == "__main__":
    main()
