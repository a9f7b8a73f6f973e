"""Orthonormal Zernike polynomials in OSA/ANSI single-index order.

Each term is expanded once into an exact Cartesian monomial table so a
coefficient vector collapses to a single bivariate polynomial; values and
derivatives then come from a triangular 2-D Horner scheme.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
from numpy.polynomial import polynomial as P


def n_terms(degree: int) -> int:
    return (degree + 1) * (degree + 2) // 2


def osa_to_nm(j: int) -> tuple[int, int]:
    n = int((math.sqrt(8 * j + 1) - 1) // 2)
    m = 2 * j - n * (n + 2)
    return n, m


def nm_to_osa(n: int, m: int) -> int:
    return (n * (n + 2) + m) // 2


def norm_factor(n: int, m: int) -> float:
    return math.sqrt(2 * (n + 1)) if m else math.sqrt(n + 1)


def radial_coeffs(n: int, m: int) -> dict[int, float]:
    """R_n^|m|(rho) as {power: coefficient}."""
    m = abs(m)
    out = {}
    for k in range((n - m) // 2 + 1):
        c = ((-1) ** k * math.factorial(n - k)
             / (math.factorial(k) * math.factorial((n + m) // 2 - k)
                * math.factorial((n - m) // 2 - k)))
        out[n - 2 * k] = c
    return out


@lru_cache(maxsize=None)
def monomial_table(j: int) -> np.ndarray:
    """Coefficients ``C[p, q]`` of ``x**p * y**q`` for normalised term ``j``."""
    n, m = osa_to_nm(j)
    am = abs(m)
    C = np.zeros((n + 1, n + 1))
    # angular part: Re/Im of (x + i y)^|m|
    ang = np.zeros((am + 1, am + 1))
    for k in range(am + 1):
        z = math.comb(am, k) * (1j ** k)
        ang[am - k, k] = z.real if m >= 0 else z.imag
    for power, c in radial_coeffs(n, m).items():
        # rho^power * trig(m theta) = (x^2+y^2)^((power-|m|)/2) * angular
        h = (power - am) // 2
        rad = np.zeros((2 * h + 1, 2 * h + 1))
        for i in range(h + 1):
            rad[2 * i, 2 * (h - i)] = math.comb(h, i)
        term = _polymul2d(rad, ang)
        C[:term.shape[0], :term.shape[1]] += c * term
    return C * norm_factor(n, m)


def _polymul2d(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    out = np.zeros((a.shape[0] + b.shape[0] - 1, a.shape[1] + b.shape[1] - 1))
    for (i, j), v in np.ndenumerate(a):
        if v:
            out[i:i + b.shape[0], j:j + b.shape[1]] += v * b
    return out


def basis(j: int, x, y) -> np.ndarray:
    """Term ``j`` evaluated on the unit disk coordinates ``x``, ``y``."""
    return P.polyval2d(x, y, monomial_table(j))


def design_matrix(x, y, degree: int = 8) -> np.ndarray:
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    return np.column_stack([basis(j, x, y) for j in range(n_terms(degree))])


def _horner2d(C: np.ndarray, x, y):
    """Evaluate sum C[p, q] x**p y**q, skipping the zero upper triangle."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    out = None
    for p in range(C.shape[0] - 1, -1, -1):
        row = C[p]
        nz = np.nonzero(row)[0]
        if len(nz):
            acc = np.full(np.broadcast(x, y).shape, row[nz[-1]])
            for q in range(nz[-1] - 1, -1, -1):
                acc = acc * y
                if row[q]:
                    acc += row[q]
        else:
            acc = 0.0
        out = acc if out is None else out * x + acc
    return np.broadcast_to(out, np.broadcast(x, y).shape) if np.ndim(out) == 0 else out


class ZernikeSurface:
    """Height field ``z(x, y)`` given by Zernike coefficients over a disk.

    Coordinates are physical (mm); they are scaled by ``aperture_radius``
    before evaluating the basis.
    """

    def __init__(self, coefficients, aperture_radius: float):
        self.coefficients = np.asarray(coefficients, dtype=float)
        self.aperture_radius = float(aperture_radius)
        if self.aperture_radius <= 0:
            raise ValueError("aperture_radius must be positive")
        nt = len(self.coefficients)
        degree = int((math.sqrt(8 * nt + 1) - 3) / 2)
        if n_terms(degree) != nt:
            raise ValueError(f"{nt} coefficients is not a full Zernike degree")
        self.degree = degree
        C = np.zeros((degree + 1, degree + 1))
        for j, c in enumerate(self.coefficients):
            if c:
                t = monomial_table(j)
                C[:t.shape[0], :t.shape[1]] += c * t
        # rescale to physical coordinates: x_unit = x / a
        a = self.aperture_radius
        scale = a ** -np.add.outer(np.arange(degree + 1), np.arange(degree + 1))
        self._poly = C * scale
        self._dx = P.polyder(self._poly, axis=0)
        self._dy = P.polyder(self._poly, axis=1)
        self._dxx = P.polyder(self._dx, axis=0)
        self._dxy = P.polyder(self._dx, axis=1)
        self._dyy = P.polyder(self._dy, axis=1)

    def __call__(self, x, y):
        return _horner2d(self._poly, x, y)

    def gradient(self, x, y):
        return _horner2d(self._dx, x, y), _horner2d(self._dy, x, y)

    def hessian(self, x, y):
        return (_horner2d(self._dxx, x, y), _horner2d(self._dxy, x, y),
                _horner2d(self._dyy, x, y))

    def to_dict(self) -> dict:
        return {"ordering": "OSA/ANSI", "normalization": "orthonormal",
                "aperture_radius": self.aperture_radius,
                "coefficients": [float(c) for c in self.coefficients]}
