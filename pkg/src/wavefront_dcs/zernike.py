"""Zernike basis on the unit disk (Noll ordering, no normalization factors).

Gradients are evaluated from the Cartesian form
``Z = (x^2 + y^2)^q * Re/Im[(x + iy)^|m|]`` term by term, which is a plain
polynomial and has no coordinate singularity at the origin.
"""
import csv
from dataclasses import dataclass
from functools import cached_property
from math import factorial

import numpy as np

from .core import Field2D


@dataclass(frozen=True)
class ZernikeIndex:
    noll: int

    def __post_init__(self):
        if int(self.noll) != self.noll or self.noll < 1:
            raise ValueError(f"Noll index must be a positive integer, got {self.noll}")

    @cached_property
    def nm(self):
        return noll_to_nm(self.noll)

    @property
    def n(self):
        return self.nm[0]

    @property
    def m(self):
        return self.nm[1]


def noll_to_nm(j):
    """Map a 1-based Noll index to (n, m); m < 0 marks the sine terms."""
    j = int(j)
    if j < 1:
        raise ValueError(f"Noll index must be >= 1, got {j}")
    n = 0
    while j > (n + 1) * (n + 2) // 2:
        n += 1
    k = j - n * (n + 1) // 2 - 1
    if n % 2 == 0:
        m_abs = 2 * ((k + 1) // 2)
    else:
        m_abs = 2 * (k // 2) + 1
    if m_abs == 0:
        return n, 0
    return n, (m_abs if j % 2 == 0 else -m_abs)


def nm_to_noll(n, m):
    for j in range((n * (n + 1)) // 2 + 1, (n + 1) * (n + 2) // 2 + 1):
        if noll_to_nm(j) == (n, m):
            return j
    raise ValueError(f"invalid Zernike pair (n={n}, m={m})")


def _check_nm(n, m):
    m = abs(m)
    if n < 0 or m > n or (n - m) % 2:
        raise ValueError(f"need n >= |m| >= 0 and n - |m| even, got n={n}, m={m}")
    return m


def _radial_coeffs(n, m):
    m = _check_nm(n, m)
    return [
        (
            (-1) ** k * factorial(n - k)
            / (factorial(k) * factorial((n + m) // 2 - k) * factorial((n - m) // 2 - k)),
            n - 2 * k,
        )
        for k in range((n - m) // 2 + 1)
    ]


def radial_poly(n, m, rho):
    rho = np.asarray(rho, dtype=float)
    if np.any(rho < 0) or np.any(rho > 1 + 1e-12):
        raise ValueError("rho must lie in [0, 1]")
    out = np.zeros_like(rho)
    for c, p in _radial_coeffs(n, m):
        out = out + c * rho**p
    return out


def zernike_eval(k, rho, phi):
    idx = k if isinstance(k, ZernikeIndex) else ZernikeIndex(k)
    n, m = idx.nm
    r = radial_poly(n, m, rho)
    if m >= 0:
        return r * np.cos(m * np.asarray(phi))
    return r * np.sin(-m * np.asarray(phi))


def _zernike_xy(k, x, y, with_grad):
    idx = k if isinstance(k, ZernikeIndex) else ZernikeIndex(k)
    n, m = idx.nm
    ma = abs(m)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    z = x + 1j * y
    zm = z**ma
    zm1 = z ** (ma - 1) if ma > 0 else np.zeros_like(z)
    if m >= 0:
        ang, ang_x, ang_y = zm.real, ma * zm1.real, -ma * zm1.imag
    else:
        ang, ang_x, ang_y = zm.imag, ma * zm1.imag, ma * zm1.real
    r2 = x * x + y * y
    val = np.zeros_like(r2)
    gx = np.zeros_like(r2)
    gy = np.zeros_like(r2)
    for c, p in _radial_coeffs(n, m):
        q = (p - ma) // 2
        rq = r2**q
        val += c * rq * ang
        if with_grad:
            gx += c * rq * ang_x
            gy += c * rq * ang_y
            if q > 0:
                rq1 = 2 * q * r2 ** (q - 1)
                gx += c * rq1 * x * ang
                gy += c * rq1 * y * ang
    return val, gx, gy


def zernike_xy(k, x, y):
    """Z_k at Cartesian unit-disk coordinates."""
    return _zernike_xy(k, x, y, False)[0]


def zernike_gradient(k, x, y):
    """Analytic (dZ/dx, dZ/dy) at Cartesian unit-disk coordinates."""
    _, gx, gy = _zernike_xy(k, x, y, True)
    return gx, gy


class DesignMatrix:
    """Stacked Zernike slopes at the lenslet centers.

    Rows ``0..M-1`` hold d/dx, rows ``M..2M-1`` d/dy, in radians per meter per
    unit coefficient; column ``k`` belongs to Noll index ``k + 1``.
    """

    def __init__(self, Z, centers, diameter):
        self.Z = np.asarray(Z, dtype=float)
        self.centers = np.asarray(centers, dtype=float)
        self.diameter = float(diameter)

    @property
    def order(self):
        return self.Z.shape[1] - 1

    @property
    def n_lenslets(self):
        return self.Z.shape[0] // 2

    @cached_property
    def pinv(self):
        if self.Z.size == 0 or not np.any(self.Z):
            return np.zeros(self.Z.T.shape)
        U, s, Vt = np.linalg.svd(self.Z, full_matrices=False)
        keep = s > 1e-10 * s[0]
        return (Vt[keep].T / s[keep]) @ U[:, keep].T


def build_design_matrix(lenslets, order, diameter):
    centers = lenslets.centers if hasattr(lenslets, "centers") else np.asarray(lenslets)
    M = len(centers)
    if 2 * M < order + 1:
        raise ValueError(f"need 2M >= L+1, got M={M}, L={order}")
    scale = 2.0 / diameter
    u = centers[:, 0] * scale
    v = centers[:, 1] * scale
    Z = np.zeros((2 * M, order + 1))
    for col in range(order + 1):
        gx, gy = zernike_gradient(col + 1, u, v)
        Z[:M, col] = gx * scale
        Z[M:, col] = gy * scale
    return DesignMatrix(Z, centers, diameter)


@dataclass(frozen=True)
class ZernikeFit:
    coeffs: np.ndarray
    rms_residual: float = 0.0

    @property
    def order(self):
        return len(self.coeffs) - 1


def fit_coefficients(Z, d):
    """Least-squares Zernike coefficients from stacked slopes ``d = [d_x; d_y]``.

    Uses the SVD pseudo-inverse with singular values below 1e-10 * s_max
    dropped; piston is set to zero since slopes cannot see it.
    """
    d = np.asarray(d, dtype=float).ravel()
    if d.size == 0:
        raise ValueError("empty measurement vector")
    if d.size != Z.Z.shape[0]:
        raise ValueError(f"expected {Z.Z.shape[0]} slope samples, got {d.size}")
    a = Z.pinv @ d
    a[0] = 0.0
    resid = np.linalg.norm(Z.Z @ a - d) / np.sqrt(d.size)
    return ZernikeFit(a, float(resid))


def synthesize_phase(fit, aperture):
    """Evaluate the fitted expansion on every in-pupil cell of ``aperture``."""
    X, Y = aperture.amplitude.coords()
    mask = aperture.mask
    scale = 2.0 / aperture.diameter
    u = X[mask] * scale
    v = Y[mask] * scale
    vals = np.zeros(mask.sum())
    for col, a in enumerate(fit.coeffs):
        if a != 0.0:
            vals += a * zernike_xy(col + 1, u, v)
    out = np.zeros(mask.shape)
    out[mask] = vals
    return Field2D(out, aperture.amplitude.spacing, aperture.amplitude.origin)


def write_fit_csv(path, fit):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index", "n", "m", "coefficient"])
        for col, a in enumerate(fit.coeffs):
            n, m = noll_to_nm(col + 1)
            w.writerow([col + 1, n, m, repr(float(a))])


def read_fit_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    coeffs = np.zeros(len(rows))
    for r in rows:
        coeffs[int(r["index"]) - 1] = float(r["coefficient"])
    return ZernikeFit(coeffs)
