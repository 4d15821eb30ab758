"""MSE, PSNR and SSIM."""
from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve

from .core import Field2D, GridError

PSNR_CAP = 200.0


def _pair(a, b):
    a = a.values if isinstance(a, Field2D) else np.asarray(a, dtype=float)
    b = b.values if isinstance(b, Field2D) else np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise GridError(f"shape mismatch {a.shape} vs {b.shape}")
    return a, b


def mse(a, b, mask=None):
    a, b = _pair(a, b)
    d = (a - b) ** 2
    if mask is None:
        return float(d.mean())
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != d.shape:
        raise GridError(f"mask shape {mask.shape} != {d.shape}")
    if not mask.any():
        raise ValueError("empty mask")
    return float(d[mask].mean())


def psnr(a, b, peak=1.0):
    """10 log10(peak^2 / mse); +inf for identical inputs."""
    if not peak > 0:
        raise ValueError("peak must be positive")
    e = mse(a, b)
    if e == 0:
        return float("inf")
    return float(10.0 * np.log10(peak * peak / e))


def capped(db):
    return min(db, PSNR_CAP)


@dataclass(frozen=True)
class SsimParams:
    win_size: int = 11
    sigma: float = 1.5
    K1: float = 0.01
    K2: float = 0.03
    L_dyn: float = 1.0

    @property
    def window(self):
        r = np.arange(self.win_size) - (self.win_size - 1) / 2
        g = np.exp(-(r * r) / (2 * self.sigma**2))
        w = np.outer(g, g)
        return w / w.sum()


def ssim_map(a, b, p=SsimParams()):
    a, b = _pair(a, b)
    if min(a.shape) < p.win_size:
        raise GridError(f"image {a.shape} smaller than the {p.win_size}x{p.win_size} window")
    w = p.window

    def filt(x):
        return fftconvolve(x, w, mode="valid")

    mu1, mu2 = filt(a), filt(b)
    s11 = filt(a * a) - mu1 * mu1
    s22 = filt(b * b) - mu2 * mu2
    s12 = filt(a * b) - mu1 * mu2
    C1 = (p.K1 * p.L_dyn) ** 2
    C2 = (p.K2 * p.L_dyn) ** 2
    num = (2 * mu1 * mu2 + C1) * (2 * s12 + C2)
    den = (mu1 * mu1 + mu2 * mu2 + C1) * (s11 + s22 + C2)
    return num / den


def ssim(a, b, p=SsimParams()):
    return float(ssim_map(a, b, p).mean())
