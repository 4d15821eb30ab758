"""Von Karman phase screens by the FFT spectral method."""
from dataclasses import dataclass

import numpy as np

from .core import Field2D


@dataclass(frozen=True)
class TurbulenceParams:
    """Screen statistics and sampling.

    r0, L0, l0 and screen_size are in meters; ``n`` is the number of cells per
    side and must be a power of two.
    """

    r0: float = 0.02
    L0: float = 10.0
    l0: float = 0.001
    screen_size: float = 0.10
    n: int = 128
    seed: int = 0
    subharmonics: int = 0

    def validate(self):
        if not self.r0 > 0:
            raise ValueError(f"r0 must be positive, got {self.r0}")
        if not (self.L0 > self.l0 > 0):
            raise ValueError(f"need L0 > l0 > 0, got L0={self.L0}, l0={self.l0}")
        if not self.screen_size > 0:
            raise ValueError("screen_size must be positive")
        n = int(self.n)
        if n != self.n or n < 2 or n & (n - 1):
            raise ValueError(f"n must be a power of two, got {self.n}")
        if self.subharmonics < 0:
            raise ValueError("subharmonics must be >= 0")

    @property
    def spacing(self):
        return self.screen_size / self.n


def von_karman_psd(f, r0, L0, l0):
    """Modified Von Karman phase PSD in rad^2 m^2 at spatial frequency f (cycles/m).

    Written in angular wavenumber k = 2*pi*f with k0 = 2*pi/L0 and km = 5.92/l0;
    the 0.023 r0^(-5/3) prefactor is the cycles/m normalization.
    """
    k = 2 * np.pi * np.asarray(f, dtype=float)
    k0 = 2 * np.pi / L0
    km = 5.92 / l0
    kk = k * k
    return 0.023 * r0 ** (-5.0 / 3.0) * np.exp(-kk / km**2) * ((kk + k0**2) / (2 * np.pi) ** 2) ** (-11.0 / 6.0)


def _cell_mean_psd(fx, fy, df, p, sub=9):
    # PSD averaged over a df x df frequency cell; the steep low-frequency end
    # is badly represented by its value at the cell center
    o = (np.arange(sub) + 0.5) / sub - 0.5
    ox, oy = np.meshgrid(o, o)
    return von_karman_psd(np.hypot(fx + ox * df, fy + oy * df), p.r0, p.L0, p.l0).mean()


def generate_phase_screen(p, rng=None):
    """Draw one zero-mean screen in radians.

    Deterministic in ``p.seed`` unless an explicit generator is passed. With
    ``p.subharmonics > 0`` the lowest FFT bins use cell-averaged PSD weights
    and ``subharmonics`` levels of 3x3 subharmonic grids are added, which
    restores the large-separation structure function the plain FFT method
    lacks.
    """
    p.validate()
    n = int(p.n)
    if rng is None:
        rng = np.random.default_rng(p.seed)
    df = 1.0 / p.screen_size
    f1 = np.fft.fftfreq(n, d=p.spacing)
    fx, fy = np.meshgrid(f1, f1)
    psd = von_karman_psd(np.hypot(fx, fy), p.r0, p.L0, p.l0)
    if p.subharmonics:
        for i in range(-3, 4):
            for j in range(-3, 4):
                if i or j:
                    psd[j % n, i % n] = _cell_mean_psd(i * df, j * df, df, p)
    psd[0, 0] = 0.0
    cn = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) * np.sqrt(psd) * df
    screen = np.real(np.fft.ifft2(cn)) * n * n
    if p.subharmonics:
        screen += _subharmonic_screen(p, rng)
    screen -= screen.mean()
    return Field2D(screen, p.spacing)


def _subharmonic_screen(p, rng):
    n = int(p.n)
    x = (np.arange(n) - n / 2) * p.spacing
    X, Y = np.meshgrid(x, x)
    low = np.zeros((n, n), dtype=complex)
    for k in range(1, p.subharmonics + 1):
        df = 1.0 / (3**k * p.screen_size)
        for i in (-1, 0, 1):
            for j in (-1, 0, 1):
                if not (i or j):
                    continue
                w = np.sqrt(_cell_mean_psd(i * df, j * df, df, p)) * df
                c = (rng.standard_normal() + 1j * rng.standard_normal()) * w
                low += c * np.exp(2j * np.pi * df * (i * X + j * Y))
    return np.real(low)


def expected_structure_function(p, lags):
    """Exact ensemble D(r) of the plain FFT method along x, from its discrete spectrum."""
    n = int(p.n)
    df = 1.0 / p.screen_size
    f1 = np.fft.fftfreq(n, d=p.spacing)
    fx, fy = np.meshgrid(f1, f1)
    psd = von_karman_psd(np.hypot(fx, fy), p.r0, p.L0, p.l0)
    psd[0, 0] = 0.0
    r = np.asarray(lags)[:, None, None] * p.spacing
    return 2.0 * np.sum(psd * df**2 * (1.0 - np.cos(2 * np.pi * fx * r)), axis=(1, 2))


def structure_function(screens, max_lag):
    """Ensemble phase structure function along x and y for lags 1..max_lag cells.

    Returns ``(lags, d_x, d_y)``.
    """
    lags = np.arange(1, max_lag + 1)
    dx = np.zeros(lags.size)
    dy = np.zeros(lags.size)
    for s in screens:
        v = s.values if isinstance(s, Field2D) else np.asarray(s)
        for i, lag in enumerate(lags):
            dx[i] += np.mean((v[:, lag:] - v[:, :-lag]) ** 2)
            dy[i] += np.mean((v[lag:, :] - v[:-lag, :]) ** 2)
    return lags, dx / len(screens), dy / len(screens)
