"""Generalized pupil function, amplitude spread function and PSF."""
from dataclasses import dataclass

import numpy as np

from .core import ApertureSpec, Field2D, GridError


class DegeneratePupil(ValueError):
    """The pupil transmits no light."""


@dataclass(frozen=True)
class Pupil:
    """A * exp(j phi) on the aperture grid; wavelength and image distance in meters."""

    amplitude: ApertureSpec
    phase: Field2D
    wavelength: float = 550e-9
    z_i: float = 1.0

    def __post_init__(self):
        self.amplitude.amplitude.check_compatible(self.phase)
        if not (self.wavelength > 0 and self.z_i > 0):
            raise ValueError("wavelength and z_i must be positive")

    @property
    def field(self):
        return self.amplitude.amplitude.values * np.exp(1j * self.phase.values)


@dataclass(frozen=True)
class Psf:
    intensity: Field2D

    def __post_init__(self):
        v = self.intensity.values
        if v.min() < 0:
            raise ValueError("PSF must be non-negative")
        if not np.isclose(v.sum(), 1.0, rtol=0, atol=1e-12):
            raise ValueError(f"PSF must sum to one, got {v.sum()!r}")

    @property
    def values(self):
        return self.intensity.values

    @property
    def shape(self):
        return self.intensity.shape


def _pad_center(a, out_size):
    n0, n1 = a.shape
    if out_size < max(n0, n1):
        raise GridError(f"out_size {out_size} smaller than pupil grid {a.shape}")
    out = np.zeros((out_size, out_size), dtype=a.dtype)
    r0 = (out_size - n0) // 2
    c0 = (out_size - n1) // 2
    out[r0:r0 + n0, c0:c0 + n1] = a
    return out


def asf(p, out_size=None):
    """Centered unitary DFT of the zero-padded pupil, scaled by 1/(wavelength z_i).

    The zero-frequency sample lands on index ``out_size // 2``.
    """
    P = p.field
    if out_size is None:
        out_size = 2 * max(P.shape)
    P = _pad_center(P, int(out_size))
    h = np.fft.fftshift(np.fft.fft2(np.fft.ifftshift(P), norm="ortho"))
    return h / (p.wavelength * p.z_i)


def psf(p, out_size=None):
    """|h|^2 normalized to unit sum."""
    if not np.any(p.amplitude.amplitude.values):
        raise DegeneratePupil("aperture amplitude is zero everywhere")
    h = asf(p, out_size)
    i = h.real**2 + h.imag**2
    i /= i.sum()
    # focal-plane sampling of the padded DFT
    n = i.shape[0]
    spacing = p.wavelength * p.z_i / (n * p.phase.spacing)
    return Psf(Field2D(i, spacing))


def embed_phase(phase, aperture):
    """Place a smaller phase field at the center of the aperture grid."""
    big = aperture.amplitude
    if not np.isclose(phase.spacing, big.spacing, rtol=1e-9):
        raise GridError(f"phase spacing {phase.spacing} != aperture spacing {big.spacing}")
    return big.with_values(_pad_center(phase.values, big.shape[0]) if phase.shape != big.shape
                           else phase.values)


def log_preview(intensity, floor=1e-6):
    """Map a PSF to [0, 1] on a log scale for viewing."""
    v = np.asarray(intensity, dtype=float)
    v = v / v.max()
    out = np.log10(np.maximum(v, floor)) / -np.log10(floor) + 1.0
    return np.clip(out, 0.0, 1.0)
