"""Orthonormal separable 2-D wavelet transform with periodic boundaries.

Coefficients use the usual quadrant packing: after each level the coarse
(lowpass/lowpass) band sits in the top-left block and the transform recurses
into it.
"""
from dataclasses import dataclass

import numpy as np

from . import _backend

# least-asymmetric Daubechies, 5 vanishing moments, decomposition lowpass
SYM5_LOWPASS = np.array([
    0.027333068345077982,
    0.029519490925774643,
    -0.039134249302383094,
    0.1993975339773936,
    0.7234076904024206,
    0.6339789634582119,
    0.01660210576452232,
    -0.17532808990845047,
    -0.021101834024758855,
    0.019538882735286728,
])
SYM5_LOWPASS.setflags(write=False)


@dataclass(frozen=True)
class WaveletSpec:
    levels: int = 4
    lowpass: np.ndarray = SYM5_LOWPASS

    @property
    def highpass(self):
        return _backend._fallback.highpass_from_lowpass(self.lowpass)

    def check_shape(self, shape):
        if len(shape) != 2 or shape[0] != shape[1]:
            raise ValueError(f"wavelet transform needs a square array, got {shape}")
        if shape[0] % (1 << self.levels):
            raise ValueError(f"side {shape[0]} not divisible by 2**{self.levels}")


DEFAULT_SPEC = WaveletSpec()


def forward(x, spec=DEFAULT_SPEC):
    x = np.asarray(x, dtype=float)
    spec.check_shape(x.shape)
    return _backend.dwt2_forward(x, spec.lowpass, spec.levels)


def inverse(c, spec=DEFAULT_SPEC):
    c = np.asarray(c, dtype=float)
    spec.check_shape(c.shape)
    return _backend.dwt2_inverse(c, spec.lowpass, spec.levels)


def detail_mask(n, spec=DEFAULT_SPEC):
    """Boolean mask of the detail (non-coarse) coefficients for an n x n array."""
    spec.check_shape((n, n))
    m = np.ones((n, n), dtype=bool)
    coarse = n >> spec.levels
    m[:coarse, :coarse] = False
    return m
