"""Wavefront sensing with derivative compressed sensing, PSF estimation and TV deconvolution."""
from ._backend import BACKEND
from .core import ApertureSpec, Field2D, GridError, make_circular_aperture, read_field, write_field
from .deconv import BlurOp, DeconvOpts, convolve, tv_deconvolve, tv_denoise
from .metrics import SsimParams, mse, psnr, ssim
from .optics import Psf, Pupil, asf, psf
from .shi import GradientMeasurement, LensletSet, add_noise, decimate, make_lenslets, sense_gradients
from .solver import (
    LinOp,
    RecoveryResult,
    SolverDivergence,
    SolverOpts,
    SquareLayout,
    ccs_recover,
    dcs_recover,
    fista_bpdn,
    make_cross_derivative_op,
    soft_threshold,
)
from .turbulence import TurbulenceParams, generate_phase_screen
from .wavelet import WaveletSpec
from .zernike import ZernikeFit, ZernikeIndex, build_design_matrix, fit_coefficients, synthesize_phase

__version__ = "0.1.0"
