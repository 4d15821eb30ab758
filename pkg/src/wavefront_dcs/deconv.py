"""Periodic blur operator and TV deconvolution (FISTA outer loop, Chambolle prox)."""
from dataclasses import dataclass

import numpy as np

from . import _backend
from .core import Field2D, GridError
from .optics import _pad_center


class DeconvDivergence(RuntimeError):
    def __init__(self, iteration):
        super().__init__(f"deconvolution objective became non-finite at iteration {iteration}")
        self.iteration = iteration


class BlurOp:
    """Cyclic convolution with a centered PSF (center sample at ``n // 2``)."""

    def __init__(self, psf, shape=None):
        k = psf.values if hasattr(psf, "values") else np.asarray(psf, dtype=float)
        k = np.asarray(k, dtype=float)
        if shape is None:
            shape = k.shape
        shape = tuple(shape)
        if k.shape != shape:
            if k.shape[0] > shape[0] or k.shape[1] > shape[1] or shape[0] != shape[1]:
                raise GridError(f"PSF {k.shape} does not fit image {shape}")
            k = _pad_center(k, shape[0])
        self.shape = shape
        self.kernel = k
        self.otf = np.fft.fft2(np.fft.ifftshift(k))

    def _check(self, u):
        if u.shape != self.shape:
            raise GridError(f"image shape {u.shape} != operator shape {self.shape}")

    def apply(self, u):
        u = np.asarray(u, dtype=float)
        self._check(u)
        return np.real(np.fft.ifft2(self.otf * np.fft.fft2(u)))

    def apply_adjoint(self, v):
        v = np.asarray(v, dtype=float)
        self._check(v)
        return np.real(np.fft.ifft2(np.conj(self.otf) * np.fft.fft2(v)))

    @property
    def gram_norm(self):
        """||H* H||, exact since the operator is diagonal in frequency."""
        return float(np.max(np.abs(self.otf)) ** 2)


def _values(u):
    return u.values if isinstance(u, Field2D) else np.asarray(u, dtype=float)


def convolve(u, op):
    out = op.apply(_values(u))
    return u.with_values(out) if isinstance(u, Field2D) else out


def tv_norm(u):
    gx, gy = _backend._fallback.grad2(np.asarray(u, dtype=float))
    return float(np.sqrt(gx * gx + gy * gy).sum())


def tv_denoise(w, gamma, iters=50, tol=1e-6):
    """min_u 1/2||u - w||^2 + gamma TV(u) by Chambolle's dual iteration."""
    if gamma < 0:
        raise ValueError("gamma must be >= 0")
    u, _, _ = _backend.tv_chambolle(_values(w), float(gamma), int(iters), float(tol))
    return w.with_values(u) if isinstance(w, Field2D) else u


@dataclass(frozen=True)
class DeconvOpts:
    """``mu=None`` selects 0.9 / ||H* H||.

    ``momentum="paper"`` extrapolates with tau_t / tau_{t+1}; ``"fista"`` uses
    the usual (tau_t - 1) / tau_{t+1}.
    """

    gamma: float = 1e-3
    mu: float = None
    inner_tv_iters: int = 50
    outer_iters: int = 200
    tol: float = 1e-5
    momentum: str = "paper"

    def validate(self, op=None):
        if self.gamma < 0:
            raise ValueError("gamma must be >= 0")
        if self.inner_tv_iters < 1 or self.outer_iters < 1:
            raise ValueError("iteration counts must be >= 1")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.momentum not in ("paper", "fista"):
            raise ValueError(f"unknown momentum rule {self.momentum!r}")
        if self.mu is not None:
            if not self.mu > 0:
                raise ValueError("mu must be positive")
            if op is not None and not self.mu * op.gram_norm < 1:
                raise ValueError(f"mu={self.mu} violates mu*||H*H|| < 1")


@dataclass
class DeconvInfo:
    objective: np.ndarray
    n_iter: int
    mu: float


def deconv_objective(u, v, op, gamma):
    r = op.apply(u) - v
    return 0.5 * float(np.vdot(r, r)) + gamma * tv_norm(u)


def tv_deconvolve(v, op, opts=DeconvOpts(), u0=None, full_output=False):
    """FISTA on 1/2||H u - v||^2 + gamma TV(u) with a Chambolle proximal step.

    The TV step is applied with weight ``mu * gamma`` so the fixed point
    minimizes the stated objective for any step size.
    """
    opts.validate(op)
    vv = _values(v)
    mu = opts.mu if opts.mu is not None else 0.9 / op.gram_norm
    u = vv.copy() if u0 is None else np.array(_values(u0), dtype=float)
    y = u.copy()
    tau = 1.0
    dual = None
    trace = []
    it = 0
    for it in range(1, opts.outer_iters + 1):
        w = y + mu * op.apply_adjoint(vv - op.apply(y))
        if opts.gamma > 0:
            u_new, dual, _ = _backend.tv_chambolle(w, mu * opts.gamma, opts.inner_tv_iters, 1e-6, dual)
        else:
            u_new = w
        obj = deconv_objective(u_new, vv, op, opts.gamma)
        if not np.isfinite(obj):
            raise DeconvDivergence(it)
        trace.append(obj)
        tau_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * tau * tau))
        coef = tau / tau_new if opts.momentum == "paper" else (tau - 1.0) / tau_new
        y = u_new + coef * (u_new - u)
        nrm = np.linalg.norm(u_new)
        change = np.linalg.norm(u_new - u) / nrm if nrm > 0 else 0.0
        u = u_new
        tau = tau_new
        if change < opts.tol:
            break
    out = v.with_values(u) if isinstance(v, Field2D) else u
    if full_output:
        return out, DeconvInfo(np.array(trace), it, mu)
    return out
