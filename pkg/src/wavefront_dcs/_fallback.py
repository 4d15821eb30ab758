"""Pure numpy versions of the hot kernels.

Signatures match ``_kernels.pyx`` one-for-one; ``_backend`` picks whichever
imports. Everything here works on C-contiguous float64 arrays.
"""
from functools import lru_cache

import numpy as np


def highpass_from_lowpass(h):
    """Quadrature-mirror partner g[j] = (-1)^j h[L-1-j]."""
    h = np.asarray(h, dtype=float)
    g = h[::-1].copy()
    g[1::2] *= -1.0
    return g


@lru_cache(maxsize=64)
def _analysis_matrix(n, taps):
    h = np.asarray(taps)
    g = highpass_from_lowpass(h)
    half = n // 2
    T = np.zeros((n, n))
    for k in range(half):
        for j in range(h.size):
            m = (2 * k + j) % n
            T[k, m] += h[j]
            T[half + k, m] += g[j]
    T.setflags(write=False)
    return T


def analysis_matrix(n, lowpass):
    """Dense n x n periodized one-level analysis matrix (lowpass rows first)."""
    return _analysis_matrix(int(n), tuple(float(v) for v in lowpass))


def dwt2_forward(x, lowpass, levels):
    a = np.array(x, dtype=float, order="C", copy=True)
    n = a.shape[0]
    for _ in range(levels):
        T = analysis_matrix(n, lowpass)
        a[:n, :n] = T @ a[:n, :n] @ T.T
        n //= 2
    return a


def dwt2_inverse(c, lowpass, levels):
    a = np.array(c, dtype=float, order="C", copy=True)
    N = a.shape[0]
    for lev in range(levels - 1, -1, -1):
        n = N >> lev
        T = analysis_matrix(n, lowpass)
        a[:n, :n] = T.T @ a[:n, :n] @ T
    return a


def grad2(u):
    gx = np.zeros_like(u)
    gy = np.zeros_like(u)
    gx[:, :-1] = u[:, 1:] - u[:, :-1]
    gy[:-1, :] = u[1:, :] - u[:-1, :]
    return gx, gy


def div2(px, py):
    # negative adjoint of grad2; last column of px / last row of py ignored
    d = np.zeros_like(px)
    d[:, :-1] += px[:, :-1]
    d[:, 1:] -= px[:, :-1]
    d[:-1, :] += py[:-1, :]
    d[1:, :] -= py[:-1, :]
    return d


def tv_chambolle(w, gamma, iters, tol, p=None):
    """Chambolle's projection iteration for min 0.5||u-w||^2 + gamma*TV(u).

    Returns ``(u, p, n_iter)`` where ``p`` has shape (2, ny, nx) and can be fed
    back in as a warm start.
    """
    w = np.ascontiguousarray(w, dtype=float)
    if p is None:
        p = np.zeros((2,) + w.shape)
    else:
        p = np.array(p, dtype=float, copy=True)
    if gamma <= 0.0:
        return w.copy(), p, 0
    tau = 0.125
    px, py = p[0], p[1]
    n_done = 0
    for it in range(iters):
        gx, gy = grad2(div2(px, py) - w / gamma)
        norm = np.sqrt(gx * gx + gy * gy)
        nx = (px + tau * gx) / (1.0 + tau * norm)
        ny = (py + tau * gy) / (1.0 + tau * norm)
        diff = np.sqrt(np.sum((nx - px) ** 2 + (ny - py) ** 2))
        ref = np.sqrt(np.sum(nx * nx + ny * ny))
        px, py = nx, ny
        n_done = it + 1
        if diff <= tol * max(ref, 1e-300):
            break
    p = np.stack([px, py])
    u = w - gamma * div2(px, py)
    return u, p, n_done

