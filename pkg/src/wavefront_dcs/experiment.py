"""Simulation, recovery and deconvolution pipelines shared by the CLI and tests.

Every random stream is derived from ``(cfg.seed, trial, stream)`` so a trial
sees the same screen at every ratio and SNR, and reruns are bit-identical.
"""
import csv
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from functools import cached_property

import numpy as np

from . import deconv, metrics, optics, shi, solver, zernike
from .core import Field2D, make_circular_aperture
from .images import SCENES
from .turbulence import generate_phase_screen

STREAM_SCREEN, STREAM_MASK, STREAM_NOISE, STREAM_DENSE_NOISE = range(4)


def stream_seed(seed, trial, stream, *extra):
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(trial), int(stream)) + tuple(int(e) for e in extra))
    return int(ss.generate_state(1)[0])


def snr_key(snr_db):
    # integer stream id for an SNR value so noise draws differ between SNRs
    return 10**6 if np.isinf(snr_db) else int(round(snr_db * 1000)) % 10**6


class Geometry:
    """Lenslets, Zernike design matrix and pupil sampling for one config."""

    def __init__(self, cfg):
        self.cfg = cfg
        tp = cfg.turbulence
        self.radius = cfg.diameter / 2
        self.lenslets = shi.make_lenslets(cfg.n_grid, self.radius, cfg.focal)
        self.layout = solver.SquareLayout.from_lenslets(self.lenslets)
        # aperture grid spans [-D, D] with the screen spacing; the pupil
        # occupies its central screen-sized block
        self.aperture = make_circular_aperture(2 * tp.n, cfg.diameter)

    @cached_property
    def design(self):
        return zernike.build_design_matrix(self.lenslets, self.cfg.zernike_order, self.cfg.diameter)

    @cached_property
    def _screen_basis(self):
        tp = self.cfg.turbulence
        c = (np.arange(tp.n) + 0.5 - tp.n / 2) * tp.spacing
        X, Y = np.meshgrid(c, c)
        mask = X * X + Y * Y <= self.radius**2
        u = X[mask] / self.radius
        v = Y[mask] / self.radius
        basis = np.stack([zernike.zernike_xy(k + 1, u, v) for k in range(self.cfg.zernike_order + 1)], axis=1)
        return mask, basis

    @property
    def pupil_mask(self):
        return self._screen_basis[0]

    def phase_from_fit(self, fit):
        """Zernike expansion on the screen grid, zero outside the pupil."""
        mask, basis = self._screen_basis
        out = np.zeros(mask.shape)
        out[mask] = basis @ fit.coeffs
        return Field2D(out, self.cfg.turbulence.spacing)

    def fit(self, f_x, f_y):
        return zernike.fit_coefficients(self.design, np.concatenate([f_x, f_y]))


def phase_mse(est, truth, mask):
    """MSE inside the pupil after removing the piston of each field."""
    a = est.values[mask]
    b = truth.values[mask]
    return float(np.mean(((a - a.mean()) - (b - b.mean())) ** 2))


@dataclass
class TrialData:
    screen: Field2D
    f_x: np.ndarray
    f_y: np.ndarray


def simulate_screen(cfg, geom, trial):
    tp = replace(cfg.turbulence, seed=stream_seed(cfg.seed, trial, STREAM_SCREEN))
    screen = generate_phase_screen(tp)
    f_x, f_y = shi.sense_gradients(screen, geom.lenslets)
    return TrialData(screen, f_x, f_y)


def measure(cfg, data, trial, ratio, snr_db, ratio_idx=0):
    m = shi.decimate(
        data.f_x, data.f_y, ratio, stream_seed(cfg.seed, trial, STREAM_MASK, ratio_idx),
        coupled=cfg.coupled_mask, n_grid=cfg.n_grid,
    )
    noise_seed = stream_seed(cfg.seed, trial, STREAM_NOISE, ratio_idx, snr_key(snr_db))
    return shi.add_noise(m, snr_db, noise_seed)


def dense_measurement(cfg, data, trial, snr_db):
    m = shi.decimate(data.f_x, data.f_y, 1.0, 0, n_grid=cfg.n_grid)
    return shi.add_noise(m, snr_db, stream_seed(cfg.seed, trial, STREAM_DENSE_NOISE, snr_key(snr_db)))


@dataclass
class MethodResult:
    method: str
    fit: zernike.ZernikeFit
    phase: Field2D
    mse: float
    recovery: solver.RecoveryResult = None


def recover_methods(cfg, geom, data, m, dense=None):
    """Run the configured methods on one measurement; DS uses ``dense``."""
    out = {}
    for method in cfg.methods:
        rec = None
        if method == "DS":
            if dense is None:
                raise ValueError("DS needs the dense measurement")
            gx, gy = dense.b_x, dense.b_y
        else:
            fn = solver.ccs_recover if method == "CCS" else solver.dcs_recover
            opts = cfg.ccs_opts if method == "CCS" else cfg.solver
            rec = fn(m, geom.layout, opts)
            gx, gy = geom.layout.gather(rec.f_x), geom.layout.gather(rec.f_y)
        fit = geom.fit(gx, gy)
        phase = geom.phase_from_fit(fit)
        out[method] = MethodResult(method, fit, phase, phase_mse(phase, data.screen, geom.pupil_mask), rec)
    return out


def run_trial(cfg, trial, ratio, snr_db, ratio_idx=0, keep=False):
    """One (trial, ratio, SNR) cell: per-method MSE and DCS constraint residual."""
    geom = Geometry(cfg)
    data = simulate_screen(cfg, geom, trial)
    m = measure(cfg, data, trial, ratio, snr_db, ratio_idx)
    dense = dense_measurement(cfg, data, trial, snr_db) if "DS" in cfg.methods else None
    res = recover_methods(cfg, geom, data, m, dense)
    row = {k: v.mse for k, v in res.items()}
    if "DCS" in res:
        rec = res["DCS"].recovery
        row["dcs_residual"] = float(rec.constraint[-1])
        row["dcs_outer"] = len(rec.constraint)
        row["dcs_first5_decreasing"] = bool(np.all(np.diff(rec.constraint[:5]) < 0))
    if keep:
        return row, res, data
    return row


def _worker_count():
    try:
        n = int(os.environ.get("WFDCS_THREADS", "1"))
    except ValueError:
        n = 1
    return max(1, n)


def _call(args):
    fn, a = args
    return fn(*a)


def pool_map(fn, arglist):
    """Ordered map over a process pool capped by WFDCS_THREADS."""
    arglist = list(arglist)
    n = min(_worker_count(), len(arglist))
    if n <= 1:
        return [fn(*a) for a in arglist]
    with ProcessPoolExecutor(max_workers=n) as ex:
        return list(ex.map(_call, [(fn, a) for a in arglist]))


def sweep(cfg, ratios, snrs):
    """Mean per-method MSE over trials for every (ratio, snr) pair, in input order."""
    cells = [(r, s) for r in ratios for s in snrs]
    tasks = [(cfg, t, r, s, ratios.index(r)) for r, s in cells for t in range(cfg.trials)]
    rows = pool_map(run_trial, tasks)
    out = []
    for ci, (r, s) in enumerate(cells):
        chunk = rows[ci * cfg.trials:(ci + 1) * cfg.trials]
        summary = {"ratio": r, "snr_db": s, "trials": cfg.trials}
        for method in cfg.methods:
            summary[method] = float(np.mean([c[method] for c in chunk]))
        if "DCS" in cfg.methods:
            summary["dcs_max_residual"] = float(max(c["dcs_residual"] for c in chunk))
            summary["dcs_max_outer"] = int(max(c["dcs_outer"] for c in chunk))
            summary["dcs_all_first5_decreasing"] = all(c["dcs_first5_decreasing"] for c in chunk)
        out.append(summary)
    return out


def write_sweep_csv(path, cfg, summaries):
    cols = ["ratio", "snr_db", "trials"] + [f"mse_{m}" for m in cfg.methods]
    if "DCS" in cfg.methods:
        cols += ["dcs_max_residual", "dcs_max_outer"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for s in summaries:
            row = [repr(float(s["ratio"])), repr(float(s["snr_db"])), s["trials"]]
            row += [repr(s[m]) for m in cfg.methods]
            if "DCS" in cfg.methods:
                row += [repr(s["dcs_max_residual"]), s["dcs_max_outer"]]
            w.writerow(row)


# ---------------------------------------------------------------- deconvolution

def make_psf(cfg, geom, phase):
    full = optics.embed_phase(phase, geom.aperture)
    pupil = optics.Pupil(geom.aperture, full, cfg.wavelength, cfg.z_i)
    return optics.psf(pupil, cfg.psf_size)


def scene(name, n):
    if name in SCENES:
        return SCENES[name](n)
    from .images import read_pgm
    img = read_pgm(name)
    if img.shape != (n, n):
        raise ValueError(f"{name}: image must be {n}x{n}, got {img.shape}")
    return img


@dataclass
class DeconvRow:
    image: str
    noise_std: float
    method: str
    psnr_db: float
    ssim: float


def deconvolve_all(cfg, psfs, true_psf, images=None, noise_stds=None):
    """Blur with the true PSF, add noise, deconvolve with each method's PSF.

    ``psfs`` maps method name to its estimated Psf. Returns DeconvRow list in
    (image, noise_std, Blurred, DS, CCS, DCS) order.
    """
    images = cfg.images if images is None else images
    noise_stds = cfg.noise_std if noise_stds is None else noise_stds
    n = cfg.psf_size
    H_true = deconv.BlurOp(true_psf)
    rows = []
    for ii, name in enumerate(images):
        u = scene(name, n)
        blurred = H_true.apply(u)
        for si, std in enumerate(noise_stds):
            rng = np.random.default_rng(stream_seed(cfg.noise_seed, ii, si))
            v = blurred + std * rng.standard_normal(u.shape)
            rows.append(DeconvRow(name, std, "Blurred", metrics.psnr(v, u), metrics.ssim(v, u)))
            for method in ("DS", "CCS", "DCS"):
                if method not in psfs:
                    continue
                opts = deconv.DeconvOpts(cfg.gamma, None, cfg.inner_tv_iters, cfg.outer_iters, cfg.deconv_tol)
                est = deconv.tv_deconvolve(v, deconv.BlurOp(psfs[method]), opts)
                rows.append(DeconvRow(name, std, method, metrics.psnr(est, u), metrics.ssim(est, u)))
    return rows
