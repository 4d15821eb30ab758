"""INI experiment configuration.

Sections and keys (all optional, defaults in parentheses)::

    [turbulence]  r0 (0.02)  L0 (10.0)  l0 (0.001)  screen_size (0.10)
                  n (128)  subharmonics (0)
    [sensor]      n_grid (32)  focal (1.0)  coupled_mask (false)
    [experiment]  seed (0)  trials (10)  ratios (0.3 ... 0.8)  snr_db (40)
                  methods (DS, CCS, DCS)  zernike_order (35)
                  ref_ratio (0.5)  ref_snr_db (40)
    [solver]      lam_frac (0.02)  delta (0.5)  max_inner (300)  max_outer (30)
                  tol (1e-6)  tol_constraint (1e-4)  ccs_max_inner (max_inner)
                  ccs_tol (tol)
    [optics]      wavelength (550e-9)  z_i (1.0)  psf_size (256)
    [deconv]      images (satellite, saturn)  noise_std (1e-5, 0.001, 0.003, 0.005)
                  gamma (1e-4)  inner_tv_iters (50)  outer_iters (200)  tol (1e-5)
                  ratio (0.5)  trial (0)  noise_seed (1)
    [output]      dir (out)

The lenslet array covers the screen, so the pupil diameter equals
``screen_size``; lists are comma separated; ``inf`` is accepted for SNR.
"""
import configparser
from dataclasses import dataclass, field, replace

from .solver import SolverOpts
from .turbulence import TurbulenceParams


class ConfigError(ValueError):
    pass


METHODS = ("DS", "CCS", "DCS")


@dataclass(frozen=True)
class ExperimentConfig:
    turbulence: TurbulenceParams = TurbulenceParams()
    n_grid: int = 32
    focal: float = 1.0
    coupled_mask: bool = False
    seed: int = 0
    trials: int = 10
    ratios: tuple = (0.3, 0.4, 0.5, 0.6, 0.7, 0.8)
    snr_db: tuple = (40.0,)
    methods: tuple = METHODS
    zernike_order: int = 35
    ref_ratio: float = 0.5
    ref_snr_db: float = 40.0
    solver: SolverOpts = SolverOpts()
    ccs_max_inner: int = None
    ccs_tol: float = None
    wavelength: float = 550e-9
    z_i: float = 1.0
    psf_size: int = 256
    images: tuple = ("satellite", "saturn")
    noise_std: tuple = (1e-5, 0.001, 0.003, 0.005)
    gamma: float = 1e-4
    inner_tv_iters: int = 50
    outer_iters: int = 200
    deconv_tol: float = 1e-5
    deconv_ratio: float = 0.5
    deconv_trial: int = 0
    noise_seed: int = 1
    out_dir: str = "out"
    extra: dict = field(default_factory=dict, compare=False)

    @property
    def diameter(self):
        return self.turbulence.screen_size

    @property
    def ccs_opts(self):
        return replace(
            self.solver,
            max_inner=self.ccs_max_inner or self.solver.max_inner,
            tol=self.ccs_tol or self.solver.tol,
        )

    def validate(self):
        try:
            self.turbulence.validate()
            self.solver.validate()
        except ValueError as e:
            raise ConfigError(str(e)) from None
        if not self.methods:
            raise ConfigError("at least one method is required")
        bad = [m for m in self.methods if m not in METHODS]
        if bad:
            raise ConfigError(f"unknown methods {bad}; choose from {METHODS}")
        if not self.ratios or any(not 0 < r <= 1 for r in self.ratios):
            raise ConfigError(f"ratios must lie in (0, 1], got {self.ratios}")
        if not 0 < self.ref_ratio <= 1 or not 0 < self.deconv_ratio <= 1:
            raise ConfigError("reference ratios must lie in (0, 1]")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if not self.snr_db:
            raise ConfigError("at least one SNR is required")
        if self.n_grid < 2 or self.turbulence.n % self.n_grid:
            raise ConfigError(f"n_grid {self.n_grid} must divide the screen size {self.turbulence.n}")
        if self.zernike_order < 1:
            raise ConfigError("zernike_order must be >= 1")
        if self.psf_size < 2 * self.turbulence.n:
            raise ConfigError("psf_size must be at least twice the screen size")
        if self.gamma < 0 or any(s < 0 for s in self.noise_std):
            raise ConfigError("gamma and noise_std must be non-negative")
        if not 0 <= self.deconv_trial < self.trials:
            raise ConfigError("deconv trial index out of range")
        return self


def _floats(s):
    return tuple(float(v) for v in s.replace(";", ",").split(",") if v.strip())


def _words(s):
    return tuple(v.strip() for v in s.replace(";", ",").split(",") if v.strip())


_SCHEMA = {
    "turbulence": {
        "r0": float, "l0": float, "L0": float, "screen_size": float, "n": int, "subharmonics": int,
    },
    "sensor": {"n_grid": int, "focal": float, "coupled_mask": "bool"},
    "experiment": {
        "seed": int, "trials": int, "ratios": _floats, "snr_db": _floats, "methods": _words,
        "zernike_order": int, "ref_ratio": float, "ref_snr_db": float,
    },
    "solver": {
        "lam_frac": float, "delta": float, "max_inner": int, "max_outer": int, "tol": float,
        "tol_constraint": float, "ccs_max_inner": int, "ccs_tol": float,
    },
    "optics": {"wavelength": float, "z_i": float, "psf_size": int},
    "deconv": {
        "images": _words, "noise_std": _floats, "gamma": float, "inner_tv_iters": int,
        "outer_iters": int, "tol": float, "ratio": float, "trial": int, "noise_seed": int,
    },
    "output": {"dir": str},
}

_RENAME = {
    ("deconv", "tol"): "deconv_tol",
    ("deconv", "ratio"): "deconv_ratio",
    ("deconv", "trial"): "deconv_trial",
    ("output", "dir"): "out_dir",
}


def parse_config(text, source="<string>"):
    cp = configparser.ConfigParser()
    cp.optionxform = str  # keep L0 and l0 distinct
    try:
        cp.read_string(text, source=source)
    except configparser.Error as e:
        raise ConfigError(f"{source}: {e}") from None
    turb, solver, top = {}, {}, {}
    for section in cp.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"{source}: unknown section [{section}]")
        for key, raw in cp.items(section):
            conv = _SCHEMA[section].get(key)
            if conv is None:
                raise ConfigError(f"{source}: unknown key {key!r} in [{section}]")
            try:
                val = cp.getboolean(section, key) if conv == "bool" else conv(raw)
            except ValueError as e:
                raise ConfigError(f"{source}: bad value for {section}.{key}: {e}") from None
            if section == "turbulence":
                turb[key] = val
            elif section == "solver" and key not in ("ccs_max_inner", "ccs_tol"):
                solver[key] = val
            else:
                top[_RENAME.get((section, key), key)] = val
    cfg = ExperimentConfig(
        turbulence=TurbulenceParams(**turb),
        solver=SolverOpts(**solver),
        **top,
    )
    return cfg.validate()


def load_config(path):
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e.strerror}") from None
    return parse_config(text, str(path))
