"""Shack-Hartmann sensor simulation: lenslet layout, slope sensing, decimation, noise."""
import csv
from dataclasses import dataclass, replace

import numpy as np

from .core import centered_coords


@dataclass(frozen=True)
class LensletSet:
    """Lenslet centers inside the disk of radius ``radius``.

    The lenslets tile the square ``[-radius, radius]^2`` with an
    ``n_grid x n_grid`` lattice; only blocks whose center lies in the disk are
    kept. ``cells[k] = (j, i)`` is the lattice row/column of lenslet ``k``;
    ordering is row-major in ``(j, i)``.
    """

    n_grid: int
    radius: float
    centers: np.ndarray
    cells: np.ndarray
    focal: float = 1.0

    @property
    def M(self):
        return len(self.centers)

    @property
    def pitch(self):
        return 2.0 * self.radius / self.n_grid

    @property
    def flat_cells(self):
        """Index of each lenslet in the flattened ``n_grid x n_grid`` square."""
        return self.cells[:, 0] * self.n_grid + self.cells[:, 1]

    def embed(self, values, fill=0.0):
        """Scatter per-lenslet values onto the square lattice."""
        out = np.full(self.n_grid * self.n_grid, fill, dtype=float)
        out[self.flat_cells] = values
        return out.reshape(self.n_grid, self.n_grid)


def make_lenslets(n_grid, radius, focal=1.0):
    if int(n_grid) != n_grid or n_grid < 2:
        raise ValueError(f"n_grid must be an integer >= 2, got {n_grid}")
    n_grid = int(n_grid)
    c = centered_coords(n_grid, 2.0 * radius / n_grid)
    jj, ii = np.meshgrid(np.arange(n_grid), np.arange(n_grid), indexing="ij")
    X = c[ii]
    Y = c[jj]
    inside = X * X + Y * Y <= radius * radius
    cells = np.stack([jj[inside], ii[inside]], axis=1)
    centers = np.stack([X[inside], Y[inside]], axis=1)
    return LensletSet(n_grid, float(radius), centers, cells, float(focal))


def sense_gradients(screen, lenslets):
    """Per-lenslet least-squares plane fit ``a x + b y + c`` of the screen.

    Returns ``(f_x, f_y)`` in radians per meter, i.e. focal displacement
    divided by the focal length.
    """
    X, Y = screen.coords()
    x = X.ravel()
    y = Y.ravel()
    z = screen.values.ravel()
    pitch = lenslets.pitch
    n = lenslets.n_grid
    # block index of every screen sample; tiny offset keeps samples lying
    # exactly on a shared block edge deterministic
    bi = np.floor((x + lenslets.radius) / pitch + 1e-9).astype(int)
    bj = np.floor((y + lenslets.radius) / pitch + 1e-9).astype(int)
    ok = (bi >= 0) & (bi < n) & (bj >= 0) & (bj < n)
    block = np.where(ok, bj * n + bi, n * n)

    lookup = np.full(n * n + 1, -1)
    lookup[lenslets.flat_cells] = np.arange(lenslets.M)
    k = lookup[block]
    use = k >= 0
    k = k[use]
    cx = lenslets.centers[k, 0]
    cy = lenslets.centers[k, 1]
    dx = x[use] - cx
    dy = y[use] - cy
    zz = z[use]

    def acc(w):
        return np.bincount(k, weights=w, minlength=lenslets.M)

    s1 = np.bincount(k, minlength=lenslets.M).astype(float)
    if np.any(s1 < 3):
        bad = int(np.argmin(s1))
        raise ValueError(f"lenslet {bad} covers {int(s1[bad])} screen samples; need >= 3")
    sx, sy, sz = acc(dx), acc(dy), acc(zz)
    sxx, sxy, syy = acc(dx * dx), acc(dx * dy), acc(dy * dy)
    sxz, syz = acc(dx * zz), acc(dy * zz)
    # normal equations per lenslet, unknowns (a, b, c)
    A = np.empty((lenslets.M, 3, 3))
    A[:, 0] = np.stack([sxx, sxy, sx], axis=1)
    A[:, 1] = np.stack([sxy, syy, sy], axis=1)
    A[:, 2] = np.stack([sx, sy, s1], axis=1)
    rhs = np.stack([sxz, syz, sz], axis=1)
    sol = np.linalg.solve(A, rhs[..., None])[..., 0]
    return sol[:, 0], sol[:, 1]


def displacements(f_x, f_y, focal):
    """Focal-spot displacement implied by the slopes."""
    return focal * np.asarray(f_x), focal * np.asarray(f_y)


@dataclass(frozen=True)
class GradientMeasurement:
    b_x: np.ndarray
    b_y: np.ndarray
    keep_x: np.ndarray
    keep_y: np.ndarray
    M: int
    n_grid: int = 0
    snr_db: float = float("inf")
    seed: int = 0

    @property
    def n(self):
        return len(self.keep_x)

    @property
    def b(self):
        return np.concatenate([self.b_x, self.b_y])


def decimate(f_x, f_y, ratio, seed, coupled=False, n_grid=0):
    """Keep ``round(ratio * M)`` random lenslets per channel.

    The x and y subsets are drawn independently unless ``coupled``.
    """
    f_x = np.asarray(f_x, dtype=float)
    f_y = np.asarray(f_y, dtype=float)
    M = f_x.size
    if not 0 < ratio <= 1:
        raise ValueError(f"ratio must be in (0, 1], got {ratio}")
    if ratio * M < 1:
        raise ValueError(f"ratio {ratio} keeps no lenslets out of {M}")
    n = int(round(ratio * M))
    if n == M:
        keep_x = np.arange(M)
        keep_y = np.arange(M)
    else:
        rng = np.random.default_rng(seed)
        keep_x = np.sort(rng.choice(M, n, replace=False))
        keep_y = keep_x.copy() if coupled else np.sort(rng.choice(M, n, replace=False))
    return GradientMeasurement(f_x[keep_x], f_y[keep_y], keep_x, keep_y, M, n_grid, float("inf"), seed)


def add_noise(m, snr_db, seed):
    """White Gaussian noise on [b_x; b_y] at the requested SNR (dB)."""
    if np.isinf(snr_db) and snr_db > 0:
        return replace(m, snr_db=float("inf"))
    b = m.b
    if not np.all(np.isfinite(b)):
        raise ValueError("measurement contains non-finite values")
    energy = float(b @ b)
    if energy <= 0:
        raise ValueError("cannot set an SNR on a zero-energy measurement")
    sigma = np.sqrt(energy / b.size * 10 ** (-snr_db / 10))
    rng = np.random.default_rng(seed)
    noisy = b + sigma * rng.standard_normal(b.size)
    n = m.n
    return replace(m, b_x=noisy[:n], b_y=noisy[n:], snr_db=float(snr_db), seed=seed)


def write_measurement_csv(path, m):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["n", "M", "N_grid", "snr_db", "seed"])
        w.writerow([m.n, m.M, m.n_grid, repr(float(m.snr_db)), m.seed])
        w.writerow(["channel", "lenslet", "value"])
        for idx, v in zip(m.keep_x, m.b_x):
            w.writerow(["x", int(idx), repr(float(v))])
        for idx, v in zip(m.keep_y, m.b_y):
            w.writerow(["y", int(idx), repr(float(v))])


def read_measurement_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if len(rows) < 3 or rows[0] != ["n", "M", "N_grid", "snr_db", "seed"]:
        raise ValueError(f"{path}: not a gradient measurement file")
    n, M, n_grid = int(rows[1][0]), int(rows[1][1]), int(rows[1][2])
    snr, seed = float(rows[1][3]), int(rows[1][4])
    xs = [(int(r[1]), float(r[2])) for r in rows[3:] if r[0] == "x"]
    ys = [(int(r[1]), float(r[2])) for r in rows[3:] if r[0] == "y"]
    if len(xs) != n or len(ys) != n:
        raise ValueError(f"{path}: expected {n} samples per channel")
    return GradientMeasurement(
        np.array([v for _, v in xs]), np.array([v for _, v in ys]),
        np.array([i for i, _ in xs]), np.array([i for i, _ in ys]),
        M, n_grid, snr, seed,
    )
