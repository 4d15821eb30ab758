"""Grid, aperture and field primitives shared by the rest of the package.

Arrays are indexed ``[row, col] = [y, x]``. A lattice of ``N`` cells spanning
``[-half_width, half_width]`` has cell centers at
``spacing * (i + 0.5 - N / 2)``; that form is exactly antisymmetric in floating
point, which keeps masks mirror-symmetric.
"""
import struct
from dataclasses import dataclass, field

import numpy as np

FIELD_MAGIC = b"FLD2"
_HEADER = struct.Struct("<4sIId")


class GridError(ValueError):
    """Raised on invalid lattice dimensions or incompatible fields."""


def _frozen(a):
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Field2D:
    """Real scalar field on a uniform lattice.

    ``origin`` is the physical (x, y) of the center of cell ``[0, 0]``.
    """

    values: np.ndarray
    spacing: float
    origin: tuple = None

    def __post_init__(self):
        vals = _frozen(self.values)
        if vals.ndim != 2:
            raise GridError(f"field must be 2-D, got shape {vals.shape}")
        if not self.spacing > 0:
            raise GridError(f"spacing must be positive, got {self.spacing}")
        if not np.all(np.isfinite(vals)):
            raise GridError("field values must be finite")
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "spacing", float(self.spacing))
        if self.origin is None:
            ny, nx = vals.shape
            object.__setattr__(
                self, "origin",
                (self.spacing * (0.5 - nx / 2), self.spacing * (0.5 - ny / 2)),
            )
        else:
            object.__setattr__(self, "origin", (float(self.origin[0]), float(self.origin[1])))

    @property
    def shape(self):
        return self.values.shape

    def coords(self):
        """Return (X, Y) meshgrids of cell-center coordinates in meters."""
        ny, nx = self.shape
        x = self.origin[0] + self.spacing * np.arange(nx)
        y = self.origin[1] + self.spacing * np.arange(ny)
        return np.meshgrid(x, y)

    def check_compatible(self, other):
        if self.shape != other.shape or not np.isclose(self.spacing, other.spacing, rtol=1e-12):
            raise GridError(
                f"incompatible fields: {self.shape}@{self.spacing} vs {other.shape}@{other.spacing}"
            )

    def with_values(self, values):
        return Field2D(values, self.spacing, self.origin)


def centered_coords(n, spacing):
    """Cell-center coordinates of an ``n``-cell lattice centered on zero."""
    return spacing * (np.arange(n) + 0.5 - n / 2)


@dataclass(frozen=True)
class ApertureSpec:
    """Binary circular pupil of diameter ``diameter`` on an ``n``-cell grid.

    The grid spans ``[-diameter, diameter]`` along both axes, so the disk fills
    the central half of it.
    """

    diameter: float
    n: int
    amplitude: Field2D = field(repr=False)

    @property
    def mask(self):
        return self.amplitude.values > 0.5

    @property
    def radius(self):
        return self.diameter / 2


def make_circular_aperture(n, diameter):
    if int(n) != n or n < 2:
        raise GridError(f"grid size must be an integer >= 2, got {n}")
    if not diameter > 0:
        raise GridError(f"diameter must be positive, got {diameter}")
    n = int(n)
    spacing = 2.0 * diameter / n
    c = centered_coords(n, spacing)
    X, Y = np.meshgrid(c, c)
    mask = (X * X + Y * Y) <= (diameter / 2) ** 2
    amp = Field2D(mask.astype(float), spacing, (c[0], c[0]))
    return ApertureSpec(float(diameter), n, amp)


def field_gradient(f):
    """Central differences inside, one-sided at the borders.

    Returns ``(d/dx, d/dy)`` as fields with the input spacing and origin.
    """
    if min(f.shape) < 3:
        raise GridError(f"gradient needs at least 3 cells per side, got {f.shape}")
    gy, gx = np.gradient(f.values, f.spacing, f.spacing, edge_order=1)
    return f.with_values(gx), f.with_values(gy)


def write_field(path, f):
    """Store ``f`` in the FLD2 binary format (little-endian, row-major f64)."""
    rows, cols = f.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(FIELD_MAGIC, rows, cols, f.spacing))
        fh.write(np.ascontiguousarray(f.values, dtype="<f8").tobytes())


def read_field(path):
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
        if len(head) != _HEADER.size:
            raise GridError(f"{path}: truncated header")
        magic, rows, cols, spacing = _HEADER.unpack(head)
        if magic != FIELD_MAGIC:
            raise GridError(f"{path}: bad magic {magic!r}")
        data = np.frombuffer(fh.read(), dtype="<f8")
    if data.size != rows * cols:
        raise GridError(f"{path}: expected {rows * cols} values, found {data.size}")
    return Field2D(data.reshape(rows, cols), spacing)
