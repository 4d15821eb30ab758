"""Binary PGM (P5) I/O and procedural test scenes in [0, 1]."""
import numpy as np


def write_pgm(path, img, bits=8):
    """Write ``img`` (values in [0, 1], clipped) as 8- or 16-bit P5."""
    if bits not in (8, 16):
        raise ValueError("bits must be 8 or 16")
    img = np.asarray(img, dtype=float)
    if img.ndim != 2:
        raise ValueError("image must be 2-D")
    maxval = 255 if bits == 8 else 65535
    q = np.rint(np.clip(img, 0.0, 1.0) * maxval)
    data = q.astype(">u2" if bits == 16 else "u1")
    with open(path, "wb") as fh:
        fh.write(f"P5\n{img.shape[1]} {img.shape[0]}\n{maxval}\n".encode("ascii"))
        fh.write(data.tobytes())


def _tokens(buf, count):
    out = []
    pos = 0
    while len(out) < count:
        while pos < len(buf) and buf[pos:pos + 1].isspace():
            pos += 1
        if buf[pos:pos + 1] == b"#":
            while pos < len(buf) and buf[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(buf) and not buf[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ValueError("truncated PGM header")
        out.append(buf[start:pos])
    return out, pos + 1


def read_pgm(path):
    """Read a P5 file and return doubles scaled to [0, 1]."""
    with open(path, "rb") as fh:
        buf = fh.read()
    (magic, w, h, maxval), pos = _tokens(buf, 4)
    if magic != b"P5":
        raise ValueError(f"{path}: not a binary PGM (magic {magic!r})")
    w, h, maxval = int(w), int(h), int(maxval)
    if not 0 < maxval < 65536:
        raise ValueError(f"{path}: bad maxval {maxval}")
    dtype = "u1" if maxval < 256 else ">u2"
    data = np.frombuffer(buf, dtype=dtype, count=w * h, offset=pos)
    return data.reshape(h, w).astype(float) / maxval


def _grid(n):
    c = (np.arange(n) + 0.5) / n * 2.0 - 1.0
    return np.meshgrid(c, c)


def _rect(X, Y, cx, cy, hw, hh, angle=0.0):
    ca, sa = np.cos(angle), np.sin(angle)
    u = (X - cx) * ca + (Y - cy) * sa
    v = -(X - cx) * sa + (Y - cy) * ca
    return (np.abs(u) <= hw) & (np.abs(v) <= hh)


def satellite(n=256):
    """Stand-in for a satellite photograph: body, two ribbed solar panels, dish."""
    X, Y = _grid(n)
    img = np.zeros((n, n))
    tilt = 0.35
    for side in (-1, 1):
        cx, cy = side * 0.5 * np.cos(tilt), side * 0.5 * np.sin(tilt)
        panel = _rect(X, Y, cx, cy, 0.32, 0.13, tilt)
        u = (X - cx) * np.cos(tilt) + (Y - cy) * np.sin(tilt)
        ribs = (np.floor((u + 0.32) / 0.08) % 2) == 0
        img[panel] = np.where(ribs[panel], 0.55, 0.4)
    arm = _rect(X, Y, 0, 0, 0.85, 0.015, tilt)
    img[arm] = 0.7
    body = _rect(X, Y, 0, 0, 0.16, 0.22, tilt)
    img[body] = 0.85
    img[_rect(X, Y, 0.0, 0.0, 0.06, 0.1, tilt)] = 1.0
    dish = (X + 0.05) ** 2 + (Y - 0.33) ** 2 <= 0.1**2
    img[dish] = 0.75
    img[(X + 0.05) ** 2 + (Y - 0.33) ** 2 <= 0.03**2] = 0.95
    return img


def saturn(n=256):
    """Stand-in for a ringed planet: banded disk behind a tilted ring."""
    X, Y = _grid(n)
    img = np.zeros((n, n))
    R = np.hypot(X, Y)
    disk = R <= 0.42
    bands = 0.7 + 0.12 * np.cos(Y * 28.0)
    img[disk] = bands[disk]
    # ring: ellipse annulus, in front of the disk on the lower half
    e = np.hypot(X / 0.9, Y / 0.28)
    ring = ((e >= 0.62) & (e <= 0.8)) | ((e >= 0.84) & (e <= 0.95))
    front = ring & ((Y > 0) | ~disk)
    img[front] = 0.9
    return img


def disk(n=64, radius=0.5, level=1.0):
    X, Y = _grid(n)
    return np.where(X * X + Y * Y <= radius * radius, level, 0.0)


SCENES = {"satellite": satellite, "saturn": saturn, "disk": disk}
