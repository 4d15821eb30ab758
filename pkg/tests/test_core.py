import numpy as np
import pytest

from wavefront_dcs import core


def test_field_values_are_read_only_copies():
    a = np.zeros((4, 4))
    f = core.Field2D(a, 0.1)
    a[0, 0] = 1.0
    assert f.values[0, 0] == 0.0
    with pytest.raises(ValueError):
        f.values[0, 0] = 2.0


@pytest.mark.parametrize("bad", [np.zeros(3), np.zeros((2, 2, 2))])
def test_field_rejects_non_2d(bad):
    with pytest.raises(core.GridError):
        core.Field2D(bad, 1.0)


def test_field_rejects_bad_spacing_and_nan():
    with pytest.raises(core.GridError):
        core.Field2D(np.zeros((2, 2)), 0.0)
    with pytest.raises(core.GridError):
        core.Field2D(np.full((2, 2), np.nan), 1.0)


def test_default_coords_are_centered():
    f = core.Field2D(np.zeros((4, 6)), 0.5)
    X, Y = f.coords()
    assert X[0, 0] == -1.25 and X[0, -1] == 1.25
    assert Y[0, 0] == -0.75 and Y[-1, 0] == 0.75
    assert np.all(X == -X[:, ::-1])


def test_centered_coords_antisymmetric():
    c = core.centered_coords(128, 0.1 / 128)
    assert np.array_equal(c, -c[::-1])


def test_aperture_geometry():
    ap = core.make_circular_aperture(64, 0.1)
    X, Y = ap.amplitude.coords()
    assert ap.amplitude.spacing == pytest.approx(0.2 / 64)
    assert np.array_equal(ap.mask, X**2 + Y**2 <= 0.05**2)
    # disk fills the central half: mirror symmetric, no pixel past |x| = D/2
    assert np.array_equal(ap.mask, ap.mask[::-1, ::-1])
    assert np.abs(X[ap.mask]).max() <= 0.05
    # area close to pi r^2
    assert ap.mask.sum() * ap.amplitude.spacing**2 == pytest.approx(np.pi * 0.05**2, rel=0.02)


@pytest.mark.parametrize("n,d", [(1, 0.1), (2.5, 0.1), (8, 0.0), (8, -1.0)])
def test_aperture_rejects_bad_input(n, d):
    with pytest.raises(core.GridError):
        core.make_circular_aperture(n, d)


def test_gradient_exact_on_linear_field():
    f = core.Field2D(np.zeros((5, 7)), 0.2)
    X, Y = f.coords()
    g = f.with_values(3 * X - 2 * Y + 1)
    gx, gy = core.field_gradient(g)
    assert np.allclose(gx.values, 3) and np.allclose(gy.values, -2)


def test_gradient_needs_three_cells():
    with pytest.raises(core.GridError):
        core.field_gradient(core.Field2D(np.zeros((2, 5)), 1.0))


def test_fld2_roundtrip(tmp_path, rng):
    f = core.Field2D(rng.standard_normal((3, 5)), 0.25)
    p = tmp_path / "a.fld"
    core.write_field(p, f)
    raw = p.read_bytes()
    assert raw[:4] == b"FLD2" and len(raw) == 20 + 15 * 8
    g = core.read_field(p)
    assert np.array_equal(g.values, f.values) and g.spacing == 0.25


def test_fld2_rejects_corrupt(tmp_path):
    p = tmp_path / "b.fld"
    p.write_bytes(b"XXXX" + bytes(16))
    with pytest.raises(core.GridError, match="magic"):
        core.read_field(p)
    core.write_field(p, core.Field2D(np.zeros((2, 2)), 1.0))
    p.write_bytes(p.read_bytes()[:-8])
    with pytest.raises(core.GridError, match="expected"):
        core.read_field(p)
    p.write_bytes(b"FLD2")
    with pytest.raises(core.GridError, match="truncated"):
        core.read_field(p)
