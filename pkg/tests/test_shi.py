import numpy as np
import pytest

from wavefront_dcs import core, shi, zernike as zk


def test_two_by_two_lattice():
    L = shi.make_lenslets(2, 1.0)
    assert L.M == 4
    assert np.allclose(np.abs(L.centers), 0.5)


def _brute_force_count(n, D):
    count = 0
    for j in range(n):
        for i in range(n):
            x = -D + (2 * D / n) * (i + 0.5)
            y = -D + (2 * D / n) * (j + 0.5)
            count += x * x + y * y <= D * D
    return count


@pytest.mark.parametrize("n", [10, 32, 128])
def test_lenslet_count_brute_force(n):
    L = shi.make_lenslets(n, 0.05)
    assert L.M == _brute_force_count(n, 0.05) <= n * n
    assert np.all(np.sum(L.centers**2, axis=1) <= 0.05**2)


def test_corners_idle_and_row_major_order():
    L = shi.make_lenslets(10, 1.0)
    assert L.M < 100
    assert (0, 0) not in {tuple(c) for c in L.cells}
    flat = L.flat_cells
    assert np.all(np.diff(flat) > 0)


def test_bad_grid():
    with pytest.raises(ValueError):
        shi.make_lenslets(1, 1.0)


def _screen(n=128, size=0.1):
    return core.Field2D(np.zeros((n, n)), size / n)


def test_plane_fit_exact_on_affine():
    s = _screen()
    X, Y = s.coords()
    L = shi.make_lenslets(32, 0.05)
    fx, fy = shi.sense_gradients(s.with_values(12.5 * X - 3.0 * Y + 0.7), L)
    assert np.allclose(fx, 12.5, atol=1e-9) and np.allclose(fy, -3.0, atol=1e-9)
    fx, fy = shi.sense_gradients(s.with_values(np.full(s.shape, 2.0)), L)
    assert np.abs(fx).max() < 1e-9 and np.abs(fy).max() < 1e-9


def test_defocus_matches_analytic_gradient():
    s = _screen()
    X, Y = s.coords()
    L = shi.make_lenslets(32, 0.05)
    fx, fy = shi.sense_gradients(s.with_values(zk.zernike_xy(4, X / 0.05, Y / 0.05)), L)
    gx, gy = zk.zernike_gradient(4, L.centers[:, 0] / 0.05, L.centers[:, 1] / 0.05)
    g = np.concatenate([gx, gy]) / 0.05
    err = np.concatenate([fx, fy]) - g
    assert np.sqrt(np.mean(err**2)) <= 0.05 * np.sqrt(np.mean(g**2))


def test_blocks_need_three_samples():
    L = shi.make_lenslets(32, 0.05)
    with pytest.raises(ValueError, match="need >= 3"):
        shi.sense_gradients(_screen(32), L)


def test_decimate_contract():
    f = np.arange(100.0)
    m = shi.decimate(f, -f, 0.5, seed=3)
    assert m.n == 50 and m.M == 100
    for k, b, sgn in ((m.keep_x, m.b_x, 1), (m.keep_y, m.b_y, -1)):
        assert np.all(np.diff(k) > 0)
        assert np.array_equal(b, sgn * f[k])
    assert not np.array_equal(m.keep_x, m.keep_y)
    m2 = shi.decimate(f, -f, 0.5, seed=3)
    assert np.array_equal(m.keep_x, m2.keep_x) and np.array_equal(m.keep_y, m2.keep_y)
    c = shi.decimate(f, -f, 0.5, seed=3, coupled=True)
    assert np.array_equal(c.keep_x, c.keep_y)
    full = shi.decimate(f, -f, 1.0, seed=9)
    assert np.array_equal(full.keep_x, np.arange(100)) and np.array_equal(full.b_x, f)
    assert np.isinf(full.snr_db)


def test_decimate_rejects_bad_ratio():
    with pytest.raises(ValueError):
        shi.decimate(np.ones(10), np.ones(10), 0.05, 0)
    with pytest.raises(ValueError):
        shi.decimate(np.ones(10), np.ones(10), 1.5, 0)


def test_noise_snr_monte_carlo(rng):
    f = rng.standard_normal(400)
    m = shi.decimate(f, f[::-1], 0.5, 0)
    snrs = []
    for s in range(100):
        noisy = shi.add_noise(m, 30.0, s)
        e = noisy.b - m.b
        snrs.append(10 * np.log10((m.b @ m.b) / (e @ e)))
    assert abs(np.mean(snrs) - 30.0) < 0.5
    assert shi.add_noise(m, 30.0, 1).snr_db == 30.0


def test_noise_edge_cases():
    m = shi.decimate(np.ones(10), np.ones(10), 1.0, 0)
    assert np.array_equal(shi.add_noise(m, np.inf, 0).b, m.b)
    z = shi.decimate(np.zeros(10), np.zeros(10), 1.0, 0)
    with pytest.raises(ValueError):
        shi.add_noise(z, 40, 0)


def test_measurement_csv_roundtrip(tmp_path, rng):
    m = shi.add_noise(shi.decimate(rng.standard_normal(30), rng.standard_normal(30), 0.4, 1, n_grid=8), 20, 2)
    p = tmp_path / "m.csv"
    shi.write_measurement_csv(p, m)
    rows = p.read_text().splitlines()
    assert rows[0] == "n,M,N_grid,snr_db,seed" and rows[1].startswith("12,30,8,20.0,")
    back = shi.read_measurement_csv(p)
    for name in ("b_x", "b_y", "keep_x", "keep_y"):
        assert np.array_equal(getattr(back, name), getattr(m, name))
    assert (back.M, back.n_grid, back.snr_db, back.seed) == (30, 8, 20.0, 2)
