import numpy as np
import pytest

from wavefront_dcs import turbulence as tb


def test_psd_matches_cycles_per_meter_form():
    # same spectrum written with f in cycles/m: f0 = 1/L0, fm = 5.92/(2 pi l0)
    r0, L0, l0 = 0.02, 10.0, 0.001
    f = np.array([0.5, 3.0, 40.0, 700.0])
    fm = 5.92 / (2 * np.pi * l0)
    ref = 0.023 * r0 ** (-5 / 3) * np.exp(-(f / fm) ** 2) * (f**2 + 1 / L0**2) ** (-11 / 6)
    assert np.allclose(tb.von_karman_psd(f, r0, L0, l0), ref, rtol=1e-12)


def test_deterministic_and_zero_mean():
    p = tb.TurbulenceParams(seed=7, n=64)
    a = tb.generate_phase_screen(p)
    b = tb.generate_phase_screen(p)
    assert np.array_equal(a.values, b.values)
    assert abs(a.values.mean()) < 1e-12
    assert a.spacing == pytest.approx(0.1 / 64)
    c = tb.generate_phase_screen(tb.TurbulenceParams(seed=8, n=64))
    assert not np.array_equal(a.values, c.values)


@pytest.mark.parametrize("kw", [dict(n=100), dict(r0=0.0), dict(L0=0.001, l0=0.01), dict(subharmonics=-1)])
def test_invalid_params(kw):
    with pytest.raises(ValueError):
        tb.generate_phase_screen(tb.TurbulenceParams(**kw))


def _ensemble(p, count):
    return [tb.generate_phase_screen(p, np.random.default_rng(s)) for s in range(count)]


def test_plain_method_matches_its_discrete_expectation():
    p = tb.TurbulenceParams(n=64, l0=0.005)
    lags, dx, dy = tb.structure_function(_ensemble(p, 150), 16)
    expect = tb.expected_structure_function(p, lags)
    assert np.all(np.abs(dx / expect - 1) < 0.15)
    assert np.all(np.abs(dy / expect - 1) < 0.15)


def test_isotropy():
    p = tb.TurbulenceParams(n=64)
    _, dx, dy = tb.structure_function(_ensemble(p, 100), 12)
    assert np.all(np.abs(dx / dy - 1) < 0.15)


def test_variance_grows_as_r0_shrinks():
    v = []
    for r0 in (0.05, 0.02, 0.01):
        p = tb.TurbulenceParams(n=64, r0=r0)
        v.append(np.mean([s.values.var() for s in _ensemble(p, 20)]))
    assert v[0] < v[1] < v[2]


@pytest.mark.slow
def test_kolmogorov_structure_function_with_subharmonics():
    p = tb.TurbulenceParams(r0=0.01, n=128, subharmonics=3)
    screens = _ensemble(p, 200)
    lags, dx, dy = tb.structure_function(screens, 32)
    r = lags * p.spacing
    kolmo = 6.88 * (r / p.r0) ** (5 / 3)
    sel = lags >= 4
    ratio = 0.5 * (dx + dy)[sel] / kolmo[sel]
    assert np.all(np.abs(ratio - 1) <= 0.3), ratio
