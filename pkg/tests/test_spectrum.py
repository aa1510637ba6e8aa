"""Frequency grids, tapered DFT, and periodogram identities."""

import math

import numpy as np
import pytest

from taperspec.models import AR1, WhiteNoise, gaussian
from taperspec.spectrum import FrequencyGrid, canonical_grid, tapered_dft, tapered_periodogram
from taperspec.taper import get_taper

TAPER_NAMES = ("rect", "linear", "tukey")


def test_canonical_grid_layout():
    g = canonical_grid(100, oversample=4)
    assert g.N == 512
    assert g.canonical and not g.shifted
    assert g.weight == pytest.approx(2.0 * math.pi / 512)
    pts = g.points
    assert np.all(np.diff(pts) > 0)
    assert pts[0] > -math.pi
    assert pts[-1] == pytest.approx(math.pi)
    assert float(np.sum(g.weights)) == pytest.approx(2.0 * math.pi)


def test_canonical_grid_oversample_choices():
    for ov in (1, 2, 4, 8):
        g = canonical_grid(48, oversample=ov)
        assert g.N >= ov * 48
        assert g.N & (g.N - 1) == 0
    with pytest.raises(ValueError):
        canonical_grid(48, oversample=3)


def test_shifted_grid_avoids_origin_and_endpoints():
    g = canonical_grid(64, oversample=2, shifted=True)
    assert np.all(np.abs(g.points) > 1e-12)
    assert g.points[0] == pytest.approx(-math.pi + math.pi / g.N)
    assert g.points[-1] == pytest.approx(math.pi - math.pi / g.N)
    plain = canonical_grid(64, oversample=2)
    assert np.any(np.abs(plain.points) < 1e-15)


def _direct_dft(x, h, lam):
    T = x.shape[0]
    t = np.arange(1, T + 1)
    return np.array([np.sum(h * x * np.exp(-1j * l * t)) for l in lam])


@pytest.mark.parametrize("name", TAPER_NAMES)
@pytest.mark.parametrize("shifted", [False, True])
def test_fft_dft_matches_direct_sum(name, shifted):
    rng = np.random.default_rng(7)
    T = 37
    x = rng.standard_normal(T)
    tp = get_taper(name)
    g = canonical_grid(T, oversample=2, shifted=shifted)
    fast = tapered_dft(x, tp, g)
    slow = _direct_dft(x, tp.values(T), g.points)
    assert np.allclose(fast, slow, atol=1e-10)


def test_fft_dft_wrap_case_exact():
    # oversample=1 with T a power of two makes N == T, exercising the
    # index-wrap path.
    rng = np.random.default_rng(8)
    T = 64
    x = rng.standard_normal(T)
    tp = get_taper("tukey")
    g = canonical_grid(T, oversample=1)
    assert g.N == T
    fast = tapered_dft(x, tp, g)
    slow = _direct_dft(x, tp.values(T), g.points)
    assert np.allclose(fast, slow, atol=1e-10)


def test_dft_on_ad_hoc_frequencies():
    rng = np.random.default_rng(9)
    T = 23
    x = rng.standard_normal(T)
    tp = get_taper("linear")
    lam = np.array([-2.5, -0.3, 0.0, 1.1])
    out = tapered_dft(x, tp, lam)
    slow = _direct_dft(x, tp.values(T), lam)
    assert np.allclose(out, slow, atol=1e-12)


@pytest.mark.parametrize("name", TAPER_NAMES)
def test_parseval_identity_exact(name):
    rng = np.random.default_rng(11)
    T = 100
    x = rng.standard_normal(T)
    tp = get_taper(name)
    pg = tapered_periodogram(x, tp)
    h = tp.values(T)
    lhs = float(np.sum(pg.values) * pg.grid.weight)
    rhs = float(np.sum(h**2 * x**2) / np.sum(h**2))
    assert lhs == pytest.approx(rhs, rel=1e-12)


def test_periodogram_nonnegative_and_normalized():
    x = AR1(theta=0.5).simulate(gaussian(), 256, seed=1)
    tp = get_taper("tukey")
    pg = tapered_periodogram(x, tp)
    assert np.all(pg.values >= 0.0)
    assert pg.taper_id == "tukey"
    assert pg.T == 256
    assert pg.c_norm == pytest.approx(2.0 * math.pi * np.sum(tp.values(256) ** 2))


def test_periodogram_mean_tracks_density():
    # E[I(lambda)] -> f(lambda); checked loosely by averaging replications.
    m = AR1(theta=0.5)
    tp = get_taper("rect")
    grid = canonical_grid(512, oversample=1)
    acc = np.zeros(grid.N)
    reps = 400
    for rep in range(reps):
        ts = m.simulate(gaussian(), 512, seed=1000 + rep)
        acc += tapered_periodogram(ts.values, tp, grid).values
    mean_i = acc / reps
    f = m.density(grid.points)
    idx = [grid.N // 8, grid.N // 4, grid.N // 2 + 5, 3 * grid.N // 4]
    for i in idx:
        assert mean_i[i] == pytest.approx(f[i], rel=0.15)


def test_periodogram_accepts_timeseries_and_array():
    ts = WhiteNoise().simulate(gaussian(), 64, seed=0)
    tp = get_taper("rect")
    a = tapered_periodogram(ts, tp).values
    b = tapered_periodogram(ts.values, tp).values
    assert np.array_equal(a, b)
