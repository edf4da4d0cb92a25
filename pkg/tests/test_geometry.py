import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fogmimo.errors import ParameterError
from fogmimo.geometry import (DiskPair, Window, sample_ppp, sample_theta, theta_distribution,
                              uncovered_fraction)


def test_disk_pair_from_epsilon():
    d = DiskPair.from_epsilon(0.1, 0.25)
    assert d.r_out == pytest.approx(0.125)
    assert d.epsilon == pytest.approx(0.25)


def test_negative_epsilon_rejected():
    with pytest.raises(ParameterError):
        DiskPair.from_epsilon(0.1, -0.1)
    with pytest.raises(ParameterError):
        DiskPair(0.2, 0.1)


def test_window_validation():
    with pytest.raises(ParameterError):
        Window(0.0)
    with pytest.raises(ParameterError):
        Window(1.0, "torus", 0.5)
    with pytest.raises(ParameterError):
        Window(1.0, "guard", 0.1).require_margin(0.2)


@given(st.floats(-10, 10), st.floats(-10, 10))
def test_minimum_image_is_short(x, y):
    w = Window(1.5)
    d = w.displacement(np.array([[x, y]]), np.zeros(2))[0]
    assert abs(d[0]) <= 1.5 + 1e-9 and abs(d[1]) <= 1.5 + 1e-9
    assert (d[0] - x) / 3.0 == pytest.approx(round((d[0] - x) / 3.0), abs=1e-9)


def test_ppp_count_matches_density():
    w = Window(5.0)
    counts = [len(sample_ppp(2.0, w, s)) for s in range(200)]
    mean = np.mean(counts)
    expected = 2.0 * w.area
    assert abs(mean - expected) <= 4 * math.sqrt(expected / 200)


def test_ppp_deterministic():
    w = Window(2.0)
    assert np.array_equal(sample_ppp(3.0, w, 9).points, sample_ppp(3.0, w, 9).points)


def test_uncovered_fraction_exact_cases():
    d = DiskPair(0.1, 0.2)
    assert uncovered_fraction((0, 0), np.array([[1.0, 0.0]]), d) == 1.0
    assert uncovered_fraction((0, 0), np.array([[0.05, 0.0]]), d) == 0.0
    assert uncovered_fraction((0, 0), np.zeros((0, 2)), d) == 1.0


def lens_fraction(r_in, r_out, s):
    """Exact fraction of the r_in disk outside one r_out disk at distance s."""
    a, b = r_in, r_out
    overlap = (a * a * math.acos((s * s + a * a - b * b) / (2 * s * a))
               + b * b * math.acos((s * s + b * b - a * a) / (2 * s * b))
               - 0.5 * math.sqrt((-s + a + b) * (s + a - b) * (s - a + b) * (s + a + b)))
    return 1 - overlap / (math.pi * a * a)


@pytest.mark.parametrize("s", [0.12, 0.2, 0.26])
def test_uncovered_fraction_matches_lens(s):
    d = DiskPair(0.1, 0.2)
    got = uncovered_fraction((0, 0), np.array([[s, 0.0]]), d, resolution=200000, seed=3)
    assert got == pytest.approx(lens_fraction(0.1, 0.2, s), abs=5e-3)


def test_uncovered_fraction_wraps_on_torus():
    d = DiskPair(0.1, 0.2)
    w = Window(1.0)
    near = uncovered_fraction((0.95, 0.0), np.array([[-0.95, 0.0]]), d, window=w)
    assert near == 0.0


def test_theta_mean_and_mass_at_one():
    lam, d = 1.5, DiskPair.from_epsilon(0.3, 0.2)
    t = sample_theta(lam, d, 20000, 4, resolution=1024)
    mean_ref = math.exp(-math.pi * lam * d.r_out ** 2)
    p1_ref = math.exp(-math.pi * lam * (d.r_in + d.r_out) ** 2)
    assert abs(t.mean() - mean_ref) <= 4 * t.std() / math.sqrt(t.size)
    dist = theta_distribution(t)
    assert abs(dist.mass1 - p1_ref) <= 4 * math.sqrt(p1_ref * (1 - p1_ref) / t.size)
    assert dist.total_mass == pytest.approx(1.0)
