import math

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate, stats

from fogmimo import fog_analytics as fog
from fogmimo.errors import ParameterError
from fogmimo.geometry import DiskPair
from fogmimo.streams import substream

ETA = 3.75


def params(r_in=0.08, eps=0.0, ratio=1.0, lambda_a=31.8, q=40):
    return fog.FogParams(lambda_a, q * ratio * lambda_a, q, DiskPair.from_epsilon(r_in, eps), ETA)


@given(st.floats(0, 20), st.floats(0.01, 1.5), st.floats(0, 1.5))
def test_theta_masses_sum_to_one_exactly(lam, r_in, eps):
    a = fog.theta_pdf_approx(lam, DiskPair.from_epsilon(r_in, eps))
    assert math.fsum((a.p0, a.pu, a.p1)) == 1.0


@given(st.floats(0, 20), st.floats(0.01, 1.5), st.floats(0, 1.5))
def test_theta_approx_mean_is_exact_mean(lam, r_in, eps):
    d = DiskPair.from_epsilon(r_in, eps)
    a = fog.theta_pdf_approx(lam, d)
    assert a.pu / 2 + a.p1 == pytest.approx(math.exp(-math.pi * lam * d.r_out ** 2),
                                           rel=1e-9, abs=1e-300)


def test_p0_negative_near_equal_radii():
    a = fog.theta_pdf_approx(0.02, DiskPair(1.0, 1.0))
    assert a.p0 < 0


@given(st.floats(0.05, 3), st.floats(0.05, 0.8), st.floats(0, 0.5), st.floats(0.2, 10))
def test_allowed_probability_matches_quadrature(lam, r_in, eps, la):
    p = fog.FogParams(la, lam, 1, DiskPair.from_epsilon(r_in, eps), ETA)
    a = fog.theta_pdf_approx(lam, p.disks)
    mu = p.mu
    uniform, _ = integrate.quad(lambda t: 1 - math.exp(-mu * t), 0, 1)
    expected = a.pu * uniform + a.p1 * (1 - math.exp(-mu))
    assert fog.allowed_probability(p) == pytest.approx(expected, rel=1e-9, abs=1e-15)


def test_semi_analytic_density_close_to_closed_form_small_radius():
    p = fog.FogParams(1.0, 1.0, 1, DiskPair.from_epsilon(0.2, 0.25), ETA)
    closed = fog.copilot_density(p, "closed_form")
    semi = fog.copilot_density(p, "semi_analytic", 20000, seed=1)
    assert semi == pytest.approx(closed, rel=0.03)


def test_maximizer_decreasing_in_rrh_density():
    r = [fog.copilot_density_maximizer(fog.FogParams(la, 1.0, 1, DiskPair.from_epsilon(0.5, 0.25),
                                                     ETA)) for la in (0.5, 1.0, 5.0)]
    assert r[0] > r[1] > r[2]


def test_auto_source_switches_at_maximizer():
    p = fog.FogParams(1.0, 1.0, 1, DiskPair.from_epsilon(0.1, 0.25), ETA)
    r_star = fog.copilot_density_maximizer(p)
    assert fog.resolve_theta_source(p.with_r_in(0.9 * r_star), "auto") == "closed_form"
    assert fog.resolve_theta_source(p.with_r_in(1.1 * r_star), "auto") == "semi_analytic"


@pytest.mark.parametrize("r_in,eps", [(0.05, 0.0), (0.08, 0.2), (0.16, 0.0)])
def test_serving_count_weights_against_quadrature(r_in, eps):
    p = params(r_in, eps, ratio=0.1)
    a = fog.theta_pdf_approx(p.lam, p.disks)
    w = fog.serving_count_weights(p)
    for n in range(1, min(6, w.size) + 1):
        uniform, _ = integrate.quad(lambda t: stats.poisson.pmf(n, p.mu * t), 0, 1)
        assert w[n - 1] == pytest.approx(a.pu * uniform + a.p1 * stats.poisson.pmf(n, p.mu),
                                         rel=1e-8)
    pmf = fog.serving_count_pmf(p)
    assert pmf.sum() == pytest.approx(1.0)
    assert fog.prob_n_serving(1, p) == pytest.approx(pmf[0])
    with pytest.raises(ParameterError):
        fog.prob_n_serving(0, p)


def mp_exponent(gamma, r_out, eta):
    f = lambda r: -mpmath.expm1(-gamma * r ** (-2 * eta)) * r
    return float(mpmath.quad(f, [r_out, r_out * 10, r_out * 1000, mpmath.inf]))


@pytest.mark.parametrize("gamma", [1e-6, 1e-3, 0.1, 10.0, 1e4])
@pytest.mark.parametrize("r_out,eta", [(0.05, 3.75), (0.3, 3.0), (1.0, 2.5)])
def test_laplace_exponent_against_mpmath(gamma, r_out, eta):
    ref = mp_exponent(gamma, r_out, eta)
    assert fog.laplace_exponent(gamma, r_out, eta) == pytest.approx(ref, rel=1e-7)
    assert fog.laplace_exponent(gamma, r_out, eta, "incomplete_gamma") == pytest.approx(
        ref, rel=1e-7)


def test_printed_form_differs():
    q = fog.laplace_exponent(1e-4, 0.3, ETA)
    printed = fog.laplace_exponent(1e-4, 0.3, ETA, "printed")
    assert printed < 0 < q


def test_laplace_edges():
    assert fog.interference_laplace(0.0, 5.0, 0.1, ETA) == 1.0
    assert fog.interference_laplace(2.0, 0.0, 0.1, ETA) == 1.0
    with pytest.raises(ParameterError):
        fog.laplace_exponent(-1.0, 0.1, ETA)
    with pytest.raises(ParameterError):
        fog.laplace_exponent(1.0, 0.1, ETA, "bogus")


def test_ordered_distance_against_sorting():
    rng = substream(4)
    n, R = 5, 0.3
    d = np.sort(R * np.sqrt(rng.random((200000, n))), axis=1).mean(axis=0)
    assert np.allclose(fog.expected_ordered_distance(np.arange(n), n, R), d, rtol=3e-3)
    with pytest.raises(ParameterError):
        fog.expected_ordered_distance(5, 5, R)


def test_signal_power_single_rrh():
    assert fog.signal_power(1, 0.3, ETA) == pytest.approx((2 * 0.3 / 3) ** (-2 * ETA))


def test_expected_log_sir_against_sampling():
    # typical user, interferers a PPP outside r_out, fixed signal
    lam, r_out, eta, S = 20.0, 0.1, 3.0, 0.1 ** (-2 * 3.0) * 4
    rng = substream(5)
    r_max = 3.0
    n = rng.poisson(lam * math.pi * (r_max ** 2 - r_out ** 2), size=40000)
    r2 = r_out ** 2 + rng.random(n.sum()) * (r_max ** 2 - r_out ** 2)
    owner = np.repeat(np.arange(n.size), n)
    interf = np.bincount(owner, weights=r2 ** (-eta), minlength=n.size)
    ok = interf > 0
    mc = np.log2(1 + S / interf[ok]).mean()
    got = fog.expected_log_sir([S], lam, r_out, eta)[0]
    assert got == pytest.approx(mc, rel=0.01)


def test_void_outage_and_densities():
    p = params(0.1)
    assert fog.outage_probability(p) == pytest.approx(math.exp(-math.pi * 31.8 * 0.01))
    assert fog.outage_probability(p, "not_allowed") == pytest.approx(
        1 - fog.allowed_probability(p))
    assert fog.expected_served(p) == pytest.approx(p.q_count * fog.active_rrh_density(p)
                                                   / p.lambda_a)
    with pytest.raises(ParameterError):
        fog.outage_probability(p, "nope")


def test_fog_se_decreasing_in_radius_and_area_consistent():
    se = [fog.avg_user_se_fog(params(r)) for r in (0.03, 0.05, 0.08)]
    assert se[0] > se[1] > se[2]
    per_pilot, total = fog.area_se_fog(params(0.05))
    assert total == pytest.approx(40 * per_pilot)
    assert per_pilot == pytest.approx(fog.copilot_density(params(0.05)) * se[1])


def test_no_users_no_area():
    p = params(0.05, ratio=0.0)
    assert fog.area_se_fog(p) == (0.0, 0.0)
