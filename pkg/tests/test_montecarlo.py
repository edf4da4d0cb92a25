import math

import numpy as np
import pytest

from fogmimo import cell_analytics as cell
from fogmimo import fog_analytics as fog
from fogmimo.errors import ParameterError
from fogmimo.geometry import DiskPair, Window
from fogmimo.montecarlo import (TrialConfig, TrialRecord, _ratio, aggregate, auto_window,
                                cellular_active_set, evaluate_drop, geometric_active_set,
                                run_trials, simulate)
from fogmimo.phy_channel import ActiveSet, NoisePower, ergodic_se_finite_m, mmse_scaling_matrix
from fogmimo.streams import substream

LA = 31.8


def fog_config(**kw):
    base = dict(system="fog", lambda_a=LA, lambda_u=40 * 0.1 * LA,
                disks=DiskPair.from_epsilon(0.08, 0.0), trials=6, seed=1)
    base.update(kw)
    return TrialConfig(**base)


def test_config_validation():
    with pytest.raises(ParameterError):
        TrialConfig("fog", LA, LA)
    with pytest.raises(ParameterError):
        TrialConfig("cellular", LA, LA, n_p=70, l_pilots=60)
    with pytest.raises(ParameterError):
        TrialConfig("cellular", LA, LA, m_antennas=2.5)
    with pytest.raises(ParameterError):
        TrialConfig("mesh", LA, LA)


def test_auto_window_sizes():
    w = auto_window(fog_config())
    assert w.side == pytest.approx(max(20 * 0.08, math.sqrt(30 / (0.1 * LA))))
    wide = auto_window(fog_config(disks=DiskPair(0.5, 0.6)))
    assert wide.side == pytest.approx(20 * 0.6)
    c = auto_window(TrialConfig("cellular", LA, 10 * LA))
    assert LA * c.area == pytest.approx(500)


def test_same_seed_same_report():
    a = simulate(fog_config())
    b = simulate(fog_config())
    assert a.mean_se_served == b.mean_se_served
    assert np.array_equal(a.samples, b.samples)


def test_parallel_matches_serial():
    serial = run_trials(fog_config(trials=4))
    parallel = run_trials(fog_config(trials=4, workers=2))
    assert [r.index for r in parallel] == [0, 1, 2, 3]
    for a, b in zip(serial, parallel):
        assert a.se_sum == b.se_sum and a.n_served == b.n_served


def test_geometric_active_set_rules():
    w = Window(5.0)
    d = DiskPair(0.1, 0.2)
    rrh = np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]])
    users = np.array([[0.05, 0.0], [1.05, 0.0], [1.15, 0.0], [2.5, 0.0]])
    groups = np.array([0, 0, 0, 1])
    serves = geometric_active_set(rrh, users, groups, 2, d, w)
    # RRH 0 trusts user 0; RRH 1 sees a second user inside r_out; RRH 2 nobody
    assert serves.tolist() == [[0, -1], [-1, -1], [-1, -1]]


def test_large_m_drop_matches_formula():
    cfg = fog_config()
    w = Window(5.0)
    rrh = np.array([[0.0, 0.0], [0.3, 0.0]])
    users = np.array([[0.05, 0.0], [0.36, 0.0]])
    groups = np.array([0, 0])
    serves = np.array([[0], [1]])
    se, n_serving, errors = evaluate_drop(cfg, rrh, users, groups, serves, w)
    b = lambda p, q: np.hypot(*(np.array(p) - np.array(q))) ** (-cfg.eta)
    want0 = math.log2(1 + b(rrh[0], users[0]) ** 2 / b(rrh[1], users[0]) ** 2)
    assert se[0] == pytest.approx(want0)
    assert n_serving.tolist() == [1, 1] and errors == 0


def test_finite_m_drop_matches_per_user_formula():
    cfg = fog_config(m_antennas=16, noise=NoisePower(0.01))
    w = Window(5.0)
    rrh = np.array([[0.0, 0.0], [0.3, 0.0], [0.0, 0.4]])
    users = np.array([[0.05, 0.0], [0.36, 0.0], [0.0, 0.35]])
    groups = np.array([0, 0, 1])
    serves = np.array([[0, -1], [1, -1], [-1, 2]])
    se, _, _ = evaluate_drop(cfg, rrh, users, groups, serves, w)
    diff = rrh[:, None, :] - users[None, :, :]
    betas = np.hypot(diff[..., 0], diff[..., 1]) ** (-cfg.eta)
    active = ActiveSet(serves, groups)
    alphas = mmse_scaling_matrix(betas, active, cfg.noise, cfg.pilot_len)
    for j in range(3):
        assert se[j] == pytest.approx(
            ergodic_se_finite_m(j, active, betas, alphas, cfg.noise, 16), rel=1e-10)


def test_cellular_active_set_caps_load():
    w = Window(2.0)
    bs = np.array([[0.0, 0.0], [1.0, 1.0]])
    users = np.array([[0.1, 0.0], [0.0, 0.1], [-0.1, 0.0], [1.1, 1.0]])
    serves, pilots, cell_of = cellular_active_set(bs, users, 4, 2, w, substream(0))
    assert cell_of.tolist() == [0, 0, 0, 1]
    assert np.count_nonzero(pilots[:3] >= 0) == 2
    assert np.count_nonzero(serves[0] >= 0) == 2
    assert len(set(pilots[pilots >= 0][:2])) == 2


def test_ratio_estimator():
    est, hw = _ratio([2.0, 4.0, 6.0], [1.0, 2.0, 3.0])
    assert est == 2.0 and hw == 0.0
    assert math.isnan(_ratio([1.0], [0.0])[0])
    assert _ratio([1.0], [2.0])[1] == math.inf


def test_aggregate_hand_records():
    recs = [TrialRecord(i, area=4.0, n_users=10, n_served=5 + i, n_rrh=3, se_sum=10.0 + i,
                        void_count=1, load_sum=6, hist=np.array([0, 5 + i]),
                        se=np.ones(5 + i)) for i in range(2)]
    r = aggregate(recs, groups=2)
    assert r.mean_se_served == pytest.approx(21 / 11)
    assert r.area_se == pytest.approx(21 / 8)
    assert r.per_pilot_area_se == pytest.approx(21 / 16)
    assert r.outage_not_allowed == pytest.approx(9 / 20)
    assert r.outage_void == pytest.approx(2 / 20)
    assert r.mean_load == pytest.approx(2.0)
    assert r.serving_pmf().tolist() == [0.0, 1.0]
    with pytest.raises(ParameterError):
        aggregate([])


def test_fog_sim_tracks_analytic_density_and_void():
    cfg = fog_config(trials=20)
    r = simulate(cfg)
    p = fog.FogParams(LA, cfg.lambda_u, 40, cfg.disks, cfg.eta)
    assert r.lambda_tilde == pytest.approx(fog.copilot_density(p), rel=0.05)
    assert r.outage_void == pytest.approx(fog.outage_probability(p), abs=0.02)


def test_cellular_sim_near_analytic():
    cfg = TrialConfig("cellular", LA, 10 * LA, l_pilots=40, n_p=40, trials=10, seed=2)
    r = simulate(cfg)
    p = cell.CellParams(LA, 10 * LA, 40, 40, 3.75)
    assert r.mean_se_served == pytest.approx(cell.avg_user_se_cellular(p), rel=0.03)
    assert r.outage_not_allowed == pytest.approx(
        1 - cell.expected_served_users(p) / (10.0), abs=0.01)


def test_finite_m_below_large_m():
    big = simulate(fog_config(trials=3))
    small = simulate(fog_config(trials=3, m_antennas=64))
    assert small.mean_se_served < big.mean_se_served
    assert small.errors == 0


def test_signal_level_trust_runs():
    r = simulate(fog_config(trials=2, trust_mode="signal_level"))
    assert r.served > 0
    assert r.false_trust >= 0
