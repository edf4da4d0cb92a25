"""Drop-based simulation of fog and cellular massive MIMO.

A trial drops RRHs (or base stations) and users as independent PPPs on a
window, assigns pilots, builds the active set and evaluates the spectral
efficiency of every user. With ``M = inf`` the large-antenna SIR
``(sum beta)^2 / sum beta^2`` is used; with finite ``M`` the closed-form
ZFBF ergodic rate with MMSE-scaled estimates is evaluated per user, with
``|A| = 1`` for the cellular system.

Trials are independent: trial ``i`` draws from sub-streams of
``(seed, i)``, so results do not depend on worker count or order.
"""

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.spatial import cKDTree

from . import kernels
from .errors import CapacityError, ParameterError
from .geometry import DiskPair, Window, sample_ppp
from .phy_channel import (DEFAULT_SE_CAP, NoisePower, crandn, estimate_group_channel,
                          mrc_second_field, pilot_field_1, pilot_field_2)
from .pilot_codec import assign_pilots, build_codebook, detect_trusted_batch, rank_word
from .streams import DROP, FADING, PILOTS, SELECT, substream

log = logging.getLogger(__name__)

Z95 = 1.959963984540054
AUTO_SPAN = 20.0
AUTO_MIN_GROUP_USERS = 30.0
AUTO_MIN_CELLS = 500.0


@dataclass(frozen=True)
class TrialConfig:
    system: str
    lambda_a: float
    lambda_u: float
    eta: float = 3.75
    q_count: int = 40
    qprime: int = 20
    disks: Optional[DiskPair] = None
    l_pilots: int = 60
    n_p: int = 60
    m_antennas: float = math.inf
    trust_mode: str = "geometric"
    noise: NoisePower = NoisePower()
    fading_draws: int = 1
    trials: int = 1
    seed: int = 0
    window: Optional[Window] = None
    se_cap: float = DEFAULT_SE_CAP
    min_distance: float = 0.0
    workers: int = 1

    def __post_init__(self):
        if self.system not in ("fog", "cellular"):
            raise ParameterError(f"unknown system {self.system!r}")
        if self.lambda_a < 0 or self.lambda_u < 0:
            raise ParameterError("densities must be non-negative")
        if not self.eta > 1:
            raise ParameterError("pathloss exponent must exceed 1")
        if self.trials < 1:
            raise ParameterError("trials must be at least 1")
        if self.trust_mode not in ("geometric", "signal_level"):
            raise ParameterError(f"unknown trust mode {self.trust_mode!r}")
        finite = math.isfinite(self.m_antennas)
        if finite and (self.m_antennas < 1 or self.m_antennas != int(self.m_antennas)):
            raise ParameterError("M must be a positive integer or inf")
        if finite and self.fading_draws < 1:
            raise ParameterError("fading_draws must be at least 1 with finite M")
        if self.system == "fog" and self.disks is None:
            raise ParameterError("the fog system needs coverage radii")
        if self.system == "cellular" and not 0 < self.n_p <= self.l_pilots:
            raise ParameterError("need 0 < N_p <= L")
        if self.workers < 1:
            raise ParameterError("workers must be at least 1")

    @property
    def groups(self):
        """Number of orthogonal pilot groups (Q or L)."""
        return self.q_count if self.system == "fog" else self.l_pilots

    @property
    def pilot_len(self):
        """Pilot dimension that the group estimate integrates over."""
        return self.q_count if self.system == "fog" else self.l_pilots

    def resolved_window(self):
        return self.window if self.window is not None else auto_window(self)


def auto_window(config):
    """Torus sized to hold enough interferers.

    Fog: side at least ``20 r_out`` and at least 30 expected users per pilot
    group. Cellular: at least 500 expected base stations.
    """
    if config.system == "fog":
        side = AUTO_SPAN * config.disks.r_out
        lam = config.lambda_u / config.q_count
        if lam > 0:
            side = max(side, math.sqrt(AUTO_MIN_GROUP_USERS / lam))
    else:
        side = math.sqrt(AUTO_MIN_CELLS / config.lambda_a) if config.lambda_a > 0 else 1.0
    return Window(side / 2.0)


# --- per-trial record -------------------------------------------------------------

@dataclass
class TrialRecord:
    index: int
    area: float
    n_users: int
    n_served: int
    n_rrh: int
    se_sum: float
    void_count: int
    load_sum: int
    hist: np.ndarray = field(repr=False)
    se: np.ndarray = field(repr=False)
    errors: int = 0
    false_trust: int = 0


@dataclass
class SEReport:
    """Pooled statistics over trials; ``ci_*`` are 95% half-widths."""

    trials: int
    users: int
    served: int
    mean_se_served: float
    ci_se_served: float
    mean_se_all: float
    ci_se_all: float
    area_se: float
    ci_area_se: float
    per_pilot_area_se: float
    ci_per_pilot_area_se: float
    outage_not_allowed: float
    ci_outage_not_allowed: float
    outage_void: float
    lambda_tilde: float
    ci_lambda_tilde: float
    mean_load: float
    serving_hist: np.ndarray = field(repr=False)
    samples: np.ndarray = field(repr=False)
    errors: int = 0
    false_trust: int = 0

    @property
    def outage_defined(self):
        return self.users > 0

    def serving_pmf(self):
        """Empirical ``P(|A| = n | served)`` for ``n = 0, 1, ...``."""
        total = self.serving_hist.sum()
        return self.serving_hist / total if total else self.serving_hist.astype(float)


# --- geometry helpers -------------------------------------------------------------

def _tree(points, window):
    """KD-tree in shifted coordinates; periodic on a torus window."""
    if window.boundary == "torus":
        side = window.side
        shifted = np.mod(points + window.half_width, side)
        shifted[shifted >= side] = 0.0
        return cKDTree(shifted, boxsize=side), shifted
    return cKDTree(points), points


def _shift(points, window):
    if window.boundary == "torus":
        side = window.side
        shifted = np.mod(points + window.half_width, side)
        shifted[shifted >= side] = 0.0
        return shifted
    return points


def geometric_active_set(rrh, users, groups, n_groups, disks, window):
    """``serves[k, q]``: the user RRH ``k`` trusts on group ``q``, or -1."""
    K = rrh.shape[0]
    serves = np.full((K, n_groups), -1, dtype=np.int64)
    if K == 0:
        return serves
    r_pts = _shift(rrh, window)
    for q in range(n_groups):
        idx = np.flatnonzero(groups == q)
        if idx.size == 0:
            continue
        tree, _ = _tree(users[idx], window)
        kk = min(2, idx.size)
        d, nb = tree.query(r_pts, k=kk)
        d = d.reshape(K, kk)
        nb = nb.reshape(K, kk)
        ok = d[:, 0] <= disks.r_in
        if kk == 2:
            ok &= d[:, 1] > disks.r_out
        serves[ok, q] = idx[nb[ok, 0]]
    return serves


def signal_level_active_set(rrh, users, groups, codewords, codebook, disks, eta, window,
                            m_antennas, noise, rng, min_distance=0.0):
    """Active set from the two-threshold rule on the combined second pilot field.

    Returns ``(serves, false_trust)`` where ``false_trust`` counts trusted
    pilots whose recovered word belongs to no user of the group.
    """
    from .pilot_codec import thresholds_from_radii
    K = rrh.shape[0]
    Q = codebook.q_count
    serves = np.full((K, Q), -1, dtype=np.int64)
    false_trust = 0
    tau_u, tau_i = thresholds_from_radii(disks, eta, codebook.pu)
    for q in range(Q):
        idx = np.flatnonzero(groups == q)
        if idx.size == 0 or K == 0:
            continue
        words = np.stack([codebook.word(int(c)) for c in codewords[idx]]).astype(float)
        beta = kernels.gain_matrix(rrh, users[idx], window.period, eta, min_distance)
        if math.isinf(m_antennas):
            y = np.sqrt(2.0 * codebook.pu) * beta @ words
        else:
            y = _finite_m_second_field(beta, words, q, codebook, noise, int(m_antennas),
                                       tau_i, rng)
        ok, rec = detect_trusted_batch(y, tau_u, tau_i)
        lookup = {int(c): int(j) for c, j in zip(codewords[idx], idx)}
        for k in np.flatnonzero(ok):
            user = lookup.get(rank_word(rec[k]))
            if user is None:
                false_trust += 1
            else:
                serves[k, q] = user
    return serves, false_trust


def _finite_m_second_field(beta, words, q, codebook, noise, M, tau_i, rng):
    """MRC-combined second field at every RRH for one pilot group, with fading."""
    K, J = beta.shape
    y = np.zeros((K, words.shape[1]))
    # users whose amplitude is far below the rise-over-thermal level are dropped
    floor = 1e-4 * tau_i / np.sqrt(2.0 * codebook.pu)
    groups = np.full(J, q)
    for k in range(K):
        near = np.flatnonzero(beta[k] >= floor)
        if near.size == 0 and noise.sigma2_n == 0:
            continue
        g = np.sqrt(beta[k, near])[:, None] * crandn(rng, (near.size, M))
        y1 = pilot_field_1(g, groups[near], codebook, noise.sigma2_n, rng)
        ghat = estimate_group_channel(y1, q, codebook)
        y2 = pilot_field_2(g, words[near], codebook.pu, noise.sigma2_n, rng)
        y[k] = mrc_second_field(y2, ghat, M)
    return y


# --- spectral efficiency of a drop ------------------------------------------------

def _group_se_large_m(beta, serve_col, users, cap):
    """Large-M SE of ``users`` given gains from the active RRHs of their group."""
    own = serve_col[:, None] == users[None, :]
    sig = np.where(own, beta, 0.0).sum(axis=0)
    interf = np.where(own, 0.0, beta * beta).sum(axis=0)
    se = np.zeros(users.size)
    served = sig > 0
    free = served & (interf <= 0)
    ok = served & (interf > 0)
    se[ok] = np.log2(1.0 + sig[ok] ** 2 / interf[ok])
    se[free] = cap
    return se


def _group_se_finite_m(beta, serve_col, users, loads, group_sum, noise, pilot_len, M):
    """Finite-M ZFBF SE for all ``users`` of one group; ``beta`` spans all RRHs.

    Returns ``(se, bad)`` where ``bad`` flags non-positive denominators.
    """
    alpha_den = group_sum[:, None] + noise.estimate_noise(pilot_len)
    with np.errstate(invalid="ignore", divide="ignore"):
        ab = np.where(alpha_den > 0, beta * beta / alpha_den, 0.0)
    active = serve_col >= 0
    own = serve_col[:, None] == users[None, :]
    tilde = active[:, None] & ~own
    dof = (M - loads + 1).astype(float)
    coherent = np.where(own, np.sqrt(ab * dof[:, None]), 0.0).sum(axis=0) ** 2
    denom = (noise.dl_noise
             - np.where(active[:, None], ab * loads[:, None], 0.0).sum(axis=0)
             + (beta * loads[:, None]).sum(axis=0)
             + np.where(tilde, ab * dof[:, None], 0.0).sum(axis=0))
    served = own.any(axis=0)
    bad = served & ~(denom > 0)
    se = np.zeros(users.size)
    ok = served & ~bad
    se[ok] = np.log2(1.0 + coherent[ok] / denom[ok])
    return se, bad


def evaluate_drop(config, rrh, users, groups, serves, window, observed=None):
    """Per-user SE for a drop; ``groups[j] = -1`` marks users without a pilot.

    Returns ``(se, n_serving, errors)``.
    """
    J = users.shape[0]
    K = rrh.shape[0]
    se = np.zeros(J)
    n_serving = np.zeros(J, dtype=np.int64)
    errors = 0
    if J == 0 or K == 0:
        return se, n_serving, errors
    n_groups = serves.shape[1]
    loads = np.count_nonzero(serves >= 0, axis=1)
    finite = math.isfinite(config.m_antennas)
    M = int(config.m_antennas) if finite else None
    if finite and np.any(loads > M):
        raise ParameterError("an RRH serves more streams than it has antennas")
    period = window.period
    for q in range(n_groups):
        idx = np.flatnonzero(groups == q)
        if idx.size == 0:
            continue
        col = serves[:, q]
        active = np.flatnonzero(col >= 0)
        n_serving[idx] = np.count_nonzero(col[:, None] == idx[None, :], axis=0)
        if active.size == 0:
            continue
        if not finite:
            beta = kernels.gain_matrix(rrh[active], users[idx], period,
                                       config.eta, config.min_distance)
            se[idx] = _group_se_large_m(beta, col[active], idx, config.se_cap)
        else:
            beta = kernels.gain_matrix(rrh, users[idx], period, config.eta, config.min_distance)
            vals, bad = _group_se_finite_m(beta, col, idx, loads, beta.sum(axis=1),
                                           config.noise, config.pilot_len, M)
            if bad.any():
                errors += int(bad.sum())
                log.warning("%d users with non-positive SINR denominator", int(bad.sum()))
            se[idx] = vals
    return se, n_serving, errors


def _make_record(index, config, window, rrh, users, se, n_serving, errors, serves,
                 false_trust, observed, void):
    se_obs = se[observed]
    served = n_serving[observed] > 0
    n_max = max(int(n_serving.max(initial=0)) + 1, 1)
    hist = np.bincount(n_serving[observed][served], minlength=n_max)
    return TrialRecord(
        index=index, area=window.area, n_users=int(observed.sum()),
        n_served=int(served.sum()), n_rrh=int(window.inside(rrh).sum()),
        se_sum=math.fsum(se_obs), void_count=int(void),
        load_sum=int(np.count_nonzero(serves[window.inside(rrh)] >= 0)),
        hist=hist, se=se_obs[served], errors=errors, false_trust=false_trust)


def _drop(config, window, index):
    rng_seed = (config.seed, index)
    rrh = sample_ppp(config.lambda_a, window, substream(*rng_seed, DROP, 0)).points
    users = sample_ppp(config.lambda_u, window, substream(*rng_seed, DROP, 1)).points
    observed = window.inside(users)
    return rrh, users, observed


def run_fog_trial(config, trial_index):
    if config.system != "fog":
        raise ParameterError("run_fog_trial needs a fog configuration")
    window = config.resolved_window()
    window.require_margin(config.disks.r_out)
    rrh, users, observed = _drop(config, window, trial_index)
    codebook = build_codebook(config.q_count, config.qprime, config.noise.pu)
    pilots = assign_pilots(users.shape[0], codebook, substream(config.seed, trial_index, PILOTS))
    false_trust = 0
    if config.trust_mode == "geometric":
        serves = geometric_active_set(rrh, users, pilots.groups, config.q_count,
                                      config.disks, window)
    else:
        serves, false_trust = signal_level_active_set(
            rrh, users, pilots.groups, pilots.codewords, codebook, config.disks, config.eta,
            window, config.m_antennas, config.noise,
            substream(config.seed, trial_index, FADING), config.min_distance)
    se, n_serving, errors = evaluate_drop(config, rrh, users, pilots.groups, serves, window)
    void = _void_count(rrh, users[observed], config.disks.r_in, window)
    return _make_record(trial_index, config, window, rrh, users, se, n_serving, errors,
                        serves, false_trust, observed, void)


def _void_count(rrh, users, radius, window):
    if users.shape[0] == 0:
        return 0
    if rrh.shape[0] == 0:
        return users.shape[0]
    tree, _ = _tree(rrh, window)
    d, _ = tree.query(_shift(users, window), k=1)
    return int(np.count_nonzero(d > radius))


def cellular_active_set(bs, users, l_pilots, n_p, window, rng):
    """Nearest-BS association and a random pilot subset per cell.

    Returns ``(serves, pilots, cell)`` where ``pilots[j] = -1`` for users not
    admitted because their cell already holds ``N_p`` users.
    """
    K = bs.shape[0]
    J = users.shape[0]
    serves = np.full((K, l_pilots), -1, dtype=np.int64)
    pilots = np.full(J, -1, dtype=np.int64)
    if K == 0 or J == 0:
        return serves, pilots, np.full(J, -1, dtype=np.int64)
    tree, _ = _tree(bs, window)
    _, cell = tree.query(_shift(users, window), k=1)
    order = np.argsort(cell, kind="stable")
    bounds = np.searchsorted(cell[order], np.arange(K + 1))
    for k in range(K):
        members = order[bounds[k]:bounds[k + 1]]
        if members.size == 0:
            continue
        if members.size > n_p:
            members = np.sort(rng.choice(members, n_p, replace=False))
        chosen = rng.choice(l_pilots, members.size, replace=False)
        pilots[members] = chosen
        serves[k, chosen] = members
    return serves, pilots, cell


def run_cellular_trial(config, trial_index):
    if config.system != "cellular":
        raise ParameterError("run_cellular_trial needs a cellular configuration")
    window = config.resolved_window()
    bs, users, observed = _drop(config, window, trial_index)
    if math.isfinite(config.m_antennas) and config.n_p > config.m_antennas:
        raise CapacityError("N_p exceeds the number of antennas")
    serves, pilots, _ = cellular_active_set(
        bs, users, config.l_pilots, config.n_p, window,
        substream(config.seed, trial_index, SELECT))
    se, n_serving, errors = evaluate_drop(config, bs, users, pilots, serves, window)
    void = int(np.count_nonzero(pilots[observed] < 0))
    return _make_record(trial_index, config, window, bs, users, se, n_serving, errors,
                        serves, 0, observed, void)


def run_trial(config, trial_index):
    if config.system == "fog":
        return run_fog_trial(config, trial_index)
    return run_cellular_trial(config, trial_index)


def _run_chunk(args):
    config, indices = args
    return [run_trial(config, i) for i in indices]


def run_trials(config, trials=None, start=0):
    """Run ``trials`` trials (default ``config.trials``), in parallel when
    ``config.workers > 1``; records come back ordered by trial index."""
    n = config.trials if trials is None else int(trials)
    indices = list(range(start, start + n))
    if config.workers == 1 or n == 1:
        return [run_trial(config, i) for i in indices]
    chunks = [indices[w::config.workers] for w in range(config.workers)]
    with ProcessPoolExecutor(max_workers=config.workers) as pool:
        parts = pool.map(_run_chunk, [(config, c) for c in chunks if c])
        records = [r for part in parts for r in part]
    return sorted(records, key=lambda r: r.index)


# --- aggregation --------------------------------------------------------------------

def _ratio(y, x):
    """Ratio-of-sums estimate with its delta-method 95% half-width."""
    y = np.asarray(y, dtype=float)
    x = np.asarray(x, dtype=float)
    sx = math.fsum(x)
    if sx <= 0:
        return math.nan, math.nan
    est = math.fsum(y) / sx
    n = y.size
    if n < 2:
        return est, math.inf
    resid = y - est * x
    var = math.fsum(resid * resid) / (n * (n - 1)) / (sx / n) ** 2
    return est, Z95 * math.sqrt(var)


def aggregate(records, groups=1):
    """Pool trial records; ``groups`` converts area SE into per-pilot area SE."""
    records = sorted(records, key=lambda r: r.index)
    if not records:
        raise ParameterError("no records to aggregate")
    area = np.array([r.area for r in records])
    se_sum = np.array([r.se_sum for r in records])
    users = np.array([r.n_users for r in records])
    served = np.array([r.n_served for r in records])
    mean_served, ci_served = _ratio(se_sum, served)
    mean_all, ci_all = _ratio(se_sum, users)
    area_se, ci_area = _ratio(se_sum, area)
    outage, ci_outage = _ratio(users - served, users)
    void = math.fsum(r.void_count for r in records) / int(users.sum()) if users.sum() else math.nan
    lam_t, ci_lam = _ratio(served / groups, area)
    n_rrh = sum(r.n_rrh for r in records)
    width = max(r.hist.size for r in records)
    hist = np.zeros(width, dtype=np.int64)
    for r in records:
        hist[:r.hist.size] += r.hist
    return SEReport(
        trials=len(records), users=int(users.sum()), served=int(served.sum()),
        mean_se_served=mean_served, ci_se_served=ci_served,
        mean_se_all=mean_all, ci_se_all=ci_all,
        area_se=area_se, ci_area_se=ci_area,
        per_pilot_area_se=area_se / groups, ci_per_pilot_area_se=ci_area / groups,
        outage_not_allowed=outage, ci_outage_not_allowed=ci_outage,
        outage_void=void, lambda_tilde=lam_t, ci_lambda_tilde=ci_lam,
        mean_load=sum(r.load_sum for r in records) / n_rrh if n_rrh else math.nan,
        serving_hist=hist, samples=np.concatenate([r.se for r in records]),
        errors=sum(r.errors for r in records),
        false_trust=sum(r.false_trust for r in records))


def simulate(config, trials=None):
    """Run trials and aggregate them."""
    return aggregate(run_trials(config, trials), config.groups)
