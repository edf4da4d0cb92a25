"""Executable acceptance checks, one function per criterion.

Each check returns a :class:`CriterionResult`; ``detail`` carries the
measured numbers so a failure can be diagnosed from the printed table.
"""

import math
import os
import tempfile
import time
from dataclasses import dataclass
from itertools import combinations
from math import comb

import numpy as np

from . import cell_analytics as cell
from . import fog_analytics as fog
from .geometry import DiskPair, sample_theta, theta_distribution
from .montecarlo import TrialConfig, simulate
from .phy_channel import (ActiveSet, NoisePower, crandn, ergodic_se_finite_m,
                          estimate_group_channel, mmse_scaling_matrix, pilot_field_1,
                          zfbf_precoders)
from .pilot_codec import build_codebook, detect_trusted, rank_word, unrank_word
from .streams import substream

LAMBDA_A = 31.8
ETA = 3.75
REF_NP = (10, 20, 30, 40)
REF_CELL_SE = (10.69, 9.73, 9.62, 9.60)
REF_CELL_AREA = (2587.9, 2998.2, 3051.5, 3056.9)
REF_CELL_SIM_SE = (10.78, 9.74, 9.69, 9.70)
REF_CELL_SIM_AREA = (2613.5, 3013.5, 3104.5, 3118.1)


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0

    def line(self):
        mark = "PASS" if self.passed else "FAIL"
        return f"[{mark}] {self.number:2d} {self.name} ({self.seconds:.1f}s): {self.detail}"


def _rel(a, b):
    return abs(a / b - 1.0)


def _ref_cell_params(n_p):
    return cell.CellParams(LAMBDA_A, 10 * LAMBDA_A, 40, n_p, ETA)


# 1 ------------------------------------------------------------------------------------

def criterion_1():
    rows, ok = [], True
    for n_p, se_ref, area_ref in zip(REF_NP, REF_CELL_SE, REF_CELL_AREA):
        p = _ref_cell_params(n_p)
        se = cell.avg_user_se_cellular(p)
        area = cell.area_se_cellular(p)
        good = _rel(se, se_ref) <= 0.01 and _rel(area, area_ref) <= 0.01
        ok &= good
        rows.append(f"Np={n_p}: SE {se:.3f} ({se_ref}) area {area:.1f} ({area_ref})")
    return ok, "; ".join(rows)


# 2 ------------------------------------------------------------------------------------

SIM_DROPS = 500


def criterion_2(drops=SIM_DROPS):
    rows, ok = [], True
    for n_p, se_ref, area_ref in zip(REF_NP, REF_CELL_SIM_SE, REF_CELL_SIM_AREA):
        cfg = TrialConfig("cellular", LAMBDA_A, 10 * LAMBDA_A, eta=ETA, l_pilots=40,
                          n_p=n_p, trials=drops, seed=2024)
        r = simulate(cfg)
        # reference intervals taken as wide as ours: overlap iff |diff| <= 2 hw
        se_ok = abs(r.mean_se_served - se_ref) <= 2 * r.ci_se_served
        area_ok = abs(r.area_se - area_ref) <= 2 * r.ci_area_se
        ok &= se_ok and area_ok
        rows.append(f"Np={n_p}: SE {r.mean_se_served:.3f}±{r.ci_se_served:.3f} ({se_ref})"
                    f"{'' if se_ok else '!'} area {r.area_se:.1f}±{r.ci_area_se:.1f}"
                    f" ({area_ref}){'' if area_ok else '!'}")
    return ok, "; ".join(rows)


# 3 ------------------------------------------------------------------------------------

def criterion_3():
    p_a = cell.pilot_activity_prob(_ref_cell_params(40))
    return abs(p_a - 0.25) <= 1e-3, f"p_a = {p_a:.6f}"


# 4 ------------------------------------------------------------------------------------

COPILOT_LAMBDA_A = (0.5, 1.0, 5.0)
THETA_TRIALS = 20000


def _copilot_params(lambda_a, r_in):
    return fog.FogParams(lambda_a, 1.0, 1, DiskPair.from_epsilon(r_in, 0.25), ETA)


def criterion_4(theta_trials=THETA_TRIALS):
    maxima = []
    worst = 0.0
    for la in COPILOT_LAMBDA_A:
        r_star = fog.copilot_density_maximizer(_copilot_params(la, 0.5))
        maxima.append(r_star)
        for r in np.linspace(r_star / 8, r_star, 8):
            p = _copilot_params(la, r)
            closed = fog.copilot_density(p, "closed_form")
            semi = fog.copilot_density(p, "semi_analytic", theta_trials, seed=7)
            worst = max(worst, _rel(closed, semi))
    decreasing = all(a > b for a, b in zip(maxima, maxima[1:]))
    beyond_ok = True
    gaps = []
    r_star = maxima[-1]
    for r in np.linspace(r_star, 1.2, 6)[1:]:
        p = _copilot_params(5.0, r)
        closed = fog.copilot_density(p, "closed_form")
        semi = fog.copilot_density(p, "semi_analytic", theta_trials, seed=7)
        beyond_ok &= closed <= semi
        gaps.append(closed - semi)
    ok = decreasing and worst <= 0.03 and beyond_ok
    return ok, (f"maximizers {', '.join(f'{m:.3f}' for m in maxima)}; worst gap up to "
                f"maximizer {worst:.4f}; closed-semi beyond (la=5) max {max(gaps):+.4f}")


# 5 ------------------------------------------------------------------------------------

RADIUS_GRID = (0.02, 0.03, 0.04, 0.05, 0.06, 0.07, 0.08, 0.1)
RADIUS_TRIALS = 100


def _radius_params(r_in, eps):
    return fog.FogParams(LAMBDA_A, 40 * LAMBDA_A, 40, DiskPair.from_epsilon(r_in, eps), ETA)


def criterion_5(trials=RADIUS_TRIALS):
    per_pilot = {}
    mono = True
    worst = 0.0
    for eps in (0.0, 0.2):
        se = [fog.avg_user_se_fog(_radius_params(r, eps)) for r in RADIUS_GRID]
        mono &= all(a > b for a, b in zip(se, se[1:]))
        per_pilot[eps] = [fog.area_se_fog(_radius_params(r, eps))[0] for r in RADIUS_GRID]
        for r, a in zip(RADIUS_GRID, per_pilot[eps]):
            cfg = TrialConfig("fog", LAMBDA_A, 40 * LAMBDA_A, eta=ETA,
                              disks=DiskPair.from_epsilon(r, eps), trials=trials, seed=11)
            s = simulate(cfg).per_pilot_area_se
            worst = max(worst, _rel(a, s))
    dominance = all(a >= b for a, b in zip(per_pilot[0.0], per_pilot[0.2]))
    ok = mono and dominance and worst <= 0.12
    return ok, (f"SE decreasing {mono}; eps=0 dominates {dominance}; worst analytic-vs-sim "
                f"per-pilot gap {worst:.3f} over r_in {RADIUS_GRID[0]}..{RADIUS_GRID[-1]} km")


# 6 ------------------------------------------------------------------------------------

def _load_params(r_in, ratio):
    return fog.FogParams(LAMBDA_A, 40 * ratio * LAMBDA_A, 40, DiskPair.from_epsilon(r_in, 0.0),
                         ETA)


def _not_allowed(r_in, ratio, trials):
    return fog.outage_probability(_load_params(r_in, ratio), "not_allowed", "semi_analytic",
                                  theta_trials=trials, seed=5)


def criterion_6(theta_trials=THETA_TRIALS):
    band = [_not_allowed(0.16, x, theta_trials) for x in (0.01, 0.02, 0.05, 0.1)]
    in_band = all(0.08 <= v <= 0.25 for v in band)
    low = [_not_allowed(r, 0.01, theta_trials) for r in (0.08, 0.1, 0.12)]
    high = [_not_allowed(r, 3.0, theta_trials) for r in (0.08, 0.1, 0.12)]
    crossing = all(a > b for a, b in zip(low, low[1:])) and all(
        a < b for a, b in zip(high, high[1:]))
    return in_band and crossing, (
        f"R_in=160 m outage {', '.join(f'{v:.3f}' for v in band)}; "
        f"load 0.01 (80/100/120 m) {', '.join(f'{v:.3f}' for v in low)}; "
        f"load 3 {', '.join(f'{v:.3f}' for v in high)}")


# 7 ------------------------------------------------------------------------------------

LOAD_RATIOS = (0.01, 0.03, 0.1, 0.3, 1.0, 3.0, 10.0)
FINITE_M_TRIALS = 20


def _unimodal(values):
    d = np.sign(np.diff(values))
    peak = int(np.argmax(values))
    return bool(0 < peak < len(values) - 1 and np.all(d[:peak] > 0) and np.all(d[peak:] < 0))


def criterion_7(trials=FINITE_M_TRIALS):
    uni = {}
    for r in (0.08, 0.1, 0.12):
        uni[r] = _unimodal([fog.area_se_fog(_load_params(r, x))[0] for x in LOAD_RATIOS])

    def fog_area(r_in, ratio):
        cfg = TrialConfig("fog", LAMBDA_A, 40 * ratio * LAMBDA_A, eta=ETA,
                          disks=DiskPair.from_epsilon(r_in, 0.0), m_antennas=64,
                          trials=trials, seed=17)
        return simulate(cfg).area_se

    def cell_area(ratio):
        cfg = TrialConfig("cellular", LAMBDA_A, 40 * ratio * LAMBDA_A, eta=ETA, l_pilots=60,
                          n_p=60, m_antennas=64, trials=trials, seed=17)
        return simulate(cfg).area_se

    light, heavy = [], []
    for x in (0.01, 0.03, 0.1):
        light.append(fog_area(0.16, x) / cell_area(x))
    for x in (0.3, 1.0, 3.0):
        heavy.append(fog_area(0.08, x) / cell_area(x))
    ok = all(uni.values()) and min(light) >= 0.75 and min(heavy) >= 1.0
    return ok, (f"unimodal {uni}; fog(160 m)/cell at 0.01,0.03,0.1: "
                f"{', '.join(f'{v:.3f}' for v in light)}; fog(80 m)/cell at 0.3,1,3: "
                f"{', '.join(f'{v:.3f}' for v in heavy)}")


# 8 ------------------------------------------------------------------------------------

def zf_own_gain_samples(M, users, draws, rng):
    """``|h_j^H v_j|^2`` for unit-variance channels and their own ZF precoder."""
    out = np.empty(draws)
    for i in range(draws):
        H = crandn(rng, (M, users))
        v = zfbf_precoders(H)
        out[i] = abs(np.vdot(H[:, 0], v[:, 0])) ** 2
    return out


def residual_zf_samples(M, beta, beta_other, draws, rng):
    """Leakage ``|g^H v'|^2`` of a user whose group estimate also holds a co-pilot
    user, through the precoder of a different group."""
    out = np.empty(draws)
    for i in range(draws):
        g = np.sqrt(beta) * crandn(rng, M)
        g2 = np.sqrt(beta_other) * crandn(rng, M)
        other = crandn(rng, M)
        V = zfbf_precoders(np.column_stack([g + g2, other]))
        out[i] = abs(np.vdot(g, V[:, 1])) ** 2
    return out


def fixture_topology():
    """3 RRHs, 4 users in 2 pilot groups. Every user sees one trusted co-pilot
    interferer with a strong cross gain, which is the pilot-contaminated regime
    where the large-M moment approximations hold."""
    betas = np.array([[1.0, 0.4, 0.3, 0.3],
                      [0.3, 0.8, 0.1, 0.5],
                      [0.2, 0.1, 0.6, 0.4]])
    groups = np.array([0, 0, 1, 1])
    serves = np.array([[0, 2],
                       [1, 3],
                       [0, 3]])
    return betas, ActiveSet(serves, groups)


def brute_force_se(betas, active, noise, M, draws, rng, q_count=3):
    """Monte-Carlo evaluation of the ergodic-rate bound with LS estimates and ZFBF,
    for every user of the topology."""
    codebook = build_codebook(q_count, 2, noise.pu)
    K, J = betas.shape
    useful = np.zeros((draws, J), dtype=complex)
    interf = np.zeros((draws, J))
    for d in range(draws):
        g = np.sqrt(betas)[..., None] * crandn(rng, (K, J, M))
        for k in range(K):
            served = active.serves[k]
            cols = [q for q in range(q_count) if served[q] >= 0]
            if not cols:
                continue
            y1 = pilot_field_1(g[k], active.groups, codebook, noise.sigma2_n, rng)
            G = np.column_stack([estimate_group_channel(y1, q, codebook) for q in cols])
            amp = g[k].conj() @ zfbf_precoders(G)
            target = served[cols]
            own = target[None, :] == np.arange(J)[:, None]
            useful[d] += np.where(own, amp, 0).sum(axis=1)
            # distinct streams carry independent symbols, so powers add
            interf[d] += np.where(own, 0, np.abs(amp) ** 2).sum(axis=1)
    mean_u = useful.mean(axis=0)
    var_u = np.mean(np.abs(useful - mean_u) ** 2, axis=0)
    sinr = np.abs(mean_u) ** 2 / (noise.dl_noise + var_u + interf.mean(axis=0))
    return np.log2(1 + sinr)


def criterion_8(draws=10000, bf_draws=20000):
    rng = substream(8)
    M, U = 16, 4
    own = zf_own_gain_samples(M, U, draws, rng)
    m = M - U + 1
    own_ok = abs(own.mean() - m) <= 3 * math.sqrt(m / draws)
    beta, beta_other = 0.7, 0.3
    leak = residual_zf_samples(M, beta, beta_other, draws, rng)
    target = beta * (1 - beta / (beta + beta_other))
    leak_ok = abs(leak.mean() - target) <= 3 * leak.std(ddof=1) / math.sqrt(draws)
    betas, active = fixture_topology()
    noise = NoisePower(sigma2_n=0.05, ps_fog=1.0, pu=1.0)
    alphas = mmse_scaling_matrix(betas, active, noise, 2)
    brute = brute_force_se(betas, active, noise, 64, bf_draws, rng, q_count=2)
    worst = 0.0
    for j in range(betas.shape[1]):
        closed = ergodic_se_finite_m(j, active, betas, alphas, noise, 64)
        worst = max(worst, _rel(closed, brute[j]))
    ok = own_ok and leak_ok and worst <= 0.02
    return ok, (f"own-gain mean {own.mean():.3f} (target {m}); leakage {leak.mean():.4f} "
                f"(target {target:.4f}); worst closed-vs-brute SE gap {worst:.4f}")


# 9 ------------------------------------------------------------------------------------

THETA_CASES = ((1.0, 0.4, 0.25), (1.0, 0.3, 0.0), (2.0, 0.25, 0.5), (0.5, 0.6, 0.2))


def criterion_9(trials=100000):
    details = []
    ok = True
    for lam, r_in, eps in THETA_CASES:
        d = DiskPair.from_epsilon(r_in, eps)
        t = sample_theta(lam, d, trials, substream(9, int(lam * 100), int(r_in * 100)),
                         resolution=2048)
        mean_ref = math.exp(-math.pi * lam * d.r_out ** 2)
        p1_ref = math.exp(-math.pi * lam * (d.r_in + d.r_out) ** 2)
        se_mean = t.std(ddof=1) / math.sqrt(trials)
        p1 = theta_distribution(t).mass1
        se_p1 = math.sqrt(p1_ref * (1 - p1_ref) / trials)
        good = abs(t.mean() - mean_ref) <= 3 * se_mean and abs(p1 - p1_ref) <= 3 * se_p1
        ok &= good
        details.append(f"mean {t.mean():.4f}/{mean_ref:.4f} p1 {p1:.4f}/{p1_ref:.4f}")
    exact = 0
    for lam in np.linspace(0.0, 5.0, 5):
        for r_in in np.linspace(0.05, 1.0, 5):
            for eps in (0.0, 0.1, 0.25, 1.0):
                a = fog.theta_pdf_approx(lam, DiskPair.from_epsilon(r_in, eps))
                exact += math.fsum((a.p0, a.pu, a.p1)) == 1.0
    ok &= exact == 100
    return ok, "; ".join(details) + f"; masses sum to 1 at {exact}/100 grid points"


# 10 -----------------------------------------------------------------------------------

PGFL_GRID = tuple(
    (x, r_out, eta)
    for eta in (3.0, 3.75)
    for r_out in (0.1, 0.5)
    for x in (0.01, 0.1, 1.0, 10.0, 100.0)
)


def pgfl_monte_carlo(gamma, lam, r_out, eta, samples, rng, tail=1e-4, chunk=20000):
    """Sample ``E[exp(-gamma sum r^(-2 eta))]`` over a PPP outside ``r_out``."""
    # outer radius where the neglected exponent falls below ``tail``
    r_max = max(2 * r_out, (2 * math.pi * lam * gamma / ((2 * eta - 2) * tail))
                ** (1 / (2 * eta - 2)))
    area = math.pi * (r_max ** 2 - r_out ** 2)
    total = 0.0
    total_sq = 0.0
    done = 0
    while done < samples:
        n = min(chunk, samples - done)
        counts = rng.poisson(lam * area, size=n)
        r2 = r_out ** 2 + rng.random(counts.sum()) * (r_max ** 2 - r_out ** 2)
        owner = np.repeat(np.arange(n), counts)
        interf = np.bincount(owner, weights=r2 ** (-eta), minlength=n)
        v = np.exp(-gamma * interf)
        total += v.sum()
        total_sq += (v * v).sum()
        done += n
    mean = total / samples
    var = max(total_sq / samples - mean * mean, 0.0)
    return mean, math.sqrt(var / samples)


def criterion_10(point_budget=2e7, min_samples=20000, max_samples=1000000):
    rng = substream(10)
    worst = 0.0
    ok = True
    for x, r_out, eta in PGFL_GRID:
        gamma = x * r_out ** (2 * eta)
        # density that puts the exact transform at 1/2
        lam = math.log(2.0) / (2 * math.pi * fog.laplace_exponent(gamma, r_out, eta))
        q = fog.interference_laplace(gamma, lam, r_out, eta)
        # spend a fixed number of sampled points per grid entry
        r_max = (2 * math.pi * lam * gamma / ((2 * eta - 2) * 1e-4)) ** (1 / (2 * eta - 2))
        mean_count = max(lam * math.pi * r_max ** 2, 1.0)
        samples = int(min(max(point_budget / mean_count, min_samples), max_samples))
        mc, _ = pgfl_monte_carlo(gamma, lam, r_out, eta, samples, rng)
        gap = _rel(q, mc)
        worst = max(worst, gap)
        ok &= gap <= 0.01
    return ok, f"worst relative gap {worst:.4f} over {len(PGFL_GRID)} points"


# 11 -----------------------------------------------------------------------------------

def codec_scenarios(qprime, tau_u=1.0, tau_i=0.25):
    """Run the three detection scenarios over all codeword pairs; returns failures."""
    k = qprime // 2
    words = [unrank_word(i, qprime) for i in range(comb(qprime, k))]
    fails = 0
    A, B = 2.0, 0.5
    for i, w in enumerate(words):
        d = detect_trusted(A * w, tau_u, tau_i)
        fails += not (d.trusted and d.codeword_index == i and np.array_equal(d.recovered_word, w))
    for (i, w1), (_, w2) in combinations(enumerate(words), 2):
        fails += detect_trusted(A * w1 + A * w2, tau_u, tau_i).trusted
        if np.any(w2 & (1 - w1)):
            fails += detect_trusted(A * w1 + B * w2, tau_u, tau_i).trusted
            fails += detect_trusted(A * w2 + B * w1, tau_u, tau_i).trusted
    return fails


def criterion_11():
    fails = {q: codec_scenarios(q) for q in (4, 6, 8)}
    n, k = 20, 10
    bad = 0
    for i in range(comb(n, k)):
        if rank_word(unrank_word(i, n, k)) != i:
            bad += 1
    return sum(fails.values()) == 0 and bad == 0, (
        f"scenario failures {fails}; rank/unrank mismatches {bad} of {comb(n, k)}")


# 12 -----------------------------------------------------------------------------------

def recipe_dir():
    here = os.path.dirname(os.path.abspath(__file__))
    for cand in (os.path.join(here, "recipes"), os.path.join(here, "..", "..", "recipes")):
        if os.path.isdir(cand):
            return os.path.normpath(cand)
    raise FileNotFoundError("recipes directory not found")


def _reduced_args(path):
    """Override arguments that shrink a recipe to a quick determinism run."""
    from .config import load_config
    cfg = load_config(path)
    args = ["--trials", "2", "--set", "theta_trials=500"]
    for axis, values in cfg.sweep:
        keep = ",".join(repr(v) if isinstance(v, float) else str(v) for v in values[:2])
        args += ["--sweep", f"{axis}={keep}"]
    return args


def criterion_12():
    from .cli import main
    rdir = recipe_dir()
    names = sorted(f for f in os.listdir(rdir) if f.endswith(".cfg"))
    mismatched = []
    with tempfile.TemporaryDirectory() as tmp:
        for name in names:
            path = os.path.join(rdir, name)
            blobs = []
            for run in range(2):
                out = os.path.join(tmp, f"{name}.{run}.csv")
                code = main(["sweep", "--config", path, "--out", out] + _reduced_args(path))
                if code != 0:
                    mismatched.append(f"{name} (exit {code})")
                    break
                with open(out, "rb") as fh:
                    blobs.append(fh.read())
            if len(blobs) == 2 and blobs[0] != blobs[1]:
                mismatched.append(name)
    return not mismatched and bool(names), (
        f"{len(names)} recipes re-run; mismatches: {mismatched or 'none'}")


CRITERIA = {
    1: ("cellular reference values, analytic", criterion_1),
    2: ("cellular reference values, simulated", criterion_2),
    3: ("p_a check", criterion_3),
    4: ("active co-pilot density shape", criterion_4),
    5: ("spectral efficiency vs R_in", criterion_5),
    6: ("outage band and crossing", criterion_6),
    7: ("area SE trends and finite-M comparison", criterion_7),
    8: ("ZFBF ergodic-rate oracles", criterion_8),
    9: ("uncovered-fraction oracles", criterion_9),
    10: ("interference Laplace transform oracle", criterion_10),
    11: ("pilot detection and codeword ranking", criterion_11),
    12: ("bit-identical re-runs", criterion_12),
}


def run_criterion(number):
    name, fn = CRITERIA[number]
    start = time.perf_counter()
    passed, detail = fn()
    return CriterionResult(number, name, bool(passed), detail, time.perf_counter() - start)


def run_criteria(numbers=None, echo=None):
    results = []
    for n in numbers or sorted(CRITERIA):
        r = run_criterion(n)
        if echo is not None:
            print(r.line(), file=echo, flush=True)
        results.append(r)
    return results
