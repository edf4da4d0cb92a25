"""Closed-form and semi-analytic performance of the fog system.

Quantities are per pilot group unless stated otherwise: ``lam`` is the
co-pilot user density ``lambda_u / Q``. The uncovered fraction ``theta`` of
a user's coverage disk can come from the three-part approximation
(:func:`theta_pdf_approx`) or from Monte-Carlo samples
(:class:`~fogmimo.geometry.ThetaDistribution`); every function that needs it
takes a ``theta_source`` argument:

``"closed_form"``
    the point-mass/uniform approximation;
``"semi_analytic"``
    empirical samples drawn with ``theta_trials`` and ``seed``;
``"auto"``
    closed form while ``r_in`` does not exceed the radius maximising the
    closed-form active co-pilot density, semi-analytic beyond it;
a ``ThetaDistribution``
    those samples.
"""

from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Optional

import math

import numpy as np
from scipy import integrate, optimize, special, stats

from .errors import NumericalError, ParameterError
from .geometry import DiskPair, ThetaDistribution, estimate_theta_pdf
from .phy_channel import DEFAULT_SE_CAP

LN2 = np.log(2.0)
DEFAULT_THETA_TRIALS = 20000
N_TAIL = 1e-6
EPSABS = 1e-9
EPSREL = 1e-6


@dataclass(frozen=True)
class ThetaPdfApprox:
    """Point mass ``p0`` at 0, uniform level ``pu`` on (0, 1), point mass ``p1`` at 1.

    ``p0`` is fixed by normalisation and can be slightly negative at low
    co-pilot load when ``r_out`` is close to ``r_in``. It never enters
    :func:`copilot_density` or :func:`serving_count_pmf`, since a user with
    ``theta = 0`` can never be served.
    """

    p0: float
    pu: float
    p1: float

    def allowed(self, mu):
        """``E[1 - exp(-mu theta)]``: probability some RRH may serve the user."""
        return self.pu * (1.0 - _expm1_ratio(mu)) + self.p1 * -np.expm1(-mu)


def _expm1_ratio(mu):
    """``(1 - exp(-mu)) / mu`` with the ``mu -> 0`` limit 1."""
    mu = float(mu)
    if mu < 1e-12:
        return 1.0 - mu / 2.0
    return -np.expm1(-mu) / mu


@dataclass(frozen=True)
class FogParams:
    lambda_a: float
    lambda_u: float
    q_count: int
    disks: DiskPair
    eta: float
    n_max: Optional[int] = None

    def __post_init__(self):
        if self.lambda_a < 0 or self.lambda_u < 0:
            raise ParameterError("densities must be non-negative")
        if self.q_count < 1:
            raise ParameterError("Q must be at least 1")
        if not self.eta > 1:
            raise ParameterError("pathloss exponent must exceed 1")
        if self.n_max is not None and self.n_max < 1:
            raise ParameterError("n_max must be at least 1")

    @property
    def lam(self):
        """Co-pilot (per-group) user density."""
        return self.lambda_u / self.q_count

    @property
    def mu(self):
        """Mean RRH count in a full coverage disk."""
        return np.pi * self.lambda_a * self.disks.r_in ** 2

    @property
    def serving_cap(self):
        """Truncation ``N`` of the serving-count distribution."""
        if self.n_max is not None:
            return int(self.n_max)
        return max(1, int(stats.poisson.isf(N_TAIL, self.mu)) + 1)

    def with_r_in(self, r_in):
        return replace(self, disks=DiskPair.from_epsilon(r_in, self.disks.epsilon))


def theta_pdf_approx(lam, disks):
    if lam < 0:
        raise ParameterError("lambda must be non-negative")
    p1 = np.exp(-np.pi * lam * (disks.r_in + disks.r_out) ** 2)
    half_mean = np.exp(-np.pi * lam * disks.r_out ** 2)
    pu = float(2.0 * (half_mean - p1))
    p1 = float(p1)
    p0 = 1.0 - pu - p1
    # absorb the rounding residue into p0 so the masses sum to exactly one
    for _ in range(8):
        residue = math.fsum((p0, pu, p1)) - 1.0
        if residue == 0.0:
            break
        p0 = math.nextafter(p0, -math.inf if residue > 0 else math.inf)
    return ThetaPdfApprox(p0, pu, p1)


# --- uncovered-fraction sources ------------------------------------------------

def copilot_density_closed(params):
    return params.lam * theta_pdf_approx(params.lam, params.disks).allowed(params.mu)


def copilot_density_maximizer(params):
    """``r_in`` maximising the closed-form active co-pilot density (``epsilon`` fixed)."""
    lam = params.lam
    if lam <= 0 or params.lambda_a <= 0:
        return np.inf
    k = 1.0 + params.disks.epsilon
    upper = np.sqrt(30.0 / (np.pi * lam)) / k
    res = optimize.minimize_scalar(
        lambda r: -copilot_density_closed(params.with_r_in(r)),
        bounds=(upper * 1e-6, upper), method="bounded",
        options={"xatol": upper * 1e-9})
    return float(res.x)


def resolve_theta_source(params, theta_source):
    """Replace ``"auto"`` by the source it selects for ``params``."""
    if isinstance(theta_source, str) and theta_source == "auto":
        if params.disks.r_in <= copilot_density_maximizer(params):
            return "closed_form"
        return "semi_analytic"
    return theta_source


def _resolve_theta(params, theta_source, theta_trials, seed):
    """Return ``None`` for the closed form or a ThetaDistribution."""
    if isinstance(theta_source, ThetaDistribution):
        return theta_source
    theta_source = resolve_theta_source(params, theta_source)
    if theta_source == "closed_form":
        return None
    if theta_source == "semi_analytic":
        return _cached_theta(params.lam, params.disks.r_in, params.disks.r_out,
                             int(theta_trials), int(seed))
    raise ParameterError(f"unknown theta_source {theta_source!r}")


@lru_cache(maxsize=256)
def _cached_theta(lam, r_in, r_out, trials, seed):
    return estimate_theta_pdf(lam, DiskPair(r_in, r_out), trials, seed)


def allowed_probability(params, theta_source="closed_form",
                        theta_trials=DEFAULT_THETA_TRIALS, seed=0):
    """Probability that at least one RRH may serve a typical user."""
    theta = _resolve_theta(params, theta_source, theta_trials, seed)
    mu = params.mu
    if theta is None:
        return float(theta_pdf_approx(params.lam, params.disks).allowed(mu))
    return theta.expect(lambda t: -np.expm1(-mu * t))


def copilot_density(params, mode="closed_form", theta_trials=DEFAULT_THETA_TRIALS, seed=0):
    """Active co-pilot user density ``lam * P(user is allowed)``."""
    return params.lam * allowed_probability(params, mode, theta_trials, seed)


# --- active RRHs and power -------------------------------------------------------

def active_rrh_density(params):
    """Density of RRHs that trust a given pilot group."""
    lam = params.lam
    return params.lambda_a * lam * np.pi * params.disks.r_in ** 2 * np.exp(
        -np.pi * lam * params.disks.r_out ** 2)


def expected_served(params):
    """Mean number of users an RRH serves over all ``Q`` groups."""
    lam = params.lam
    return params.q_count * lam * np.pi * params.disks.r_in ** 2 * np.exp(
        -np.pi * lam * params.disks.r_out ** 2)


def avg_rrh_power(params, ps_fog):
    return ps_fog * expected_served(params)


# --- serving-count distribution ---------------------------------------------------

def serving_count_weights(params, theta_source="closed_form",
                          theta_trials=DEFAULT_THETA_TRIALS, seed=0):
    """Unnormalised ``P(|A_0| = n)`` for ``n = 1..N``."""
    n = np.arange(1, params.serving_cap + 1)
    mu = params.mu
    theta = _resolve_theta(params, theta_source, theta_trials, seed)
    if mu <= 0:
        return np.zeros(n.size)
    if theta is None:
        approx = theta_pdf_approx(params.lam, params.disks)
        # uniform part integrates the Poisson pmf over theta: P(n+1, mu) / mu
        uniform = approx.pu * special.gammainc(n + 1, mu) / mu
        full = approx.p1 * stats.poisson.pmf(n, mu)
        return uniform + full
    t = theta.samples
    t = t[t > 0]
    if t.size == 0:
        return np.zeros(n.size)
    pmf = stats.poisson.pmf(n[:, None], mu * t[None, :])
    return pmf.sum(axis=1) / theta.samples.size


def serving_count_pmf(params, theta_source="closed_form",
                      theta_trials=DEFAULT_THETA_TRIALS, seed=0):
    """``P(|A_0| = n | |A_0| > 0)`` for ``n = 1..N``, normalised over the truncation."""
    w = serving_count_weights(params, theta_source, theta_trials, seed)
    total = w.sum()
    if total <= 0:
        return np.zeros_like(w)
    return w / total


def prob_n_serving(n, params, theta_source="closed_form",
                   theta_trials=DEFAULT_THETA_TRIALS, seed=0):
    N = params.serving_cap
    if not 1 <= n <= N:
        raise ParameterError(f"n must lie in [1, {N}]")
    return float(serving_count_pmf(params, theta_source, theta_trials, seed)[n - 1])


# --- interference Laplace transform ---------------------------------------------

def _exponent_quadrature(gamma, r_out, eta):
    # r = r_out * exp(t); the integrand switches from r^2 growth to r^(2-2 eta)
    # decay around t_star
    x = gamma * r_out ** (-2.0 * eta)
    t_star = max(np.log(x) / (2.0 * eta), 0.0) if x > 0 else 0.0
    t_end = t_star + 60.0 / (2.0 * eta - 2.0)

    def f(t):
        return -np.expm1(-x * np.exp(-2.0 * eta * t)) * np.exp(2.0 * t)

    pieces = [(0.0, t_star), (t_star, t_end)] if t_star > 0 else [(0.0, t_end)]
    total = 0.0
    for a, b in pieces:
        val, err = integrate.quad(f, a, b, epsabs=EPSABS / r_out ** 2,
                                  epsrel=EPSREL, limit=200)
        if not np.isfinite(val) or err > max(1e-6 * abs(val), EPSABS / r_out ** 2) * 10:
            raise NumericalError(f"Laplace exponent quadrature did not converge (gamma={gamma})")
        total += val
    return r_out ** 2 * total


def _exponent_incomplete_gamma(gamma, r_out, eta):
    # integration by parts, then u = gamma r^(-2 eta)
    s = 1.0 / eta
    x = gamma * r_out ** (-2.0 * eta)
    return (-0.5 * r_out ** 2 * -np.expm1(-x)
            + 0.5 * gamma ** s * special.gamma(1.0 - s) * special.gammainc(1.0 - s, x))


def _exponent_printed(gamma, r_out, eta):
    # literal reading with the lower incomplete gamma at -1/eta continued
    # analytically: lower(a, x) = (lower(a + 1, x) - x^a e^-x) / a
    s = 1.0 / eta
    x = gamma * r_out ** (-2.0 * eta)
    lower_1ms = special.gamma(1.0 - s) * special.gammainc(1.0 - s, x)
    lower_ms = (lower_1ms - x ** (-s) * np.exp(-x)) / (-s)
    log_lt = np.pi * r_out ** 2 + np.pi * gamma ** s / eta * lower_ms
    # log_lt is per unit active density; convert to the exponent convention
    return -log_lt / (2.0 * np.pi)


_EXPONENT = {
    "quadrature": _exponent_quadrature,
    "incomplete_gamma": _exponent_incomplete_gamma,
    "printed": _exponent_printed,
}


def laplace_exponent(gamma, r_out, eta, method="quadrature"):
    """``int_{r_out}^inf (1 - exp(-gamma r^(-2 eta))) r dr``."""
    if gamma < 0:
        raise ParameterError("gamma must be non-negative")
    if not eta > 1:
        raise ParameterError("pathloss exponent must exceed 1")
    if gamma == 0:
        return 0.0
    try:
        fn = _EXPONENT[method]
    except KeyError:
        raise ParameterError(f"unknown Laplace method {method!r}") from None
    return float(fn(gamma, r_out, eta))


def interference_laplace(gamma, lambda_a_active, r_out, eta, method="quadrature"):
    """``E[exp(-gamma I)]`` for ``I = sum r^(-2 eta)`` over a PPP of density
    ``lambda_a_active`` outside the disk of radius ``r_out``.

    ``method="printed"`` evaluates the closed form exactly as typeset, with
    the lower incomplete gamma at a negative order continued analytically;
    it is kept for validation only and does not equal the other two.
    """
    if lambda_a_active < 0:
        raise ParameterError("density must be non-negative")
    if lambda_a_active == 0 or gamma == 0:
        return 1.0
    return float(np.exp(-2.0 * np.pi * lambda_a_active
                        * laplace_exponent(gamma, r_out, eta, method)))


# --- signal power under the uniform-disk assumption -----------------------------

def expected_ordered_distance(m, n, r_in):
    """Mean distance to the ``m``-th closest of ``n`` points uniform in a disk."""
    m = np.asarray(m)
    if np.any(m < 0) or np.any(m > n - 1):
        raise ParameterError("need 0 <= m <= n - 1")
    return r_in * np.exp(special.gammaln(m + 1.5) + special.gammaln(n + 1)
                         - special.gammaln(m + 1) - special.gammaln(n + 1.5))


def signal_power(n, r_in, eta):
    """Deterministic coherent signal power with ``n`` serving RRHs."""
    m = np.arange(n)
    return float(np.sum(expected_ordered_distance(m, n, r_in) ** (-eta)) ** 2)


# --- spectral efficiency ---------------------------------------------------------

def expected_log_sir(signal, lambda_a_active, r_out, eta, method="quadrature"):
    """``E[log2(1 + S / I)]`` over the interference for each fixed ``S`` in ``signal``.

    Uses ``ln(1 + S/I) = int_0^inf (e^{-g I} - e^{-g (I+S)}) / g dg`` with
    ``g = exp(t)``, which keeps the integrand bounded at the origin.
    """
    signal = np.atleast_1d(np.asarray(signal, dtype=float))
    s_max, s_min = signal.max(), signal.min()
    shape = 1.0 - 1.0 / eta
    # beyond gamma_hi the Laplace transform is below exp(-60)
    gamma_hi = (60.0 / (np.pi * lambda_a_active * special.gamma(shape))) ** eta
    gamma_hi = max(gamma_hi, 60.0 * r_out ** (2 * eta), 1.0 / s_min)
    t_lo = np.log(1e-14 / s_max)
    t_hi = np.log(gamma_hi)

    def f(t):
        g = np.exp(t)
        return interference_laplace(g, lambda_a_active, r_out, eta, method) * -np.expm1(-g * signal)

    val, err = integrate.quad_vec(f, t_lo, t_hi, epsabs=EPSABS, epsrel=EPSREL, limit=400)
    if not np.all(np.isfinite(val)):
        raise NumericalError("spectral-efficiency quadrature failed")
    return val / LN2


def avg_user_se_fog(params, theta_source="auto", theta_trials=DEFAULT_THETA_TRIALS,
                    seed=0, cap=DEFAULT_SE_CAP, laplace_method="quadrature"):
    """Spatially averaged large-M spectral efficiency of a served user."""
    lam_active = active_rrh_density(params)
    if lam_active <= 0:
        return float(cap)
    pmf = serving_count_pmf(params, theta_source, theta_trials, seed)
    if pmf.sum() <= 0:
        return float(cap)
    n = np.arange(1, pmf.size + 1)
    keep = pmf > 0
    signal = np.array([signal_power(k, params.disks.r_in, params.eta) for k in n[keep]])
    per_n = expected_log_sir(signal, lam_active, params.disks.r_out, params.eta, laplace_method)
    return float(np.dot(pmf[keep], per_n))


def area_se_fog(params, theta_source="auto", theta_trials=DEFAULT_THETA_TRIALS,
                seed=0, cap=DEFAULT_SE_CAP):
    """``(per-pilot area SE, total area SE over Q groups)`` in b/s/Hz/km^2."""
    source = resolve_theta_source(params, theta_source)
    lt = copilot_density(params, source, theta_trials, seed)
    if lt <= 0:
        return 0.0, 0.0
    per_pilot = lt * avg_user_se_fog(params, source, theta_trials, seed, cap)
    return per_pilot, params.q_count * per_pilot


def outage_probability(params, mode="void_disk", theta_source="closed_form",
                       theta_trials=DEFAULT_THETA_TRIALS, seed=0):
    """``void_disk``: no RRH within ``r_in``. ``not_allowed``: no RRH may serve."""
    if mode == "void_disk":
        return float(np.exp(-params.mu))
    if mode == "not_allowed":
        return 1.0 - allowed_probability(params, theta_source, theta_trials, seed)
    raise ParameterError(f"unknown outage mode {mode!r}")
