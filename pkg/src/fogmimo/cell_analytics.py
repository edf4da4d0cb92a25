"""Stochastic-geometry baseline for cellular massive MIMO with fractional pilot reuse.

Each base station draws ``min(|V|, N_p)`` of its ``L`` orthogonal pilots at
random, so a given pilot is active in a cell with probability ``p_a``.
Co-pilot interferers form a thinned PPP of density ``p_a lambda_a`` outside
the serving distance.
"""

from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

from .errors import NumericalError, ParameterError

VORONOI_SHAPE = 3.575
PMF_TAIL = 1e-12
# exp(-28) < 1e-12: cut-off of the Gaussian-type radial tail
_TAIL_EXP = 28.0


@dataclass(frozen=True)
class CellParams:
    lambda_a: float
    lambda_u: float
    l_pilots: int
    n_p: int
    eta: float
    c_shape: float = VORONOI_SHAPE

    def __post_init__(self):
        if not self.lambda_a > 0:
            raise ParameterError("base-station density must be positive")
        if self.lambda_u < 0:
            raise ParameterError("user density must be non-negative")
        if not 0 < self.n_p <= self.l_pilots:
            raise ParameterError("need 0 < N_p <= L")
        if not self.eta > 1:
            raise ParameterError("pathloss exponent must exceed 1")
        if not self.c_shape > 0:
            raise ParameterError("Voronoi shape must be positive")


def voronoi_count_pmf(ell, params):
    """Probability that a typical cell holds ``ell`` users (negative binomial)."""
    ell = np.asarray(ell, dtype=float)
    if np.any(ell < 0):
        raise ParameterError("ell must be non-negative")
    lu, c = params.lambda_u, params.c_shape
    ca = c * params.lambda_a
    if lu == 0:
        return np.where(ell == 0, 1.0, 0.0)
    logp = (special.gammaln(ell + c) - special.gammaln(ell + 1) - special.gammaln(c)
            + ell * np.log(lu) + c * np.log(ca) - (ell + c) * np.log(ca + lu))
    return np.exp(logp)


def expected_served_users(params):
    """``E[min(|V|, N_p)]``."""
    ell = np.arange(params.n_p)
    return float(params.n_p + np.sum((ell - params.n_p) * voronoi_count_pmf(ell, params)))


def pilot_activity_prob(params):
    return expected_served_users(params) / params.l_pilots


def joint_pdf_r1_delta(r1, delta, params, p_a=None):
    """Joint density of the nearest co-pilot distance ``r1`` and the ratio ``delta``
    of that distance to the serving distance."""
    if p_a is None:
        p_a = pilot_activity_prob(params)
    la = params.lambda_a
    r1 = np.asarray(r1, dtype=float)
    delta = np.asarray(delta, dtype=float)
    return p_a * (2 * np.pi * la) ** 2 * (r1 / delta) ** 3 * np.exp(
        -np.pi * la * r1 ** 2 * (p_a + (1 - p_a) / delta ** 2))


def _r1_limit(delta, la, p_a):
    return np.sqrt(_TAIL_EXP / (np.pi * la * (p_a + (1 - p_a) / delta ** 2)))


def _integrate_joint(weight, params, p_a):
    la = params.lambda_a

    def integrand(r1, delta):
        return weight(r1, delta) * joint_pdf_r1_delta(r1, delta, params, p_a)

    val, err = integrate.dblquad(integrand, 1.0, np.inf, 0.0,
                                 lambda d: _r1_limit(d, la, p_a),
                                 epsabs=1e-10, epsrel=1e-8)
    if not np.isfinite(val):
        raise NumericalError("cellular double quadrature failed")
    return val


def joint_pdf_mass(params):
    """Total mass of :func:`joint_pdf_r1_delta` (1 up to quadrature error)."""
    return _integrate_joint(lambda r1, d: 1.0, params, pilot_activity_prob(params))


def avg_user_se_cellular(params):
    p_a = pilot_activity_prob(params)
    if p_a <= 0:
        raise ParameterError("no active pilots: user density is zero")
    la, eta = params.lambda_a, params.eta
    k = np.pi * la * p_a / (eta - 1.0)

    def se(r1, d):
        return np.log2(1.0 + d ** (2 * eta) / (1.0 + k * r1 ** 2))

    return _integrate_joint(se, params, p_a)


def area_se_cellular(params):
    served = expected_served_users(params)
    if served <= 0:
        return 0.0
    return params.lambda_a * served * avg_user_se_cellular(params)


def per_stream_power_cellular(pa_fog_power, params):
    """Per-stream power that gives a base station the fog RRH's average power."""
    served = expected_served_users(params)
    if served <= 0:
        raise ParameterError("expected cell load is zero")
    return pa_fog_power / served
