"""Channels, pilot observations, ZFBF precoding and ergodic spectral efficiencies.

Large-scale gains follow ``beta = r ** -eta`` with ``r`` in km. Small-scale
fading is i.i.d. CN(0, 1) per antenna. Spectral efficiencies are in b/s/Hz.
"""

import logging
from dataclasses import dataclass

import numpy as np

from .errors import NumericalError, ParameterError, SingularityError

log = logging.getLogger(__name__)

DEFAULT_SE_CAP = 40.0


@dataclass(frozen=True)
class NoisePower:
    """Noise variance, per-stream DL power and UL pilot power per dimension.

    ``sigma2_n = 0`` gives the noiseless (interference-limited) model.
    """

    sigma2_n: float = 0.0
    ps_fog: float = 1.0
    pu: float = 1.0

    def __post_init__(self):
        if self.sigma2_n < 0:
            raise ParameterError("noise variance must be non-negative")
        if not (self.ps_fog > 0 and self.pu > 0):
            raise ParameterError("powers must be positive")

    @property
    def dl_noise(self):
        """Noise variance after folding in the per-stream power."""
        return self.sigma2_n / self.ps_fog

    def estimate_noise(self, pilot_len):
        """Per-component noise variance of a group channel estimate."""
        return self.sigma2_n / (self.pu * pilot_len)


def pathloss(r, eta, min_distance=0.0):
    r = np.maximum(np.asarray(r, dtype=float), min_distance)
    with np.errstate(divide="ignore"):
        return r ** (-eta)


def crandn(rng, shape):
    """Standard circularly-symmetric complex normal samples."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def draw_channels(beta, M, rng):
    """Channel vectors ``g = sqrt(beta) h`` with shape ``beta.shape + (M,)``."""
    beta = np.asarray(beta, dtype=float)
    return np.sqrt(beta)[..., None] * crandn(rng, beta.shape + (M,))


def pilot_field_1(g, groups, codebook, sigma2_n, rng):
    """Received first pilot field at one RRH (``M x Q``).

    ``g`` has one row per user (shape ``(J, M)``) and ``groups[j]`` is the
    user's pilot group.
    """
    g = np.asarray(g)
    M = g.shape[1]
    Q = codebook.q_count
    summed = np.zeros((M, Q), dtype=complex)
    for j, q in enumerate(groups):
        summed[:, q] += g[j]
    y = np.sqrt(codebook.pu * Q) * summed @ codebook.first_field
    if sigma2_n > 0:
        y = y + np.sqrt(sigma2_n) * crandn(rng, y.shape)
    return y


def estimate_group_channel(pilot_field_1, q, codebook):
    """Least-squares channel estimate of pilot group ``q`` (correlate with ``s_q``)."""
    s = codebook.first_field[q]
    return pilot_field_1 @ s.conj() / np.sqrt(codebook.pu * codebook.q_count)


def pilot_field_2(g, words, pu, sigma2_n, rng):
    """Received second pilot field at one RRH (``M x Q'``)."""
    g = np.asarray(g)
    words = np.asarray(words, dtype=float)
    y = np.sqrt(2.0 * pu) * g.T @ words
    if sigma2_n > 0:
        y = y + np.sqrt(sigma2_n) * crandn(rng, y.shape)
    return y


def mrc_second_field(pilot_field_2, ghat, M=None):
    """Real part of ``(1/M) Y^H ghat``; approaches ``sqrt(2 pu) sum beta w``."""
    y2 = np.asarray(pilot_field_2)
    if M is None:
        M = y2.shape[0]
    return np.real(y2.conj().T @ np.asarray(ghat)) / M


def zfbf_precoders(estimates, rcond=1e-10):
    """Unit-norm zero-forcing precoders, one column per estimate column."""
    G = np.asarray(estimates, dtype=complex)
    if G.ndim == 1:
        G = G[:, None]
    M, U = G.shape
    if U > M:
        raise SingularityError(f"{U} streams exceed {M} antennas")
    if U == 0:
        return np.zeros((M, 0), dtype=complex)
    gram = G.conj().T @ G
    if np.linalg.cond(gram) * rcond > 1.0:
        raise SingularityError("channel estimates are rank deficient")
    V = G @ np.linalg.inv(gram)
    return V / np.linalg.norm(V, axis=0)


def mmse_scaling(beta_target, group_betas, sigma2_n, pu, Q):
    """``alpha = beta / (sum(group_betas) + sigma2_n / (pu Q))``."""
    denom = float(np.sum(group_betas)) + sigma2_n / (pu * Q)
    if denom <= 0:
        raise ParameterError("group gains and noise are all zero")
    return beta_target / denom


@dataclass
class ActiveSet:
    """Which user each RRH serves on each pilot group.

    ``serves[k, q]`` is the index of the user RRH ``k`` serves on pilot group
    ``q``, or -1. ``groups[j]`` is user ``j``'s pilot group.
    """

    serves: np.ndarray
    groups: np.ndarray

    def __post_init__(self):
        self.serves = np.asarray(self.serves, dtype=np.int64)
        self.groups = np.asarray(self.groups, dtype=np.int64)
        served = self.serves[self.serves >= 0]
        if served.size and np.any(self.groups[served] != np.nonzero(self.serves >= 0)[1]):
            raise ParameterError("an RRH serves a user on a pilot group it does not use")

    @property
    def loads(self):
        """``|U_k|`` for every RRH."""
        return np.count_nonzero(self.serves >= 0, axis=1)

    def serving(self, j):
        return np.flatnonzero(self.serves[:, self.groups[j]] == j)

    def trusted_interferers(self, j):
        col = self.serves[:, self.groups[j]]
        return np.flatnonzero((col >= 0) & (col != j))

    def untrusted(self, j):
        return np.flatnonzero(self.serves[:, self.groups[j]] < 0)


def mmse_scaling_matrix(betas, active, noise, pilot_len):
    """``alpha[k, j]`` for every RRH-user pair; ``betas`` is ``(K, J)``."""
    betas = np.asarray(betas, dtype=float)
    K = betas.shape[0]
    groups = active.groups
    n_groups = int(groups.max()) + 1 if groups.size else 0
    group_sum = np.zeros((K, n_groups))
    for q in range(n_groups):
        group_sum[:, q] = betas[:, groups == q].sum(axis=1)
    denom = group_sum[:, groups] + noise.estimate_noise(pilot_len)
    with np.errstate(invalid="ignore", divide="ignore"):
        alpha = np.where(denom > 0, betas / denom, 0.0)
    return alpha


def ergodic_se_finite_m(j, active, betas, alphas, noise, M):
    """Finite-M ZFBF ergodic spectral efficiency of user ``j``.

    ``betas`` and ``alphas`` are ``(K, J)`` arrays over all RRHs and users.
    Returns 0 when no RRH serves the user.
    """
    serving = active.serving(j)
    if serving.size == 0:
        return 0.0
    loads = active.loads
    if np.any(loads > M):
        raise ParameterError("an RRH serves more streams than it has antennas")
    b = betas[:, j]
    a = alphas[:, j]
    tilde = active.trusted_interferers(j)
    dof = M - loads + 1
    coherent = np.sum(np.sqrt(a[serving] * b[serving] * dof[serving])) ** 2
    both = np.concatenate([serving, tilde])
    denom = (noise.dl_noise
             - np.sum(a[both] * b[both] * loads[both])
             + np.sum(b * loads)
             + np.sum(a[tilde] * b[tilde] * dof[tilde]))
    if not denom > 0:
        log.warning("non-positive SINR denominator %r for user %d", denom, j)
        raise NumericalError(f"SINR denominator {denom!r} is not positive")
    return float(np.log2(1.0 + coherent / denom))


def se_infinite_m(serving_betas, copilot_trusted_betas, cap=DEFAULT_SE_CAP):
    """Large-M spectral efficiency ``log2(1 + (sum beta)^2 / sum beta^2)``.

    Returns 0 with no serving RRH and ``cap`` with no trusted co-pilot
    interferer; finite values are not capped.
    """
    s = float(np.sum(serving_betas))
    if s <= 0:
        return 0.0
    i = float(np.sum(np.square(copilot_trusted_betas)))
    if i <= 0:
        return float(cap)
    return float(np.log2(1.0 + s * s / i))
