"""Coded uplink pilots and the trusted-pilot detection rules.

A pilot is ``sqrt(pu) * [sqrt(Q) s_q, sqrt(2) w_l]``: an orthonormal
first-field sequence ``s_q`` that names the pilot group and an equal-weight
binary word ``w_l`` of length ``Q'`` and weight ``Q'/2`` that names the user
inside the group.

Words are indexed by the lexicographic rank of their support (the sorted
positions of their ones), so for ``Q' = 4`` the order is 1100, 1010, 1001,
0110, 0101, 0011. Rank and unrank run in ``O(Q')`` without materialising the
code.
"""

from dataclasses import dataclass, field
from math import comb
from typing import Optional

import numpy as np

from .errors import CapacityError, ParameterError
from .geometry import PointSet
from .streams import substream


def rank_word(word):
    """Codeword index of an equal-weight binary word."""
    word = np.asarray(word).astype(bool)
    n = word.size
    support = np.flatnonzero(word)
    k = support.size
    r = comb(n, k) - 1
    for i, c in enumerate(support):
        r -= comb(n - 1 - int(c), k - i)
    return r


def unrank_word(index, n, k=None):
    """Inverse of :func:`rank_word` for words of length ``n`` and weight ``k``."""
    if k is None:
        k = n // 2
    total = comb(n, k)
    if not 0 <= index < total:
        raise ParameterError(f"codeword index {index} outside [0, {total})")
    word = np.zeros(n, dtype=np.int8)
    pos = 0
    remaining = k
    # walk positions left to right; taking position ``pos`` skips no words,
    # leaving it empty skips the comb(n-pos-1, remaining-1) words that take it
    while remaining:
        block = comb(n - pos - 1, remaining - 1)
        if index < block:
            word[pos] = 1
            remaining -= 1
        else:
            index -= block
        pos += 1
    return word


@dataclass(frozen=True)
class PilotCodebook:
    q_count: int
    qprime: int
    pu: float = 1.0
    first_field: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.q_count < 1:
            raise ParameterError("Q must be at least 1")
        if self.qprime < 2 or self.qprime % 2:
            raise ParameterError("Q' must be an even integer >= 2")
        if not self.pu > 0:
            raise ParameterError("pilot power must be positive")
        # unitary DFT: rows are mutually orthogonal unit-norm sequences
        q = self.q_count
        n = np.arange(q)
        s = np.exp(-2j * np.pi * np.outer(n, n) / q) / np.sqrt(q)
        object.__setattr__(self, "first_field", s)

    @property
    def length(self):
        """Pilot dimension ``L = Q + Q'``."""
        return self.q_count + self.qprime

    @property
    def code_size(self):
        """Number of equal-weight words, ``C(Q', Q'/2)``."""
        return comb(self.qprime, self.qprime // 2)

    @property
    def size(self):
        return self.q_count * self.code_size

    def word(self, ell):
        return unrank_word(ell, self.qprime)

    def rank(self, word):
        return rank_word(word)

    def sequence(self, q, ell):
        """The full pilot ``x_{q, ell}`` of length ``L``."""
        first = np.sqrt(self.q_count) * self.first_field[q]
        second = np.sqrt(2.0) * self.word(ell)
        return np.sqrt(self.pu) * np.concatenate([first, second.astype(complex)])


def build_codebook(Q, Qprime, pu=1.0):
    return PilotCodebook(int(Q), int(Qprime), float(pu))


@dataclass(frozen=True)
class PilotAssignment:
    """Pilot group ``groups[j]`` and codeword index ``codewords[j]`` per user."""

    groups: np.ndarray
    codewords: np.ndarray
    q_count: int

    def __len__(self):
        return self.groups.size

    def members(self, q):
        return np.flatnonzero(self.groups == q)

    def words(self, codebook):
        """Binary second-field words, one row per user."""
        if len(self) == 0:
            return np.zeros((0, codebook.qprime), dtype=np.int8)
        return np.stack([codebook.word(int(c)) for c in self.codewords])

    def lookup(self):
        """Map ``(group, codeword) -> user``."""
        return {(int(q), int(c)): j for j, (q, c) in enumerate(zip(self.groups, self.codewords))}


def assign_pilots(users, codebook, rng_seed):
    """Uniform pilot-group choice, codewords distinct within each group."""
    n = len(users) if isinstance(users, PointSet) else int(users)
    rng = substream(rng_seed)
    groups = rng.integers(0, codebook.q_count, size=n)
    codewords = np.empty(n, dtype=np.int64)
    for q in range(codebook.q_count):
        idx = np.flatnonzero(groups == q)
        if idx.size > codebook.code_size:
            raise CapacityError(
                f"group {q} has {idx.size} users but only {codebook.code_size} codewords")
        if idx.size:
            codewords[idx] = rng.choice(codebook.code_size, size=idx.size, replace=False)
    return PilotAssignment(groups, codewords, codebook.q_count)


@dataclass(frozen=True)
class TrustDecision:
    trusted: bool
    codeword_index: Optional[int] = None
    recovered_word: Optional[np.ndarray] = field(default=None, repr=False)
    user: Optional[int] = None


UNTRUSTED = TrustDecision(False)


def quantize(x, tau):
    """One-bit quantizer: 1 where ``x >= tau``, else 0."""
    return (np.asarray(x) >= tau).astype(np.int8)


def detect_trusted(mrc_second_field, tau_useful, tau_interf):
    """Two-threshold trusted-pilot rule on the combined second pilot field.

    The pilot is trusted when quantizing at ``tau_useful`` yields a word of
    weight exactly ``Q'/2`` and every position outside that word is also
    below ``tau_interf``.
    """
    if not tau_useful >= tau_interf >= 0:
        raise ParameterError("thresholds must satisfy tau_useful >= tau_interf >= 0")
    y = np.real(np.asarray(mrc_second_field))
    n = y.size
    if n < 2 or n % 2:
        raise ParameterError("second field length must be even")
    word = quantize(y, tau_useful)
    if int(word.sum()) != n // 2:
        return UNTRUSTED
    if np.any((1 - word) * quantize(y, tau_interf)):
        return UNTRUSTED
    return TrustDecision(True, rank_word(word), word)


def detect_trusted_batch(y, tau_useful, tau_interf):
    """Row-wise :func:`detect_trusted`: returns ``(trusted, words)`` where
    ``words`` holds the recovered word of each row (meaningful where trusted)."""
    y = np.real(np.atleast_2d(np.asarray(y)))
    word = quantize(y, tau_useful)
    ok = word.sum(axis=1) == y.shape[1] // 2
    ok &= ~np.any((1 - word) * quantize(y, tau_interf), axis=1)
    return ok, word


def thresholds_from_radii(disks, eta, pu=1.0):
    """Amplitude thresholds equivalent to the coverage and protection radii."""
    scale = np.sqrt(2.0 * pu)
    return scale * disks.r_in ** (-eta), scale * disks.r_out ** (-eta)


def geometric_trust(rrh, group_users, disks, window=None):
    """Trusted iff exactly one group user lies within ``r_in`` of ``rrh`` and no
    other group user lies within ``r_out``. ``user`` is the index of that user
    in ``group_users``."""
    pts = group_users.points if isinstance(group_users, PointSet) else group_users
    pts = np.asarray(pts, dtype=float).reshape(-1, 2)
    if window is None:
        rel = pts - np.asarray(rrh, dtype=float)
    else:
        rel = window.displacement(pts, rrh)
    dist = np.hypot(rel[:, 0], rel[:, 1])
    inner = np.flatnonzero(dist <= disks.r_in)
    if inner.size != 1 or np.count_nonzero(dist <= disks.r_out) != 1:
        return UNTRUSTED
    return TrustDecision(True, user=int(inner[0]))
