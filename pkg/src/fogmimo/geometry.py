"""Point processes, simulation windows and the uncovered-fraction machinery.

All lengths are in km and all densities in points per km^2.
"""

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import ParameterError
from .streams import DARTS, THETA, substream

DEFAULT_DARTS = 4096


@dataclass(frozen=True)
class Window:
    """Square observation window ``[-half_width, half_width)^2``.

    With ``boundary="torus"`` opposite edges are identified and distances use
    the minimum-image convention, which emulates the infinite plane. With
    ``boundary="guard"`` points are drawn on a larger square extended by
    ``margin`` on every side and only the inner square is observed.
    """

    half_width: float
    boundary: str = "torus"
    margin: float = 0.0

    def __post_init__(self):
        if not self.half_width > 0:
            raise ParameterError("window half_width must be positive")
        if self.boundary not in ("torus", "guard"):
            raise ParameterError(f"unknown boundary mode {self.boundary!r}")
        if self.margin < 0:
            raise ParameterError("guard margin must be non-negative")
        if self.boundary == "torus" and self.margin != 0:
            raise ParameterError("a torus window has no guard margin")

    @property
    def side(self):
        return 2.0 * self.half_width

    @property
    def area(self):
        """Area of the observed region."""
        return self.side ** 2

    @property
    def sample_half_width(self):
        return self.half_width + self.margin

    @property
    def sample_area(self):
        return (2.0 * self.sample_half_width) ** 2

    @property
    def period(self):
        """Torus period passed to the distance kernels (0 means no wrap)."""
        return self.side if self.boundary == "torus" else 0.0

    def require_margin(self, radius):
        if self.boundary == "guard" and self.margin < radius:
            raise ParameterError(
                f"guard margin {self.margin} km is below the required {radius} km")

    def inside(self, points):
        points = np.asarray(points, dtype=float).reshape(-1, 2)
        hw = self.half_width
        return np.all((points >= -hw) & (points < hw), axis=1)

    def displacement(self, points, origin):
        """Vectors from ``origin`` to ``points`` (minimum image on a torus)."""
        d = np.asarray(points, dtype=float).reshape(-1, 2) - np.asarray(origin, dtype=float)
        if self.boundary == "torus":
            d -= self.side * np.floor(d / self.side + 0.5)
        return d


@dataclass(frozen=True)
class PointSet:
    points: np.ndarray = field(repr=False)
    density: float = 0.0

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float).reshape(-1, 2)
        object.__setattr__(self, "points", pts)

    def __len__(self):
        return self.points.shape[0]


@dataclass(frozen=True)
class DiskPair:
    """Coverage radius ``r_in`` and protection radius ``r_out``."""

    r_in: float
    r_out: float

    def __post_init__(self):
        if not self.r_in > 0:
            raise ParameterError("r_in must be positive")
        if self.r_out < self.r_in:
            raise ParameterError("r_out must be at least r_in (epsilon >= 0)")

    @classmethod
    def from_epsilon(cls, r_in, epsilon=0.0):
        if epsilon < 0:
            raise ParameterError("epsilon must be non-negative")
        return cls(r_in, (1.0 + epsilon) * r_in)

    @property
    def epsilon(self):
        return self.r_out / self.r_in - 1.0


def sample_ppp(density, window, rng_seed):
    """Draw a homogeneous PPP of ``density`` on the sampling square of ``window``."""
    if density < 0:
        raise ParameterError("density must be non-negative")
    rng = substream(rng_seed)
    hw = window.sample_half_width
    n = rng.poisson(density * window.sample_area)
    pts = rng.uniform(-hw, hw, size=(n, 2))
    return PointSet(pts, density)


def disk_darts(radius, count, rng):
    """``count`` points uniform in the disk of ``radius`` centred at the origin."""
    r = radius * np.sqrt(rng.random(count))
    phi = 2.0 * np.pi * rng.random(count)
    return np.column_stack((r * np.cos(phi), r * np.sin(phi)))


def uncovered_fraction(user, copilot_users, disks, resolution=DEFAULT_DARTS,
                       seed=0, window=None):
    """Fraction of the coverage disk of ``user`` outside every protection disk.

    The coverage disk has radius ``disks.r_in`` around ``user``; each co-pilot
    user carries a protection disk of radius ``disks.r_out``. Two cases are
    resolved exactly: no protection disk reaches the coverage disk (1.0) and
    one protection disk contains it entirely (0.0). Otherwise the fraction is
    estimated from ``resolution`` uniform darts drawn from the sub-stream of
    ``seed``.
    """
    if resolution < 1:
        raise ParameterError("resolution must be positive")
    pts = copilot_users.points if isinstance(copilot_users, PointSet) else copilot_users
    pts = np.asarray(pts, dtype=float).reshape(-1, 2)
    if window is None:
        rel = pts - np.asarray(user, dtype=float)
    else:
        rel = window.displacement(pts, user)
    dist = np.hypot(rel[:, 0], rel[:, 1])
    near = dist < disks.r_in + disks.r_out
    if not near.any():
        return 1.0
    if np.any(dist <= disks.r_out - disks.r_in):
        return 0.0
    darts = disk_darts(disks.r_in, resolution, substream(seed, DARTS))
    centers = np.ascontiguousarray(rel[near])
    offsets = np.array([0, centers.shape[0]], dtype=np.int64)
    free = kernels.uncovered_counts(darts, centers, offsets, float(disks.r_out))
    return float(free[0]) / resolution


@dataclass(frozen=True)
class ThetaDistribution:
    """Empirical distribution of the uncovered fraction.

    ``samples`` holds one value per trial; the point masses at 0 and 1 are the
    fractions of trials that landed exactly there. ``density`` is a histogram
    over ``edges`` covering the open interval, normalised so that its integral
    plus both masses equals one.
    """

    samples: np.ndarray = field(repr=False)
    mass0: float
    mass1: float
    edges: np.ndarray = field(repr=False)
    density: np.ndarray = field(repr=False)

    @property
    def trials(self):
        return self.samples.size

    @property
    def total_mass(self):
        return self.mass0 + self.mass1 + float(np.sum(self.density * np.diff(self.edges)))

    def mean(self):
        return float(self.samples.mean())

    def expect(self, fn):
        """Empirical ``E[fn(theta)]``; ``fn`` must accept an array."""
        return float(np.mean(fn(self.samples)))


def theta_distribution(samples, bins=50):
    samples = np.asarray(samples, dtype=float)
    zero = samples == 0.0
    one = samples == 1.0
    inner = samples[~(zero | one)]
    edges = np.linspace(0.0, 1.0, bins + 1)
    counts, _ = np.histogram(inner, bins=edges)
    density = counts / (samples.size * np.diff(edges)) if samples.size else counts * 0.0
    return ThetaDistribution(samples, float(zero.mean()), float(one.mean()), edges, density)


def sample_theta(lambda_copilot, disks, trials, rng_seed, resolution=DEFAULT_DARTS):
    """Per-trial uncovered fractions for a typical user at the origin.

    Only co-pilot users within ``r_in + r_out`` can touch the coverage disk,
    so each trial draws a Poisson number of them uniformly on that disk. One
    dart set from the ``DARTS`` sub-stream is shared by all trials; for any
    fixed dart set the expected estimate is still exactly the mean uncovered
    fraction.

    The atoms are decided geometrically: ``theta = 1`` exactly when no co-pilot
    user is within reach and ``theta = 0`` exactly when one protection disk
    contains the coverage disk. Dart estimates in every other trial are kept
    half a dart inside ``(0, 1)``.
    """
    if lambda_copilot < 0:
        raise ParameterError("lambda_copilot must be non-negative")
    if trials < 1:
        raise ParameterError("trials must be positive")
    reach = disks.r_in + disks.r_out
    rng = substream(rng_seed, THETA)
    counts = rng.poisson(lambda_copilot * np.pi * reach ** 2, size=trials)
    offsets = np.zeros(trials + 1, dtype=np.int64)
    np.cumsum(counts, out=offsets[1:])
    centers = disk_darts(reach, int(offsets[-1]), rng)
    dist = np.hypot(centers[:, 0], centers[:, 1])

    theta = np.ones(trials)
    contained = np.zeros(trials, dtype=bool)
    inside_hit = dist <= disks.r_out - disks.r_in
    if inside_hit.any():
        owner = np.repeat(np.arange(trials), counts)
        contained[np.unique(owner[inside_hit])] = True
    theta[contained] = 0.0
    todo = np.flatnonzero((counts > 0) & ~contained)
    if todo.size:
        darts = disk_darts(disks.r_in, resolution, substream(rng_seed, DARTS))
        sub_counts = counts[todo]
        sub_offsets = np.zeros(todo.size + 1, dtype=np.int64)
        np.cumsum(sub_counts, out=sub_offsets[1:])
        keep = np.zeros(trials, dtype=bool)
        keep[todo] = True
        sel = np.repeat(keep, counts)
        free = kernels.uncovered_counts(darts, np.ascontiguousarray(centers[sel]),
                                        sub_offsets, float(disks.r_out))
        half = 0.5 / resolution
        theta[todo] = np.clip(free / resolution, half, 1.0 - half)
    return theta


def estimate_theta_pdf(lambda_copilot, disks, trials, rng_seed,
                       resolution=DEFAULT_DARTS, bins=50):
    """Empirical distribution of the uncovered fraction (see :func:`sample_theta`)."""
    return theta_distribution(
        sample_theta(lambda_copilot, disks, trials, rng_seed, resolution), bins)
