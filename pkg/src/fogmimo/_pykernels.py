"""Pure-numpy versions of the compiled kernels in ``_ckernels.pyx``."""

import numpy as np

# darts x centers blocks are processed in slabs of about this many pairs
_BLOCK = 1 << 20


def uncovered_counts(darts, centers, offsets, r_out):
    darts = np.ascontiguousarray(darts, dtype=np.float64)
    centers = np.ascontiguousarray(centers, dtype=np.float64)
    offsets = np.asarray(offsets, dtype=np.int64)
    n_trials = offsets.size - 1
    n_darts = darts.shape[0]
    r2 = r_out * r_out
    out = np.full(n_trials, n_darts, dtype=np.int64)
    for t in range(n_trials):
        c = centers[offsets[t]:offsets[t + 1]]
        if c.shape[0] == 0:
            continue
        covered = np.zeros(n_darts, dtype=bool)
        step = max(1, _BLOCK // max(1, n_darts))
        for lo in range(0, c.shape[0], step):
            blk = c[lo:lo + step]
            dx = darts[:, 0, None] - blk[None, :, 0]
            dy = darts[:, 1, None] - blk[None, :, 1]
            covered |= (dx * dx + dy * dy <= r2).any(axis=1)
        out[t] = n_darts - np.count_nonzero(covered)
    return out


def distance_matrix(a, b, side):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    d = a[:, None, :] - b[None, :, :]
    if side > 0:
        d -= side * np.floor(d / side + 0.5)
    return np.hypot(d[..., 0], d[..., 1])


def gain_matrix(a, b, side, eta, min_distance):
    r = distance_matrix(a, b, side)
    np.maximum(r, min_distance, out=r)
    with np.errstate(divide="ignore"):
        return r ** (-eta)
