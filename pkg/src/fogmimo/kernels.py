"""Hot-loop kernels with a compiled backend and a pure-Python fallback.

The compiled extension ``fogmimo._ckernels`` is used when it was built and
importable. Setting ``FOGMIMO_PURE_PYTHON=1`` in the environment forces the
numpy fallback. Both backends return identical results (up to the last ulp
for the floating-point kernels).

Kernels
-------
uncovered_counts(darts, centers, offsets, r_out)
    For each trial ``t`` count the darts not within ``r_out`` of any center in
    ``centers[offsets[t]:offsets[t+1]]``.
distance_matrix(a, b, side)
    Pairwise distances; minimum-image convention on a square torus of side
    ``side`` when ``side > 0``.
gain_matrix(a, b, side, eta, min_distance)
    Pairwise ``max(r, min_distance) ** -eta``.
"""

import os

from . import _pykernels

BACKEND = "python"

if os.environ.get("FOGMIMO_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as _impl
        BACKEND = "compiled"
    except ImportError:  # extension not built
        _impl = _pykernels
else:
    _impl = _pykernels

uncovered_counts = _impl.uncovered_counts
distance_matrix = _impl.distance_matrix
gain_matrix = _impl.gain_matrix

__all__ = ["BACKEND", "uncovered_counts", "distance_matrix", "gain_matrix"]
