"""Backend selection for the hot kernels.

The compiled extension is used when it imports; otherwise the numpy fallback.
Set ``BOLAB_BACKEND=python`` to force the fallback.
"""

import os

import numpy as np

from . import _fallback

GAUSSIAN = _fallback.GAUSSIAN
RADIAL_EXPONENTIAL = _fallback.RADIAL_EXPONENTIAL

_compiled = None
if os.environ.get("BOLAB_BACKEND", "").lower() != "python":
    try:
        from . import _kernels as _compiled
    except ImportError:  # extension not built
        _compiled = None

_impl = _compiled if _compiled is not None else _fallback
BACKEND = "cython" if _compiled is not None else "python"


def backends():
    """Available kernel implementations, keyed by name."""
    found = {"python": _fallback}
    if _compiled is not None:
        found["cython"] = _compiled
    return found


def sample_block(key, start, count, amps, law_code, scale):
    """Complex samples ``amps[m] * g(i, m)`` for rows ``start..start+count``."""
    return _impl.sample_block(key, start, count, amps, law_code, scale)


def abs2_block(key, start, count, amps, law_code, scale, first_mode=0):
    """Squared moduli of :func:`sample_block` without drawing the angles.

    ``amps[j]`` belongs to mode ``first_mode + j`` (0-based), so a tail of modes
    can be drawn on its own and still match the full ensemble.
    """
    return _impl.abs2_block(key, start, count, amps, law_code, scale, int(first_mode))


def centered_sums_block(key, start, count, amps, law_code, scale, grid):
    """Partial sums of ``|z_k|^2 - amps_k^2`` evaluated at the (1-based, sorted) grid."""
    grid = np.asarray(grid, dtype=np.int64)
    if grid.size and (np.any(np.diff(grid) < 0) or grid[0] < 1 or grid[-1] > len(amps)):
        raise ValueError("grid must be sorted within 1..len(amps)")
    return _impl.centered_sums_block(key, start, count, amps, law_code, scale, grid)


def flow_rows(z, t, n_out=None, shift=0.0, tail_mass=None):
    """Rotate the first ``n_out`` modes of every row by ``t * (beta_n + shift * n)``.

    ``tail_mass`` (one value per row) is the total action of modes beyond the
    columns of ``z``; they change the frequencies but are not returned.
    """
    z = np.atleast_2d(np.asarray(z, dtype=np.complex128))
    n_modes = z.shape[1]
    n_out = n_modes if n_out is None else int(n_out)
    if not 0 <= n_out <= n_modes:
        raise ValueError(f"n_out={n_out} outside 0..{n_modes}")
    if tail_mass is not None:
        tail_mass = np.asarray(tail_mass, dtype=np.float64)
        if tail_mass.shape != (z.shape[0],):
            raise ValueError("tail_mass needs one value per row")
    return _impl.flow_rows(z, float(t), n_out, float(shift), tail_mass)
