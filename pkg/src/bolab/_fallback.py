"""Pure numpy implementation of the hot kernels.

Mirrors ``_kernels.pyx`` formula for formula and in the same summation order,
so the two backends differ only by libm rounding in log/sqrt/sin/cos.
"""

import numpy as np

from .rng import SLOTS_PER_MODE, row_keys, to_unit, words

GAUSSIAN = 0
RADIAL_EXPONENTIAL = 1
TWO_PI = 2.0 * np.pi
PHASE_REDUCE_AT = 2.0 ** 30


def _radius_angle(key, start, count, n_modes, law_code, scale, need_angle=True, first_mode=0):
    rows = row_keys(key, start, count)
    base = np.arange(first_mode, first_mode + n_modes, dtype=np.uint64) * np.uint64(SLOTS_PER_MODE)
    u0 = to_unit(words(rows, base))
    if law_code == GAUSSIAN:
        r = scale * np.sqrt(-np.log(u0))
    elif law_code == RADIAL_EXPONENTIAL:
        u2 = to_unit(words(rows, base + np.uint64(2)))
        r = scale * (-np.log(u0) - np.log(u2))
    else:
        raise ValueError(f"unknown law code {law_code}")
    if not need_angle:
        return r, None
    angle = TWO_PI * to_unit(words(rows, base + np.uint64(1)))
    return r, angle


def sample_block(key, start, count, amps, law_code, scale):
    amps = np.ascontiguousarray(amps, dtype=np.float64)
    r, angle = _radius_angle(key, start, count, amps.shape[0], law_code, scale)
    rad = amps[None, :] * r
    out = np.empty(rad.shape, dtype=np.complex128)
    out.real = rad * np.cos(angle)
    out.imag = rad * np.sin(angle)
    return out


def abs2_block(key, start, count, amps, law_code, scale, first_mode=0):
    amps = np.ascontiguousarray(amps, dtype=np.float64)
    r, _ = _radius_angle(key, start, count, amps.shape[0], law_code, scale, need_angle=False,
                         first_mode=first_mode)
    rad = amps[None, :] * r
    return rad * rad


def centered_sums_block(key, start, count, amps, law_code, scale, grid):
    amps = np.ascontiguousarray(amps, dtype=np.float64)
    terms = abs2_block(key, start, count, amps, law_code, scale) - (amps * amps)[None, :]
    partial = np.cumsum(terms, axis=1)
    return np.ascontiguousarray(partial[:, np.asarray(grid, dtype=np.int64) - 1])


def min_sums(abs2, n_out, tail_mass=None):
    """Rows of sum_k min(n, k) |z_k|^2 for n = 1..n_out, all terms nonnegative.

    ``tail_mass`` adds, per row, the actions of modes past the last column.
    """
    rows, n_modes = abs2.shape
    k = np.arange(1, n_modes + 1, dtype=np.float64)
    weighted = np.cumsum(abs2 * k[None, :], axis=1)[:, :n_out]
    extra = np.zeros((rows, 1)) if tail_mass is None else np.asarray(tail_mass, dtype=np.float64)[:, None]
    # suffix[:, j] = sum_{k >= j} (0-based), accumulated from the far end like the compiled loop
    suffix = np.cumsum(np.concatenate([extra, abs2[:, ::-1]], axis=1), axis=1)[:, ::-1]
    return weighted + k[None, :n_out] * suffix[:, 1:n_out + 1]


def flow_rows(z, t, n_out, shift, tail_mass=None):
    z = np.ascontiguousarray(z, dtype=np.complex128)
    abs2 = z.real * z.real + z.imag * z.imag
    n = np.arange(1, n_out + 1, dtype=np.float64)
    beta = n * n - 2.0 * min_sums(abs2, n_out, tail_mass)
    phase = t * (beta + shift * n[None, :])
    big = np.abs(phase) > PHASE_REDUCE_AT
    if big.any():
        phase[big] = np.fmod(phase[big], TWO_PI)
    c = np.cos(phase)
    s = np.sin(phase)
    a = z.real[:, :n_out]
    b = z.imag[:, :n_out]
    out = np.empty((z.shape[0], n_out), dtype=np.complex128)
    out.real = a * c - b * s
    out.imag = a * s + b * c
    return out
