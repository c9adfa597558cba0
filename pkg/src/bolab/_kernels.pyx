# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels: counter-hash sampling, fused flow rotation, centered sums.

Formulas and summation order match ``_fallback.py``.  All loops run without
the GIL so thread workers scale.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport log, sqrt, sin, cos, fmod, fabs
from libc.stdint cimport uint64_t, int64_t

cnp.import_array()

cdef uint64_t GOLDEN = 0x9E3779B97F4A7C15ULL
cdef uint64_t GAMMA2 = 0xD1B54A32D192ED03ULL
cdef double TWO_POW_M52 = 2.220446049250313e-16
cdef double TWO_PI = 6.283185307179586
cdef double PHASE_REDUCE_AT = 1073741824.0

cdef enum:
    SLOTS = 4


cdef inline uint64_t mix64(uint64_t z) noexcept nogil:
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL
    return z ^ (z >> 31)


cdef inline double unit(uint64_t row, uint64_t counter) noexcept nogil:
    cdef uint64_t w = mix64(row + (counter + 1) * GAMMA2)
    return (<double>(w >> 12) + 0.5) * TWO_POW_M52


cdef inline double radius(uint64_t row, uint64_t m, int law_code, double scale) noexcept nogil:
    cdef double u0 = unit(row, SLOTS * m)
    if law_code == 0:
        return scale * sqrt(-log(u0))
    return scale * (-log(u0) - log(unit(row, SLOTS * m + 2)))


def sample_block(uint64_t key, Py_ssize_t start, Py_ssize_t count, amps, int law_code, double scale):
    if law_code not in (0, 1):
        raise ValueError(f"unknown law code {law_code}")
    cdef const double[::1] a = np.ascontiguousarray(amps, dtype=np.float64)
    cdef Py_ssize_t n_modes = a.shape[0]
    out = np.empty((count, n_modes), dtype=np.complex128)
    cdef double[:, ::1] o = out.view(np.float64)
    cdef Py_ssize_t i, m
    cdef uint64_t row
    cdef double r, ang
    with nogil:
        for i in range(count):
            row = mix64(key + <uint64_t>(start + i + 1) * GOLDEN)
            for m in range(n_modes):
                r = a[m] * radius(row, m, law_code, scale)
                ang = TWO_PI * unit(row, SLOTS * m + 1)
                o[i, 2 * m] = r * cos(ang)
                o[i, 2 * m + 1] = r * sin(ang)
    return out


def abs2_block(uint64_t key, Py_ssize_t start, Py_ssize_t count, amps, int law_code, double scale,
               Py_ssize_t first_mode=0):
    if law_code not in (0, 1):
        raise ValueError(f"unknown law code {law_code}")
    cdef const double[::1] a = np.ascontiguousarray(amps, dtype=np.float64)
    cdef Py_ssize_t n_modes = a.shape[0]
    out = np.empty((count, n_modes), dtype=np.float64)
    cdef double[:, ::1] o = out
    cdef Py_ssize_t i, m
    cdef uint64_t row
    cdef double r
    with nogil:
        for i in range(count):
            row = mix64(key + <uint64_t>(start + i + 1) * GOLDEN)
            for m in range(n_modes):
                r = a[m] * radius(row, first_mode + m, law_code, scale)
                o[i, m] = r * r
    return out


def centered_sums_block(uint64_t key, Py_ssize_t start, Py_ssize_t count, amps, int law_code,
                        double scale, grid):
    if law_code not in (0, 1):
        raise ValueError(f"unknown law code {law_code}")
    cdef const double[::1] a = np.ascontiguousarray(amps, dtype=np.float64)
    cdef const int64_t[::1] g = np.ascontiguousarray(grid, dtype=np.int64)
    cdef Py_ssize_t n_grid = g.shape[0]
    cdef Py_ssize_t n_modes = g[n_grid - 1] if n_grid else 0
    if n_modes > a.shape[0]:
        raise ValueError("grid exceeds amplitude length")
    out = np.empty((count, n_grid), dtype=np.float64)
    cdef double[:, ::1] o = out
    cdef Py_ssize_t i, m, j
    cdef uint64_t row
    cdef double r, acc
    with nogil:
        for i in range(count):
            row = mix64(key + <uint64_t>(start + i + 1) * GOLDEN)
            acc = 0.0
            j = 0
            for m in range(n_modes):
                r = a[m] * radius(row, m, law_code, scale)
                acc = acc + (r * r - a[m] * a[m])
                while j < n_grid and g[j] == m + 1:
                    o[i, j] = acc
                    j += 1
    return out


def flow_rows(z, double t, Py_ssize_t n_out, double shift, tail_mass=None):
    cdef const double[:, ::1] zz = np.ascontiguousarray(z, dtype=np.complex128).view(np.float64)
    cdef Py_ssize_t rows = zz.shape[0]
    cdef Py_ssize_t n_modes = zz.shape[1] // 2
    cdef const double[::1] extra = (np.zeros(rows) if tail_mass is None
                                    else np.ascontiguousarray(tail_mass, dtype=np.float64))
    out = np.empty((rows, n_out), dtype=np.complex128)
    cdef double[:, ::1] o = out.view(np.float64)
    cdef double[::1] tail = np.empty(n_modes + 1, dtype=np.float64)
    cdef Py_ssize_t i, k
    cdef double re, im, acc, weighted, nn, beta, phase, c, s
    with nogil:
        for i in range(rows):
            # suffix sums: tail[k] = sum_{j >= k} |z_j|^2 (0-based), same order as reversed cumsum
            acc = extra[i]
            tail[n_modes] = acc
            for k in range(n_modes - 1, -1, -1):
                re = zz[i, 2 * k]
                im = zz[i, 2 * k + 1]
                acc = acc + (re * re + im * im)
                tail[k] = acc
            weighted = 0.0
            for k in range(n_out):
                re = zz[i, 2 * k]
                im = zz[i, 2 * k + 1]
                nn = <double>(k + 1)
                weighted = weighted + (re * re + im * im) * nn
                beta = nn * nn - 2.0 * (weighted + nn * tail[k + 1])
                phase = t * (beta + shift * nn)
                if fabs(phase) > PHASE_REDUCE_AT:
                    phase = fmod(phase, TWO_PI)
                c = cos(phase)
                s = sin(phase)
                o[i, 2 * k] = re * c - im * s
                o[i, 2 * k + 1] = re * s + im * c
    return out
