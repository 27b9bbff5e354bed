# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled compute kernels.

Twin of ``_kernels_py``; floating point operations run in the same
order, element for element, so both backends return bit-identical
results.  Compiled with contraction disabled to keep multiply-add
rounding aligned with numpy.  Any change here must be mirrored in the
pure python file.
"""

import numpy as np

cimport numpy as cnp
from libc.stdint cimport int32_t, int64_t

cnp.import_array()


def backend_name():
    return "compiled"


def dp_sweep(double[:, :, ::1] theta, double[::1] prices,
             double[::1] theta0, int inventory):
    cdef Py_ssize_t n_periods = theta.shape[0]
    cdef Py_ssize_t n_classes = theta.shape[1]
    cdef Py_ssize_t max_batch = theta.shape[2]
    cdef Py_ssize_t width = inventory + 1
    values_arr = np.zeros((n_periods + 1, width))
    cdef double[:, ::1] values = values_arr
    cdef Py_ssize_t k, i, j, d
    cdef double th, pij, gain, base, term
    for k in range(n_periods - 1, -1, -1):
        for d in range(width):
            values[k, d] = theta0[k] * values[k + 1, d]
        for i in range(n_classes):
            for j in range(1, max_batch + 1):
                th = theta[k, i, j - 1]
                pij = prices[i] * j
                for d in range(width):
                    base = values[k + 1, d]
                    if j <= d:
                        gain = pij + values[k + 1, d - j]
                        if gain < base:
                            gain = base
                        term = th * gain
                    else:
                        term = th * base
                    values[k, d] = values[k, d] + term
    return values_arr


def table_walk(int32_t[:, ::1] outcomes, cnp.uint8_t[:, :, :, ::1] accept,
               double[::1] prices, int inventory, int max_batch):
    cdef Py_ssize_t reps = outcomes.shape[0]
    cdef Py_ssize_t n_periods = outcomes.shape[1]
    revenue_arr = np.zeros(reps)
    cdef double[::1] revenue = revenue_arr
    cdef Py_ssize_t r, n
    cdef int o, cls, size
    cdef int64_t level
    cdef double total, term
    for r in range(reps):
        level = inventory
        total = 0.0
        for n in range(n_periods):
            o = outcomes[r, n]
            if o < 0:
                continue
            cls = o / max_batch
            size = o - cls * max_batch + 1
            if size > level:
                continue
            if accept[n, level, cls, size - 1] != 0:
                term = prices[cls] * size
                total = total + term
                level = level - size
        revenue[r] = total
    return revenue_arr


def switchover_walk(int32_t[:, ::1] outcomes, double[::1] prices,
                    int inventory, int max_batch, double[::1] stage_times,
                    double[:, ::1] stage_curves):
    cdef Py_ssize_t reps = outcomes.shape[0]
    cdef Py_ssize_t n_periods = outcomes.shape[1]
    cdef Py_ssize_t n_stages = stage_times.shape[0]
    revenue_arr = np.zeros(reps)
    cdef double[::1] revenue = revenue_arr
    cdef Py_ssize_t r, n
    cdef int o, cls, size
    cdef int64_t level, stage
    cdef double total, term
    for r in range(reps):
        level = inventory
        stage = 1
        total = 0.0
        for n in range(1, n_periods + 1):
            while stage <= n_stages and (
                    n > stage_times[stage - 1]
                    or level <= stage_curves[stage - 1, n - 1]):
                stage = stage + 1
            o = outcomes[r, n - 1]
            if o < 0:
                continue
            cls = o / max_batch
            size = o - cls * max_batch + 1
            if cls + 1 <= stage and size <= level:
                term = prices[cls] * size
                total = total + term
                level = level - size
        revenue[r] = total
    return revenue_arr


def fpt_step(double[::1] x, double[::1] z, double drift_inc,
             double noise_scale, double[::1] levels, int64_t[::1] level_idx,
             double[:, ::1] times, double t_next):
    cdef Py_ssize_t n_active = x.shape[0]
    cdef Py_ssize_t n_levels = levels.shape[0]
    cdef Py_ssize_t p
    cdef double step_inc
    for p in range(n_active):
        step_inc = drift_inc + noise_scale * z[p]
        x[p] = x[p] + step_inc
        while level_idx[p] < n_levels and x[p] >= levels[level_idx[p]]:
            times[p, level_idx[p]] = t_next
            level_idx[p] = level_idx[p] + 1
