# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels for mixture score evaluation and path integration.

Interface twin of ``_fallback``; see that module for the contracts.
"""

from libc.math cimport exp, log, sqrt, INFINITY

import numpy as np

cdef double LOG_2PI = 1.8378770664093454836


cdef void _log_component_weights(
    const double* z,
    double alpha_bar,
    const double* means,
    const double* variances,
    const double* weights,
    Py_ssize_t n_comp,
    Py_ssize_t dim,
    double* out,
) noexcept nogil:
    cdef Py_ssize_t i, j
    cdef double root = sqrt(alpha_bar)
    cdef double acc, s, r
    for i in range(n_comp):
        acc = -INFINITY if weights[i] <= 0.0 else log(weights[i])
        if acc != -INFINITY:
            for j in range(dim):
                s = alpha_bar * variances[i * dim + j] + (1.0 - alpha_bar)
                r = z[j] - root * means[i * dim + j]
                acc += -0.5 * (log(s) + LOG_2PI) - 0.5 * r * r / s
        out[i] = acc


cdef double _log_density(
    const double* z,
    double alpha_bar,
    const double* means,
    const double* variances,
    const double* weights,
    Py_ssize_t n_comp,
    Py_ssize_t dim,
    double* scratch,
) noexcept nogil:
    cdef Py_ssize_t i
    cdef double peak, total
    _log_component_weights(z, alpha_bar, means, variances, weights,
                           n_comp, dim, scratch)
    peak = scratch[0]
    for i in range(1, n_comp):
        if scratch[i] > peak:
            peak = scratch[i]
    total = 0.0
    for i in range(n_comp):
        total += exp(scratch[i] - peak)
    return peak + log(total)


cdef void _epsilon(
    const double* z,
    double alpha_bar,
    const double* means,
    const double* variances,
    const double* weights,
    Py_ssize_t n_comp,
    Py_ssize_t dim,
    double* scratch,
    double* out,
) noexcept nogil:
    cdef Py_ssize_t i, j
    cdef double root = sqrt(alpha_bar)
    cdef double noise_root = sqrt(1.0 - alpha_bar)
    cdef double peak, total, resp, s
    _log_component_weights(z, alpha_bar, means, variances, weights,
                           n_comp, dim, scratch)
    peak = scratch[0]
    for i in range(1, n_comp):
        if scratch[i] > peak:
            peak = scratch[i]
    total = 0.0
    for i in range(n_comp):
        scratch[i] = exp(scratch[i] - peak)
        total += scratch[i]
    for j in range(dim):
        out[j] = 0.0
    for i in range(n_comp):
        resp = scratch[i] / total
        for j in range(dim):
            s = alpha_bar * variances[i * dim + j] + (1.0 - alpha_bar)
            out[j] += resp * (z[j] - root * means[i * dim + j]) / s
    for j in range(dim):
        out[j] *= noise_root


def gmm_log_density(const double[::1] z, double alpha_bar,
                    const double[:, ::1] means, const double[:, ::1] variances,
                    const double[::1] weights):
    cdef Py_ssize_t n_comp = means.shape[0]
    cdef Py_ssize_t dim = means.shape[1]
    scratch_arr = np.empty(n_comp, dtype=np.float64)
    cdef double[::1] scratch = scratch_arr
    return _log_density(&z[0], alpha_bar, &means[0, 0], &variances[0, 0],
                        &weights[0], n_comp, dim, &scratch[0])


def gmm_epsilon(const double[::1] z, double alpha_bar,
                const double[:, ::1] means, const double[:, ::1] variances,
                const double[::1] weights):
    cdef Py_ssize_t n_comp = means.shape[0]
    cdef Py_ssize_t dim = means.shape[1]
    out_arr = np.empty(dim, dtype=np.float64)
    scratch_arr = np.empty(n_comp, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef double[::1] scratch = scratch_arr
    _epsilon(&z[0], alpha_bar, &means[0, 0], &variances[0, 0], &weights[0],
             n_comp, dim, &scratch[0], &out[0])
    return out_arr


def gmm_path(const double[::1] z_start, const double[::1] alpha_bars,
             const double[:, ::1] means, const double[:, ::1] variances,
             const double[::1] cond_weights, const double[::1] null_weights,
             double omega, bint use_cfg):
    cdef Py_ssize_t n = alpha_bars.shape[0] - 1
    cdef Py_ssize_t n_comp = means.shape[0]
    cdef Py_ssize_t dim = z_start.shape[0]
    cdef bint apply_cfg = use_cfg and omega != 1.0

    path_arr = np.empty((n + 1, dim), dtype=np.float64)
    cdef double[:, ::1] path = path_arr
    eps_arr = np.empty(dim, dtype=np.float64)
    eps_null_arr = np.empty(dim, dtype=np.float64)
    scratch_arr = np.empty(n_comp, dtype=np.float64)
    cdef double[::1] eps = eps_arr
    cdef double[::1] eps_null = eps_null_arr
    cdef double[::1] scratch = scratch_arr

    cdef Py_ssize_t k, j
    cdef double ab, ab_next, scale, shift, g_cur, g_next

    with nogil:
        for j in range(dim):
            path[0, j] = z_start[j]
        for k in range(n):
            ab = alpha_bars[k]
            ab_next = alpha_bars[k + 1]
            _epsilon(&path[k, 0], ab, &means[0, 0], &variances[0, 0],
                     &cond_weights[0], n_comp, dim, &scratch[0], &eps[0])
            if apply_cfg:
                _epsilon(&path[k, 0], ab, &means[0, 0], &variances[0, 0],
                         &null_weights[0], n_comp, dim, &scratch[0],
                         &eps_null[0])
                for j in range(dim):
                    eps[j] = omega * eps[j] + (1.0 - omega) * eps_null[j]
            g_cur = sqrt(1.0 / ab - 1.0)
            g_next = sqrt(1.0 / ab_next - 1.0)
            scale = sqrt(ab_next / ab)
            shift = sqrt(ab_next) * (g_next - g_cur)
            for j in range(dim):
                path[k + 1, j] = scale * path[k, j] + shift * eps[j]
    return path_arr
