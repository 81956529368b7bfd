# cython: language_level=3
# cython: boundscheck=False
# cython: wraparound=False
# cython: cdivision=True
"""Compiled per-user training kernel. Mirrors nadecf._reference exactly."""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, log, log1p, tanh

cnp.import_array()

cdef double PROB_EPS = 1e-12

ACT_TANH = 0
ACT_IDENTITY = 1


cdef inline double _sigmoid(double z) noexcept nogil:
    cdef double e
    if z >= 0.0:
        return 1.0 / (1.0 + exp(-z))
    e = exp(z)
    return e / (1.0 + e)


def ordered_nll_grad(
    double[:, ::1] W, double[:, ::1] A, double[:, ::1] V,
    double[::1] b, double[::1] d, int activation,
    signed char[::1] t, double[::1] c,
    cnp.int64_t[::1] perm, Py_ssize_t split,
    double[:, ::1] gW, double[:, ::1] gA, double[:, ::1] gV,
    double[::1] gb, double[::1] gd,
):
    """Same contract as nadecf._reference.ordered_nll_grad."""
    cdef Py_ssize_t H = W.shape[0]
    cdef Py_ssize_t M = W.shape[1]
    cdef Py_ssize_t n_targets = M - (split - 1)
    if n_targets <= 0:
        raise ValueError("ordering split leaves no target items")
    cdef double scale = <double> M / <double> n_targets

    scratch = np.zeros((4, H), dtype=np.float64)
    cdef double[:, ::1] work = scratch
    cdef double[::1] a = work[0]
    cdef double[::1] h = work[1]
    cdef double[::1] dh = work[2]
    cdef double[::1] da = work[3]

    cdef Py_ssize_t idx, r, j, k
    cdef double cj, ck, z, p, pc, g
    cdef double loss = 0.0

    with nogil:
        for r in range(H):
            a[r] = b[r]
        for idx in range(split - 1):
            j = perm[idx]
            cj = c[j]
            if t[j]:
                for r in range(H):
                    a[r] += cj * W[r, j]
            else:
                for r in range(H):
                    a[r] += cj * A[r, j]
        if activation == 0:
            for r in range(H):
                h[r] = tanh(a[r])
        else:
            for r in range(H):
                h[r] = a[r]

        for idx in range(split - 1, M):
            k = perm[idx]
            ck = c[k]
            z = d[k]
            for r in range(H):
                z += V[k, r] * h[r]
            p = _sigmoid(z)
            pc = p
            if pc < PROB_EPS:
                pc = PROB_EPS
            elif pc > 1.0 - PROB_EPS:
                pc = 1.0 - PROB_EPS
            if t[k]:
                loss += -ck * log(pc)
                g = scale * ck * (p - 1.0)
            else:
                loss += -ck * log1p(-pc)
                g = scale * ck * p
            if p < PROB_EPS or p > 1.0 - PROB_EPS:
                g = 0.0
            gd[k] += g
            for r in range(H):
                gV[k, r] += g * h[r]
                dh[r] += g * V[k, r]
        loss *= scale

        if activation == 0:
            for r in range(H):
                da[r] = dh[r] * (1.0 - h[r] * h[r])
        else:
            for r in range(H):
                da[r] = dh[r]
        for r in range(H):
            gb[r] += da[r]
        for idx in range(split - 1):
            j = perm[idx]
            cj = c[j]
            if t[j]:
                for r in range(H):
                    gW[r, j] += cj * da[r]
            else:
                for r in range(H):
                    gA[r, j] += cj * da[r]

    return loss
