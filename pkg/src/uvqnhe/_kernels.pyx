# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled twins of the kernels in ``_kernels_py``.

Signatures and index conventions match the numpy module exactly.
"""

import numpy as np
from libc.math cimport cos, sin

cdef extern from *:
    int __builtin_popcountll(unsigned long long) nogil


def apply_1q(double complex[::1] state, int n, int q, mat):
    cdef double complex m00 = mat[0, 0], m01 = mat[0, 1]
    cdef double complex m10 = mat[1, 0], m11 = mat[1, 1]
    cdef Py_ssize_t size = state.shape[0]
    cdef Py_ssize_t bit = (<Py_ssize_t>1) << (n - 1 - q)
    cdef Py_ssize_t i, j
    cdef double complex a0, a1
    with nogil:
        for i in range(size):
            if i & bit:
                continue
            j = i | bit
            a0 = state[i]
            a1 = state[j]
            state[i] = m00 * a0 + m01 * a1
            state[j] = m10 * a0 + m11 * a1


def apply_controlled(double complex[::1] state, int n, int control, int target, mat):
    cdef double complex m00 = mat[0, 0], m01 = mat[0, 1]
    cdef double complex m10 = mat[1, 0], m11 = mat[1, 1]
    cdef Py_ssize_t size = state.shape[0]
    cdef Py_ssize_t cbit = (<Py_ssize_t>1) << (n - 1 - control)
    cdef Py_ssize_t tbit = (<Py_ssize_t>1) << (n - 1 - target)
    cdef Py_ssize_t i, j
    cdef double complex a0, a1
    with nogil:
        for i in range(size):
            if (i & tbit) or not (i & cbit):
                continue
            j = i | tbit
            a0 = state[i]
            a1 = state[j]
            state[i] = m00 * a0 + m01 * a1
            state[j] = m10 * a0 + m11 * a1


def apply_zz_phase(double complex[::1] state, int n, int q1, int q2, double theta):
    cdef Py_ssize_t size = state.shape[0]
    cdef int b1 = n - 1 - q1, b2 = n - 1 - q2
    cdef double complex even = cos(0.5 * theta) - 1j * sin(0.5 * theta)
    cdef double complex odd = cos(0.5 * theta) + 1j * sin(0.5 * theta)
    cdef Py_ssize_t i
    with nogil:
        for i in range(size):
            if ((i >> b1) ^ (i >> b2)) & 1:
                state[i] = state[i] * odd
            else:
                state[i] = state[i] * even


def apply_pauli(const double complex[::1] state, int n, long long xmask, long long zmask, int ny):
    cdef Py_ssize_t size = state.shape[0]
    out = np.empty(size, dtype=np.complex128)
    cdef double complex[::1] o = out
    cdef double complex base = (1j) ** (ny % 4)
    cdef Py_ssize_t i
    with nogil:
        for i in range(size):
            if __builtin_popcountll(<unsigned long long>(i & zmask)) & 1:
                o[i ^ xmask] = -base * state[i]
            else:
                o[i ^ xmask] = base * state[i]
    return out


def pair_sum(const double[::1] w, const double[::1] f, long long star, long long flip):
    cdef Py_ssize_t size = w.shape[0]
    cdef Py_ssize_t s, lo
    cdef double acc = 0.0
    with nogil:
        for s in range(size):
            if w[s] == 0.0:
                continue
            lo = s & ~star
            acc += w[s] * f[lo] * f[lo ^ flip]
    return acc


def pair_grad(const double[::1] w, const double[::1] f, long long star, long long flip, double[::1] out):
    cdef Py_ssize_t size = w.shape[0]
    cdef Py_ssize_t s, lo, hi
    with nogil:
        for s in range(size):
            if w[s] == 0.0:
                continue
            lo = s & ~star
            hi = lo ^ flip
            out[lo] += w[s] * f[hi]
            out[hi] += w[s] * f[lo]


def phase_pair_sum(const double[::1] wr, const double[::1] wi, const double[::1] g, long long star, long long flip):
    cdef Py_ssize_t size = wr.shape[0]
    cdef Py_ssize_t s, lo
    cdef double d, acc = 0.0
    with nogil:
        for s in range(size):
            if wr[s] == 0.0 and wi[s] == 0.0:
                continue
            lo = s & ~star
            d = g[lo ^ flip] - g[lo]
            acc += wr[s] * cos(d) + wi[s] * sin(d)
    return acc


def phase_pair_grad(const double[::1] wr, const double[::1] wi, const double[::1] g, long long star, long long flip,
                    double[::1] out):
    cdef Py_ssize_t size = wr.shape[0]
    cdef Py_ssize_t s, lo, hi
    cdef double d, dhi
    with nogil:
        for s in range(size):
            if wr[s] == 0.0 and wi[s] == 0.0:
                continue
            lo = s & ~star
            hi = lo ^ flip
            d = g[hi] - g[lo]
            dhi = -wr[s] * sin(d) + wi[s] * cos(d)
            out[hi] += dhi
            out[lo] -= dhi
