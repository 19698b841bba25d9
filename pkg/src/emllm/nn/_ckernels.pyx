# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: scalar loops, canonical accumulation order.

Compiled with -ffp-contract=off so every multiply and add rounds once,
matching the pure-Python reference bit for bit.
"""

import numpy as np


def conv1d_forward(double[:, ::1] x, double[:, :, ::1] w, double[::1] b, int stride):
    cdef Py_ssize_t c_in = x.shape[0], length = x.shape[1]
    cdef Py_ssize_t c_out = w.shape[0], k = w.shape[2]
    cdef Py_ssize_t l_out = (length - k) // stride + 1
    out = np.empty((c_out, l_out), dtype=np.float64)
    cdef double[:, ::1] y = out
    cdef Py_ssize_t o, j, i, t, base
    cdef double acc
    for o in range(c_out):
        for j in range(l_out):
            base = j * stride
            acc = b[o]
            for i in range(c_in):
                for t in range(k):
                    acc += w[o, i, t] * x[i, base + t]
            y[o, j] = acc
    return out


def conv1d_backward(double[:, ::1] x, double[:, :, ::1] w, int stride,
                    double[:, ::1] gy):
    cdef Py_ssize_t c_in = x.shape[0], length = x.shape[1]
    cdef Py_ssize_t c_out = w.shape[0], k = w.shape[2]
    cdef Py_ssize_t l_out = gy.shape[1]
    gx_arr = np.zeros((c_in, length), dtype=np.float64)
    gw_arr = np.zeros((c_out, c_in, k), dtype=np.float64)
    gb_arr = np.zeros(c_out, dtype=np.float64)
    cdef double[:, ::1] gx = gx_arr
    cdef double[:, :, ::1] gw = gw_arr
    cdef double[::1] gb = gb_arr
    cdef Py_ssize_t o, j, i, t, base
    cdef double g
    for o in range(c_out):
        for j in range(l_out):
            g = gy[o, j]
            gb[o] += g
            base = j * stride
            for i in range(c_in):
                for t in range(k):
                    gw[o, i, t] += g * x[i, base + t]
                    gx[i, base + t] += g * w[o, i, t]
    return gx_arr, gw_arr, gb_arr


def maxpool1d_forward(double[:, ::1] x, int size, int stride):
    cdef Py_ssize_t c = x.shape[0], length = x.shape[1]
    cdef Py_ssize_t l_out = (length - size) // stride + 1
    out = np.empty((c, l_out), dtype=np.float64)
    arg_arr = np.empty((c, l_out), dtype=np.int64)
    cdef double[:, ::1] y = out
    cdef long long[:, ::1] arg = arg_arr
    cdef Py_ssize_t i, j, t, base, best_t
    cdef double best, v
    for i in range(c):
        for j in range(l_out):
            base = j * stride
            best = x[i, base]
            best_t = base
            for t in range(1, size):
                v = x[i, base + t]
                if v > best:  # strict: ties keep the first index
                    best = v
                    best_t = base + t
            y[i, j] = best
            arg[i, j] = best_t
    return out, arg_arr


def maxpool1d_backward(long long[:, ::1] arg, double[:, ::1] gy, int length):
    cdef Py_ssize_t c = gy.shape[0], l_out = gy.shape[1]
    gx_arr = np.zeros((c, length), dtype=np.float64)
    cdef double[:, ::1] gx = gx_arr
    cdef Py_ssize_t i, j
    for i in range(c):
        for j in range(l_out):
            gx[i, arg[i, j]] += gy[i, j]
    return gx_arr


def dense_forward(double[::1] x, double[:, ::1] w, double[::1] b):
    cdef Py_ssize_t m = w.shape[0], n = w.shape[1]
    out = np.empty(m, dtype=np.float64)
    cdef double[::1] y = out
    cdef Py_ssize_t o, j
    cdef double acc
    for o in range(m):
        acc = b[o]
        for j in range(n):
            acc += w[o, j] * x[j]
        y[o] = acc
    return out


def dense_backward(double[::1] x, double[:, ::1] w, double[::1] gy):
    cdef Py_ssize_t m = w.shape[0], n = w.shape[1]
    gx_arr = np.zeros(n, dtype=np.float64)
    gw_arr = np.empty((m, n), dtype=np.float64)
    gb_arr = np.empty(m, dtype=np.float64)
    cdef double[::1] gx = gx_arr
    cdef double[:, ::1] gw = gw_arr
    cdef double[::1] gb = gb_arr
    cdef Py_ssize_t o, j
    cdef double g
    for o in range(m):
        g = gy[o]
        gb[o] = g
        for j in range(n):
            gw[o, j] = g * x[j]
            gx[j] += g * w[o, j]
    return gx_arr, gw_arr, gb_arr
