# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled LSTM sequence kernels; semantics mirror kernels.pure exactly."""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, tanh

cnp.import_array()


cdef inline double _sigmoid(double z) noexcept nogil:
    cdef double ez
    if z >= 0.0:
        return 1.0 / (1.0 + exp(-z))
    ez = exp(z)
    return ez / (1.0 + ez)


def lstm_forward(double[:, ::1] x, const unsigned char[::1] mask,
                 double[:, ::1] W, double[:, ::1] U, double[::1] b):
    cdef Py_ssize_t T = x.shape[0]
    cdef Py_ssize_t D = x.shape[1]
    cdef Py_ssize_t H = U.shape[0]
    cdef cnp.ndarray[double, ndim=2] h_out_a = np.zeros((T, H))
    cdef cnp.ndarray[double, ndim=2] gates_a = np.zeros((T, 4 * H))
    cdef cnp.ndarray[double, ndim=2] hs_a = np.zeros((T + 1, H))
    cdef cnp.ndarray[double, ndim=2] cs_a = np.zeros((T + 1, H))
    cdef double[:, ::1] h_out = h_out_a
    cdef double[:, ::1] gates = gates_a
    cdef double[:, ::1] hs = hs_a
    cdef double[:, ::1] cs = cs_a
    cdef double[::1] a = np.zeros(4 * H)
    cdef Py_ssize_t t, j, k
    cdef double i_g, f_g, g_g, o_g, c_new

    with nogil:
        for t in range(T):
            if not mask[t]:
                for j in range(H):
                    hs[t + 1, j] = hs[t, j]
                    cs[t + 1, j] = cs[t, j]
                continue
            for j in range(4 * H):
                a[j] = b[j]
            for k in range(D):
                for j in range(4 * H):
                    a[j] += x[t, k] * W[k, j]
            for k in range(H):
                for j in range(4 * H):
                    a[j] += hs[t, k] * U[k, j]
            for j in range(H):
                i_g = _sigmoid(a[j])
                f_g = _sigmoid(a[H + j])
                g_g = tanh(a[2 * H + j])
                o_g = _sigmoid(a[3 * H + j])
                c_new = f_g * cs[t, j] + i_g * g_g
                gates[t, j] = i_g
                gates[t, H + j] = f_g
                gates[t, 2 * H + j] = g_g
                gates[t, 3 * H + j] = o_g
                cs[t + 1, j] = c_new
                hs[t + 1, j] = o_g * tanh(c_new)
                h_out[t, j] = hs[t + 1, j]
    return h_out_a, gates_a, hs_a, cs_a


def lstm_backward(double[:, ::1] x, const unsigned char[::1] mask,
                  double[:, ::1] W, double[:, ::1] U,
                  double[:, ::1] gates, double[:, ::1] hs, double[:, ::1] cs,
                  double[:, ::1] dh_out):
    cdef Py_ssize_t T = x.shape[0]
    cdef Py_ssize_t D = x.shape[1]
    cdef Py_ssize_t H = U.shape[0]
    cdef cnp.ndarray[double, ndim=2] dx_a = np.zeros((T, D))
    cdef cnp.ndarray[double, ndim=2] dW_a = np.zeros((D, 4 * H))
    cdef cnp.ndarray[double, ndim=2] dU_a = np.zeros((H, 4 * H))
    cdef cnp.ndarray[double, ndim=1] db_a = np.zeros(4 * H)
    cdef double[:, ::1] dx = dx_a
    cdef double[:, ::1] dW = dW_a
    cdef double[:, ::1] dU = dU_a
    cdef double[::1] db = db_a
    cdef double[::1] dh = np.zeros(H)
    cdef double[::1] dc = np.zeros(H)
    cdef double[::1] da = np.zeros(4 * H)
    cdef Py_ssize_t t, j, k
    cdef double i_g, f_g, g_g, o_g, tc, dh_t, do_, dc_t, di, df, dg

    with nogil:
        for t in range(T - 1, -1, -1):
            if not mask[t]:
                continue
            for j in range(H):
                i_g = gates[t, j]
                f_g = gates[t, H + j]
                g_g = gates[t, 2 * H + j]
                o_g = gates[t, 3 * H + j]
                tc = tanh(cs[t + 1, j])
                dh_t = dh[j] + dh_out[t, j]
                do_ = dh_t * tc
                dc_t = dh_t * o_g * (1.0 - tc * tc) + dc[j]
                di = dc_t * g_g
                df = dc_t * cs[t, j]
                dg = dc_t * i_g
                dc[j] = dc_t * f_g
                da[j] = di * i_g * (1.0 - i_g)
                da[H + j] = df * f_g * (1.0 - f_g)
                da[2 * H + j] = dg * (1.0 - g_g * g_g)
                da[3 * H + j] = do_ * o_g * (1.0 - o_g)
            for k in range(D):
                for j in range(4 * H):
                    dx[t, k] += da[j] * W[k, j]
            for k in range(D):
                for j in range(4 * H):
                    dW[k, j] += x[t, k] * da[j]
            for k in range(H):
                dh[k] = 0.0
                for j in range(4 * H):
                    dU[k, j] += hs[t, k] * da[j]
                    dh[k] += da[j] * U[k, j]
            for j in range(4 * H):
                db[j] += da[j]
    return dx_a, dW_a, dU_a, db_a
