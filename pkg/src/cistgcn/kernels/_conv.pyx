# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Dilated temporal convolution on (N, C, L, M) arrays via strided BLAS calls.

No im2col buffer is built: every (sample, group, tap) pair is one GEMM on a
strided window of the input, clipped to the rows that fall inside the
unpadded signal.
"""
import numpy as np
from scipy.linalg.cython_blas cimport sgemm, dgemm

ctypedef fused real:
    float
    double


cdef inline void _gemm(char ta, char tb, int m, int n, int k, real alpha,
                       real* a, int lda, real* b, int ldb, real beta,
                       real* c, int ldc) noexcept nogil:
    # Row-major C(m, n) = alpha * op(A) op(B) + beta * C, as column-major C^T = op(B)^T op(A)^T.
    if real is float:
        sgemm(&tb, &ta, &n, &m, &k, &alpha, b, &ldb, a, &lda, &beta, c, &ldc)
    else:
        dgemm(&tb, &ta, &n, &m, &k, &alpha, b, &ldb, a, &lda, &beta, c, &ldc)


cdef inline void _clip(int k, int dilation, int pad_left, int L, int out_len,
                       int* l0, int* nl) noexcept nogil:
    cdef int off = k * dilation - pad_left
    cdef int lo = 0 if off >= 0 else -off
    cdef int hi = out_len if out_len < L - off else L - off
    l0[0] = lo
    nl[0] = hi - lo if hi > lo else 0


def _forward(real[:, :, :, ::1] x, real[:, :, ::1] wt, real[:, :, :, ::1] y,
             int dilation, int pad_left, int groups):
    # wt is the weight laid out as (K, O, Cg); y must be zero-filled.
    cdef int N = x.shape[0], L = x.shape[2], M = x.shape[3]
    cdef int K = wt.shape[0], O = wt.shape[1], Cg = wt.shape[2]
    cdef int out_len = y.shape[2], Og = O // groups
    cdef int n, g, k, l0, nl
    with nogil:
        for n in range(N):
            for g in range(groups):
                for k in range(K):
                    _clip(k, dilation, pad_left, L, out_len, &l0, &nl)
                    if nl == 0:
                        continue
                    _gemm(c'N', c'N', Og, nl * M, Cg, <real>1.0,
                          &wt[k, g * Og, 0], Cg,
                          &x[n, g * Cg, l0 + k * dilation - pad_left, 0], L * M,
                          <real>1.0, &y[n, g * Og, l0, 0], out_len * M)


def _backward_input(real[:, :, :, ::1] g_out, real[:, :, ::1] wt, real[:, :, :, ::1] dx,
                    int dilation, int pad_left, int groups):
    cdef int N = dx.shape[0], L = dx.shape[2], M = dx.shape[3]
    cdef int K = wt.shape[0], O = wt.shape[1], Cg = wt.shape[2]
    cdef int out_len = g_out.shape[2], Og = O // groups
    cdef int n, g, k, l0, nl
    with nogil:
        for n in range(N):
            for g in range(groups):
                for k in range(K):
                    _clip(k, dilation, pad_left, L, out_len, &l0, &nl)
                    if nl == 0:
                        continue
                    _gemm(c'T', c'N', Cg, nl * M, Og, <real>1.0,
                          &wt[k, g * Og, 0], Cg,
                          &g_out[n, g * Og, l0, 0], out_len * M,
                          <real>1.0, &dx[n, g * Cg, l0 + k * dilation - pad_left, 0], L * M)


def _backward_weight(real[:, :, :, ::1] g_out, real[:, :, :, ::1] x, real[:, :, ::1] dwt,
                     int dilation, int pad_left, int groups):
    cdef int N = x.shape[0], L = x.shape[2], M = x.shape[3]
    cdef int K = dwt.shape[0], O = dwt.shape[1], Cg = dwt.shape[2]
    cdef int out_len = g_out.shape[2], Og = O // groups
    cdef int n, g, k, l0, nl
    with nogil:
        for n in range(N):
            for g in range(groups):
                for k in range(K):
                    _clip(k, dilation, pad_left, L, out_len, &l0, &nl)
                    if nl == 0:
                        continue
                    _gemm(c'N', c'T', Og, Cg, nl * M, <real>1.0,
                          &g_out[n, g * Og, l0, 0], out_len * M,
                          &x[n, g * Cg, l0 + k * dilation - pad_left, 0], L * M,
                          <real>1.0, &dwt[k, g * Og, 0], Cg)


def conv1d_forward(x, w, int dilation, int pad_left, int out_len, int groups):
    x = np.ascontiguousarray(x)
    wt = np.ascontiguousarray(w.transpose(2, 0, 1), dtype=x.dtype)
    y = np.zeros((x.shape[0], w.shape[0], out_len, x.shape[3]), dtype=x.dtype)
    _forward(x, wt, y, dilation, pad_left, groups)
    return y


def conv1d_backward(g, x, w, int dilation, int pad_left, int groups,
                    bint need_x=True, bint need_w=True):
    g = np.ascontiguousarray(g, dtype=x.dtype)
    x = np.ascontiguousarray(x)
    wt = np.ascontiguousarray(w.transpose(2, 0, 1), dtype=x.dtype)
    dx = dw = None
    if need_x:
        dx = np.zeros_like(x)
        _backward_input(g, wt, dx, dilation, pad_left, groups)
    if need_w:
        dwt = np.zeros_like(wt)
        _backward_weight(g, x, dwt, dilation, pad_left, groups)
        dw = np.ascontiguousarray(dwt.transpose(1, 2, 0))
    return dx, dw
