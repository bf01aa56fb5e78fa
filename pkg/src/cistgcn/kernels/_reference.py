"""Pure numpy implementations of the dilated temporal convolution kernels.

Layout is ``(N, C, L, M)``: the convolution runs along ``L`` independently for
every trailing position ``M`` (joints, in the model). Weights are
``(C_out, C_in // groups, K)``.
"""
import numpy as np


def _padded(x, pad_left, out_len, span):
    L = x.shape[2]
    pad_right = max(0, out_len - 1 + span - pad_left - L + 1)
    return np.pad(x, ((0, 0), (0, 0), (pad_left, pad_right), (0, 0)))


def _columns(xp, groups, K, dilation, out_len):
    N, C, _, M = xp.shape
    taps = [xp[:, :, k * dilation:k * dilation + out_len] for k in range(K)]
    cols = np.stack(taps, axis=2)  # N, C, K, Lout, M
    return cols.reshape(N, groups, (C // groups) * K, out_len * M)


def conv1d_forward(x, w, dilation, pad_left, out_len, groups):
    N, C, L, M = x.shape
    O, Cg, K = w.shape
    span = (K - 1) * dilation
    cols = _columns(_padded(x, pad_left, out_len, span), groups, K, dilation, out_len)
    wg = w.reshape(groups, O // groups, Cg * K)
    y = np.matmul(wg, cols)  # N, G, Og, Lout*M
    return y.reshape(N, O, out_len, M)


def conv1d_backward(g, x, w, dilation, pad_left, groups, need_x=True, need_w=True):
    N, C, L, M = x.shape
    O, Cg, K = w.shape
    out_len = g.shape[2]
    span = (K - 1) * dilation
    xp = _padded(x, pad_left, out_len, span)
    gg = g.reshape(N, groups, O // groups, out_len * M)
    wg = w.reshape(groups, O // groups, Cg * K)
    dx = dw = None
    if need_w:
        cols = _columns(xp, groups, K, dilation, out_len)
        dw = np.matmul(gg, cols.transpose(0, 1, 3, 2)).sum(axis=0).reshape(O, Cg, K)
    if need_x:
        dcols = np.matmul(wg.transpose(0, 2, 1), gg)  # N, G, Cg*K, Lout*M
        dcols = dcols.reshape(N, C, K, out_len, M)
        dxp = np.zeros_like(xp)
        for k in range(K):
            dxp[:, :, k * dilation:k * dilation + out_len] += dcols[:, :, k]
        dx = np.ascontiguousarray(dxp[:, :, pad_left:pad_left + L])
    return dx, dw
