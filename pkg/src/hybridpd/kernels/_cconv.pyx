# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled circular-convolution kernels on channel-first (B, C, H, W) maps.

Built separately from the tree kernels so this unit can use aggressive
floating-point flags; agreement with the numpy fallback is to accumulation
roundoff, not bitwise. Each image is copied once into a wrap-padded plane
buffer, after which every inner loop runs unit-stride over image rows (the
classic stencil SAXPY shape the compiler vectorizes).
"""

import numpy as np
cimport numpy as cnp
from libc.stdlib cimport free, malloc

ctypedef fused real:
    float
    double

cnp.import_array()


cdef inline void _pad_planes(const real *src, real *xp, Py_ssize_t C,
                             Py_ssize_t H, Py_ssize_t W, Py_ssize_t rh,
                             Py_ssize_t rw) noexcept nogil:
    """Copy (C, H, W) into (C, H + 2rh, W + 2rw) with circular borders."""
    cdef Py_ssize_t HP = H + 2 * rh, WP = W + 2 * rw
    cdef Py_ssize_t ci, i, j, r
    cdef const real *srow
    cdef real *drow
    for ci in range(C):
        for i in range(HP):
            r = i - rh
            if r < 0:
                r += H
            elif r >= H:
                r -= H
            srow = src + (ci * H + r) * W
            drow = xp + (ci * HP + i) * WP
            for j in range(rw):
                drow[j] = srow[W - rw + j]
            for j in range(W):
                drow[rw + j] = srow[j]
            for j in range(rw):
                drow[rw + W + j] = srow[j]


def conv_circ_fwd(real[:, :, :, ::1] x, real[:, :, :, ::1] w, real[::1] b):
    """x (B, Cin, H, W), w (Cout, Cin, kh, kw), b (Cout,) -> (B, Cout, H, W),
    circular padding, stride 1. Specialized 3x3 taps run fused per row."""
    cdef Py_ssize_t B = x.shape[0], CI = x.shape[1], H = x.shape[2], W = x.shape[3]
    cdef Py_ssize_t CO = w.shape[0], KH = w.shape[2], KW = w.shape[3]
    cdef Py_ssize_t rh = KH // 2, rw = KW // 2
    cdef Py_ssize_t HP = H + 2 * rh, WP = W + 2 * rw
    if real is float:
        out_arr = np.empty((B, CO, H, W), dtype=np.float32)
    else:
        out_arr = np.empty((B, CO, H, W), dtype=np.float64)
    cdef real[:, :, :, ::1] out = out_arr
    cdef real *xp = <real *> malloc(CI * HP * WP * sizeof(real))
    if xp == NULL:
        raise MemoryError()
    cdef Py_ssize_t bt, ci, co, di, dj, i, j
    cdef real wv, bv
    cdef real w00, w01, w02, w10, w11, w12, w20, w21, w22
    cdef const real *r0
    cdef const real *r1
    cdef const real *r2
    cdef real *orow
    try:
        with nogil:
            for bt in range(B):
                _pad_planes(&x[bt, 0, 0, 0], xp, CI, H, W, rh, rw)
                for co in range(CO):
                    bv = b[co]
                    orow = &out[bt, co, 0, 0]
                    for i in range(H * W):
                        orow[i] = bv
                    for ci in range(CI):
                        if KH == 3 and KW == 3:
                            w00 = w[co, ci, 0, 0]; w01 = w[co, ci, 0, 1]; w02 = w[co, ci, 0, 2]
                            w10 = w[co, ci, 1, 0]; w11 = w[co, ci, 1, 1]; w12 = w[co, ci, 1, 2]
                            w20 = w[co, ci, 2, 0]; w21 = w[co, ci, 2, 1]; w22 = w[co, ci, 2, 2]
                            for i in range(H):
                                r0 = xp + (ci * HP + i) * WP
                                r1 = r0 + WP
                                r2 = r1 + WP
                                orow = &out[bt, co, i, 0]
                                for j in range(W):
                                    orow[j] += (w00 * r0[j] + w01 * r0[j + 1] + w02 * r0[j + 2]
                                                + w10 * r1[j] + w11 * r1[j + 1] + w12 * r1[j + 2]
                                                + w20 * r2[j] + w21 * r2[j + 1] + w22 * r2[j + 2])
                        else:
                            for di in range(KH):
                                for dj in range(KW):
                                    wv = w[co, ci, di, dj]
                                    for i in range(H):
                                        r0 = xp + (ci * HP + i + di) * WP + dj
                                        orow = &out[bt, co, i, 0]
                                        for j in range(W):
                                            orow[j] += wv * r0[j]
    finally:
        free(xp)
    return out_arr


def conv_circ_bwd(real[:, :, :, ::1] x, real[:, :, :, ::1] w,
                  real[:, :, :, ::1] g, bint need_gx=True, bint need_gw=True):
    """Gradients of conv_circ_fwd: returns (gx, gw, gb); either side can be
    skipped when the corresponding parent is frozen."""
    cdef Py_ssize_t B = x.shape[0], CI = x.shape[1], H = x.shape[2], W = x.shape[3]
    cdef Py_ssize_t CO = w.shape[0], CI2 = w.shape[1], KH = w.shape[2], KW = w.shape[3]
    cdef Py_ssize_t rh = KH // 2, rw = KW // 2
    cdef Py_ssize_t HP = H + 2 * rh, WP = W + 2 * rw
    if real is float:
        gx_arr = np.empty((B, CI, H, W), dtype=np.float32)
        gw_arr = np.zeros((CO, CI, KH, KW), dtype=np.float32)
        gb_arr = np.zeros(CO, dtype=np.float32)
    else:
        gx_arr = np.empty((B, CI, H, W), dtype=np.float64)
        gw_arr = np.zeros((CO, CI, KH, KW), dtype=np.float64)
        gb_arr = np.zeros(CO, dtype=np.float64)
    cdef real[:, :, :, ::1] gx = gx_arr
    cdef real[:, :, :, ::1] gw = gw_arr
    cdef real[::1] gb = gb_arr
    cdef real *gp = <real *> malloc(CO * HP * WP * sizeof(real))
    cdef real *xp = <real *> malloc(CI * HP * WP * sizeof(real))
    if gp == NULL or xp == NULL:
        free(gp)
        free(xp)
        raise MemoryError()
    cdef Py_ssize_t bt, ci, co, di, dj, i, j
    cdef real acc
    cdef real w00, w01, w02, w10, w11, w12, w20, w21, w22
    cdef real a00, a01, a02, a10, a11, a12, a20, a21, a22
    cdef const real *r0
    cdef const real *r1
    cdef const real *r2
    cdef const real *grow
    cdef real *drow
    try:
        with nogil:
            for bt in range(B):
                _pad_planes(&g[bt, 0, 0, 0], gp, CO, H, W, rh, rw)
                _pad_planes(&x[bt, 0, 0, 0], xp, CI, H, W, rh, rw)
                # gx = correlation of g with the spatially flipped kernel
                for ci in range(CI if need_gx else 0):
                    drow = &gx[bt, ci, 0, 0]
                    for i in range(H * W):
                        drow[i] = 0.0
                    for co in range(CO):
                        # flipped 3x3 taps
                        w00 = w[co, ci, 2, 2]; w01 = w[co, ci, 2, 1]; w02 = w[co, ci, 2, 0]
                        w10 = w[co, ci, 1, 2]; w11 = w[co, ci, 1, 1]; w12 = w[co, ci, 1, 0]
                        w20 = w[co, ci, 0, 2]; w21 = w[co, ci, 0, 1]; w22 = w[co, ci, 0, 0]
                        for i in range(H):
                            r0 = gp + (co * HP + i) * WP
                            r1 = r0 + WP
                            r2 = r1 + WP
                            drow = &gx[bt, ci, i, 0]
                            for j in range(W):
                                drow[j] += (w00 * r0[j] + w01 * r0[j + 1] + w02 * r0[j + 2]
                                            + w10 * r1[j] + w11 * r1[j + 1] + w12 * r1[j + 2]
                                            + w20 * r2[j] + w21 * r2[j + 1] + w22 * r2[j + 2])
                # gw and gb
                for co in range(CO):
                    acc = 0.0
                    grow = &g[bt, co, 0, 0]
                    for i in range(H * W):
                        acc += grow[i]
                    gb[co] += acc
                    for ci in range(CI if need_gw else 0):
                        a00 = 0.0; a01 = 0.0; a02 = 0.0
                        a10 = 0.0; a11 = 0.0; a12 = 0.0
                        a20 = 0.0; a21 = 0.0; a22 = 0.0
                        for i in range(H):
                            r0 = xp + (ci * HP + i) * WP
                            r1 = r0 + WP
                            r2 = r1 + WP
                            grow = &g[bt, co, i, 0]
                            for j in range(W):
                                a00 += r0[j] * grow[j]; a01 += r0[j + 1] * grow[j]; a02 += r0[j + 2] * grow[j]
                                a10 += r1[j] * grow[j]; a11 += r1[j + 1] * grow[j]; a12 += r1[j + 2] * grow[j]
                                a20 += r2[j] * grow[j]; a21 += r2[j + 1] * grow[j]; a22 += r2[j + 2] * grow[j]
                        gw[co, ci, 0, 0] += a00; gw[co, ci, 0, 1] += a01; gw[co, ci, 0, 2] += a02
                        gw[co, ci, 1, 0] += a10; gw[co, ci, 1, 1] += a11; gw[co, ci, 1, 2] += a12
                        gw[co, ci, 2, 0] += a20; gw[co, ci, 2, 1] += a21; gw[co, ci, 2, 2] += a22
    finally:
        free(gp)
        free(xp)
    return gx_arr, gw_arr, gb_arr
