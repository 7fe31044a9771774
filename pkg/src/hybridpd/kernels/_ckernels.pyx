# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled twins of the tree hot kernels (see _pykernels.py for the
semantics contract; arithmetic must stay identical between backends)."""

import numpy as np
cimport numpy as cnp

cnp.import_array()

BACKEND = "c"


def node_sse(y):
    cdef const double[:] yv = np.ascontiguousarray(y, dtype=np.float64)
    cdef Py_ssize_t i, n = yv.shape[0]
    cdef double s = 0.0, ss = 0.0
    for i in range(n):
        s += yv[i]
        ss += yv[i] * yv[i]
    return ss - s * s / n


def best_split(x, y, idx, min_samples_split):
    cdef const double[:, :] xv = x
    cdef const double[:] yv = y
    cdef const long long[:] iv = np.ascontiguousarray(idx, dtype=np.int64)
    cdef Py_ssize_t n = iv.shape[0]
    cdef Py_ssize_t d = xv.shape[1]
    cdef Py_ssize_t f, k, i, pos
    cdef double parent, s, ss, total_s, total_ss
    cdef double cs_k, css_k, sse_l, sse_r, score, sc
    cdef double best_score, best_thr, thr
    cdef int best_feat = -1
    cdef int mss = max(2, <int> min_samples_split)

    ysub_arr = np.empty(n, dtype=np.float64)
    vals_arr = np.empty(n, dtype=np.float64)
    cdef double[:] ysub = ysub_arr
    cdef double[:] vals = vals_arr
    cdef const double[:] sv
    cdef const double[:] sy

    s = 0.0
    ss = 0.0
    for i in range(n):
        ysub[i] = yv[iv[i]]
        s += ysub[i]
        ss += ysub[i] * ysub[i]
    parent = ss - s * s / n
    if n < mss:
        return -1, float("nan"), parent

    best_score = np.inf
    best_thr = float("nan")
    for f in range(d):
        for i in range(n):
            vals[i] = xv[iv[i], f]
        order = np.argsort(vals_arr, kind="stable")
        sv_arr = vals_arr[order]
        sy_arr = ysub_arr[order]
        sv = sv_arr
        sy = sy_arr
        total_s = 0.0
        total_ss = 0.0
        for i in range(n):
            total_s += sy[i]
            total_ss += sy[i] * sy[i]
        cs_k = 0.0
        css_k = 0.0
        sc = np.inf
        pos = -1
        for k in range(1, n):
            cs_k += sy[k - 1]
            css_k += sy[k - 1] * sy[k - 1]
            if not sv[k - 1] < sv[k]:
                continue
            sse_l = css_k - cs_k * cs_k / k
            sse_r = (total_ss - css_k) - (total_s - cs_k) * (total_s - cs_k) / (n - k)
            score = sse_l + sse_r
            if score < sc:
                sc = score
                pos = k
        if pos >= 0 and sc < best_score:
            best_score = sc
            best_feat = <int> f
            best_thr = (sv[pos - 1] + sv[pos]) / 2.0
    if best_feat < 0 or not (parent - best_score > 1e-10 * max(parent, 1.0)):
        return -1, float("nan"), parent
    return best_feat, best_thr, best_score


def predict_tree(feature, threshold, left, right, value, x):
    cdef const int[:] fv = feature
    cdef const double[:] tv = threshold
    cdef const int[:] lv = left
    cdef const int[:] rv = right
    cdef const double[:] vv = value
    cdef const double[:, :] xv = x
    cdef Py_ssize_t n = xv.shape[0]
    out_arr = np.empty(n, dtype=np.float64)
    cdef double[:] out = out_arr
    cdef Py_ssize_t i
    cdef int node
    for i in range(n):
        node = 0
        while fv[node] >= 0:
            if xv[i, fv[node]] <= tv[node]:
                node = lv[node]
            else:
                node = rv[node]
        out[i] = vv[node]
    return out_arr


def predict_ensemble(forest_arrays, x, weights, init):
    cdef const double[:, :] xv = x
    cdef Py_ssize_t n = xv.shape[0]
    out_arr = np.full(n, init, dtype=np.float64)
    cdef double[:] out = out_arr
    cdef const int[:] fv
    cdef const double[:] tv
    cdef const int[:] lv
    cdef const int[:] rv
    cdef const double[:] vv
    cdef double w
    cdef Py_ssize_t i, t
    cdef int node
    for t in range(len(forest_arrays)):
        feature, threshold, left, right, value = forest_arrays[t]
        fv = feature
        tv = threshold
        lv = left
        rv = right
        vv = value
        w = weights[t]
        for i in range(n):
            node = 0
            while fv[node] >= 0:
                if xv[i, fv[node]] <= tv[node]:
                    node = lv[node]
                else:
                    node = rv[node]
            out[i] += w * vv[node]
    return out_arr

