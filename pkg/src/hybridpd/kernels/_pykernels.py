"""Pure-numpy implementations of the tree hot kernels.

Semantics contract (shared with the compiled twin in ``_ckernels.pyx``):

* ``best_split`` scans features in ascending index order and, per feature,
  candidate thresholds in ascending value order (midpoints between distinct
  consecutive sorted values). The score of a candidate is the summed SSE of
  the two children computed from sequential prefix sums; the winner is the
  strictly smallest score, ties resolved by scan order (lowest feature index,
  then lowest threshold). Identical arithmetic on both backends makes the
  fitted trees bit-identical.
* ``predict_tree`` routes rows with ``x[feature] <= threshold`` going left.
"""
from __future__ import annotations

import numpy as np

BACKEND = "python"


def node_sse(y):
    y = np.asarray(y, dtype=np.float64)
    s = float(y.sum())
    return float((y * y).sum()) - s * s / y.size


def best_split(x, y, idx, min_samples_split):
    """Best (feature, threshold, children_sse) for the rows in ``idx``.

    Returns (-1, nan, parent_sse) when no admissible split exists.
    """
    idx = np.asarray(idx, dtype=np.int64)
    n = idx.size
    ysub = y[idx]
    parent = node_sse(ysub)
    if n < max(2, min_samples_split):
        return -1, float("nan"), parent
    best_feat = -1
    best_thr = float("nan")
    best_score = np.inf
    for f in range(x.shape[1]):
        vals = x[idx, f]
        order = np.argsort(vals, kind="stable")
        sv = vals[order]
        sy = ysub[order]
        cs = np.cumsum(sy)
        css = np.cumsum(sy * sy)
        total_s = cs[-1]
        total_ss = css[-1]
        ks = np.arange(1, n)
        valid = sv[:-1] < sv[1:]
        if not valid.any():
            continue
        cs_k = cs[:-1]
        css_k = css[:-1]
        sse_l = css_k - cs_k * cs_k / ks
        sse_r = (total_ss - css_k) - (total_s - cs_k) * (total_s - cs_k) / (n - ks)
        score = np.where(valid, sse_l + sse_r, np.inf)
        pos = int(np.argmin(score))
        sc = float(score[pos])
        if sc < best_score:
            best_score = sc
            best_feat = f
            best_thr = (sv[pos] + sv[pos + 1]) / 2.0
    if best_feat < 0 or not (parent - best_score > 1e-10 * max(parent, 1.0)):
        return -1, float("nan"), parent
    return best_feat, best_thr, best_score


def predict_tree(feature, threshold, left, right, value, x):
    """Evaluate one flat-array tree on every row of ``x``."""
    n = x.shape[0]
    node = np.zeros(n, dtype=np.int32)
    while True:
        feats = feature[node]
        active = feats >= 0
        if not active.any():
            break
        rows = np.nonzero(active)[0]
        f = feats[rows]
        go_left = x[rows, f] <= threshold[node[rows]]
        nxt = np.where(go_left, left[node[rows]], right[node[rows]])
        node[rows] = nxt
    return value[node]


def predict_ensemble(forest_arrays, x, weights, init):
    """init + sum_t weights[t] * tree_t(x), accumulated in tree order."""
    out = np.full(x.shape[0], init, dtype=np.float64)
    for (feature, threshold, left, right, value), w in zip(forest_arrays, weights):
        out += w * predict_tree(feature, threshold, left, right, value, x)
    return out


# -- circular convolution (channel-first maps) --------------------------------

def _im2col_circular(xd_nhwc, kh, kw):
    """(B, H, W, Cin) -> contiguous (B*H*W, kh*kw*Cin) patch matrix with
    wrap-around padding; column order is (row offset, col offset, channel)."""
    b, h, w, cin = xd_nhwc.shape
    rh, rw = kh // 2, kw // 2
    xp = np.pad(xd_nhwc, ((0, 0), (rh, rh), (rw, rw), (0, 0)), mode="wrap")
    cols = np.empty((b, h, w, kh * kw * cin), dtype=xd_nhwc.dtype)
    idx = 0
    for di in range(kh):
        for dj in range(kw):
            cols[:, :, :, idx:idx + cin] = xp[:, di:di + h, dj:dj + w, :]
            idx += cin
    return cols.reshape(b * h * w, kh * kw * cin)


def conv_circ_fwd(xd, wd, bd):
    """x (B, Cin, H, W), w (Cout, Cin, kh, kw), b (Cout,) -> (B, Cout, H, W),
    circular padding, stride 1; im2col + one GEMM."""
    b, cin, h, w = xd.shape
    cout, _, kh, kw = wd.shape
    cols = _im2col_circular(np.ascontiguousarray(np.moveaxis(xd, 1, -1)), kh, kw)
    w2d = np.ascontiguousarray(wd.transpose(2, 3, 1, 0).reshape(kh * kw * cin, cout))
    out = (cols @ w2d + bd).reshape(b, h, w, cout)
    return np.ascontiguousarray(np.moveaxis(out, -1, 1))


def conv_circ_bwd(xd, wd, g, need_gx=True, need_gw=True):
    """Gradients of conv_circ_fwd: returns (gx, gw, gb); either side can be
    skipped when the corresponding parent is frozen."""
    b, cin, h, w = xd.shape
    cout, _, kh, kw = wd.shape
    g_nhwc = np.ascontiguousarray(np.moveaxis(g, 1, -1))
    g2d = g_nhwc.reshape(b * h * w, cout)
    gw = np.zeros_like(wd)
    if need_gw:
        x_nhwc = np.ascontiguousarray(np.moveaxis(xd, 1, -1))
        gw2d = _im2col_circular(x_nhwc, kh, kw).T @ g2d
        gw = np.ascontiguousarray(
            gw2d.reshape(kh, kw, cin, cout).transpose(3, 2, 0, 1))
    gb = g2d.sum(axis=0)
    gx = np.zeros_like(xd)
    if need_gx:
        # input gradient is the circular conv of g with the flipped kernel
        wflip = wd[:, :, ::-1, ::-1].transpose(2, 3, 0, 1)
        wflip2d = np.ascontiguousarray(wflip.reshape(kh * kw * cout, cin))
        gx = (_im2col_circular(g_nhwc, kh, kw) @ wflip2d).reshape(b, h, w, cin)
        gx = np.ascontiguousarray(np.moveaxis(gx, -1, 1))
    return gx, gw, gb
