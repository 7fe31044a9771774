"""Partial dependence of a fitted model on the known features x_k.

The estimator clamps x_k to a query point, sweeps the complement features
over the background sample rows, and averages the model's predictions.
Building a proxy dataset evaluates the estimator at every x_k observed in
the learning sample, which yields one (x_k, PD) pair per training row.
"""
from __future__ import annotations

import numpy as np

from .data import Dataset
from .errors import ConfigurationError


def _check_filter(model, known_indices):
    input_filter = getattr(model, "input_filter", ()) or ()
    blocked = set(input_filter) & set(known_indices)
    if blocked:
        raise ConfigurationError(
            f"partial dependence undefined: model filters out known features {sorted(blocked)}")


def pd_values(model, background_x, xk_queries, known_indices, chunk_rows=262144):
    """PD of ``model`` at each query row, averaged over the background rows.

    background_x: (N, d) full-feature rows; xk_queries: (Q, |K|). Returns
    (Q,) for scalar models and (Q, m) for vector-valued ones. When x_k covers
    every feature the complement is empty and PD reduces to a direct model
    evaluation at the queries.
    """
    background_x = np.asarray(background_x, dtype=np.float64)
    xk_queries = np.atleast_2d(np.asarray(xk_queries, dtype=np.float64))
    known = [int(i) for i in known_indices]
    if background_x.shape[0] < 1:
        raise ConfigurationError("background sample is empty")
    if xk_queries.shape[1] != len(known):
        raise ConfigurationError(
            f"query dimension {xk_queries.shape[1]} != |K| = {len(known)}")
    _check_filter(model, known)

    n = background_x.shape[0]
    q = xk_queries.shape[0]
    if len(known) == background_x.shape[1]:
        out = np.asarray(model.predict(xk_queries), dtype=np.float64)
        return out

    per_chunk = max(1, chunk_rows // n)
    pieces = []
    for start in range(0, q, per_chunk):
        block = xk_queries[start:start + per_chunk]
        bq = block.shape[0]
        sweep = np.tile(background_x, (bq, 1))
        sweep[:, known] = np.repeat(block, n, axis=0)
        pred = np.asarray(model.predict(sweep), dtype=np.float64)
        pred = pred.reshape(bq, n, *pred.shape[1:])
        pieces.append(pred.mean(axis=1))
    return np.concatenate(pieces, axis=0)


def pd_estimate(model, xk_query, background):
    """PD at a single x_k point; background may be a Dataset or a matrix."""
    if isinstance(background, Dataset):
        known = background.known_feature_indices
        bg = background.features
    else:
        raise ConfigurationError("background must be a Dataset (carries x_k indices)")
    out = pd_values(model, bg, np.atleast_2d(xk_query), known)
    return float(out[0]) if out.ndim == 1 else out[0]


def pd_dataset(model, data: Dataset):
    """Proxy pairs (x_k, PD) at every x_k observed in the sample, row order
    preserved. Returns (xk_matrix, pd_targets)."""
    values = pd_values(model, data.features, data.xk, data.known_feature_indices)
    return data.xk.copy(), values


def pd_values_oracle(model, background_x, xk_queries, known_indices):
    """Naive double loop over (query, background row); the independent
    reference the fast path is tested against."""
    background_x = np.asarray(background_x, dtype=np.float64)
    xk_queries = np.atleast_2d(np.asarray(xk_queries, dtype=np.float64))
    known = [int(i) for i in known_indices]
    _check_filter(model, known)
    rows = []
    for query in xk_queries:
        acc = None
        for row in background_x:
            modified = row.copy()
            modified[known] = query
            pred = np.asarray(model.predict(modified[None, :]), dtype=np.float64)[0]
            acc = pred if acc is None else acc + pred
        rows.append(acc / background_x.shape[0])
    out = np.asarray(rows)
    return out.reshape(len(rows)) if out.ndim == 2 and out.shape[1] == 1 else out
