"""Tree hot kernels: compiled extension when available, numpy otherwise.

Set ``HYBRIDPD_KERNELS=python`` (or ``c``) to force a backend; the compiled
backend is built with ``python setup.py build_ext --inplace``. Both backends
implement the same arithmetic contract, so fitted trees are identical.
"""
from __future__ import annotations

import os

from . import _pykernels

_requested = os.environ.get("HYBRIDPD_KERNELS", "").strip().lower()

_impl = None
_conv_impl = None
if _requested in ("", "c"):
    try:
        from . import _ckernels as _impl  # type: ignore[attr-defined]
    except ImportError:
        _impl = None
    try:
        from . import _cconv as _conv_impl  # type: ignore[attr-defined]
    except ImportError:
        _conv_impl = None
    if _requested == "c" and (_impl is None or _conv_impl is None):
        raise ImportError(
            "HYBRIDPD_KERNELS=c requested but the compiled kernels are not "
            "built; run `python setup.py build_ext --inplace`")
if _impl is None:
    _impl = _pykernels
if _conv_impl is None:
    _conv_impl = _pykernels

BACKEND = _impl.BACKEND
CONV_BACKEND = "c" if _conv_impl is not _pykernels else "python"
best_split = _impl.best_split
node_sse = _impl.node_sse
predict_tree = _impl.predict_tree
predict_ensemble = _impl.predict_ensemble
conv_circ_fwd = _conv_impl.conv_circ_fwd
conv_circ_bwd = _conv_impl.conv_circ_bwd


def get_backend(name):
    """Fetch a specific tree-kernel backend (equivalence tests/benchmarks)."""
    if name == "python":
        return _pykernels
    if name == "c":
        from . import _ckernels  # type: ignore[attr-defined]
        return _ckernels
    raise ValueError(f"unknown kernel backend {name!r}")


def get_conv_backend(name):
    """Fetch a specific convolution backend."""
    if name == "python":
        return _pykernels
    if name == "c":
        from . import _cconv  # type: ignore[attr-defined]
        return _cconv
    raise ValueError(f"unknown conv backend {name!r}")
