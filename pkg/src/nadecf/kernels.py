"""Backend selection for the hot training kernel.

The compiled extension is used when it imports cleanly. Set the
environment variable ``NADECF_PURE_PYTHON=1`` to force the NumPy
fallback (useful for debugging and for benchmarking the two backends
against each other).
"""

import os

from . import _reference

ACT_TANH = _reference.ACT_TANH
ACT_IDENTITY = _reference.ACT_IDENTITY
PROB_EPS = _reference.PROB_EPS


def _pick_backend():
    if os.environ.get("NADECF_PURE_PYTHON", "").strip() not in ("", "0"):
        return "numpy", _reference
    try:
        from . import _speedups
    except ImportError:
        return "numpy", _reference
    return "cython", _speedups


BACKEND, _impl = _pick_backend()

ordered_nll_grad = _impl.ordered_nll_grad


def backends():
    """Map of available backend name to kernel function."""
    available = {"numpy": _reference.ordered_nll_grad}
    try:
        from . import _speedups
    except ImportError:
        return available
    available["cython"] = _speedups.ordered_nll_grad
    return available
