"""Backend selection for the hot loops.

The compiled core (``_ckernels``) is used when it was built; otherwise, or
when ``MIMO_EE_PURE_PYTHON`` is set to a non-empty value other than ``0``,
the pure-Python twin is used.
"""

import os

from mimo_ee import _pykernels

_force_python = os.environ.get("MIMO_EE_PURE_PYTHON", "") not in ("", "0")

if _force_python:
    _impl = _pykernels
    BACKEND = "python"
else:
    try:
        from mimo_ee import _ckernels as _impl

        BACKEND = "cython"
    except ImportError:
        _impl = _pykernels
        BACKEND = "python"

CONVERGED = _pykernels.CONVERGED
ITERATION_CAP = _pykernels.ITERATION_CAP
UNATTAINABLE = _pykernels.UNATTAINABLE

chi_values = _impl.chi_values
fixed_point = _impl.fixed_point
project = _impl.project
multiplier_loop = _impl.multiplier_loop
lb_sum_rate = _impl.lb_sum_rate


def available_backends():
    """Map of backend name to kernel module for every importable backend."""
    out = {"python": _pykernels}
    try:
        from mimo_ee import _ckernels

        out["cython"] = _ckernels
    except ImportError:
        pass
    return out
