"""Kernel backend selection.

The compiled ``_kernels`` extension is used when it imports; otherwise the
numpy module ``_kernels_py`` is used. Setting ``UVQNHE_PURE_PYTHON=1`` forces
the fallback.
"""

import os

if os.environ.get("UVQNHE_PURE_PYTHON", "") not in ("", "0"):
    from . import _kernels_py as _impl
else:
    try:
        from . import _kernels as _impl
    except ImportError:
        from . import _kernels_py as _impl

BACKEND = "cython" if _impl.__name__.endswith("._kernels") else "numpy"

apply_1q = _impl.apply_1q
apply_controlled = _impl.apply_controlled
apply_zz_phase = _impl.apply_zz_phase
apply_pauli = _impl.apply_pauli
pair_sum = _impl.pair_sum
pair_grad = _impl.pair_grad
phase_pair_sum = _impl.phase_pair_sum
phase_pair_grad = _impl.phase_pair_grad

__all__ = [
    "BACKEND",
    "apply_1q",
    "apply_controlled",
    "apply_zz_phase",
    "apply_pauli",
    "pair_sum",
    "pair_grad",
    "phase_pair_sum",
    "phase_pair_grad",
]
