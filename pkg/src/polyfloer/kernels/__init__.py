"""Hot numerical kernels with a compiled core and a numpy fallback.

The compiled extension ``_core`` is used when it was built and imports
cleanly; otherwise the numpy implementations in ``_fallback`` are used.
Setting ``POLYFLOER_KERNELS=python`` forces the fallback.
"""
import os

import numpy as np

from . import _fallback

BACKEND = "python"
_impl = _fallback
if os.environ.get("POLYFLOER_KERNELS", "").lower() != "python":
    try:
        from . import _core as _impl  # type: ignore[no-redef]

        BACKEND = "compiled"
    except ImportError:
        _impl = _fallback

batched_matvec = _impl.batched_matvec
bump_profile = _impl.bump_profile
gap_sweep = _impl.gap_sweep


def batched_eigh(blocks):
    """Eigen-decompose a stack of Hermitian blocks (LAPACK via numpy)."""
    return np.linalg.eigh(blocks)


__all__ = ["BACKEND", "batched_matvec", "bump_profile", "gap_sweep", "batched_eigh"]
