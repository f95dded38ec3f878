"""Hot numerical kernels, with a compiled core and a numpy fallback.

The Cython extension (built at install time) is picked when importable;
otherwise the numpy implementation is used. Set SPATIALNN_PURE_PYTHON=1
to force the fallback. `BACKEND` names the active implementation.

Both backends are pure functions over value inputs and are safe to call
from multiple threads; for a fixed backend their reduction order is fixed,
so results are bitwise reproducible.
"""

import os

from spatialnn.kernels import _pykernels

_impl = _pykernels
BACKEND = "numpy"

if os.environ.get("SPATIALNN_PURE_PYTHON", "").lower() not in ("1", "true", "yes"):
    try:
        from spatialnn.kernels import _ckernels as _impl  # type: ignore

        BACKEND = "cython"
    except ImportError:
        pass

pairwise_distances = _impl.pairwise_distances
weight_input_grads = _impl.weight_input_grads
lif_sequence = _impl.lif_sequence
lif_backward = _impl.lif_backward
