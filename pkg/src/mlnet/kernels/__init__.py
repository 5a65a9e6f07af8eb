"""LSTM sequence kernels with a compiled core and a pure-numpy fallback.

The compiled extension is preferred when importable; set MLNET_PURE_PYTHON=1
to force the fallback (used by the parity tests and the benchmark).
"""

import os

from . import pure

if os.environ.get("MLNET_PURE_PYTHON") == "1":
    _impl = pure
    BACKEND = "python"
else:
    try:
        from . import _fastcore as _impl
        BACKEND = "cython"
    except ImportError:
        _impl = pure
        BACKEND = "python"


import numpy as np


def _c(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def _m(mask):
    return np.ascontiguousarray(mask, dtype=np.uint8)


def lstm_forward(x, mask, W, U, b):
    return _impl.lstm_forward(_c(x), _m(mask), _c(W), _c(U), _c(b))


def lstm_backward(x, mask, W, U, gates, h_states, c_states, dh_out):
    return _impl.lstm_backward(
        _c(x), _m(mask), _c(W), _c(U), _c(gates), _c(h_states), _c(c_states), _c(dh_out)
    )
