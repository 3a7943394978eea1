"""Backend switch for the hot kernels.

Set ``TSBEAM_NUMBA=0`` before import to force the pure-numpy path.  When
numba is missing the numpy path is used regardless.
"""

import os

try:
    import numba
except ImportError:  # pragma: no cover - numba is an optional speedup
    numba = None

_flag = os.environ.get("TSBEAM_NUMBA", "1").strip().lower()
USE_NUMBA = numba is not None and _flag not in ("0", "false", "no", "off")


def backend():
    return "numba" if USE_NUMBA else "numpy"
