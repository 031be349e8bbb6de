"""Chain DP backend selection.

Imports the compiled kernels when the extension was built, otherwise the
NumPy fallback. Set ``STAGECRF_PURE=1`` in the environment to force the
fallback (useful for benchmarking the two against each other).
"""

import os

from . import _dp_py

if os.environ.get("STAGECRF_PURE"):
    _impl = _dp_py
else:
    try:
        from . import _dp_c as _impl
    except ImportError:
        _impl = _dp_py

BACKEND = "pure" if _impl is _dp_py else "compiled"

forward_pass = _impl.forward_pass
backward_pass = _impl.backward_pass
viterbi_path = _impl.viterbi_path
