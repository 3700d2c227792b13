"""Kernel selection: compiled extension when importable, pure Python otherwise.

Set CVRPTW_PURE_PYTHON=1 to force the fallback (used by the parity tests and
the kernel benchmark). Both implementations produce bit-identical output.
"""

from __future__ import annotations

import logging
import os

log = logging.getLogger(__name__)

if os.environ.get("CVRPTW_PURE_PYTHON") == "1":
    from ._kernel_py import extract_batch  # noqa: F401
    IMPL = "python"
else:
    try:
        from ._speedups import extract_batch  # noqa: F401
        IMPL = "compiled"
    except ImportError:  # extension not built; correctness is unaffected
        from ._kernel_py import extract_batch  # noqa: F401
        IMPL = "python"
        log.info("compiled kernel unavailable, using pure-Python fallback")
