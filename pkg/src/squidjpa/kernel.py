"""Backend selection for the RK4 time stepper.

The compiled extension is used when it imports; otherwise the pure-Python
version takes over. Set ``SQUIDJPA_PURE_PYTHON=1`` to force the fallback.
"""

import logging
import os

from . import _pykernel

log = logging.getLogger(__name__)

BACKEND = "python"
run_span = _pykernel.run_span

if os.environ.get("SQUIDJPA_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernel
    except ImportError:  # extension not built
        log.debug("compiled kernel unavailable, using pure-Python fallback")
    else:
        run_span = _ckernel.run_span
        BACKEND = "cython"

python_run_span = _pykernel.run_span
