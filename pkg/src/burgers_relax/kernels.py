"""Backend selection for the hot loops.

The compiled extension is used when importable; set ``BURGERS_RELAX_PURE=1``
to force the numpy fallback.
"""

import os

from . import _kernels_py

python_backend = _kernels_py

if os.environ.get("BURGERS_RELAX_PURE", "") not in ("", "0"):
    compiled_backend = None
else:
    try:
        from . import _kernels as compiled_backend
    except ImportError:
        compiled_backend = None

_active = compiled_backend or python_backend
BACKEND = "cython" if compiled_backend is not None else "python"

diag_recurrence = _active.diag_recurrence
hereditary_sum = _active.hereditary_sum
grouped_matvec = _active.grouped_matvec
