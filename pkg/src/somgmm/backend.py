"""Backend selection: compiled extension if present, numpy fallback otherwise.

Set ``SOMGMM_BACKEND=python`` to force the fallback (used by the benchmark
to compare both paths in one process is not possible; it spawns instead).
"""

import os

if os.environ.get("SOMGMM_BACKEND", "").lower() == "python":
    from . import _core_py as _impl

    BACKEND = "python"
else:
    try:
        from . import _core as _impl  # type: ignore[attr-defined]

        BACKEND = "cython"
    except ImportError:
        from . import _core_py as _impl

        BACKEND = "python"

log_joints = _impl.log_joints
