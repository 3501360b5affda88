"""Kernel dispatch: compiled split scoring when available, pure Python otherwise.

Set REBAC_MINER_FORCE_PY_KERNEL=1 to force the fallback (used by the
benchmark and by tests that compare the two implementations).
"""

import os

import numpy as np

from rebac_miner import _split_scores_py

if os.environ.get("REBAC_MINER_FORCE_PY_KERNEL"):
    _impl = _split_scores_py
    IMPLEMENTATION = "python"
else:
    try:
        from rebac_miner import _split_scores as _impl  # type: ignore[no-redef]

        IMPLEMENTATION = "cython"
    except ImportError:
        _impl = _split_scores_py
        IMPLEMENTATION = "python"


def split_gains(cells, labels, rows, cands) -> np.ndarray:
    """Per-candidate information gain over the given row subset.

    ``cells`` is an (n_rows, n_features) uint8 matrix of truth-value codes,
    ``labels`` the per-row label codes, ``rows`` and ``cands`` index arrays.
    """
    cells = np.ascontiguousarray(cells, dtype=np.uint8)
    labels = np.ascontiguousarray(labels, dtype=np.uint8)
    rows = np.ascontiguousarray(rows, dtype=np.int64)
    cands = np.ascontiguousarray(cands, dtype=np.int64)
    return _impl.split_gains(cells, labels, rows, cands)
