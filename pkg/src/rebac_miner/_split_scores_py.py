"""Pure-Python split-scoring kernel, fallback for the compiled version."""

import numpy as np


def _entropy(counts) -> float:
    total = counts.sum()
    if total == 0:
        return 0.0
    p = counts[counts > 0] / total
    return float(-(p * np.log2(p)).sum())


def split_gains(cells, labels, rows, cands):
    """Information gain of splitting ``rows`` on each candidate column."""
    gains = np.zeros(len(cands), dtype=np.float64)
    if len(rows) == 0 or len(cands) == 0:
        return gains
    lab = labels[rows].astype(np.intp)
    n = len(rows)
    h_parent = _entropy(np.bincount(lab, minlength=3))
    sub = cells[rows]
    for j, c in enumerate(cands):
        combo = np.bincount(sub[:, c].astype(np.intp) * 3 + lab, minlength=9)
        combo = combo.reshape(3, 3)
        totals = combo.sum(axis=1)
        remainder = 0.0
        for k in range(3):
            if totals[k]:
                remainder += (totals[k] / n) * _entropy(combo[k])
        gains[j] = h_parent - remainder
    return gains
