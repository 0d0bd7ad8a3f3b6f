"""Pure-numpy versions of the hot loops (fallback when the extension is absent)."""

import numpy as np


def diag_recurrence(decay, drive, z0):
    """z[j+1] = decay[j] * z[j] + drive[j], elementwise; returns all N states."""
    decay = np.asarray(decay, dtype=float)
    drive = np.asarray(drive, dtype=float)
    out = np.empty((decay.shape[0] + 1, decay.shape[1]))
    out[0] = z0
    for j in range(decay.shape[0]):
        out[j + 1] = decay[j] * out[j] + drive[j]
    return out


def hereditary_sum(times, lam, rates):
    """Exact hereditary integral of a piecewise-constant rate against exp(lam * tau).

    W[j, m] = sum_{i < j} rates[i, m] * int_{t_i}^{t_{i+1}} exp(lam[m] (t_j - s)) ds
    """
    times = np.asarray(times, dtype=float)
    lam = np.asarray(lam, dtype=float)
    rates = np.asarray(rates, dtype=float)
    n = times.size
    out = np.zeros((n, lam.size))
    for j in range(1, n):
        lag_lo = times[j] - times[:j]
        lag_hi = times[j] - times[1:j + 1]
        w = (np.exp(np.outer(lag_lo, lam)) - np.exp(np.outer(lag_hi, lam))) / lam
        out[j] = np.einsum("im,im->m", w, rates[:j])
    return out


def grouped_matvec(group, mats, vecs):
    """out[e] = mats[group[e]] @ vecs[e]."""
    group = np.asarray(group, dtype=np.intp)
    return np.einsum("epq,eq->ep", np.asarray(mats)[group], np.asarray(vecs, dtype=float))
