"""Numpy implementations of the sampling kernels (fallback backend)."""
import numpy as np


def _search_rows(cdf_rows, u):
    # index of the first cdf entry strictly above u
    return (cdf_rows <= u[:, None]).sum(axis=1)


def sample_chain(init_cdf, trans_cdf, u):
    n = len(u)
    path = np.empty(n, dtype=np.int64)
    if n == 0:
        return path
    state = int(np.searchsorted(init_cdf, u[0], side="right"))
    path[0] = state
    for t in range(1, n):
        state = int(np.searchsorted(trans_cdf[state], u[t], side="right"))
        path[t] = state
    return path


def sample_hmm(init_cdf, emit_cdf, u, n_symbols):
    n_samples = u.shape[0]
    m = emit_cdf.shape[0]
    out = np.empty((n_samples, m), dtype=np.int64)
    state = _search_rows(np.broadcast_to(init_cdf, (n_samples, len(init_cdf))), u[:, 0])
    for k in range(m):
        j = _search_rows(emit_cdf[k][state], u[:, k + 1])
        out[:, k] = j % n_symbols
        state = j // n_symbols
    return out
