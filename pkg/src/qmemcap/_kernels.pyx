# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled inverse-CDF samplers for Markov chains and pinched HMMs.

Both functions consume caller-supplied uniforms so that results are
bit-identical to the numpy fallback in ``_kernels_py``.
"""
import numpy as np

ctypedef long long i64


cdef inline i64 _search(const double[:] cdf, double u) noexcept nogil:
    cdef i64 j = 0
    while cdf[j] <= u:
        j += 1
    return j


def sample_chain(const double[:] init_cdf, const double[:, :] trans_cdf, const double[:] u):
    cdef Py_ssize_t n = u.shape[0], t
    out = np.empty(n, dtype=np.int64)
    cdef i64[:] path = out
    if n == 0:
        return out
    with nogil:
        path[0] = _search(init_cdf, u[0])
        for t in range(1, n):
            path[t] = _search(trans_cdf[path[t - 1]], u[t])
    return out


def sample_hmm(const double[:] init_cdf, const double[:, :, :] emit_cdf,
               const double[:, :] u, i64 n_symbols):
    cdef Py_ssize_t n_samples = u.shape[0], m = emit_cdf.shape[0], s, k
    cdef i64 state, j
    out = np.empty((n_samples, m), dtype=np.int64)
    cdef i64[:, :] sym = out
    with nogil:
        for s in range(n_samples):
            state = _search(init_cdf, u[s, 0])
            for k in range(m):
                j = _search(emit_cdf[k, state], u[s, k + 1])
                sym[s, k] = j % n_symbols
                state = j // n_symbols
    return out
