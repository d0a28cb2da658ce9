"""Backend selection for the sampling kernels.

The compiled extension ``qmemcap._kernels`` is used when it imports;
otherwise the numpy fallback is used.  Setting ``QMEMCAP_PURE_PYTHON=1``
forces the fallback.  Both backends take explicit uniforms and return
identical samples.
"""
import os

import numpy as np

from . import _kernels_py

if os.environ.get("QMEMCAP_PURE_PYTHON", "") not in ("", "0"):
    _compiled = None
else:
    try:
        from . import _kernels as _compiled
    except ImportError:
        _compiled = None

BACKEND = "cython" if _compiled is not None else "python"
_impl = _compiled if _compiled is not None else _kernels_py


def stable_cdf(probs) -> np.ndarray:
    """Cumulative distribution along the last axis, pinned to exactly 1.0.

    Every entry at or after the last positive-probability index is set to
    1.0, so inverse-CDF sampling with ``u < 1`` never lands on a trailing
    zero-probability outcome.
    """
    p = np.clip(np.asarray(probs, dtype=float), 0.0, None)
    cdf = np.cumsum(p, axis=-1)
    total = cdf[..., -1:]
    cdf = np.divide(cdf, total, out=np.ones_like(cdf), where=total > 0)
    n = p.shape[-1]
    idx = np.arange(n)
    positive = p > 0
    last = np.where(positive.any(axis=-1), n - 1 - np.argmax(positive[..., ::-1], axis=-1), n - 1)
    cdf[idx >= last[..., None]] = 1.0
    return np.ascontiguousarray(cdf)


def sample_chain(init_cdf, trans_cdf, u, backend=None):
    impl = _select(backend)
    return impl.sample_chain(
        np.ascontiguousarray(init_cdf, dtype=float),
        np.ascontiguousarray(trans_cdf, dtype=float),
        np.ascontiguousarray(u, dtype=float),
    )


def sample_hmm(init_cdf, emit_cdf, u, n_symbols, backend=None):
    """Sample symbol sequences of a chain with pair-dependent emissions.

    ``emit_cdf[k, i]`` is the CDF over the joint outcome ``i_next * n_symbols + p``
    given current state ``i`` at step ``k``.  Returns ``(n_samples, m)`` symbols.
    """
    impl = _select(backend)
    return impl.sample_hmm(
        np.ascontiguousarray(init_cdf, dtype=float),
        np.ascontiguousarray(emit_cdf, dtype=float),
        np.ascontiguousarray(u, dtype=float),
        int(n_symbols),
    )


def _select(backend):
    if backend is None:
        return _impl
    if backend == "python":
        return _kernels_py
    if backend == "cython":
        if _compiled is None:
            raise RuntimeError("compiled kernels are not available")
        return _compiled
    raise ValueError(f"unknown backend {backend!r}")


def compiled_available() -> bool:
    return _compiled is not None
