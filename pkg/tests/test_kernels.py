import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, strategies as st

from qmemcap import kernels

needs_compiled = pytest.mark.skipif(not kernels.compiled_available(), reason="compiled kernels not built")


def test_stable_cdf_pins_trailing_zeros():
    cdf = kernels.stable_cdf([0.2, 0.8, 0.0, 0.0])
    np.testing.assert_array_equal(cdf, [0.2, 1.0, 1.0, 1.0])
    # a u just below 1 must never select a zero-probability outcome
    assert (cdf <= 1 - 1e-16).sum() == 1


def test_stable_cdf_all_zero_row():
    np.testing.assert_array_equal(kernels.stable_cdf([0.0, 0.0]), [1.0, 1.0])


def test_python_chain_sampler_inverse_cdf():
    init = kernels.stable_cdf([0.5, 0.5])
    trans = kernels.stable_cdf([[0.0, 1.0], [1.0, 0.0]])
    path = kernels.sample_chain(init, trans, np.array([0.7, 0.3, 0.3, 0.3]), backend="python")
    np.testing.assert_array_equal(path, [1, 0, 1, 0])


def test_unknown_backend():
    with pytest.raises(ValueError):
        kernels.sample_chain([1.0], [[1.0]], [0.5], backend="fortran")


def _random_hmm(rng, m, states, symbols):
    emit = rng.dirichlet(np.ones(states * symbols), size=(m, states))
    emit[rng.random(emit.shape) < 0.2] = 0.0
    emit[..., 0] += 1e-3
    emit /= emit.sum(axis=-1, keepdims=True)
    return kernels.stable_cdf(rng.dirichlet(np.ones(states))), kernels.stable_cdf(emit)


@needs_compiled
@given(st.integers(0, 2**32 - 1), st.integers(1, 30), st.integers(1, 4), st.integers(1, 5))
def test_backends_agree_on_hmm(seed, m, states, symbols):
    rng = np.random.default_rng(seed)
    init, emit = _random_hmm(rng, m, states, symbols)
    u = rng.random((50, m + 1))
    a = kernels.sample_hmm(init, emit, u, symbols, backend="python")
    b = kernels.sample_hmm(init, emit, u, symbols, backend="cython")
    np.testing.assert_array_equal(a, b)
    assert a.dtype == b.dtype == np.int64


@needs_compiled
@given(st.integers(0, 2**32 - 1), st.integers(1, 5), st.integers(1, 200))
def test_backends_agree_on_chain(seed, states, length):
    rng = np.random.default_rng(seed)
    init = kernels.stable_cdf(rng.dirichlet(np.ones(states)))
    trans = kernels.stable_cdf(rng.dirichlet(np.ones(states), size=states))
    u = rng.random(length)
    np.testing.assert_array_equal(
        kernels.sample_chain(init, trans, u, backend="python"),
        kernels.sample_chain(init, trans, u, backend="cython"),
    )


def test_hmm_emission_frequencies():
    # one state, two symbols with probabilities 0.3 / 0.7
    emit = kernels.stable_cdf(np.tile([0.3, 0.7], (10, 1, 1)))
    u = np.random.default_rng(0).random((20_000, 11))
    out = kernels.sample_hmm(kernels.stable_cdf([1.0]), emit, u, 2)
    assert abs((out == 0).mean() - 0.3) < 0.01


def test_env_var_forces_python_backend():
    env = dict(os.environ, QMEMCAP_PURE_PYTHON="1")
    code = "from qmemcap import kernels; print(kernels.BACKEND)"
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
