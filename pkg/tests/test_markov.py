import numpy as np
import pytest
from hypothesis import given, strategies as st

from qmemcap.errors import NonErgodicChainError, NotStochasticError, ReducibleChainError
from qmemcap.markov import (
    MarkovChain,
    is_ergodic,
    mixing_deviation,
    mixing_length,
    n_step,
    random_ergodic_chain,
    sample_path,
    satisfies_mixing,
    stationary_distribution,
)

Q = [[0.9, 0.1], [0.2, 0.8]]


def test_two_state_stationary_closed_form():
    # gamma = (b, a) / (a + b) for q = [[1-a, a], [b, 1-b]]
    np.testing.assert_allclose(stationary_distribution(Q), [2 / 3, 1 / 3], atol=1e-14)


def test_n_step_values():
    np.testing.assert_allclose(n_step(MarkovChain(Q), 2), [[0.83, 0.17], [0.34, 0.66]], atol=1e-14)
    with pytest.raises(ValueError):
        n_step(MarkovChain(Q), 0)


def test_mixing_length_matches_spectral_formula():
    # q^l = Gamma + 0.7^l A with max_ij |A_ij| / gamma_j = 2, so l0 = min{l : 2 * 0.7^l < delta^3}
    chain = MarkovChain(Q)
    for delta in (0.3, 0.4, 0.5, 0.7):
        expected = next(l for l in range(1, 1000) if 2 * 0.7**l < delta**3)
        assert mixing_length(chain, delta) == expected
    assert mixing_length(chain, 0.5) == 8


def test_mixing_length_trivial_chain():
    assert mixing_length(MarkovChain.trivial(), 0.1) == 1


def test_rejects_bad_chains():
    with pytest.raises(NotStochasticError):
        MarkovChain([[0.5, 0.6], [0.5, 0.5]])
    with pytest.raises(NonErgodicChainError):
        MarkovChain([[0.0, 1.0], [1.0, 0.0]])
    with pytest.raises(ReducibleChainError):
        MarkovChain([[1.0, 0.0], [0.0, 1.0]])
    with pytest.raises(NotStochasticError):
        MarkovChain(Q, gamma=[0.5, 0.5])


def test_ergodicity_needs_aperiodicity():
    assert is_ergodic([[0.0, 1.0], [0.5, 0.5]])
    assert not is_ergodic([[0, 1, 0], [0, 0, 1], [1, 0, 0]])


def test_sample_path_frequencies(rng):
    chain = MarkovChain(Q)
    path = sample_path(chain, 200_000, seed=5)
    freq = np.bincount(path, minlength=2) / len(path)
    np.testing.assert_allclose(freq, chain.gamma, atol=0.01)
    np.testing.assert_array_equal(path, sample_path(chain, 200_000, seed=5))


def test_sample_path_transition_counts():
    chain = MarkovChain(Q)
    path = sample_path(chain, 200_000, seed=9)
    counts = np.zeros((2, 2))
    np.add.at(counts, (path[:-1], path[1:]), 1)
    np.testing.assert_allclose(counts / counts.sum(axis=1, keepdims=True), Q, atol=0.01)


@given(st.integers(0, 2**32 - 1), st.integers(1, 5))
def test_random_chain_invariance(seed, size):
    chain = random_ergodic_chain(size, np.random.default_rng(seed))
    np.testing.assert_allclose(chain.gamma @ chain.q, chain.gamma, atol=1e-12)
    assert chain.gamma.sum() == pytest.approx(1.0)


@given(st.integers(0, 2**32 - 1), st.integers(2, 4), st.sampled_from([0.3, 0.5]))
def test_mixing_persists_past_mixing_length(seed, size, delta):
    chain = random_ergodic_chain(size, np.random.default_rng(seed))
    l0 = mixing_length(chain, delta)
    assert satisfies_mixing(chain, delta, l0)
    assert satisfies_mixing(chain, delta, l0 + 1)
    if l0 > 1:
        assert not satisfies_mixing(chain, delta, l0 - 1)
    devs = [mixing_deviation(chain, n_step(chain, l)) for l in range(1, l0 + 3)]
    assert all(b <= a + 1e-12 for a, b in zip(devs, devs[1:]))
