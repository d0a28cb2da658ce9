import itertools
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from qmemcap.capacity import Ensemble, OptimizerConfig, default_ensemble_size, holevo_quantity, product_capacity
from qmemcap.channel import MemoryChannel, depolarizing_channel, identity_channel, random_channel
from qmemcap.errors import DimensionError, InvalidEnsembleError
from qmemcap.operators import random_density_matrix

FAST = OptimizerConfig(restarts=3, seed=0)


def h2(x):
    return 0.0 if x in (0.0, 1.0) else -x * math.log2(x) - (1 - x) * math.log2(1 - x)


def depolarizing_grid_oracle(p, step=0.01):
    """Best two-state pure ensemble on a Bloch-angle x weight grid.

    Depolarizing shrinks Bloch vectors by (1 - p); a state with Bloch length r
    has entropy h2((1 + r) / 2).  The first state sits on the north pole.
    """
    shrink = 1 - p
    s_pure = h2((1 + shrink) / 2)
    best = 0.0
    for theta in np.arange(0, math.pi + 1e-12, step * math.pi):
        r2 = shrink * np.array([math.sin(theta), 0.0, math.cos(theta)])
        r1 = shrink * np.array([0.0, 0.0, 1.0])
        for w in np.arange(0, 1 + 1e-12, step):
            avg = np.linalg.norm(w * r1 + (1 - w) * r2)
            best = max(best, h2((1 + avg) / 2) - s_pure)
    return best


def classical_basis_holevo(gamma, q, flips, n):
    """Holevo value of uniform computational-basis product inputs for a Markov-switched bit flip.

    Outputs are diagonal, so chi = n - H(flip pattern).
    """
    probs = []
    for e in itertools.product((0, 1), repeat=n):
        tot = 0.0
        for path in itertools.product(range(len(gamma)), repeat=n):
            w = gamma[path[0]] * np.prod([q[a, b] for a, b in zip(path, path[1:])])
            tot += w * np.prod([flips[i] if ek else 1 - flips[i] for i, ek in zip(path, e)])
        probs.append(tot)
    probs = np.array(probs)
    return n + float(np.sum(probs * np.log2(probs)))


def test_holevo_known_values():
    assert holevo_quantity([0.5, 0.5], [np.diag([1, 0]), np.diag([0, 1])]) == pytest.approx(1.0)
    assert holevo_quantity([0.3, 0.7], [np.eye(2) / 2] * 2) == pytest.approx(0.0, abs=1e-14)
    with pytest.raises(DimensionError):
        holevo_quantity([1.0], [np.eye(2) / 2, np.eye(2) / 2])
    with pytest.raises(InvalidEnsembleError):
        holevo_quantity([0.6, 0.6], [np.eye(2) / 2] * 2)


def test_ensemble_validation():
    Ensemble([1.0], [[np.eye(2) / 2]])
    with pytest.raises(InvalidEnsembleError):
        Ensemble([0.5, 0.5], [[np.eye(2) / 2], [np.eye(2) / 2, np.eye(2) / 2]])
    with pytest.raises(InvalidEnsembleError):
        Ensemble([0.5, 0.6], [[np.eye(2) / 2], [np.eye(2) / 2]])


@given(st.integers(0, 2**32 - 1), st.integers(1, 6), st.integers(2, 4))
def test_holevo_bounds(seed, size, d):
    rng = np.random.default_rng(seed)
    probs = rng.dirichlet(np.ones(size))
    states = [random_density_matrix(d, rng) for _ in range(size)]
    chi = holevo_quantity(probs, states)
    assert -1e-12 <= chi <= min(math.log2(d), -np.sum(probs * np.log2(probs))) + 1e-9


def test_identity_channel_single_letter():
    est = product_capacity(MemoryChannel.memoryless(identity_channel(2)), 1, FAST)
    assert est.chi_n == pytest.approx(1.0, abs=1e-6)


def test_depolarizing_half_matches_closed_form_and_grid():
    closed = 1 - h2(0.25)
    assert closed == pytest.approx(0.188722, abs=1e-6)
    assert depolarizing_grid_oracle(0.5) == pytest.approx(closed, abs=1e-3)
    est = product_capacity(MemoryChannel.memoryless(depolarizing_channel(0.5)), 1, FAST)
    assert est.chi_n == pytest.approx(closed, abs=1e-6)


def test_fully_depolarizing_has_zero_capacity():
    est = product_capacity(MemoryChannel.memoryless(depolarizing_channel(1.0)), 2, FAST)
    assert abs(est.chi_n) < 1e-9


def test_two_branch_single_letter_closed_form(two_branch):
    # the stationary single-letter channel is depolarizing with p = gamma . p_i
    p_bar = two_branch.chain.gamma @ np.array([0.1, 0.9])
    est = product_capacity(two_branch, 1, FAST)
    assert est.chi_n == pytest.approx(1 - h2(p_bar / 2), abs=1e-9)
    assert est.chi_n == pytest.approx(0.312684907169, abs=1e-9)


def test_two_branch_two_letters_reaches_basis_oracle(two_branch):
    oracle = classical_basis_holevo(two_branch.chain.gamma, two_branch.chain.q, [0.05, 0.45], 2)
    assert oracle == pytest.approx(0.64322549217, abs=1e-9)
    est = product_capacity(two_branch, 2, OptimizerConfig(restarts=2, seed=0))
    assert est.chi_n >= oracle - 1e-9
    assert est.chi_n == pytest.approx(oracle, abs=1e-6)


def test_estimate_is_reproducible_and_thread_independent(two_branch):
    a = product_capacity(two_branch, 1, OptimizerConfig(restarts=3, seed=5))
    b = product_capacity(two_branch, 1, OptimizerConfig(restarts=3, seed=5, threads=3))
    assert a.chi_n == b.chi_n
    assert a.optimizer_trace == b.optimizer_trace
    np.testing.assert_array_equal(a.ensemble.probs, b.ensemble.probs)


def test_trace_is_non_decreasing_and_restarts_reported(rng):
    ch = MemoryChannel.memoryless(random_channel(2, 2, 2, rng))
    est = product_capacity(ch, 1, OptimizerConfig(restarts=4, seed=1))
    trace = np.array(est.optimizer_trace)
    assert np.all(np.diff(trace) >= 0)
    assert trace[-1] == pytest.approx(est.chi_n, abs=1e-12)
    assert len(est.restarts) == 4
    assert est.chi_n == pytest.approx(est.ensemble.holevo(ch), abs=1e-12)


def test_default_ensemble_size():
    ch = MemoryChannel.memoryless(identity_channel(2))
    assert default_ensemble_size(ch, 1) == 8
    assert default_ensemble_size(ch, 4) == 16
