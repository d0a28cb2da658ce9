"""Finite Markov chains: invariant distribution, ergodicity, mixing length, sampling."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.csgraph import connected_components

from . import kernels
from .errors import NonErgodicChainError, NotStochasticError, ReducibleChainError

STOCHASTIC_TOL = 1e-12
INVARIANCE_TOL = 1e-10
MIXING_CAP = 10**6


def _check_stochastic(q) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    if q.ndim != 2 or q.shape[0] != q.shape[1] or q.shape[0] == 0:
        raise NotStochasticError(f"transition matrix must be square, got shape {q.shape}")
    if np.any(q < -STOCHASTIC_TOL) or np.any(q > 1 + STOCHASTIC_TOL):
        raise NotStochasticError("transition probabilities must lie in [0, 1]")
    if np.max(np.abs(q.sum(axis=1) - 1.0)) > STOCHASTIC_TOL:
        raise NotStochasticError("rows of the transition matrix must sum to 1")
    return np.clip(q, 0.0, 1.0)


def is_irreducible(q) -> bool:
    q = _check_stochastic(q)
    n_comp, _ = connected_components(q > 0, directed=True, connection="strong")
    return n_comp == 1


def stationary_distribution(q, tol: float = 1e-14, max_iter: int = 100_000) -> np.ndarray:
    """Unique invariant distribution ``gamma = gamma q`` of an irreducible chain.

    Solves the linear fixed-point system and then polishes with power
    iteration on the lazy chain ``(I + q) / 2`` (aperiodic even if ``q`` is
    periodic) until the residual drops below ``tol``.
    """
    q = _check_stochastic(q)
    if not is_irreducible(q):
        raise ReducibleChainError("chain is reducible: no unique invariant distribution")
    n = q.shape[0]
    a = np.vstack([(q - np.eye(n)).T, np.ones(n)])
    b = np.zeros(n + 1)
    b[-1] = 1.0
    gamma = np.linalg.lstsq(a, b, rcond=None)[0]
    gamma = np.clip(gamma, 0.0, None)
    gamma /= gamma.sum()
    lazy = 0.5 * (np.eye(n) + q)
    for _ in range(max_iter):
        if np.max(np.abs(gamma @ q - gamma)) <= tol:
            break
        gamma = gamma @ lazy
        gamma /= gamma.sum()
    resid = np.max(np.abs(gamma @ q - gamma))
    if resid > INVARIANCE_TOL:
        raise ReducibleChainError(f"invariant distribution did not converge (residual {resid:.2e})")
    return gamma


def is_ergodic(q) -> bool:
    """Irreducible and aperiodic, i.e. some power ``q^k`` with ``k <= (n-1)^2 + 1`` is positive."""
    q = _check_stochastic(q)
    n = q.shape[0]
    support = (q > 0).astype(np.int64)
    power = support.copy()
    for _ in range((n - 1) ** 2 + 1):
        if power.all():
            return True
        power = ((power @ support) > 0).astype(np.int64)
    return bool(power.all())


@dataclass(frozen=True, eq=False)
class MarkovChain:
    """Row-stochastic transitions ``q`` with strictly positive invariant ``gamma``.

    ``gamma`` is computed when omitted; a supplied one is validated against
    ``gamma = gamma q``.  Non-ergodic chains are rejected.
    """

    q: np.ndarray
    gamma: np.ndarray | None = None
    size: int = field(init=False)

    def __post_init__(self):
        q = _check_stochastic(self.q)
        if not is_ergodic(q):
            if not is_irreducible(q):
                raise ReducibleChainError("chain is reducible")
            raise NonErgodicChainError("chain is periodic")
        if self.gamma is None:
            gamma = stationary_distribution(q)
        else:
            gamma = np.asarray(self.gamma, dtype=float)
            if gamma.shape != (q.shape[0],):
                raise NotStochasticError("gamma length does not match the chain")
            if abs(gamma.sum() - 1.0) > INVARIANCE_TOL or np.any(gamma < 0):
                raise NotStochasticError("gamma is not a probability vector")
            if np.max(np.abs(gamma @ q - gamma)) > INVARIANCE_TOL:
                raise NotStochasticError("gamma is not invariant under q")
        if np.any(gamma <= 0):
            raise NotStochasticError("invariant distribution must be strictly positive")
        q.setflags(write=False)
        gamma = np.array(gamma)
        gamma.setflags(write=False)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "gamma", gamma)
        object.__setattr__(self, "size", q.shape[0])

    @classmethod
    def trivial(cls) -> "MarkovChain":
        return cls(np.ones((1, 1)))


def n_step(chain: MarkovChain, n: int) -> np.ndarray:
    """n-step transition probabilities ``q^n``."""
    if int(n) != n or n < 1:
        raise ValueError(f"n must be a positive integer, got {n!r}")
    return np.linalg.matrix_power(chain.q, int(n))


def mixing_deviation(chain: MarkovChain, qn: np.ndarray) -> float:
    """max_ij |qn_ij - gamma_j| / gamma_j."""
    return float(np.max(np.abs(qn - chain.gamma[None, :]) / chain.gamma[None, :]))


def mixing_length(chain: MarkovChain, delta: float, cap: int = MIXING_CAP) -> int:
    """Smallest ``l0`` with ``|q^(l0)_ij - gamma_j| < delta**3 * gamma_j`` for all i, j."""
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    bound = delta**3
    qn = chain.q.copy()
    for l0 in range(1, cap + 1):
        if mixing_deviation(chain, qn) < bound:
            return l0
        qn = qn @ chain.q
    raise NonErgodicChainError(f"mixing length exceeds cap {cap}")


def satisfies_mixing(chain: MarkovChain, delta: float, l0: int) -> bool:
    return mixing_deviation(chain, n_step(chain, l0)) < delta**3


def sample_path(chain: MarkovChain, length: int, seed, backend=None) -> np.ndarray:
    """Path ``i_1 ~ gamma``, ``i_{k+1} ~ q[i_k]``; deterministic in ``seed``."""
    if length < 1:
        raise ValueError("length must be at least 1")
    rng = np.random.default_rng(seed)
    u = rng.random(length)
    return kernels.sample_chain(
        kernels.stable_cdf(chain.gamma), kernels.stable_cdf(chain.q), u, backend=backend
    )


def random_ergodic_chain(size: int, rng: np.random.Generator, floor: float = 0.05) -> MarkovChain:
    """Random chain with every transition probability at least ``floor / size``."""
    q = rng.dirichlet(np.ones(size), size=size)
    q = (1 - floor) * q + floor / size
    return MarkovChain(q)
