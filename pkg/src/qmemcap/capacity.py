"""Holevo quantity and product-state capacity estimates.

The n-letter estimate maximizes the Holevo quantity of the channel
outputs over ensembles of pure product inputs.  The search is
derivative-free coordinate ascent:

* letters are unit vectors in R^{2d} (real and imaginary parts), moved by a
  pattern search whose step halves whenever an iteration stalls;
* weights take Frank-Wolfe / away steps: the linearized objective
  (relative entropy of each output to the average) is maximized exactly
  over the simplex, followed by a bounded line search.

Restarts are independent; the reported value is the best over restarts
and is only ever a lower bound on the supremum.
"""
from __future__ import annotations

import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .channel import MemoryChannel, apply_memory_product
from .errors import CapExceededError, DimensionError, InvalidEnsembleError
from .operators import DensityOperator, entropies, von_neumann_entropy


def holevo_quantity(probs, outputs) -> float:
    """S(sum_j p_j sigma_j) - sum_j p_j S(sigma_j), in bits."""
    probs = np.asarray(probs, dtype=float)
    outputs = [np.asarray(o) for o in outputs]
    if len(probs) != len(outputs) or len(probs) == 0:
        raise DimensionError("probabilities and outputs must have the same nonzero length")
    if len({o.shape for o in outputs}) != 1:
        raise DimensionError("outputs have different dimensions")
    if np.any(probs < -1e-12) or abs(probs.sum() - 1.0) > 1e-9:
        raise InvalidEnsembleError("probabilities must be nonnegative and sum to 1")
    stack = np.stack(outputs)
    avg = np.einsum("j,jab->ab", probs, stack)
    chi = von_neumann_entropy(avg) - float(probs @ entropies(stack))
    return max(chi, 0.0) if chi > -1e-12 else chi


@dataclass(eq=False)
class Ensemble:
    """Weights ``probs`` over product inputs; ``inputs[j]`` lists n letter states."""

    probs: np.ndarray
    inputs: list
    params: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        self.probs = np.asarray(self.probs, dtype=float)
        if len(self.probs) != len(self.inputs) or len(self.probs) == 0:
            raise InvalidEnsembleError("one probability per input is required")
        if np.any(self.probs < 0) or abs(self.probs.sum() - 1.0) > 1e-12:
            raise InvalidEnsembleError("probabilities must be nonnegative and sum to 1")
        lengths = {len(x) for x in self.inputs}
        if len(lengths) != 1:
            raise InvalidEnsembleError("all inputs must have the same number of letters")
        self.inputs = [[DensityOperator(r).matrix for r in letters] for letters in self.inputs]

    @property
    def n(self) -> int:
        return len(self.inputs[0])

    @property
    def size(self) -> int:
        return len(self.probs)

    def outputs(self, channel: MemoryChannel) -> list:
        return [apply_memory_product(channel, letters) for letters in self.inputs]

    def holevo(self, channel: MemoryChannel) -> float:
        return holevo_quantity(self.probs, self.outputs(channel))

    def to_dict(self) -> dict:
        return {
            "probs": self.probs.tolist(),
            "inputs": [
                [[[float(z.real), float(z.imag)] for z in r.ravel()] for r in letters] for letters in self.inputs
            ],
        }


@dataclass
class OptimizerConfig:
    restarts: int = 32
    max_iters: int = 500
    tol: float = 1e-9
    ensemble_size: int | None = None
    seed: int = 0
    threads: int = 1
    init_step: float = 0.5
    min_step: float = 1e-6

    def resolved_size(self, channel: MemoryChannel, n: int) -> int:
        if self.ensemble_size is not None:
            return int(self.ensemble_size)
        return default_ensemble_size(channel, n)


def default_ensemble_size(channel: MemoryChannel, n: int) -> int:
    """2 d^2 states, raised to min(d, d_K)^n so noiseless channels can reach log d per letter."""
    d = channel.in_dim
    return max(2 * d * d, min(d, channel.out_dim) ** n)


@dataclass(eq=False)
class CapacityEstimate:
    n: int
    chi_n: float
    rate: float
    ensemble: Ensemble
    optimizer_trace: list
    restarts: list = field(default_factory=list)

    @property
    def converged_restarts(self) -> int:
        return sum(1 for r in self.restarts if r["converged"])


def _letters_from_params(params: np.ndarray) -> np.ndarray:
    """params (..., 2d) -> normalized kets (..., d)."""
    d = params.shape[-1] // 2
    psi = params[..., :d] + 1j * params[..., d:]
    return psi / np.linalg.norm(psi, axis=-1, keepdims=True)


def _ket_dm(psi: np.ndarray) -> np.ndarray:
    return np.outer(psi, psi.conj())


class _Ascent:
    """State of one restart."""

    def __init__(self, channel: MemoryChannel, params: np.ndarray, probs: np.ndarray, cfg: OptimizerConfig):
        self.channel = channel
        self.cfg = cfg
        self.params = params
        self.probs = probs
        self.outputs = np.stack([self._output(j) for j in range(len(probs))])
        self.ents = entropies(self.outputs)
        self.avg = np.einsum("j,jab->ab", self.probs, self.outputs)
        self.value = self._chi(self.avg, self.probs, self.ents)

    def _output(self, j, params_j=None) -> np.ndarray:
        p = self.params[j] if params_j is None else params_j
        kets = _letters_from_params(p)
        return apply_memory_product(self.channel, [_ket_dm(k) for k in kets])

    @staticmethod
    def _chi(avg, probs, ents) -> float:
        return von_neumann_entropy(avg) - float(probs @ ents)

    def _letter_map(self, j: int, t: int) -> np.ndarray:
        """Outputs for matrix units in letter slot t, shaped (d, d, D, D)."""
        kets = _letters_from_params(self.params[j])
        letters = [_ket_dm(k) for k in kets]
        d = letters[t].shape[0]
        basis = []
        for a in range(d):
            row = []
            for b in range(d):
                unit = np.zeros((d, d), dtype=complex)
                unit[a, b] = 1.0
                letters[t] = unit
                row.append(apply_memory_product(self.channel, letters))
            basis.append(row)
        return np.array(basis)

    def sweep_states(self, step: float):
        J, n, width = self.params.shape
        moves = np.concatenate([np.eye(width), -np.eye(width)]) * step
        for j in range(J):
            if self.probs[j] < 1e-12:
                continue
            for t in range(n):
                trials = self.params[j, t][None, :] + moves
                trials /= np.linalg.norm(trials, axis=1, keepdims=True)
                kets = _letters_from_params(trials)
                rhos = np.einsum("ka,kb->kab", kets, kets.conj())
                outs = np.einsum("kab,abxy->kxy", rhos, self._letter_map(j, t))
                ents = entropies(outs)
                avgs = self.avg[None] + self.probs[j] * (outs - self.outputs[j][None])
                vals = entropies(avgs) - (self.probs @ self.ents - self.probs[j] * self.ents[j]) - self.probs[j] * ents
                k = int(np.argmax(vals))
                if vals[k] > self.value + 1e-15:
                    self.params[j, t] = trials[k]
                    self.outputs[j] = outs[k]
                    self.ents[j] = ents[k]
                    self.avg = np.einsum("j,jab->ab", self.probs, self.outputs)
                    self.value = self._chi(self.avg, self.probs, self.ents)

    def _divergences(self) -> np.ndarray:
        w, v = np.linalg.eigh(self.avg)
        logw = np.where(w > 1e-14, np.log2(np.clip(w, 1e-300, None)), -60.0)
        log_avg = (v * logw) @ v.conj().T
        cross = np.einsum("jab,ba->j", self.outputs, log_avg).real
        return -self.ents - cross

    def _line_search(self, direction: np.ndarray, tmax: float, points: int = 17, rounds: int = 7):
        """Maximize chi along p + t*direction, t in [0, tmax], by a zooming grid."""
        lo, hi = 0.0, tmax
        best_t, best_v = 0.0, self.value
        for _ in range(rounds):
            ts = np.linspace(lo, hi, points)
            cands = np.clip(self.probs[None] + ts[:, None] * direction[None], 0.0, None)
            cands /= cands.sum(axis=1, keepdims=True)
            avgs = np.einsum("tj,jab->tab", cands, self.outputs)
            vals = entropies(avgs) - cands @ self.ents
            k = int(np.argmax(vals))
            if vals[k] > best_v:
                best_t, best_v = ts[k], vals[k]
            width = (hi - lo) / (points - 1)
            lo, hi = max(0.0, ts[k] - width), min(tmax, ts[k] + width)
        return best_t, best_v

    def step_weights(self, rounds: int = 4):
        for _ in range(rounds):
            g = self._divergences()
            e_fw = np.zeros_like(self.probs)
            e_fw[int(np.argmax(g))] = 1.0
            candidates = [(e_fw - self.probs, 1.0)]
            support = np.flatnonzero(self.probs > 0)
            a = support[int(np.argmin(g[support]))]
            if self.probs[a] < 1.0:
                e_aw = np.zeros_like(self.probs)
                e_aw[a] = 1.0
                candidates.append((self.probs - e_aw, self.probs[a] / (1.0 - self.probs[a])))
            best = (self.value, None)
            for direction, tmax in candidates:
                if tmax <= 0 or not np.any(direction):
                    continue
                t, val = self._line_search(direction, tmax)
                if val > best[0] + 1e-15:
                    cand = np.clip(self.probs + t * direction, 0.0, None)
                    best = (val, cand / cand.sum())
            if best[1] is None:
                return
            self.probs = best[1]
            self.avg = np.einsum("j,jab->ab", self.probs, self.outputs)
            self.value = self._chi(self.avg, self.probs, self.ents)

    def run(self):
        trace = [self.value]
        step = self.cfg.init_step
        converged = False
        for _ in range(self.cfg.max_iters):
            before = self.value
            self.sweep_states(step)
            self.step_weights()
            trace.append(self.value)
            if self.value - before < self.cfg.tol:
                step *= 0.5
                if step < self.cfg.min_step:
                    converged = True
                    break
        return trace, converged


def _basis_init(channel: MemoryChannel, n: int, size: int):
    """Computational-basis product letters cycled over ``size`` slots, uniform weights."""
    d = channel.in_dim
    patterns = list(itertools.product(range(d), repeat=n))
    params = np.zeros((size, n, 2 * d))
    for j in range(size):
        for t, a in enumerate(patterns[j % len(patterns)]):
            params[j, t, a] = 1.0
    return params, np.full(size, 1.0 / size)


def _random_init(channel: MemoryChannel, n: int, size: int, rng: np.random.Generator):
    params = rng.standard_normal((size, n, 2 * channel.in_dim))
    params /= np.linalg.norm(params, axis=-1, keepdims=True)
    return params, rng.dirichlet(np.ones(size))


def product_capacity(channel: MemoryChannel, n: int, config: OptimizerConfig | None = None) -> CapacityEstimate:
    """Best n-letter Holevo value found over pure product-state ensembles.

    Restart 0 starts from computational-basis product states; the others
    start from random letters and Dirichlet weights, each with its own
    stream spawned from ``config.seed``.
    """
    cfg = config or OptimizerConfig()
    if channel.out_dim ** (2 * n) > 2**20 or channel.in_dim**n * channel.out_dim**n > 2**20:
        raise CapExceededError(f"n={n} exceeds the dimension cap")
    size = cfg.resolved_size(channel, n)
    if cfg.restarts < 1:
        raise ValueError("at least one restart is required")
    streams = np.random.SeedSequence(cfg.seed).spawn(cfg.restarts)

    def one(r: int):
        if r == 0:
            params, probs = _basis_init(channel, n, size)
        else:
            params, probs = _random_init(channel, n, size, np.random.default_rng(streams[r]))
        asc = _Ascent(channel, params, probs, cfg)
        trace, converged = asc.run()
        return asc, trace, converged

    if cfg.threads > 1:
        with ThreadPoolExecutor(cfg.threads) as pool:
            results = list(pool.map(one, range(cfg.restarts)))
    else:
        results = [one(r) for r in range(cfg.restarts)]

    running = -np.inf
    optimizer_trace = []
    restarts = []
    for r, (asc, trace, converged) in enumerate(results):
        for v in trace:
            running = max(running, v)
            optimizer_trace.append(float(running))
        restarts.append({"restart": r, "value": float(asc.value), "iterations": len(trace) - 1, "converged": converged})

    def rank(item):
        asc = item[0]
        return (-round(asc.value, 12), tuple(np.round(asc.params.ravel(), 15)))

    best = min(results, key=rank)[0]
    letters = _letters_from_params(best.params)
    ensemble = Ensemble(best.probs.copy(), [[_ket_dm(k) for k in word] for word in letters], params=best.params.copy())
    chi = holevo_quantity(ensemble.probs, list(best.outputs))
    return CapacityEstimate(n, float(chi), float(chi) / n, ensemble, optimizer_trace, restarts)


def capacity_sequence(channel: MemoryChannel, n_max: int, config: OptimizerConfig | None = None) -> list:
    """Estimates for n = 1 .. n_max with a shared configuration."""
    return [product_capacity(channel, n, config) for n in range(1, n_max + 1)]
