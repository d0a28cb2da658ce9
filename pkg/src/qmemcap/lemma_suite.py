"""Randomized instances and batch drivers for the typicality and converse lemmas.

Every check yields a :class:`LemmaRecord` with ``margin = rhs - lhs``
(nonnegative when the inequality holds).  Instances are generated from
per-instance seeds spawned from one master seed, so a failing record can
be regenerated from ``(lemma, instance_seed)`` alone.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from .channel import MemoryChannel, apply_memory_product, random_channel
from .markov import MarkovChain, mixing_length, random_ergodic_chain
from .operators import (
    eig_hermitian,
    max_eigenvalue,
    min_eigenvalue,
    random_density_matrix,
    random_pure_state,
    random_unitary,
    von_neumann_entropy,
)
from . import typicality as T
from .config import LemmaSettings


@dataclass
class LemmaRecord:
    lemma: str
    instance_seed: int
    lhs: float
    rhs: float
    margin: float
    hypothesis_ok: bool
    passed: bool
    detail: str = ""
    instance: dict = field(default_factory=dict, repr=False)

    def to_row(self) -> dict:
        row = asdict(self)
        row.pop("instance")
        return row


def _sub_seeds(seed: int, tag: int, count: int) -> list:
    """Integer seeds for ``count`` instances; ``tag`` separates lemmas."""
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(tag,))
    return [int(c.generate_state(1, np.uint32)[0]) for c in ss.spawn(count)]


def _pair(x) -> list:
    x = np.asarray(x)
    return np.stack([x.real, x.imag], axis=-1).tolist()


def _record(lemma, seed, lhs, rhs, hyp=True, passed=None, detail="", instance=None, tol=1e-9) -> LemmaRecord:
    lhs, rhs = float(lhs), float(rhs)
    ok = (lhs <= rhs + tol) if passed is None else bool(passed)
    return LemmaRecord(lemma, int(seed), lhs, rhs, rhs - lhs, bool(hyp), bool(ok), detail, instance or {})


# -- instance generators ---------------------------------------------------------

def random_markov_channel(rng: np.random.Generator, states: int | None = None, dim: int = 2) -> MemoryChannel:
    states = states or int(rng.integers(2, 4))
    chain = random_ergodic_chain(states, rng, floor=0.2)
    branches = [random_channel(dim, dim, int(rng.integers(1, 4)), rng) for _ in range(states)]
    return MemoryChannel(chain, branches)


def window_spacing(chain: MarkovChain, delta: float) -> int:
    """Mixing length for ``delta < 1``; windows with ``delta >= 1`` admit everything, so one step."""
    return mixing_length(chain, delta) if delta < 1 else 1


def weak_law_instance(seed: int, delta: float, n0: int = 1):
    """Random Markov channel, ``|S| = ceil(delta^-3) + 10`` blocks spaced by the mixing length."""
    rng = np.random.default_rng(seed)
    channel = random_markov_channel(rng)
    l0 = window_spacing(channel.chain, delta)
    m = math.ceil(delta**-3) + 10
    d = channel.in_dim
    inputs = [[random_pure_state(d, rng) for _ in range(n0)] for _ in range(m)]
    blocks = T.block_sigmas(channel, inputs, l0)
    return channel, blocks, l0


def sigma_bound_holds(chain: MarkovChain, blocks, delta: float, tol: float = 1e-10) -> bool:
    """(1 - delta^3) gamma_i' sigma(i) <= sigma(i, i') <= (1 + delta^3) gamma_i' sigma(i)."""
    b = delta**3
    for sig in blocks:
        marg = sig.sum(axis=1)
        for i in range(chain.size):
            for j in range(chain.size):
                g = chain.gamma[j]
                if min_eigenvalue(sig[i, j] - (1 - b) * g * marg[i]) < -tol:
                    return False
                if min_eigenvalue((1 + b) * g * marg[i] - sig[i, j]) < -tol:
                    return False
    return True


def entropy_instance(seed: int, blocks: int, n0: int = 1):
    rng = np.random.default_rng(seed)
    channel = random_markov_channel(rng)
    d = channel.in_dim
    inputs = [[random_pure_state(d, rng) for _ in range(n0)] for _ in range(blocks)]
    outputs = [apply_memory_product(channel, x) for x in inputs]
    return channel, inputs, outputs


def fannes_instance(seed: int, max_dim: int):
    rng = np.random.default_rng(seed)
    d = int(rng.integers(2, max_dim + 1))
    rho = random_density_matrix(d, rng, rank=int(rng.integers(1, d + 1)))
    tau = random_density_matrix(d, rng)
    t = rng.uniform(0.0, 0.25)
    return rho, (1 - t) * rho + t * tau


def gentle_instance(seed: int, max_dim: int):
    rng = np.random.default_rng(seed)
    d = int(rng.integers(2, max_dim + 1))
    rho = random_density_matrix(d, rng, rank=int(rng.integers(1, d + 1)))
    u = random_unitary(d, rng)
    spec = rng.uniform(0, 1, d)
    spec[rng.random(d) < 0.3] = 1.0
    return rho, (u * spec) @ u.conj().T


def shadow_instance(seed: int, max_dim: int):
    """Support-compressed instance; Lambda is a random projector or a typical projector."""
    rng = np.random.default_rng(seed)
    if rng.random() < 0.5:
        ref = random_density_matrix(2, rng)
        n = int(rng.integers(2, 4))
        spec = T.ProjectorSpec.frequency(ref, n, float(rng.uniform(0.1, 0.5)))
        lam_op = spec.materialize()
        if np.trace(lam_op).real < 0.5:
            lam_op = np.eye(spec.dim)
        base = ref
        for _ in range(n - 1):
            base = np.kron(base, ref)
        rho = 0.9 * base + 0.1 * random_density_matrix(spec.dim, rng)
    else:
        d = int(rng.integers(2, max_dim + 1))
        r = int(rng.integers(1, d + 1))
        u = random_unitary(d, rng)[:, :r]
        lam_op = u @ u.conj().T
        rho = random_density_matrix(d, rng)
    d = lam_op.shape[0]
    w, v = np.linalg.eigh(lam_op)
    supp = v[:, w > 0.5]
    comp = supp.conj().T @ rho @ supp
    ev = np.linalg.eigvalsh(comp)
    mu1, mu2 = float(ev[0]), float(ev[-1])
    pass_prob = float(np.trace(rho @ lam_op).real)
    lam = min(1.0, 1.0 - pass_prob + 1e-3)
    ub = random_unitary(d, rng)
    b = (ub * rng.uniform(0, 1, d)) @ ub.conj().T
    eta = float(np.trace(rho @ b).real)
    return lam_op, rho, b, mu1, mu2, lam, eta


# -- per-lemma drivers ---------------------------------------------------------------

def run_typical_trace(seed: int, s: LemmaSettings) -> list:
    out = []
    for inst in _sub_seeds(seed, 1, s.trace_instances):
        rng = np.random.default_rng(inst)
        ref = eig_hermitian(random_density_matrix(int(rng.integers(2, 4)), rng))
        n = int(rng.choice(s.trace_blocks))
        spec = T.ProjectorSpec("frequency", n, ref, s.trace_delta)
        eps = T.frequency_epsilon(ref, s.trace_delta)
        ent = T.spectrum_entropy(ref)
        out.append(_record("typical-trace", inst, T.typical_log_trace(spec), n * (ent + eps), detail=f"n={n}"))
    return out


def run_weak_law(seed: int, s: LemmaSettings) -> list:
    out = []
    for delta in s.weak_law_deltas:
        for inst in _sub_seeds(seed, 20 + int(round(delta * 100)), s.weak_law_instances):
            channel, blocks, l0 = weak_law_instance(inst, delta)
            hyp = sigma_bound_holds(channel.chain, blocks, delta)
            ref = eig_hermitian(T.average_block_state(channel.chain, blocks))
            hmm = T.build_pinched_hmm(channel.chain, blocks, ref)
            est = T.typical_mass(hmm, delta, s.samples, inst)
            out.append(
                _record(
                    "weak-law", inst, 1 - 2 * delta, est.estimate + 3 * est.std_error, hyp,
                    detail=f"delta={delta} m={len(blocks)} l0={l0} mass={est.estimate:.4f}+-{est.std_error:.4f}",
                )
            )
    return out


def run_fannes(seed: int, s: LemmaSettings, entropy_fn: Callable | None = None) -> list:
    out = []
    for inst in _sub_seeds(seed, 3, s.fannes_instances):
        rho, sigma = fannes_instance(inst, s.max_dim)
        res = T.fannes_check(rho, sigma, entropy_fn=entropy_fn)
        rec = _record(
            "fannes", inst, res.lhs, res.rhs, res.applicable, passed=res.passed,
            detail="" if res.sane else "entropy outside [0, log2 d]",
        )
        if not rec.passed:
            rec.instance = {"rho": _pair(rho), "sigma": _pair(sigma)}
        out.append(rec)
    return out


def run_gentle(seed: int, s: LemmaSettings) -> list:
    out = []
    for inst in _sub_seeds(seed, 4, s.gentle_instances):
        rho, x = gentle_instance(inst, s.max_dim)
        res = T.gentle_measurement_check(rho, x)
        rec = _record("gentle", inst, res.lhs, res.rhs, passed=res.passed)
        if not rec.passed:
            rec.instance = {"rho": _pair(rho), "X": _pair(x)}
        out.append(rec)
    return out


def run_entropy_typicality(seed: int, s: LemmaSettings) -> list:
    out = []
    for inst in _sub_seeds(seed, 51, s.entropy_instances):
        channel, inputs, outputs = entropy_instance(inst, 3)
        l0 = mixing_length(channel.chain, 0.5)
        blocks = T.block_sigmas(channel, inputs, l0)
        hmm = T.build_entropy_hmm(channel.chain, blocks, outputs)
        k = int(np.random.default_rng(inst).integers(0, 3))
        est = T.log_eigenvalue_mean(hmm, k, s.samples, inst)
        target = -von_neumann_entropy(outputs[k])
        out.append(
            _record(
                "entropy-expectation", inst, abs(est.estimate - target), 3 * est.std_error,
                detail=f"block={k} mean={est.estimate:.5f} -S={target:.5f}",
            )
        )
    inst = _sub_seeds(seed, 52, 1)[0]
    channel, inputs, outputs = entropy_instance(inst, s.entropy_blocks)
    l0 = window_spacing(channel.chain, s.entropy_delta)
    hmm = T.build_entropy_hmm(channel.chain, T.block_sigmas(channel, inputs, l0), outputs)
    est = T.entropy_typical_mass(hmm, s.entropy_delta, s.samples, inst)
    out.append(
        _record(
            "entropy-mass", inst, 1 - s.entropy_delta, est.estimate + 3 * est.std_error,
            detail=f"m={s.entropy_blocks} mass={est.estimate:.4f}+-{est.std_error:.4f}",
        )
    )
    for inst in _sub_seeds(seed, 53, s.sandwich_instances):
        rep = sandwich_instance_check(inst)
        out.append(
            _record(
                "entropy-sandwich", inst, rep.max_violation, 1e-9, rep.precondition_ok,
                passed=bool(rep.passed), tol=0.0, detail=f"dim={rep.dim}",
            )
        )
    return out


def sandwich_instance_check(seed: int, delta: float = 0.5) -> T.SandwichReport:
    """m = 2 blocks of one qubit letter, spacers at the mixing length (total dim <= 1024)."""
    rng = np.random.default_rng(seed)
    channel = random_markov_channel(rng, states=2)
    l0 = mixing_length(channel.chain, delta)
    while 2 * (1 + l0) > 10:
        channel = random_markov_channel(rng, states=2)
        l0 = mixing_length(channel.chain, delta)
    blocks = [[random_pure_state(2, rng)] for _ in range(2)]
    return T.entropy_typical_sandwich_check(channel, blocks, None, delta, l0)


def run_shadow(seed: int, s: LemmaSettings) -> list:
    out = []
    seeds = iter(_sub_seeds(seed, 6, 50 * s.shadow_instances))
    while len(out) < s.shadow_instances:
        inst = next(seeds)
        lam_op, rho, b, mu1, mu2, lam, eta = shadow_instance(inst, s.max_dim)
        if mu1 <= 1e-9:
            continue
        rep = T.shadow_bound_check(lam_op, rho, b, mu1, mu2, lam, eta)
        if not rep.hypothesis_ok:
            continue
        worst = min(rep.conclusions, key=lambda key: rep.conclusions[key][1] - rep.conclusions[key][0])
        lhs, rhs = rep.conclusions[worst]
        out.append(_record("shadow", inst, lhs, rhs, True, passed=rep.passed, detail=worst))
    return out


def run_suite(seed: int, settings: LemmaSettings | None = None, entropy_fn: Callable | None = None) -> list:
    s = settings or LemmaSettings()
    records = []
    records += run_typical_trace(seed, s)
    records += run_weak_law(seed, s)
    records += run_fannes(seed, s, entropy_fn)
    records += run_gentle(seed, s)
    records += run_entropy_typicality(seed, s)
    records += run_shadow(seed, s)
    return records
