"""Typical projectors and numerical checks of the converse lemmas.

Masses of frequency- and entropy-typical projectors are computed on the
classical process obtained by pinching every block into a fixed
eigenbasis: the chain state is hidden, and each block emits an
eigen-index ``p`` with probability ``Tr(pi_p sigma_k(i, i'))`` jointly
with the next chain state ``i'``.  This reaches block counts far beyond
what operator materialization allows.  Materialized checks are kept for
small cases.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import kernels
from .channel import MemoryChannel, apply_memory_product, conditional_block_states
from .errors import CapExceededError, DimensionError, QMemError
from .markov import MarkovChain, satisfies_mixing
from .operators import (
    HermitianSpectrum,
    eig_hermitian,
    max_eigenvalue,
    min_eigenvalue,
    psd_sqrt,
    trace_distance,
    von_neumann_entropy,
)

NORMALIZATION_TOL = 1e-9
MATERIALIZE_CAP = 4096
EIGENVALUE_FLOOR = 1e-12


@dataclass(frozen=True)
class MassEstimate:
    estimate: float
    std_error: float
    samples: int


@dataclass(frozen=True, eq=False)
class PinchedHMM:
    """Classical process of pinched blocks.

    ``emissions[k, i, i', p] = Tr(pi_p sigma_k(i, i'))`` for block ``k``.
    Blocks with fewer eigenprojections than ``P`` are zero-padded.
    """

    chain: MarkovChain
    emissions: np.ndarray
    # per-block eigenvalue of projector p (entropy-typical use); zero-padded
    eigenvalues: np.ndarray | None = None
    entropies: np.ndarray | None = None

    def __post_init__(self):
        lam = np.asarray(self.emissions, dtype=float)
        if lam.ndim != 4 or lam.shape[1] != self.chain.size or lam.shape[2] != self.chain.size:
            raise DimensionError(f"emissions must be (m, |I|, |I|, P), got {lam.shape}")
        lam = np.where(np.abs(lam) < 1e-15, 0.0, lam)
        if lam.min() < -NORMALIZATION_TOL:
            raise QMemError("emission weights must be nonnegative")
        lam = np.clip(lam, 0.0, None)
        rows = lam.sum(axis=(2, 3))
        if np.max(np.abs(rows - 1.0)) > NORMALIZATION_TOL:
            raise QMemError(f"emission rows are not normalized (max deviation {np.max(np.abs(rows - 1)):.2e})")
        into = np.einsum("i,kijp->kj", self.chain.gamma, lam)
        if np.max(np.abs(into - self.chain.gamma[None])) > NORMALIZATION_TOL:
            raise QMemError("emissions are not consistent with the invariant distribution")
        lam.setflags(write=False)
        object.__setattr__(self, "emissions", lam)

    @property
    def blocks(self) -> int:
        return self.emissions.shape[0]

    @property
    def n_symbols(self) -> int:
        return self.emissions.shape[3]

    def symbol_marginals(self) -> np.ndarray:
        """(m, P): stationary probability that block k emits p."""
        return np.einsum("i,kijp->kp", self.chain.gamma, self.emissions)

    def centers(self, subset=None) -> np.ndarray:
        """q_p = (1/|S|) sum_{k in S} sum_{i,i'} gamma_i lambda_k(i, i'; p)."""
        marg = self.symbol_marginals()
        if subset is not None:
            marg = marg[np.asarray(subset)]
        return marg.mean(axis=0)

    def sample(self, samples: int, seed, backend=None) -> np.ndarray:
        rng = np.random.default_rng(seed)
        u = rng.random((samples, self.blocks + 1))
        m, n_states, _, P = self.emissions.shape
        emit_cdf = kernels.stable_cdf(self.emissions.reshape(m, n_states, n_states * P))
        return kernels.sample_hmm(kernels.stable_cdf(self.chain.gamma), emit_cdf, u, P, backend=backend)


def _as_spectra(reference, m: int) -> list:
    if isinstance(reference, HermitianSpectrum):
        return [reference] * m
    reference = list(reference)
    if len(reference) != m:
        raise DimensionError("need one reference spectrum per block")
    return reference


def build_pinched_hmm(chain: MarkovChain, blocks: Sequence, reference) -> PinchedHMM:
    """Pinch block states ``sigma_k(i, i')`` (each ``(|I|, |I|, D, D)``) into ``reference``.

    ``reference`` is one spectrum shared by all blocks or a list with one per block.
    """
    blocks = [np.asarray(b) for b in blocks]
    spectra = _as_spectra(reference, len(blocks))
    P = max(len(s) for s in spectra)
    lam = np.zeros((len(blocks), chain.size, chain.size, P))
    for k, (sig, spec) in enumerate(zip(blocks, spectra)):
        if sig.shape[-1] != spec.dim:
            raise DimensionError(f"block {k} dimension {sig.shape[-1]} does not match reference {spec.dim}")
        for p, proj in enumerate(spec.projectors):
            lam[k, :, :, p] = np.einsum("ab,ijba->ij", proj, sig).real
    eigs = np.zeros((len(blocks), P))
    for k, spec in enumerate(spectra):
        eigs[k, : len(spec)] = spec.eigenvalues
    return PinchedHMM(chain, lam, eigenvalues=eigs)


def block_sigmas(channel: MemoryChannel, block_inputs: Sequence, l0: int) -> list:
    return [conditional_block_states(channel, b, l0) for b in block_inputs]


def average_block_state(chain: MarkovChain, blocks: Sequence, subset=None) -> np.ndarray:
    """sigma_bar = (1/|S|) sum_{k in S} sum_i gamma_i sigma_k(i)."""
    idx = range(len(blocks)) if subset is None else subset
    parts = [np.einsum("i,ijab->ab", chain.gamma, np.asarray(blocks[k])) for k in idx]
    return sum(parts) / len(parts)


def _window_pass(counts: np.ndarray, m: int, centers: np.ndarray, delta: float) -> np.ndarray:
    return np.all(np.abs(counts - m * centers[None, :]) <= m * delta + 1e-9, axis=1)


def _estimate(hits: np.ndarray) -> MassEstimate:
    n = len(hits)
    p = float(hits.mean())
    return MassEstimate(p, math.sqrt(max(p * (1 - p), 0.0) / n), n)


def typical_mass(
    hmm: PinchedHMM,
    delta: float,
    samples: int,
    seed,
    centers=None,
    subset=None,
    backend=None,
) -> MassEstimate:
    """Monte Carlo probability that every eigen-index frequency is within ``|S| delta`` of ``|S| q_p``.

    Equals ``Tr(sigma^(m) Pi_{S, delta})`` for the frequency-typical
    projector built on the pinching basis.  ``centers`` defaults to
    :meth:`PinchedHMM.centers`; pass reference eigenvalue masses to use a
    nearby reference state instead (then widen ``delta`` by the offset).
    """
    if samples < 1000:
        raise ValueError("at least 1000 samples are required")
    seqs = hmm.sample(samples, seed, backend=backend)
    if subset is not None:
        seqs = seqs[:, np.asarray(subset)]
    m = seqs.shape[1]
    P = hmm.n_symbols
    c = hmm.centers(subset) if centers is None else np.asarray(centers, dtype=float)
    counts = np.zeros((samples, P), dtype=np.int64)
    for p in range(P):
        counts[:, p] = (seqs == p).sum(axis=1)
    return _estimate(_window_pass(counts, m, c, delta))


# -- frequency-typical projector specs ----------------------------------------

@dataclass(eq=False)
class ProjectorSpec:
    """Symbolic typical projector over ``block_count`` blocks.

    ``kind='frequency'``: sequences of eigenprojection indices whose counts
    lie within ``n * delta`` of ``n * centers`` (``centers[p] = rank_p * lambda_p``);
    projectors with zero eigenvalue must not occur.
    ``kind='entropy'``: sequences with
    ``|sum_k (log2 lambda_{k,p_k} + S_k)| <= n * delta`` for per-block spectra.
    """

    kind: str
    block_count: int
    bases: list
    delta: float
    centers: np.ndarray | None = None
    entropies: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in ("frequency", "entropy"):
            raise ValueError(f"unknown projector kind {self.kind!r}")
        self.bases = _as_spectra(self.bases, self.block_count)
        if self.kind == "frequency":
            ref = self.bases[0]
            if self.centers is None:
                self.centers = ref.ranks * ref.eigenvalues
        elif self.entropies is None:
            self.entropies = np.array([spectrum_entropy(b) for b in self.bases])

    @classmethod
    def frequency(cls, reference, block_count: int, delta: float) -> "ProjectorSpec":
        if not isinstance(reference, HermitianSpectrum):
            reference = eig_hermitian(reference)
        return cls("frequency", block_count, reference, delta)

    @classmethod
    def entropy(cls, states: Sequence, delta: float) -> "ProjectorSpec":
        spectra = [s if isinstance(s, HermitianSpectrum) else eig_hermitian(s) for s in states]
        return cls("entropy", len(spectra), spectra, delta)

    @property
    def dim(self) -> int:
        return int(np.prod([b.dim for b in self.bases]))

    def admits(self, labels: Sequence[int]) -> bool:
        return bool(self.admits_many(np.asarray(labels)[None, :])[0])

    def admits_many(self, labels: np.ndarray) -> np.ndarray:
        labels = np.asarray(labels)
        n = self.block_count
        if self.kind == "frequency":
            ref = self.bases[0]
            counts = np.stack([(labels == p).sum(axis=1) for p in range(len(ref))], axis=1)
            ok = _window_pass(counts, n, self.centers, self.delta)
            dead = ref.eigenvalues <= EIGENVALUE_FLOOR
            if dead.any():
                ok &= np.all(counts[:, dead] == 0, axis=1)
            return ok
        logs = np.stack(
            [_safe_log2(self.bases[k].eigenvalues)[labels[:, k]] for k in range(n)], axis=1
        )
        return np.abs((logs + self.entropies[None, :]).sum(axis=1)) <= n * self.delta + 1e-12

    def materialize(self, cap: int = MATERIALIZE_CAP) -> np.ndarray:
        if self.dim > cap:
            raise CapExceededError(f"projector dimension {self.dim} exceeds cap {cap}")
        u, mask = _product_basis(self.bases, self)
        return (u * mask) @ u.conj().T


def _safe_log2(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return np.where(x > EIGENVALUE_FLOOR, np.log2(np.clip(x, EIGENVALUE_FLOOR, None)), -np.inf)


def spectrum_entropy(spec: HermitianSpectrum) -> float:
    w = np.repeat(spec.eigenvalues, spec.ranks)
    w = w[w > EIGENVALUE_FLOOR]
    return float(-np.sum(w * np.log2(w)))


def _product_basis(slot_bases: Sequence, spec: "ProjectorSpec | None", slot_is_block=None):
    """Product eigenbasis ``U`` and admission mask over its columns.

    Slots flagged False in ``slot_is_block`` are identity slots (their
    basis is passed as an integer dimension) and do not enter the predicate.
    """
    if slot_is_block is None:
        slot_is_block = [True] * len(slot_bases)
    us, labels = [], []
    for base, is_block in zip(slot_bases, slot_is_block):
        if is_block:
            u, lab = base.labelled_basis()
        else:
            u, lab = np.eye(base), np.zeros(base, dtype=int)
        us.append(u)
        labels.append(lab)
    u_tot = us[0]
    for u in us[1:]:
        u_tot = np.kron(u_tot, u)
    grids = np.meshgrid(*labels, indexing="ij")
    all_labels = np.stack([g.ravel() for g in grids], axis=1)
    block_labels = all_labels[:, np.asarray(slot_is_block)]
    mask = spec.admits_many(block_labels).astype(float)
    return u_tot, mask


def frequency_epsilon(reference: HermitianSpectrum, delta: float) -> float:
    """Slack with 2^{-n(S+eps)} <= eigenvalues on the frequency window <= 2^{-n(S-eps)}.

    A count deviation of at most ``n delta`` per projector shifts
    ``sum_p c_p log2 lambda_p`` by at most ``n delta sum_p |log2 lambda_p|``
    (sum over nonzero eigenvalues).
    """
    lam = reference.eigenvalues[reference.eigenvalues > EIGENVALUE_FLOOR]
    return float(delta * np.sum(np.abs(np.log2(lam))))


def typical_log_trace(spec: ProjectorSpec, max_blocks: int = 1000) -> float:
    """Exact log2 Tr(Pi) for a frequency-typical projector.

    Tr(Pi) = sum over admitted count vectors c of multinomial(n; c) * prod_p rank_p^c_p,
    accumulated with Python integers by a dynamic program over projectors.
    """
    if spec.kind != "frequency":
        raise ValueError("typical_log_trace needs a frequency-typical spec")
    n = spec.block_count
    if n > max_blocks:
        raise CapExceededError(f"block count {n} exceeds {max_blocks}")
    ref = spec.bases[0]
    ways = {0: 1}
    for p, (rank, center, lam) in enumerate(zip(ref.ranks, spec.centers, ref.eigenvalues)):
        if lam <= EIGENVALUE_FLOOR:
            lo = hi = 0
        else:
            lo = max(0, math.ceil(n * center - n * spec.delta - 1e-9))
            hi = min(n, math.floor(n * center + n * spec.delta + 1e-9))
        nxt: dict[int, int] = {}
        for used, w in ways.items():
            for c in range(lo, min(hi, n - used) + 1):
                t = used + c
                nxt[t] = nxt.get(t, 0) + w * math.comb(t, c) * int(rank) ** c
        ways = nxt
    total = ways.get(n, 0)
    return math.log2(total) if total > 0 else -math.inf


# -- entropy-typical projector -------------------------------------------------

def build_entropy_hmm(chain: MarkovChain, blocks: Sequence, block_outputs: Sequence) -> PinchedHMM:
    """Pinch each block into the eigenbasis of its own stationary output state."""
    spectra = [eig_hermitian(o) for o in block_outputs]
    hmm = build_pinched_hmm(chain, blocks, spectra)
    ents = np.array([von_neumann_entropy(o) for o in block_outputs])
    return PinchedHMM(chain, hmm.emissions, eigenvalues=hmm.eigenvalues, entropies=ents)


def _log_eigs_of_samples(hmm: PinchedHMM, seqs: np.ndarray) -> np.ndarray:
    logs = _safe_log2(hmm.eigenvalues)  # (m, P)
    return logs[np.arange(hmm.blocks)[None, :], seqs]


def entropy_typical_mass(hmm: PinchedHMM, delta: float, samples: int, seed, backend=None) -> MassEstimate:
    """Monte Carlo probability of ``|sum_k (log2 lambda_{k,p_k} + S_k)| <= m delta``."""
    if hmm.entropies is None:
        raise ValueError("hmm carries no block entropies; build it with build_entropy_hmm")
    if samples < 1000:
        raise ValueError("at least 1000 samples are required")
    seqs = hmm.sample(samples, seed, backend=backend)
    stat = (_log_eigs_of_samples(hmm, seqs) + hmm.entropies[None, :]).sum(axis=1)
    return _estimate(np.abs(stat) <= hmm.blocks * delta + 1e-12)


def log_eigenvalue_mean(hmm: PinchedHMM, block: int, samples: int, seed, backend=None) -> MassEstimate:
    """Monte Carlo mean (and standard error) of log2 lambda_{k, p_k} for one block."""
    seqs = hmm.sample(samples, seed, backend=backend)
    vals = _log_eigs_of_samples(hmm, seqs)[:, block]
    return MassEstimate(float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(samples)), samples)


@dataclass
class SandwichReport:
    precondition_ok: bool
    max_violation: float
    threshold: float = float("nan")
    dim: int = 0
    reason: str = ""

    @property
    def passed(self) -> bool | None:
        if not self.precondition_ok:
            return None
        return self.max_violation <= 1e-9


def entropy_typical_sandwich_check(
    channel: MemoryChannel,
    blocks: Sequence,
    spacers: Sequence | None,
    delta: float,
    l0: int,
    tail: Sequence = (),
    cap: int = MATERIALIZE_CAP,
) -> SandwichReport:
    """Materialized check of Pi Phi(x) Pi <= prod_k 2^{-S_k + 2 delta} Pi.

    ``blocks`` and ``spacers`` are lists of single-letter state lists (each
    spacer must have ``l0`` letters; ``None`` uses maximally mixed letters).
    The inequality is only asserted when the chain mixes to ``delta**3``
    relative accuracy within ``l0`` steps and ``(1 + delta**3) <= 2**delta``;
    otherwise the report carries the precondition failure.
    """
    chain = channel.chain
    m = len(blocks)
    if l0 < 1 or not satisfies_mixing(chain, delta, l0):
        return SandwichReport(False, float("nan"), reason=f"mixing bound fails at l0={l0}")
    if 1 + delta**3 > 2**delta:
        return SandwichReport(False, float("nan"), reason="delta too large for the (1+delta^3) <= 2^delta step")
    d = channel.in_dim
    if spacers is None:
        spacers = [[np.eye(d) / d] * l0 for _ in range(m)]
    if any(len(s) != l0 for s in spacers):
        raise DimensionError("every spacer must have l0 letters")
    letters, slot_dims, slot_is_block = [], [], []
    block_outputs = []
    dk = channel.out_dim
    for blk, sp in zip(blocks, spacers):
        letters += list(blk)
        letters += list(sp)
        block_outputs.append(apply_memory_product(channel, list(blk)))
        slot_dims += [dk ** len(blk), dk**l0]
        slot_is_block += [True, False]
    if len(tail):
        letters += list(tail)
        slot_dims.append(dk ** len(tail))
        slot_is_block.append(False)
    total = dk ** len(letters)
    if total > cap:
        raise CapExceededError(f"materialized dimension {total} exceeds cap {cap}")
    output = apply_memory_product(channel, letters)
    spec = ProjectorSpec.entropy(block_outputs, delta)
    bases, bi = [], 0
    for dim, is_block in zip(slot_dims, slot_is_block):
        if is_block:
            bases.append(spec.bases[bi])
            bi += 1
        else:
            bases.append(dim)
    u, mask = _product_basis(bases, spec, slot_is_block)
    threshold = float(2.0 ** np.sum(-spec.entropies + 2 * delta))
    keep = mask > 0
    if not keep.any():
        return SandwichReport(True, -threshold, threshold, total, "empty typical subspace")
    rotated = u.conj().T @ output @ u
    sub = rotated[np.ix_(keep, keep)]
    return SandwichReport(True, max_eigenvalue(sub) - threshold, threshold, total)


# -- lemma-level inequality checks ----------------------------------------------

@dataclass
class CheckResult:
    lhs: float
    rhs: float
    applicable: bool = True
    sane: bool = True
    tol: float = 1e-9

    @property
    def margin(self) -> float:
        return self.rhs - self.lhs

    @property
    def passed(self) -> bool:
        if not self.applicable:
            return True
        return self.sane and self.lhs <= self.rhs + self.tol


def eta(x: float) -> float:
    return 0.0 if x <= 0 else -x * math.log2(x)


def fannes_check(rho, sigma, entropy_fn: Callable | None = None) -> CheckResult:
    """|S(rho) - S(sigma)| <= -theta log2(theta / d) for theta = ||rho - sigma||_1 <= 1/2.

    Entropies outside [0, log2 d] mark the instance as not sane (fails).
    """
    entropy_fn = entropy_fn or von_neumann_entropy
    rho, sigma = np.asarray(rho), np.asarray(sigma)
    d = rho.shape[0]
    theta = trace_distance(rho, sigma)
    s_rho, s_sigma = entropy_fn(rho), entropy_fn(sigma)
    sane = all(-1e-12 <= s <= math.log2(d) + 1e-12 for s in (s_rho, s_sigma))
    lhs = abs(s_rho - s_sigma)
    if theta > 0.5:
        return CheckResult(lhs, float("nan"), applicable=False, sane=sane, tol=1e-12)
    return CheckResult(lhs, d * eta(theta / d), sane=sane, tol=1e-12)


def gentle_measurement_check(rho, x) -> CheckResult:
    """||rho - sqrt(X) rho sqrt(X)||_1 <= sqrt(8 lambda), lambda = 1 - Tr(rho X)."""
    rho, x = np.asarray(rho), np.asarray(x)
    if min_eigenvalue(x) < -1e-10 or max_eigenvalue(x) > 1 + 1e-10:
        raise ValueError("X must satisfy 0 <= X <= I")
    lam = max(0.0, 1.0 - float(np.trace(rho @ x).real))
    sx = psd_sqrt(x)
    return CheckResult(trace_distance(rho, sx @ rho @ sx), math.sqrt(8 * lam))


@dataclass
class ShadowReport:
    hypothesis_ok: bool
    hypotheses: dict
    conclusions: dict = field(default_factory=dict)
    tol: float = 1e-9

    @property
    def passed(self) -> bool:
        return all(lhs <= rhs + self.tol for lhs, rhs in self.conclusions.values())

    @property
    def margin(self) -> float:
        return min((rhs - lhs for lhs, rhs in self.conclusions.values()), default=float("inf"))


def shadow_bound_check(Lambda, rho, B, mu1: float, mu2: float, lam: float, eta_: float) -> ShadowReport:
    """Check hypotheses and conclusions of the shadow bound.

    Hypotheses: 0 <= Lambda <= I, Tr(rho Lambda) > 1 - lam,
    mu1 Lambda <= Lambda^{1/2} rho Lambda^{1/2} <= mu2 Lambda, 0 <= B <= I.
    Conclusions: (1 - lam)/mu2 <= Tr Lambda <= 1/mu1, and when
    Tr(rho B) >= eta, Tr B >= (eta - sqrt(8 lam))/mu2.
    """
    Lambda, rho, B = (np.asarray(a) for a in (Lambda, rho, B))
    tol = 1e-9
    sl = psd_sqrt(Lambda)
    sandwich = sl @ rho @ sl
    hyp = {
        "lambda_range": min_eigenvalue(Lambda) >= -tol and max_eigenvalue(Lambda) <= 1 + tol,
        "pass_probability": float(np.trace(rho @ Lambda).real) > 1 - lam,
        "lower_sandwich": min_eigenvalue(sandwich - mu1 * Lambda) >= -tol,
        "upper_sandwich": min_eigenvalue(mu2 * Lambda - sandwich) >= -tol,
        "b_range": min_eigenvalue(B) >= -tol and max_eigenvalue(B) <= 1 + tol,
    }
    report = ShadowReport(all(hyp.values()), hyp)
    tr_lambda = float(np.trace(Lambda).real)
    report.conclusions["trace_lower"] = ((1 - lam) / mu2, tr_lambda)
    report.conclusions["trace_upper"] = (tr_lambda, 1 / mu1)
    if float(np.trace(rho @ B).real) >= eta_ - 1e-12:
        report.conclusions["shadow"] = ((eta_ - math.sqrt(8 * lam)) / mu2, float(np.trace(B).real))
    return report
