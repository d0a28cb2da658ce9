"""Product-state codes, square-root decoding, type reduction and rate sweeps."""
from __future__ import annotations

import math
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.stats import spearmanr

from .capacity import Ensemble
from .channel import MemoryChannel, apply_memory_product
from .errors import CapExceededError, DimensionError, InvalidCodeError
from .operators import DensityOperator, max_eigenvalue, min_eigenvalue, psd_inv_sqrt, trace_distance

POVM_TOL = 1e-9
OUTPUT_ENTRY_CAP = 2**26


@dataclass(eq=False)
class Code:
    """Messages ``0..N-1`` with product codewords and POVM decoder elements.

    ``codewords[w]`` lists the ``n`` single-letter input states of message
    ``w``; ``decoder[w]`` is its decoding operator on the n-letter output.
    """

    codewords: list
    decoder: list
    messages: tuple = ()

    def __post_init__(self):
        if len(self.codewords) != len(self.decoder) or not self.codewords:
            raise InvalidCodeError("need one decoder element per codeword")
        if len({len(c) for c in self.codewords}) != 1:
            raise InvalidCodeError("codewords must have equal length")
        self.codewords = [[DensityOperator(r).matrix for r in cw] for cw in self.codewords]
        self.decoder = [np.asarray(d, dtype=complex) for d in self.decoder]
        if not self.messages:
            self.messages = tuple(range(len(self.codewords)))
        dims = {d.shape for d in self.decoder}
        if len(dims) != 1:
            raise InvalidCodeError("decoder elements have different shapes")
        for w, d in enumerate(self.decoder):
            if min_eigenvalue(d) < -1e-10:
                raise InvalidCodeError(f"decoder element {w} is not positive")
        if max_eigenvalue(sum(self.decoder)) > 1 + POVM_TOL:
            raise InvalidCodeError("decoder elements sum to more than the identity")

    @property
    def n(self) -> int:
        return len(self.codewords[0])

    @property
    def size(self) -> int:
        return len(self.codewords)

    def subcode(self, keep: Sequence[int]) -> "Code":
        keep = list(keep)
        return Code(
            [self.codewords[w] for w in keep],
            [self.decoder[w] for w in keep],
            tuple(self.messages[w] for w in keep),
        )


@dataclass(frozen=True)
class BlockLayout:
    """Payload blocks of ``n0`` letters separated by spacers of ``l0`` letters.

    Positions are 0-based letter indices.
    """

    n: int
    n0: int
    l0: int
    m: int
    payloads: tuple
    spacers: tuple
    tail: tuple


def block_layout(n: int, n0: int, l0: int) -> BlockLayout:
    if n0 < 1 or l0 < 1:
        raise ValueError("n0 and l0 must be at least 1")
    if n < n0 + l0:
        raise ValueError(f"n={n} is shorter than one block plus spacer ({n0 + l0})")
    m = n // (n0 + l0)
    payloads, spacers = [], []
    for k in range(m):
        start = (n0 + l0) * k
        payloads.append(tuple(range(start, start + n0)))
        spacers.append(tuple(range(start + n0, start + n0 + l0)))
    tail = tuple(range(m * (n0 + l0), n))
    return BlockLayout(n, n0, l0, m, tuple(payloads), tuple(spacers), tail)


def sqrt_measurement_decoder(outputs: Sequence) -> list:
    """Square-root measurement ``D(w) = T^{-1/2} sigma_w T^{-1/2}`` with ``T = sum sigma``."""
    outputs = [np.asarray(o, dtype=complex) for o in outputs]
    if len({o.shape for o in outputs}) != 1:
        raise DimensionError("outputs have different dimensions")
    t_inv = psd_inv_sqrt(sum(outputs))
    elems = [t_inv @ o @ t_inv for o in outputs]
    return [0.5 * (e + e.conj().T) for e in elems]


def _check_output_cap(channel: MemoryChannel, n: int, count: int, cap: int):
    entries = count * channel.out_dim ** (2 * n)
    if entries > cap:
        raise CapExceededError(f"{count} outputs of {n} letters need {entries} entries (cap {cap})")


def code_outputs(channel: MemoryChannel, codewords: Sequence) -> list:
    return [apply_memory_product(channel, cw) for cw in codewords]


def random_code(
    channel: MemoryChannel,
    n: int,
    rate: float,
    ensemble: Ensemble,
    seed,
    cap: int = OUTPUT_ENTRY_CAP,
) -> Code:
    """Random code with ``N = ceil(2**(rate*n))`` codewords and a square-root decoder.

    Codewords concatenate i.i.d. draws from ``ensemble`` (each draw supplies
    ``ensemble.n`` letters; the last draw is truncated to fit ``n``).
    """
    size = message_count(rate, n)
    if size < 2:
        raise ValueError(f"rate {rate} gives N={size} < 2 at n={n}")
    _check_output_cap(channel, n, size, cap)
    rng = np.random.default_rng(seed)
    draws = -(-n // ensemble.n)
    picks = rng.choice(ensemble.size, size=(size, draws), p=ensemble.probs)
    codewords = []
    for row in picks:
        letters = [x for j in row for x in ensemble.inputs[j]]
        codewords.append(letters[:n])
    return Code(codewords, sqrt_measurement_decoder(code_outputs(channel, codewords)))


def message_count(rate: float, n: int) -> int:
    # guard against 2**(r*n) landing a hair above an integer
    return max(1, math.ceil(2.0 ** (rate * n) - 1e-9))


def error_probability(channel: MemoryChannel, code: Code) -> tuple[float, float]:
    """(max_w, mean_w) of ``1 - Tr(Phi^(n)(f(w)) D(w))``."""
    dim = channel.out_dim**code.n
    if code.decoder[0].shape != (dim, dim):
        raise DimensionError(f"decoder acts on dimension {code.decoder[0].shape[0]}, channel output is {dim}")
    if code.codewords[0][0].shape[0] != channel.in_dim:
        raise DimensionError("codeword letters do not match the channel input")
    errs = []
    for cw, d in zip(code.codewords, code.decoder):
        out = apply_memory_product(channel, cw)
        errs.append(1.0 - float(np.einsum("ab,ba->", out, d).real))
    errs = np.clip(np.array(errs), 0.0, 1.0)
    return float(errs.max()), float(errs.mean())


# -- type classification ---------------------------------------------------------

@dataclass(eq=False)
class TypeClassification:
    """Assignment of every (message, block) output to a reference cell.

    ``cells[w, k]`` is the cell of block ``k`` of codeword ``w``.  The class
    of block ``k`` is the set of cells it visits over all messages;
    ``classes`` maps each occurring class to its block indices.
    """

    cells: np.ndarray
    n_refs: int
    references: list = field(default_factory=list)
    theta: float = float("nan")
    classes: dict = field(init=False)

    def __post_init__(self):
        self.cells = np.asarray(self.cells, dtype=np.int64)
        if self.cells.ndim != 2:
            raise DimensionError("cells must be (messages, blocks)")
        if self.cells.size and (self.cells.min() < 0 or self.cells.max() >= self.n_refs):
            raise ValueError("cell index out of range")
        classes: dict = {}
        for k in range(self.cells.shape[1]):
            gamma = frozenset(int(j) for j in np.unique(self.cells[:, k]))
            classes.setdefault(gamma, []).append(k)
        self.classes = {g: tuple(ks) for g, ks in sorted(classes.items(), key=lambda kv: kv[1][0])}

    @property
    def m(self) -> int:
        return self.cells.shape[1]

    @property
    def J(self) -> int:
        return self.n_refs

    def type_counts(self, gamma) -> np.ndarray:
        """(N, J) counts ``#{k in I_Gamma : cell(w, k) = j}``."""
        ks = list(self.classes[frozenset(gamma)])
        sub = self.cells[:, ks]
        return np.stack([(sub == j).sum(axis=1) for j in range(self.J)], axis=1)

    def types(self, gamma) -> np.ndarray:
        """Per-message type ``P_w`` on class ``gamma`` as probabilities."""
        counts = self.type_counts(gamma)
        return counts / len(self.classes[frozenset(gamma)])


def classify_types(channel: MemoryChannel, code: Code, layout: BlockLayout, theta: float) -> TypeClassification:
    """Greedy theta-net over the occurring block outputs.

    Outputs are visited in (message, block) order; each joins the nearest
    existing reference within trace distance ``theta`` or becomes a new
    reference.
    """
    if layout.n != code.n:
        raise DimensionError("layout length does not match the code")
    refs: list = []
    cells = np.zeros((code.size, layout.m), dtype=np.int64)
    for w, cw in enumerate(code.codewords):
        for k, pos in enumerate(layout.payloads):
            out = apply_memory_product(channel, [cw[p] for p in pos])
            dists = [trace_distance(out, r) for r in refs]
            best = int(np.argmin(dists)) if dists else -1
            if best >= 0 and dists[best] <= theta:
                cells[w, k] = best
            else:
                refs.append(out)
                cells[w, k] = len(refs) - 1
    return TypeClassification(cells, len(refs), refs, theta)


@dataclass
class ReductionReport:
    kept: tuple
    original_size: int
    reduced_size: int
    m: int
    J: int
    class_sizes: dict
    class_types: dict

    @property
    def product_bound_ok(self) -> bool:
        """|M'| * prod_Gamma (|I_Gamma|+1)^J >= |M| in integers."""
        prod = 1
        for size in self.class_sizes.values():
            prod *= (size + 1) ** self.J
        return self.reduced_size * prod >= self.original_size

    @property
    def ratio_bound_ok(self) -> bool:
        """|M'| * (m+1)^(J 2^J) >= |M| in integers."""
        return self.reduced_size * (self.m + 1) ** (self.J * 2**self.J) >= self.original_size


def reduce_messages_by_type(classification: TypeClassification) -> ReductionReport:
    """Keep, class by class, the messages realizing the most common type.

    Ties go to the lexicographically smallest count vector.
    """
    alive = np.arange(classification.cells.shape[0])
    class_types = {}
    for gamma, ks in classification.classes.items():
        counts = classification.type_counts(gamma)[alive]
        tally = Counter(tuple(int(c) for c in row) for row in counts)
        best = min(tally.items(), key=lambda kv: (-kv[1], kv[0]))[0]
        mask = np.all(counts == np.array(best)[None, :], axis=1)
        alive = alive[mask]
        class_types[gamma] = np.array(best) / len(ks)
    return ReductionReport(
        kept=tuple(int(w) for w in alive),
        original_size=classification.cells.shape[0],
        reduced_size=len(alive),
        m=classification.m,
        J=classification.J,
        class_sizes={g: len(ks) for g, ks in classification.classes.items()},
        class_types=class_types,
    )


def reduce_code_by_type(code: Code, classification: TypeClassification) -> tuple[Code, ReductionReport]:
    """Subcode with a unique type per class; decoder elements are inherited."""
    if classification.cells.shape[0] != code.size:
        raise DimensionError("classification does not match the code size")
    report = reduce_messages_by_type(classification)
    return code.subcode(report.kept), report


# -- rate sweep ------------------------------------------------------------------

@dataclass(frozen=True)
class SweepRecord:
    rate: float
    n: int
    trial: int
    N: int
    max_error: float
    avg_error: float
    chi_rate_ref: float


@dataclass
class SweepResult:
    records: list
    skipped: list

    def mean_avg_error(self, rate: float) -> dict:
        by_n: dict = {}
        for r in self.records:
            if r.rate == rate:
                by_n.setdefault(r.n, []).append(r.avg_error)
        return {n: float(np.mean(v)) for n, v in sorted(by_n.items())}


def cell_seed(seed: int, rate_index: int, n_index: int, trial: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(entropy=seed, spawn_key=(rate_index, n_index, trial))


def strong_converse_sweep(
    channel: MemoryChannel,
    rates: Sequence[float],
    n_values: Sequence[int],
    trials: int,
    seed: int,
    ensemble: Ensemble,
    chi_rate_ref: float = float("nan"),
    threads: int = 1,
    cap: int = OUTPUT_ENTRY_CAP,
) -> SweepResult:
    """Random-code error probabilities over a (rate, n, trial) grid.

    Cells with ``N < 2`` or beyond ``cap`` are listed in ``skipped``.
    Records come back in (rate, n, trial) order regardless of ``threads``.
    """
    if not rates or not n_values:
        raise ValueError("rates and n_values must be non-empty")
    if trials < 1:
        raise ValueError("trials must be at least 1")
    cells = [
        (ri, ni, t) for ri in range(len(rates)) for ni in range(len(n_values)) for t in range(trials)
    ]

    def run(cell):
        ri, ni, t = cell
        rate, n = float(rates[ri]), int(n_values[ni])
        size = message_count(rate, n)
        if size < 2:
            return None, (rate, n, t, "N<2")
        try:
            code = random_code(channel, n, rate, ensemble, cell_seed(seed, ri, ni, t), cap=cap)
        except CapExceededError as exc:
            return None, (rate, n, t, str(exc))
        mx, avg = error_probability(channel, code)
        return SweepRecord(rate, n, t, size, mx, avg, chi_rate_ref), None

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, cells))
    else:
        results = [run(c) for c in cells]
    records = [r for r, _ in results if r is not None]
    skipped = [s for _, s in results if s is not None]
    return SweepResult(records, skipped)


@dataclass(frozen=True)
class Trend:
    rate: float
    n_values: tuple
    mean_errors: tuple
    spearman: float
    sign: int
    strictly_increasing: bool
    strictly_decreasing: bool


def trend_summary(result: SweepResult, rate: float) -> Trend:
    """Spearman correlation of trial-averaged ``avg_error`` against n."""
    means = result.mean_avg_error(rate)
    ns, errs = tuple(means), tuple(means.values())
    if len(ns) < 2:
        rho = float("nan")
    else:
        rho = float(spearmanr(ns, errs).statistic) if np.ptp(errs) > 0 else 0.0
    sign = 0 if not np.isfinite(rho) or rho == 0 else int(np.sign(rho))
    diffs = np.diff(errs)
    return Trend(
        rate,
        ns,
        errs,
        rho,
        sign,
        bool(len(diffs) and np.all(diffs > 0)),
        bool(len(diffs) and np.all(diffs < 0)),
    )
