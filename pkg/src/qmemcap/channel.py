"""Quantum channels with Markov-correlated memory.

A :class:`MemoryChannel` applies branch channel ``Phi_i`` at each letter,
with the branch sequence drawn from a stationary ergodic Markov chain.
The n-letter action is evaluated by a transfer recursion over the chain
state (cost linear in n); :func:`apply_memory_bruteforce` keeps the literal
sum over all branch paths as an oracle.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import yaml

from .errors import CapExceededError, DimensionError, InvalidChannelError, QMemError
from .markov import MarkovChain, is_ergodic, is_irreducible, n_step
from .operators import DensityOperator, tensor_all

COMPLETENESS_TOL = 1e-10
ENTRY_CAP = 2**20
PATH_CAP = 10**5


@dataclass(frozen=True, eq=False)
class KrausChannel:
    """CPTP map ``rho -> sum_a K_a rho K_a^dagger``."""

    kraus_ops: tuple
    in_dim: int = field(init=False)
    out_dim: int = field(init=False)
    superop: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        ops = [np.array(k, dtype=complex) for k in self.kraus_ops]
        if not ops:
            raise InvalidChannelError("a channel needs at least one Kraus operator")
        shapes = {k.shape for k in ops}
        if len(shapes) != 1 or ops[0].ndim != 2:
            raise InvalidChannelError(f"Kraus operators have inconsistent shapes {sorted(shapes)}")
        out_dim, in_dim = ops[0].shape
        completeness = sum(k.conj().T @ k for k in ops)
        err = np.max(np.abs(completeness - np.eye(in_dim)))
        if err > COMPLETENESS_TOL:
            raise InvalidChannelError(f"Kraus operators are not trace preserving (deviation {err:.2e})")
        stack = np.stack(ops)
        stack.setflags(write=False)
        # S[(a,b),(c,e)] = sum_K K[a,c] conj(K[b,e]) acts on vec(rho) in row-major order
        superop = np.einsum("kac,kbe->abce", stack, stack.conj()).reshape(out_dim**2, in_dim**2)
        superop.setflags(write=False)
        object.__setattr__(self, "kraus_ops", stack)
        object.__setattr__(self, "in_dim", in_dim)
        object.__setattr__(self, "out_dim", out_dim)
        object.__setattr__(self, "superop", superop)

    def __call__(self, rho) -> np.ndarray:
        rho = np.asarray(rho)
        if rho.shape != (self.in_dim, self.in_dim):
            raise DimensionError(f"channel expects {self.in_dim}x{self.in_dim} input, got {rho.shape}")
        return (self.superop @ rho.reshape(-1)).reshape(self.out_dim, self.out_dim)


def identity_channel(dim: int = 2) -> KrausChannel:
    return KrausChannel([np.eye(dim)])


_PAULIS = (
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
)


def depolarizing_channel(p: float) -> KrausChannel:
    """Qubit channel ``rho -> (1 - p) rho + p I/2``."""
    if not 0.0 <= p <= 4.0 / 3.0:
        raise ValueError("depolarizing parameter must lie in [0, 4/3]")
    ops = [np.sqrt(1 - 3 * p / 4) * np.eye(2)] + [np.sqrt(p / 4) * s for s in _PAULIS]
    return KrausChannel(ops)


def random_channel(in_dim: int, out_dim: int, n_kraus: int, rng: np.random.Generator) -> KrausChannel:
    """Random CPTP map from a Haar-random isometry."""
    g = rng.standard_normal((out_dim * n_kraus, in_dim)) + 1j * rng.standard_normal((out_dim * n_kraus, in_dim))
    v, _ = np.linalg.qr(g)
    return KrausChannel(list(v.reshape(n_kraus, out_dim, in_dim)))


@dataclass(frozen=True, eq=False)
class MemoryChannel:
    """Ergodic chain plus one branch channel per chain state."""

    chain: MarkovChain
    branches: tuple

    def __post_init__(self):
        branches = tuple(self.branches)
        problems = []
        if len(branches) != self.chain.size:
            problems.append(f"{len(branches)} branches for a chain with {self.chain.size} states")
        if branches and len({(b.in_dim, b.out_dim) for b in branches}) != 1:
            problems.append("branch channels have different dimensions")
        if problems:
            raise InvalidChannelError(problems)
        object.__setattr__(self, "branches", branches)

    @property
    def in_dim(self) -> int:
        return self.branches[0].in_dim

    @property
    def out_dim(self) -> int:
        return self.branches[0].out_dim

    @property
    def n_states(self) -> int:
        return self.chain.size

    @classmethod
    def memoryless(cls, branch: KrausChannel) -> "MemoryChannel":
        return cls(MarkovChain.trivial(), (branch,))


def apply_branch(channel: MemoryChannel, i: int, rho) -> np.ndarray:
    rho = np.asarray(rho)
    if rho.shape != (channel.in_dim, channel.in_dim):
        raise DimensionError(f"input must be {channel.in_dim}x{channel.in_dim}")
    return channel.branches[i](rho)


def apply_to_slot(op: np.ndarray, superop: np.ndarray, dims: Sequence[int], slot: int, out_dim: int) -> np.ndarray:
    """Apply a single-letter superoperator to tensor slot ``slot`` of ``op``."""
    left = int(np.prod(dims[:slot]))
    mid = dims[slot]
    right = int(np.prod(dims[slot + 1:]))
    t = op.reshape(left, mid, right, left, mid, right)
    t = t.transpose(1, 4, 0, 2, 3, 5).reshape(mid * mid, -1)
    t = (superop @ t).reshape(out_dim, out_dim, left, right, left, right)
    t = t.transpose(2, 0, 3, 4, 1, 5)
    d = left * out_dim * right
    return t.reshape(d, d)


def _check_cap(channel: MemoryChannel, n: int, cap: int):
    if channel.in_dim**n * channel.out_dim**n > cap:
        raise CapExceededError(
            f"n={n} exceeds the entry cap: {channel.in_dim}^{n} * {channel.out_dim}^{n} > {cap}"
        )


def apply_memory(channel: MemoryChannel, n: int, rho_n, cap: int = ENTRY_CAP) -> np.ndarray:
    """n-letter memory channel by transfer recursion over the chain state.

    ``B_1(i) = gamma_i Phi_i[1](rho)``,
    ``B_k(j) = Phi_j[k](sum_i q_ij B_{k-1}(i))``, result ``sum_j B_n(j)``.
    Exact because branch maps act on disjoint slots and commute.
    """
    d, dk = channel.in_dim, channel.out_dim
    rho_n = np.asarray(rho_n, dtype=complex)
    if rho_n.shape != (d**n, d**n):
        raise DimensionError(f"input must be {d**n}x{d**n} for n={n}")
    _check_cap(channel, n, cap)
    q, gamma = channel.chain.q, channel.chain.gamma
    ops = [b.superop for b in channel.branches]
    dims = [d] * n
    partial = [gamma[i] * apply_to_slot(rho_n, ops[i], dims, 0, dk) for i in range(channel.n_states)]
    for k in range(1, n):
        dims[k - 1] = dk
        partial = [
            apply_to_slot(sum(q[i, j] * partial[i] for i in range(channel.n_states)), ops[j], dims, k, dk)
            for j in range(channel.n_states)
        ]
    return sum(partial)


def apply_memory_product(channel: MemoryChannel, letters: Sequence, cap: int = ENTRY_CAP) -> np.ndarray:
    """Memory channel on a product input ``letters[0] ⊗ ... ⊗ letters[n-1]``.

    Same recursion as :func:`apply_memory`, but each partial operator only
    spans the letters already processed.
    """
    n = len(letters)
    _check_cap(channel, n, cap)
    q, gamma = channel.chain.q, channel.chain.gamma
    outs = [[b(rho) for b in channel.branches] for rho in letters]
    partial = [gamma[i] * outs[0][i] for i in range(channel.n_states)]
    for k in range(1, n):
        partial = [
            np.kron(sum(q[i, j] * partial[i] for i in range(channel.n_states)), outs[k][j])
            for j in range(channel.n_states)
        ]
    return sum(partial)


def path_weight(chain: MarkovChain, path: Sequence[int]) -> float:
    """gamma_{i1} q_{i1 i2} ... q_{i(n-1) in}."""
    if len(path) == 0:
        raise ValueError("path must be nonempty")
    w = chain.gamma[path[0]]
    for a, b in zip(path[:-1], path[1:]):
        w *= chain.q[a, b]
    return float(w)


def apply_memory_bruteforce(channel: MemoryChannel, n: int, rho_n, path_cap: int = PATH_CAP) -> np.ndarray:
    """Literal sum over all branch paths of weight × (Phi_i1 ⊗ ... ⊗ Phi_in)(rho)."""
    if channel.n_states**n > path_cap:
        raise CapExceededError(f"{channel.n_states}^{n} paths exceed the cap {path_cap}")
    rho_n = np.asarray(rho_n, dtype=complex)
    d = channel.in_dim
    if rho_n.shape != (d**n, d**n):
        raise DimensionError(f"input must be {d**n}x{d**n} for n={n}")
    dk = channel.out_dim
    out = np.zeros((dk**n, dk**n), dtype=complex)
    for path in itertools.product(range(channel.n_states), repeat=n):
        w = path_weight(channel.chain, path)
        if w == 0.0:
            continue
        kraus = np.stack(
            [tensor_all(ks) for ks in itertools.product(*(channel.branches[i].kraus_ops for i in path))]
        )
        out += w * np.einsum("kab,bc,kdc->ad", kraus, rho_n, kraus.conj())
    return out


def conditional_block_states(channel: MemoryChannel, block_input, l0: int, n0: int | None = None) -> np.ndarray:
    """All ``sigma(i, i')`` for one block, shaped ``(|I|, |I|, D, D)``.

    ``sigma(i, i') = sum_{i2..in0} q_{i i2} ... q_{i(n0-1) in0} q^(l0)_{in0 i'}
    (Phi_i ⊗ Phi_i2 ⊗ ... ⊗ Phi_in0)(block_input)``.  ``block_input`` is either
    a ``d^n0`` square operator or a sequence of ``n0`` single-letter states.
    """
    if l0 < 1:
        raise ValueError("l0 must be at least 1")
    d, dk, n_states = channel.in_dim, channel.out_dim, channel.n_states
    q = channel.chain.q
    ops = [b.superop for b in channel.branches]
    if isinstance(block_input, (list, tuple)):
        outs = [[b(np.asarray(r)) for b in channel.branches] for r in block_input]
        n0 = len(outs)
        final = []
        for i in range(n_states):
            part = [outs[0][i] if j == i else None for j in range(n_states)]
            for k in range(1, n0):
                part = [
                    np.kron(sum(q[a, j] * part[a] for a in range(n_states) if part[a] is not None), outs[k][j])
                    for j in range(n_states)
                ]
            final.append([p if p is not None else np.zeros_like(outs[0][0]) for p in part])
    else:
        block_input = np.asarray(block_input, dtype=complex)
        if n0 is None:
            n0 = int(round(np.log(block_input.shape[0]) / np.log(d)))
        if block_input.shape != (d**n0, d**n0):
            raise DimensionError(f"block input must be {d**n0}x{d**n0}")
        final = []
        for i in range(n_states):
            dims = [d] * n0
            first = apply_to_slot(block_input, ops[i], dims, 0, dk)
            part = [first if j == i else np.zeros_like(first) for j in range(n_states)]
            for k in range(1, n0):
                dims[k - 1] = dk
                part = [
                    apply_to_slot(sum(q[a, j] * part[a] for a in range(n_states)), ops[j], dims, k, dk)
                    for j in range(n_states)
                ]
            final.append(part)
    ql = n_step(channel.chain, l0)
    stack = np.array(final)  # (i, i_n0, D, D)
    return np.einsum("ijab,jk->ikab", stack, ql)


def conditional_block_state(channel: MemoryChannel, block_input, i: int, i_prime: int, l0: int) -> np.ndarray:
    return conditional_block_states(channel, block_input, l0)[i, i_prime]


# -- channel definition files ------------------------------------------------

_TOP_KEYS = {"dims", "chain", "branches", "name"}


def _parse_complex_matrix(raw, where, problems):
    try:
        arr = np.asarray(raw, dtype=float)
    except (TypeError, ValueError):
        problems.append(f"{where}: entries must be [re, im] number pairs")
        return None
    if arr.ndim != 3 or arr.shape[-1] != 2:
        problems.append(f"{where}: expected a matrix of [re, im] pairs, got array of shape {arr.shape}")
        return None
    return arr[..., 0] + 1j * arr[..., 1]


def channel_from_dict(data) -> MemoryChannel:
    """Validate a channel definition mapping; every violation is reported."""
    problems: list[str] = []
    if not isinstance(data, dict):
        raise InvalidChannelError("channel definition must be a mapping")
    for key in sorted(set(data) - _TOP_KEYS):
        problems.append(f"unknown key {key!r}")
    for key in ("dims", "chain", "branches"):
        if key not in data:
            problems.append(f"missing key {key!r}")
    if problems and any(p.startswith("missing") for p in problems):
        raise InvalidChannelError(problems)

    dims = data["dims"]
    if isinstance(dims, dict):
        extra = set(dims) - {"in", "out"}
        if extra:
            problems.append(f"dims: unknown keys {sorted(extra)}")
        in_dim, out_dim = dims.get("in"), dims.get("out")
    elif isinstance(dims, (list, tuple)) and len(dims) == 2:
        in_dim, out_dim = dims
    else:
        in_dim = out_dim = None
    if not (isinstance(in_dim, int) and isinstance(out_dim, int) and in_dim > 0 and out_dim > 0):
        problems.append("dims: expected {in: int, out: int} with positive integers")
        in_dim = out_dim = None

    chain_raw = data["chain"]
    chain = None
    if not isinstance(chain_raw, dict) or "q" not in chain_raw:
        problems.append("chain: expected a mapping with key 'q'")
    else:
        extra = set(chain_raw) - {"q", "gamma"}
        if extra:
            problems.append(f"chain: unknown keys {sorted(extra)}")
        try:
            q = np.asarray(chain_raw["q"], dtype=float)
        except (TypeError, ValueError):
            problems.append("chain.q: not a real matrix")
            q = None
        if q is not None:
            if q.ndim != 2 or q.shape[0] != q.shape[1]:
                problems.append(f"chain.q: must be square, got shape {q.shape}")
            elif np.any(q < 0) or np.any(q > 1) or np.max(np.abs(q.sum(axis=1) - 1)) > 1e-12:
                problems.append("chain.q: not row-stochastic")
            elif not is_irreducible(q):
                problems.append("chain.q: chain is reducible")
            elif not is_ergodic(q):
                problems.append("chain.q: chain is periodic")
            else:
                try:
                    chain = MarkovChain(q, chain_raw.get("gamma"))
                except QMemError as exc:
                    problems.append(f"chain: {exc}")

    branches = []
    raw_branches = data["branches"]
    if not isinstance(raw_branches, list) or not raw_branches:
        problems.append("branches: expected a nonempty list")
        raw_branches = []
    for idx, br in enumerate(raw_branches):
        where = f"branches[{idx}]"
        if not isinstance(br, dict) or "kraus" not in br:
            problems.append(f"{where}: expected a mapping with key 'kraus'")
            continue
        extra = set(br) - {"kraus", "name"}
        if extra:
            problems.append(f"{where}: unknown keys {sorted(extra)}")
        mats = []
        for a, raw in enumerate(br["kraus"] or []):
            m = _parse_complex_matrix(raw, f"{where}.kraus[{a}]", problems)
            if m is None:
                continue
            if in_dim is not None and m.shape != (out_dim, in_dim):
                problems.append(f"{where}.kraus[{a}]: shape {m.shape} != ({out_dim}, {in_dim})")
                continue
            mats.append(m)
        if not mats:
            problems.append(f"{where}: no valid Kraus operators")
            continue
        try:
            branches.append(KrausChannel(mats))
        except InvalidChannelError as exc:
            problems.append(f"{where}: {exc}")
    if chain is not None and len(raw_branches) != chain.size:
        problems.append(f"branches: {len(raw_branches)} given for a chain with {chain.size} states")
    if problems:
        raise InvalidChannelError(problems)
    return MemoryChannel(chain, tuple(branches))


def _matrix_to_pairs(m) -> list:
    m = np.asarray(m, dtype=complex)
    return [[[float(z.real), float(z.imag)] for z in row] for row in m]


def channel_to_dict(channel: MemoryChannel, name: str | None = None) -> dict:
    data = {
        "dims": {"in": channel.in_dim, "out": channel.out_dim},
        "chain": {"q": channel.chain.q.tolist()},
        "branches": [{"kraus": [_matrix_to_pairs(k) for k in b.kraus_ops]} for b in channel.branches],
    }
    if name:
        data["name"] = name
    return data


def load_channel(path) -> MemoryChannel:
    """Read a YAML or JSON channel definition file."""
    text = Path(path).read_text()
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise InvalidChannelError(f"cannot parse {path}: {exc}") from exc
    return channel_from_dict(data)


def save_channel(channel: MemoryChannel, path, name: str | None = None):
    Path(path).write_text(json.dumps(channel_to_dict(channel, name), indent=1) + "\n")


def as_state(rho) -> np.ndarray:
    if isinstance(rho, DensityOperator):
        return rho.matrix
    return np.asarray(rho, dtype=complex)
