"""Dense complex-operator linear algebra.

Index convention: in every tensor product the left factor is the slow
index, i.e. ``(a ⊗ b)[i*db + k, j*db + l] = a[i, j] * b[k, l]`` (the
``numpy.kron`` convention).  All other modules inherit it.

Logarithms are base 2, so entropies are in bits.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import reduce
from typing import Sequence

import numpy as np

from .errors import (
    DimensionError,
    IncompleteProjectorsError,
    InvalidStateError,
    NotHermitianError,
)

HERMITIAN_TOL = 1e-12
PSD_TOL = 1e-10
TRACE_TOL = 1e-10
EIG_CLIP = 1e-12
DEGENERACY_TOL = 1e-8


def _square(a, name="operand") -> np.ndarray:
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionError(f"{name} must be a square matrix, got shape {a.shape}")
    return a


@dataclass(frozen=True, eq=False)
class DensityOperator:
    """Hermitian, positive semidefinite, unit-trace matrix.

    Construction validates the invariants; the stored matrix is a
    read-only complex copy.
    """

    matrix: np.ndarray
    dim: int = field(init=False)

    def __post_init__(self):
        m = np.array(_square(self.matrix, "density matrix"), dtype=complex)
        problems = []
        if np.max(np.abs(m - m.conj().T), initial=0.0) > HERMITIAN_TOL:
            problems.append("not Hermitian")
        else:
            m = 0.5 * (m + m.conj().T)
            lo = np.linalg.eigvalsh(m)[0]
            if lo < -PSD_TOL:
                problems.append(f"not positive semidefinite (min eigenvalue {lo:.3e})")
        tr = np.trace(m).real
        if abs(tr - 1.0) > TRACE_TOL:
            problems.append(f"trace {tr!r} != 1")
        if problems:
            raise InvalidStateError("invalid density operator: " + ", ".join(problems))
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "dim", m.shape[0])

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return self.matrix
        return self.matrix.astype(dtype)

    @classmethod
    def from_ket(cls, psi) -> "DensityOperator":
        psi = np.asarray(psi, dtype=complex).ravel()
        psi = psi / np.linalg.norm(psi)
        return cls(np.outer(psi, psi.conj()))

    @classmethod
    def maximally_mixed(cls, dim: int) -> "DensityOperator":
        return cls(np.eye(dim) / dim)


@dataclass(frozen=True, eq=False)
class HermitianSpectrum:
    """Distinct eigenvalues (descending) with their eigenprojections."""

    eigenvalues: np.ndarray
    projectors: tuple
    # orthonormal eigenvectors grouped per projector; columns of vectors[p]
    vectors: tuple = ()

    @property
    def dim(self) -> int:
        return self.projectors[0].shape[0]

    @property
    def ranks(self) -> np.ndarray:
        return np.array([int(round(np.trace(p).real)) for p in self.projectors])

    def __len__(self):
        return len(self.eigenvalues)

    def reconstruct(self) -> np.ndarray:
        return sum(lam * p for lam, p in zip(self.eigenvalues, self.projectors))

    def labelled_basis(self):
        """Return ``(U, labels)``: eigenvector columns and their projector index."""
        if not self.vectors:
            raise ValueError("spectrum carries no eigenvectors")
        cols = np.concatenate(self.vectors, axis=1)
        labels = np.concatenate([np.full(v.shape[1], p) for p, v in enumerate(self.vectors)])
        return cols, labels


def tensor_product(a, b) -> np.ndarray:
    """Kronecker product of two square operators, left factor slow."""
    return np.kron(_square(a, "left operand"), _square(b, "right operand"))


def tensor_all(ops: Sequence) -> np.ndarray:
    if len(ops) == 0:
        return np.ones((1, 1), dtype=complex)
    return reduce(tensor_product, ops)


def is_hermitian(h, tol: float = 1e-10) -> bool:
    h = np.asarray(h)
    return bool(np.max(np.abs(h - h.conj().T), initial=0.0) <= tol)


def eig_hermitian(h, degeneracy_tol: float = DEGENERACY_TOL) -> HermitianSpectrum:
    """Spectral decomposition with eigenvalues closer than ``degeneracy_tol`` merged.

    Consecutive (sorted) eigenvalues whose gap is below the tolerance share
    one projector; the reported eigenvalue is the group mean.
    """
    h = _square(h, "operator")
    if not is_hermitian(h):
        raise NotHermitianError("eig_hermitian requires a Hermitian operator")
    h = 0.5 * (h + h.conj().T)
    w, v = np.linalg.eigh(h)
    w, v = w[::-1], v[:, ::-1]
    groups = [[0]]
    for k in range(1, len(w)):
        if w[groups[-1][-1]] - w[k] < degeneracy_tol:
            groups[-1].append(k)
        else:
            groups.append([k])
    eigenvalues = np.array([w[g].mean() for g in groups])
    vectors = tuple(v[:, g] for g in groups)
    projectors = tuple(vec @ vec.conj().T for vec in vectors)
    return HermitianSpectrum(eigenvalues, projectors, vectors)


def spectrum_of_eigs(h) -> np.ndarray:
    """Eigenvalues of a Hermitian matrix, clipped to [0, 1]."""
    w = np.linalg.eigvalsh(np.asarray(h))
    w = np.where(w < EIG_CLIP, 0.0, w)
    return np.minimum(w, 1.0)


def entropy_of_probs(p) -> float:
    p = np.asarray(p, dtype=float)
    p = p[p > 0]
    return float(-np.sum(p * np.log2(p)))


def von_neumann_entropy(rho) -> float:
    """S(rho) = -sum lam log2 lam, with 0 log 0 = 0."""
    return entropy_of_probs(spectrum_of_eigs(_square(rho, "state")))


def entropies(stack) -> np.ndarray:
    """Entropies of a batch of states shaped ``(..., D, D)``."""
    w = np.linalg.eigvalsh(np.asarray(stack))
    w = np.where(w < EIG_CLIP, 0.0, np.minimum(w, 1.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(w > 0, w * np.log2(np.where(w > 0, w, 1.0)), 0.0)
    return -terms.sum(axis=-1)


def trace_norm(a) -> float:
    a = np.asarray(a)
    if is_hermitian(a, 1e-9):
        return float(np.sum(np.abs(np.linalg.eigvalsh(0.5 * (a + a.conj().T)))))
    return float(np.sum(np.linalg.svd(a, compute_uv=False)))


def trace_distance(rho, sigma) -> float:
    """Trace norm of the difference (no factor 1/2); ranges over [0, 2]."""
    rho, sigma = _square(rho), _square(sigma)
    if rho.shape != sigma.shape:
        raise DimensionError(f"dimension mismatch {rho.shape} vs {sigma.shape}")
    return trace_norm(rho - sigma)


def partial_trace(rho, keep, dims) -> np.ndarray:
    """Trace out every subsystem not listed in ``keep``.

    ``dims`` lists the subsystem dimensions in tensor order; ``keep`` is an
    index or a sequence of indices.  For the bipartite case use
    ``dims=(dA, dB)`` with ``keep=0`` (A) or ``keep=1`` (B).
    """
    rho = _square(rho, "operator")
    dims = [int(d) for d in dims]
    if int(np.prod(dims)) != rho.shape[0]:
        raise DimensionError(f"dims {dims} do not factor dimension {rho.shape[0]}")
    keep = sorted({keep} if np.isscalar(keep) else set(keep))
    if any(k < 0 or k >= len(dims) for k in keep):
        raise DimensionError(f"subsystem index out of range: {keep}")
    n = len(dims)
    t = rho.reshape(dims + dims)
    drop = [k for k in range(n) if k not in keep]
    # trace dropped pairs from the highest index down so axis numbers stay valid
    for count, k in enumerate(sorted(drop, reverse=True)):
        cur = n - count
        t = np.trace(t, axis1=k, axis2=k + cur)
    dk = int(np.prod([dims[k] for k in keep])) if keep else 1
    return t.reshape(dk, dk)


def pinch(rho, basis: HermitianSpectrum) -> np.ndarray:
    """Dephase ``rho`` into the blocks of ``basis``: sum_p P_p rho P_p."""
    rho = _square(rho, "operator")
    if basis.dim != rho.shape[0]:
        raise DimensionError("basis dimension does not match operator")
    total = sum(basis.projectors)
    if np.max(np.abs(total - np.eye(rho.shape[0]))) > 1e-9:
        raise IncompleteProjectorsError("projectors do not sum to the identity")
    return sum(p @ rho @ p for p in basis.projectors)


def min_eigenvalue(h) -> float:
    h = np.asarray(h)
    return float(np.linalg.eigvalsh(0.5 * (h + h.conj().T))[0])


def max_eigenvalue(h) -> float:
    h = np.asarray(h)
    return float(np.linalg.eigvalsh(0.5 * (h + h.conj().T))[-1])


def psd_sqrt(h) -> np.ndarray:
    """Square root of a positive semidefinite matrix via its spectrum."""
    h = np.asarray(h)
    w, v = np.linalg.eigh(0.5 * (h + h.conj().T))
    return (v * np.sqrt(np.clip(w, 0.0, None))) @ v.conj().T


def psd_inv_sqrt(h, cutoff: float = 1e-12) -> np.ndarray:
    """Pseudo-inverse square root on the support of ``h``."""
    h = np.asarray(h)
    w, v = np.linalg.eigh(0.5 * (h + h.conj().T))
    scale = max(1.0, float(np.max(np.abs(w), initial=0.0)))
    inv = np.zeros_like(w)
    mask = w > cutoff * scale
    inv[mask] = 1.0 / np.sqrt(w[mask])
    return (v * inv) @ v.conj().T


# -- random instances -------------------------------------------------------

def random_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_pure_state(dim: int, rng: np.random.Generator) -> np.ndarray:
    psi = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    psi /= np.linalg.norm(psi)
    return np.outer(psi, psi.conj())


def random_density_matrix(dim: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    """Induced-measure random state; full rank unless ``rank`` is given."""
    rank = dim if rank is None else rank
    g = rng.standard_normal((dim, rank)) + 1j * rng.standard_normal((dim, rank))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def random_hermitian(dim: int, rng: np.random.Generator) -> np.ndarray:
    g = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    return 0.5 * (g + g.conj().T)
