# hilbert.py

import logging
from dataclasses import dataclass
from functools import reduce
from typing import Dict, Iterable, List, Literal, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.linalg
from pydantic import BaseModel, Field, model_validator

from src.settings import (
    ENTROPY_CLIP,
    HERMITIAN_TOL,
    NEGATIVE_EIGENVALUE_TOL,
    RECONSTRUCTION_TOL,
    STATE_NORM_TOL,
    DENSITY_TRACE_TOL,
    GENERATOR_EIGENVALUE_TOL,
)

logger = logging.getLogger(__name__)


class LinearAlgebraError(ValueError):
    """Raised for malformed operators, bad subsystem indices or solver failures."""


# Single spin-1/2 operators in the (|↑⟩, |↓⟩) basis, σ^z|↑⟩ = +|↑⟩.
IDENTITY_2 = np.eye(2, dtype=complex)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
SIGMA_PLUS = np.array([[0, 1], [0, 0]], dtype=complex)
SIGMA_MINUS = np.array([[0, 0], [1, 0]], dtype=complex)
NUMBER = np.array([[1, 0], [0, 0]], dtype=complex)

UP = np.array([1, 0], dtype=complex)
DOWN = np.array([0, 1], dtype=complex)
PLUS_X = np.array([1, 1], dtype=complex) / np.sqrt(2)
MINUS_X = np.array([1, -1], dtype=complex) / np.sqrt(2)


class LatticeSpec(BaseModel):
    """Chain geometry with interleaved matter/link subsystems.

    Canonical order: matter 1, link (1,2), matter 2, link (2,3), ..., with
    the closing link (L,1) last under periodic boundaries. The first
    subsystem is the most significant digit of the tensor index.
    """

    model_config = {"frozen": True}

    n_matter: int = Field(ge=1)
    boundary: Literal["periodic", "open"] = "periodic"
    local_dim: int = Field(default=2, ge=2)

    @model_validator(mode="after")
    def check_ring(self):
        if self.boundary == "periodic" and self.n_matter < 2:
            raise ValueError("periodic boundary needs at least 2 matter sites")
        return self

    @property
    def n_links(self) -> int:
        return self.n_matter if self.boundary == "periodic" else self.n_matter - 1

    @property
    def n_subsystems(self) -> int:
        return self.n_matter + self.n_links

    @property
    def local_dims(self) -> Tuple[int, ...]:
        return (self.local_dim,) * self.n_subsystems

    @property
    def dim(self) -> int:
        return int(np.prod(self.local_dims))

    def matter_index(self, site: int) -> int:
        """Subsystem ordinal of matter site `site` (1-based)."""
        self._check_site(site)
        return 2 * (site - 1)

    def link_index(self, site: int) -> int:
        """Subsystem ordinal of the link (site, site+1); site L is the closing link."""
        self._check_site(site)
        if site == self.n_matter and self.boundary == "open":
            raise LinearAlgebraError(f"open chain has no link to the right of site {site}")
        return 2 * (site - 1) + 1

    def right_link(self, site: int) -> Optional[int]:
        if site == self.n_matter and self.boundary == "open":
            return None
        return self.link_index(site)

    def left_link(self, site: int) -> Optional[int]:
        if site == 1:
            return None if self.boundary == "open" else self.link_index(self.n_matter)
        return self.link_index(site - 1)

    def next_site(self, site: int) -> Optional[int]:
        if site == self.n_matter:
            return None if self.boundary == "open" else 1
        return site + 1

    def bonds(self) -> List[Tuple[int, int]]:
        """(site, next site) pairs, one per link."""
        return [(j, self.next_site(j)) for j in range(1, self.n_links + 1)]

    def _check_site(self, site: int):
        if not 1 <= site <= self.n_matter:
            raise LinearAlgebraError(f"site {site} outside 1..{self.n_matter}")


def hermiticity_error(matrix: np.ndarray) -> float:
    return float(np.max(np.abs(matrix - matrix.conj().T))) if matrix.size else 0.0


def _max_abs(matrix: np.ndarray) -> float:
    return float(np.max(np.abs(matrix))) if matrix.size else 0.0


@dataclass(frozen=True)
class OperatorMatrix:
    """Dense complex operator on the full Hilbert space."""

    entries: np.ndarray
    hermitian_hint: bool = False

    def __post_init__(self):
        entries = np.array(self.entries, dtype=complex)
        if entries.ndim != 2 or entries.shape[0] != entries.shape[1]:
            raise LinearAlgebraError(f"operator must be square, got shape {entries.shape}")
        entries.setflags(write=False)
        object.__setattr__(self, "entries", entries)
        if self.hermitian_hint and not self.is_hermitian():
            raise LinearAlgebraError(
                f"hermitian_hint set but max deviation is {hermiticity_error(entries):.3e}"
            )

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @classmethod
    def identity(cls, dim: int) -> "OperatorMatrix":
        return cls(np.eye(dim, dtype=complex), hermitian_hint=True)

    @classmethod
    def zeros(cls, dim: int) -> "OperatorMatrix":
        return cls(np.zeros((dim, dim), dtype=complex), hermitian_hint=True)

    def is_hermitian(self, tol: float = HERMITIAN_TOL) -> bool:
        scale = max(_max_abs(self.entries), 1.0)
        return hermiticity_error(self.entries) <= tol * scale

    def as_hermitian(self) -> "OperatorMatrix":
        """Same operator with the Hermitian hint set (verified)."""
        return OperatorMatrix(self.entries, hermitian_hint=True)

    def dagger(self) -> "OperatorMatrix":
        return OperatorMatrix(self.entries.conj().T, hermitian_hint=self.hermitian_hint)

    def norm_max(self) -> float:
        return _max_abs(self.entries)

    def commutator(self, other: "OperatorMatrix") -> "OperatorMatrix":
        return OperatorMatrix(self.entries @ other.entries - other.entries @ self.entries)

    def expectation(self, state: np.ndarray) -> complex:
        """⟨ψ|O|ψ⟩ for a vector, Tr{ρO} for a density matrix."""
        state = np.asarray(state)
        if state.ndim == 1:
            return complex(np.vdot(state, self.entries @ state))
        return complex(np.einsum("ij,ji->", state, self.entries))

    def __add__(self, other: "OperatorMatrix") -> "OperatorMatrix":
        return OperatorMatrix(
            self.entries + other.entries,
            hermitian_hint=self.hermitian_hint and other.hermitian_hint,
        )

    def __sub__(self, other: "OperatorMatrix") -> "OperatorMatrix":
        return OperatorMatrix(
            self.entries - other.entries,
            hermitian_hint=self.hermitian_hint and other.hermitian_hint,
        )

    def __neg__(self) -> "OperatorMatrix":
        return OperatorMatrix(-self.entries, hermitian_hint=self.hermitian_hint)

    def __mul__(self, scalar) -> "OperatorMatrix":
        real = np.isreal(scalar)
        return OperatorMatrix(self.entries * scalar, hermitian_hint=self.hermitian_hint and bool(real))

    __rmul__ = __mul__

    def __matmul__(self, other: "OperatorMatrix") -> "OperatorMatrix":
        return OperatorMatrix(self.entries @ other.entries)


def operator_sum(ops: Iterable[OperatorMatrix], dim: int) -> OperatorMatrix:
    return reduce(lambda acc, op: acc + op, ops, OperatorMatrix.zeros(dim))


@dataclass(frozen=True)
class EigenDecomposition:
    """Ascending eigenvalues ε_m with eigenvector columns |ε_m⟩."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def dim(self) -> int:
        return self.eigenvalues.shape[0]

    def transition_frequencies(self) -> np.ndarray:
        """Matrix ω[n, m] = ε_m − ε_n, the frequency carried by |ε_n⟩⟨ε_m|."""
        return self.eigenvalues[None, :] - self.eigenvalues[:, None]

    def to_eigenbasis(self, matrix: np.ndarray) -> np.ndarray:
        return self.eigenvectors.conj().T @ matrix @ self.eigenvectors

    def from_eigenbasis(self, matrix: np.ndarray) -> np.ndarray:
        return self.eigenvectors @ matrix @ self.eigenvectors.conj().T

    def reconstruct(self) -> np.ndarray:
        return (self.eigenvectors * self.eigenvalues) @ self.eigenvectors.conj().T

    def spectral_range(self) -> float:
        return float(self.eigenvalues[-1] - self.eigenvalues[0]) if self.dim else 0.0


def embed_product(lattice: Union[LatticeSpec, Sequence[int]], factors: Dict[int, np.ndarray]) -> OperatorMatrix:
    """Tensor product of local operators, identity on every subsystem not in `factors`."""
    dims = _subsystem_dims(lattice)
    for index, local_op in factors.items():
        if not 0 <= index < len(dims):
            raise LinearAlgebraError(f"subsystem index {index} out of range 0..{len(dims) - 1}")
        local_op = np.asarray(local_op)
        if local_op.shape != (dims[index], dims[index]):
            raise LinearAlgebraError(
                f"local operator on subsystem {index} must be {dims[index]}x{dims[index]}, got {local_op.shape}"
            )
    pieces = []
    run = 1
    # Collapse runs of identities into one identity block before each kron.
    for index, local_dim in enumerate(dims):
        if index in factors:
            if run > 1:
                pieces.append(np.eye(run, dtype=complex))
            pieces.append(np.asarray(factors[index], dtype=complex))
            run = 1
        else:
            run *= local_dim
    if run > 1 or not pieces:
        pieces.append(np.eye(run, dtype=complex))
    entries = reduce(np.kron, pieces)
    hermitian = all(
        hermiticity_error(np.asarray(op, dtype=complex)) <= HERMITIAN_TOL * max(_max_abs(np.asarray(op)), 1.0)
        for op in factors.values()
    )
    return OperatorMatrix(entries, hermitian_hint=hermitian)


def embed_local(lattice: Union[LatticeSpec, Sequence[int]], subsystem_index: int, local_op: np.ndarray) -> OperatorMatrix:
    """identity ⊗ ... ⊗ local_op ⊗ ... ⊗ identity."""
    return embed_product(lattice, {subsystem_index: local_op})


def product_state(local_states: Sequence[np.ndarray]) -> np.ndarray:
    state = reduce(np.kron, [np.asarray(s, dtype=complex) for s in local_states])
    return state / np.linalg.norm(state)


def hermitian_eig(op: OperatorMatrix) -> EigenDecomposition:
    """Dense Hermitian eigendecomposition with round-trip verification."""
    if not op.is_hermitian():
        raise LinearAlgebraError(
            f"eigendecomposition needs a Hermitian operator (deviation {hermiticity_error(op.entries):.3e})"
        )
    symmetric = (op.entries + op.entries.conj().T) / 2
    try:
        eigenvalues, eigenvectors = scipy.linalg.eigh(symmetric)
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as e:
        logger.error(f"Eigensolver failed on a {op.dim}x{op.dim} operator: {e}", exc_info=True)
        raise LinearAlgebraError(f"eigensolver did not converge: {e}") from e

    decomposition = EigenDecomposition(eigenvalues, eigenvectors)
    scale = max(op.norm_max(), 1.0)
    error = _max_abs(symmetric - decomposition.reconstruct())
    if error > RECONSTRUCTION_TOL * scale:
        raise LinearAlgebraError(f"eigendecomposition round trip off by {error:.3e}")
    return decomposition


def _subsystem_dims(lattice: Union[LatticeSpec, Sequence[int]]) -> Tuple[int, ...]:
    if isinstance(lattice, LatticeSpec):
        return lattice.local_dims
    return tuple(int(d) for d in lattice)


def partial_trace(rho: np.ndarray, lattice: Union[LatticeSpec, Sequence[int]], kept: Iterable[int]) -> np.ndarray:
    """Reduced density matrix on the `kept` subsystems, in canonical order."""
    dims = _subsystem_dims(lattice)
    kept = sorted(set(kept))
    if not kept:
        raise LinearAlgebraError("partial trace needs at least one kept subsystem")
    if kept[0] < 0 or kept[-1] >= len(dims):
        raise LinearAlgebraError(f"kept subsystems {kept} outside 0..{len(dims) - 1}")
    total = int(np.prod(dims))
    rho = np.asarray(rho)
    if rho.shape != (total, total):
        raise LinearAlgebraError(f"density matrix shape {rho.shape} does not match dimension {total}")

    traced = [i for i in range(len(dims)) if i not in kept]
    n = len(dims)
    tensor = rho.reshape(dims + dims)
    order = kept + traced + [n + i for i in kept] + [n + i for i in traced]
    dim_kept = int(np.prod([dims[i] for i in kept]))
    dim_traced = int(np.prod([dims[i] for i in traced])) if traced else 1
    tensor = tensor.transpose(order).reshape(dim_kept, dim_traced, dim_kept, dim_traced)
    return np.einsum("ajbj->ab", tensor)


def von_neumann_entropy(rho: np.ndarray) -> float:
    """−Σ λ ln λ in nats, clipping round-off negative weights."""
    eigenvalues = scipy.linalg.eigvalsh((rho + rho.conj().T) / 2)
    if eigenvalues.size and eigenvalues[0] < -NEGATIVE_EIGENVALUE_TOL:
        raise LinearAlgebraError(f"density matrix has eigenvalue {eigenvalues[0]:.3e}")
    weights = eigenvalues[eigenvalues > ENTROPY_CLIP]
    return max(0.0, float(-np.sum(weights * np.log(weights))))


def validate_state(psi: np.ndarray) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    if psi.ndim != 1:
        raise LinearAlgebraError(f"state vector must be 1-D, got shape {psi.shape}")
    norm = np.linalg.norm(psi)
    if abs(norm - 1.0) > STATE_NORM_TOL:
        raise LinearAlgebraError(f"state vector norm is {norm!r}")
    return psi


def validate_density_matrix(rho: np.ndarray) -> np.ndarray:
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise LinearAlgebraError(f"density matrix must be square, got shape {rho.shape}")
    if hermiticity_error(rho) > DENSITY_TRACE_TOL:
        raise LinearAlgebraError("density matrix is not Hermitian")
    trace = np.trace(rho).real
    if abs(trace - 1.0) > DENSITY_TRACE_TOL:
        raise LinearAlgebraError(f"density matrix trace is {trace!r}")
    min_eig = scipy.linalg.eigvalsh((rho + rho.conj().T) / 2)[0]
    if min_eig < -NEGATIVE_EIGENVALUE_TOL:
        raise LinearAlgebraError(f"density matrix has eigenvalue {min_eig:.3e}")
    return rho


def pure_density(psi: np.ndarray) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    return np.outer(psi, psi.conj())


def _cluster_sorted(values: np.ndarray, tol: float) -> List[Tuple[float, np.ndarray]]:
    """Group ascending values whose neighbours are within `tol`."""
    if values.size == 0:
        return []
    breaks = np.flatnonzero(np.diff(values) > tol) + 1
    groups = np.split(np.arange(values.size), breaks)
    return [(float(np.mean(values[g])), g) for g in groups]


def joint_eigenspaces(
    ops: Sequence[OperatorMatrix], tol: float = GENERATOR_EIGENVALUE_TOL
) -> List[Tuple[Tuple[float, ...], np.ndarray]]:
    """Simultaneous eigenspaces of mutually commuting Hermitian operators.

    Returns (label, basis) pairs where `label` holds one eigenvalue per
    operator and the columns of `basis` span the joint eigenspace.
    """
    if not ops:
        raise LinearAlgebraError("joint diagonalization needs at least one operator")
    dim = ops[0].dim
    for i, a in enumerate(ops):
        if not a.is_hermitian():
            raise LinearAlgebraError(f"operator {i} is not Hermitian")
        for k in range(i + 1, len(ops)):
            residual = a.commutator(ops[k]).norm_max()
            if residual > tol * max(a.norm_max(), ops[k].norm_max(), 1.0):
                raise LinearAlgebraError(f"operators {i} and {k} do not commute ({residual:.3e})")

    off_diagonal = max(_max_abs(op.entries - np.diag(np.diag(op.entries))) for op in ops)
    if off_diagonal <= tol:
        # Diagonal fast path: group computational basis states by their label.
        labels = np.stack([np.diag(op.entries).real for op in ops], axis=1)
        keys = np.round(labels / tol).astype(np.int64)
        _, inverse = np.unique(keys, axis=0, return_inverse=True)
        inverse = np.asarray(inverse).reshape(-1)
        spaces = []
        for group in range(inverse.max() + 1):
            members = np.flatnonzero(inverse == group)
            basis = np.zeros((dim, members.size), dtype=complex)
            basis[members, np.arange(members.size)] = 1.0
            spaces.append((tuple(float(v) for v in labels[members[0]]), basis))
        return sorted(spaces, key=lambda item: item[0])

    spaces = [((), np.eye(dim, dtype=complex))]
    for op in ops:
        refined = []
        for label, basis in spaces:
            restricted = basis.conj().T @ op.entries @ basis
            restricted = (restricted + restricted.conj().T) / 2
            values, vectors = scipy.linalg.eigh(restricted)
            for value, members in _cluster_sorted(values, 1e3 * tol):
                refined.append((label + (value,), basis @ vectors[:, members]))
        spaces = refined
    return sorted(spaces, key=lambda item: item[0])
