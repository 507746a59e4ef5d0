# redfield.py

import logging
from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.sparse as sp

from src.hilbert import EigenDecomposition, LinearAlgebraError, OperatorMatrix, hermitian_eig
from src.noise import Spectrum, evaluate
from src.settings import (
    BIN_TOL_REL,
    DENSE_SUPEROPERATOR_MAX_DIM,
    MATRIX_ELEMENT_CUTOFF,
    SUPEROPERATOR_NNZ_WARNING,
    VALIDITY_THRESHOLD,
)

logger = logging.getLogger(__name__)

# Pair products are generated in chunks of at most this many entries.
PAIR_CHUNK = 4_000_000

SpectraSpec = Union[Spectrum, Mapping[str, Spectrum], Sequence[Spectrum]]


class GeneratorError(ValueError):
    """Raised for missing spectra, negative rates or oversized superoperators."""


def _cluster(values: np.ndarray, tol: float) -> Tuple[np.ndarray, np.ndarray]:
    """Labels for ascending `values` grouped when neighbours are within tol, plus group means."""
    labels = np.concatenate([[0], np.cumsum(np.diff(values) > tol)]).astype(np.int64)
    counts = np.bincount(labels)
    means = np.bincount(labels, weights=values) / counts
    return labels, means


@dataclass(frozen=True)
class EigenOperatorSet:
    """Jump operators split into Bohr-frequency components in the energy eigenbasis.

    Element (n, m) of every rotated jump carries the frequency
    ω = ε_m − ε_n, so positive ω lowers the energy.
    """

    eig: EigenDecomposition
    jump_matrices: Tuple[np.ndarray, ...]
    labels: Tuple[str, ...]
    level_of: np.ndarray
    level_energies: np.ndarray
    frequencies: np.ndarray
    bin_index: np.ndarray
    bin_tol: float

    @property
    def dim(self) -> int:
        return self.eig.dim

    @property
    def n_jumps(self) -> int:
        return len(self.jump_matrices)

    @property
    def zero_bin(self) -> int:
        return int(np.argmin(np.abs(self.frequencies)))

    def frequency_matrix(self) -> np.ndarray:
        return self.frequencies[self.bin_index]

    def block(self, alpha: int, k: int) -> np.ndarray:
        """A_α(ω_k) in the energy eigenbasis."""
        return np.where(self.bin_index == k, self.jump_matrices[alpha], 0.0)

    def components(self, alpha: int) -> List[Tuple[float, np.ndarray]]:
        return [(float(w), self.block(alpha, k)) for k, w in enumerate(self.frequencies)]

    def mirror_bin(self, k: int) -> int:
        return len(self.frequencies) - 1 - k


def decompose_eigenoperators(
    H: OperatorMatrix,
    jumps: Sequence[OperatorMatrix],
    bin_tol: Optional[float] = None,
    labels: Optional[Sequence[str]] = None,
) -> EigenOperatorSet:
    """Diagonalize H and bin the jump operators' matrix elements by Bohr frequency."""
    if not jumps:
        raise GeneratorError("at least one jump operator is required")
    for i, a in enumerate(jumps):
        if a.dim != H.dim:
            raise GeneratorError(f"jump {i} has dimension {a.dim}, Hamiltonian has {H.dim}")
        if not a.is_hermitian():
            raise LinearAlgebraError(f"jump operator {i} is not Hermitian")
    labels = tuple(labels) if labels is not None else tuple(f"A{i}" for i in range(len(jumps)))
    if len(labels) != len(jumps):
        raise GeneratorError(f"{len(labels)} labels for {len(jumps)} jump operators")

    eig = hermitian_eig(H)
    if bin_tol is None:
        bin_tol = BIN_TOL_REL * max(eig.spectral_range(), 1.0)

    level_of, level_energies = _cluster(eig.eigenvalues, bin_tol)
    degeneracy = np.bincount(level_of).astype(float)

    gaps = (level_energies[None, :] - level_energies[:, None]).reshape(-1)
    weights = np.outer(degeneracy, degeneracy).reshape(-1)
    order = np.argsort(gaps, kind="stable")
    sorted_gaps = gaps[order]
    bin_sorted = np.concatenate([[0], np.cumsum(np.diff(sorted_gaps) > bin_tol)]).astype(np.int64)
    n_bins = int(bin_sorted[-1]) + 1
    frequencies = np.bincount(bin_sorted, weights=sorted_gaps * weights[order], minlength=n_bins) / np.bincount(
        bin_sorted, weights=weights[order], minlength=n_bins
    )
    # The gap set is antisymmetric, so bin k mirrors bin n_bins-1-k.
    frequencies = (frequencies - frequencies[::-1]) / 2

    pair_bin = np.empty_like(bin_sorted)
    pair_bin[order] = bin_sorted
    n_levels = level_energies.size
    pair_bin = pair_bin.reshape(n_levels, n_levels)
    bin_index = pair_bin[level_of[:, None], level_of[None, :]]

    rotated = tuple(eig.to_eigenbasis(a.entries) for a in jumps)
    logger.debug(f"Eigenoperator split: {n_levels} levels, {n_bins} frequency bins, bin_tol={bin_tol:.3e}")
    return EigenOperatorSet(
        eig=eig,
        jump_matrices=rotated,
        labels=labels,
        level_of=level_of,
        level_energies=level_energies,
        frequencies=frequencies,
        bin_index=bin_index,
        bin_tol=float(bin_tol),
    )


def _resolve_spectra(eset: EigenOperatorSet, spectra: SpectraSpec) -> List[Spectrum]:
    if isinstance(spectra, Mapping):
        missing = [label for label in eset.labels if label not in spectra]
        if missing:
            raise GeneratorError(f"no spectrum for jump operator(s) {missing}")
        return [spectra[label] for label in eset.labels]
    if isinstance(spectra, (list, tuple)):
        if len(spectra) != eset.n_jumps:
            raise GeneratorError(f"{len(spectra)} spectra for {eset.n_jumps} jump operators")
        return list(spectra)
    if spectra is None:
        raise GeneratorError("a noise spectrum is required")
    return [spectra] * eset.n_jumps


def _bin_rates(eset: EigenOperatorSet, spectra: List[Spectrum], drop_zero_frequency: bool) -> Tuple[np.ndarray, ...]:
    cache: Dict[int, np.ndarray] = {}
    rates = []
    for spectrum in spectra:
        key = id(spectrum)
        if key not in cache:
            values = np.asarray(evaluate(spectrum, eset.frequencies), dtype=float).reshape(-1)
            if not np.all(np.isfinite(values)) or np.any(values < 0):
                raise GeneratorError(f"spectrum {spectrum!r} produced a negative or non-finite rate")
            if drop_zero_frequency:
                values = values.copy()
                values[np.abs(eset.frequencies) <= eset.bin_tol] = 0.0
            cache[key] = values
        rates.append(cache[key])
    return tuple(rates)


def _jump_term(eset: EigenOperatorSet, matrix: np.ndarray, rates: np.ndarray) -> sp.csr_matrix:
    """Σ_k S_k A_k ρ A_k† as a row-major d²×d² sparse matrix."""
    d = eset.dim
    rows, cols = np.nonzero(np.abs(matrix) > MATRIX_ELEMENT_CUTOFF)
    bins = eset.bin_index[rows, cols]
    keep = rates[bins] > 0
    rows, cols, bins = rows[keep], cols[keep], bins[keep]
    values = matrix[rows, cols]

    order = np.argsort(bins, kind="stable")
    rows, cols, bins, values = rows[order], cols[order], bins[order], values[order]
    groups, starts, counts = np.unique(bins, return_index=True, return_counts=True)

    total = sp.csr_matrix((d * d, d * d), dtype=complex)
    sizes = counts.astype(np.int64) ** 2
    boundaries = np.concatenate([[0], np.cumsum(sizes)])
    first = 0
    while first < groups.size:
        last = int(np.searchsorted(boundaries, boundaries[first] + PAIR_CHUNK, side="right")) - 1
        last = max(last, first + 1)
        chunk_sizes = sizes[first:last]
        chunk_counts = counts[first:last].astype(np.int64)
        chunk_starts = starts[first:last].astype(np.int64)
        group = np.repeat(np.arange(last - first), chunk_sizes)
        offset = np.arange(chunk_sizes.sum()) - np.repeat(np.cumsum(chunk_sizes) - chunk_sizes, chunk_sizes)
        m = chunk_counts[group]
        i = chunk_starts[group] + offset // m
        j = chunk_starts[group] + offset % m
        data = rates[bins[i]] * values[i] * np.conj(values[j])
        chunk = sp.coo_matrix(
            (data, (rows[i] * d + rows[j], cols[i] * d + cols[j])), shape=(d * d, d * d)
        ).tocsr()
        total = total + chunk
        first = last
    return total


@dataclass(frozen=True)
class ValidityReport:
    """Golden-rule rates Γ_if = Σ_α |⟨i|A_α|f⟩|² S_α(ω_if) against |ω_if|."""

    rates: np.ndarray
    frequencies: np.ndarray
    max_ratio: float
    threshold: float
    passed: bool
    worst_pair: Optional[Tuple[int, int]]

    def to_dict(self) -> dict:
        return {
            "max_ratio": self.max_ratio,
            "threshold": self.threshold,
            "passed": self.passed,
            "worst_pair": list(self.worst_pair) if self.worst_pair is not None else None,
            "max_rate": float(np.max(self.rates)) if self.rates.size else 0.0,
        }


def validity_check(
    eset: EigenOperatorSet, spectra: SpectraSpec, threshold: float = VALIDITY_THRESHOLD
) -> ValidityReport:
    """Check Γ_if ≪ |ω_if| for every coupled pair of eigenstates."""
    resolved = _resolve_spectra(eset, spectra)
    bin_rates = _bin_rates(eset, resolved, drop_zero_frequency=False)
    rates = np.zeros((eset.dim, eset.dim))
    for matrix, s in zip(eset.jump_matrices, bin_rates):
        weight = np.abs(matrix) ** 2
        weight[np.abs(matrix) <= MATRIX_ELEMENT_CUTOFF] = 0.0
        rates += weight * s[eset.bin_index]
    frequencies = eset.frequency_matrix()
    mask = (np.abs(frequencies) > eset.bin_tol) & (rates > 0)
    if not np.any(mask):
        return ValidityReport(rates, frequencies, 0.0, threshold, True, None)

    ratio = np.where(mask, rates / np.where(mask, np.abs(frequencies), 1.0), 0.0)
    worst = np.unravel_index(int(np.argmax(ratio)), ratio.shape)
    max_ratio = float(ratio[worst])
    passed = max_ratio < threshold
    if not passed:
        logger.warning(
            f"Golden-rule regime violated: max Γ/|ω| = {max_ratio:.3e} at pair {tuple(int(i) for i in worst)}"
        )
    return ValidityReport(rates, frequencies, max_ratio, threshold, passed, (int(worst[0]), int(worst[1])))


@dataclass(frozen=True)
class RedfieldGenerator:
    """Secular Bloch-Redfield generator acting on density matrices in the energy eigenbasis."""

    eset: EigenOperatorSet
    rates: Tuple[np.ndarray, ...]
    dissipator: sp.csr_matrix
    coherent: np.ndarray
    spectra: Tuple[Spectrum, ...]
    validity: Optional[ValidityReport] = None
    drop_zero_frequency: bool = False
    channels: int = 0

    @property
    def dim(self) -> int:
        return self.eset.dim

    @property
    def eig(self) -> EigenDecomposition:
        return self.eset.eig

    def to_eigenbasis(self, rho: np.ndarray) -> np.ndarray:
        return self.eig.to_eigenbasis(rho)

    def to_computational(self, rho: np.ndarray) -> np.ndarray:
        return self.eig.from_eigenbasis(rho)

    def apply_dissipator(self, rho: np.ndarray) -> np.ndarray:
        d = self.dim
        return (self.dissipator @ rho.reshape(d * d)).reshape(d, d)

    def apply(self, rho: np.ndarray) -> np.ndarray:
        """dρ/dt = −i[H, ρ] + 𝒟(ρ), both ρ and the result in the eigenbasis."""
        d = self.dim
        coherent = (self.coherent * rho.reshape(d * d)).reshape(d, d)
        return coherent + self.apply_dissipator(rho)

    __call__ = apply


def assemble_generator(
    eset: EigenOperatorSet,
    spectra: SpectraSpec,
    secular: bool = True,
    drop_zero_frequency: bool = False,
    validity_threshold: Optional[float] = VALIDITY_THRESHOLD,
) -> RedfieldGenerator:
    """Secular generator 𝒟[ρ] = Σ_α Σ_ω S_α(ω)[A ρ A† − ½{A†A, ρ}] with A = A_α(ω)."""
    if not secular:
        raise GeneratorError("only the secular generator is available")
    resolved = _resolve_spectra(eset, spectra)
    rates = _bin_rates(eset, resolved, drop_zero_frequency)
    d = eset.dim

    same_level = eset.level_of[:, None] == eset.level_of[None, :]
    K = np.zeros((d, d), dtype=complex)
    jump_terms = sp.csr_matrix((d * d, d * d), dtype=complex)
    channels = 0
    for matrix, s in zip(eset.jump_matrices, rates):
        masked = np.where(np.abs(matrix) > MATRIX_ELEMENT_CUTOFF, matrix, 0.0)
        weighted = np.sqrt(s[eset.bin_index]) * masked
        K += np.where(same_level, weighted.conj().T @ weighted, 0.0)
        jump_terms = jump_terms + _jump_term(eset, masked, s)
        active = np.unique(eset.bin_index[masked != 0])
        channels += int(np.count_nonzero(s[active] > 0))

    K_sparse = sp.csr_matrix(K)
    identity = sp.identity(d, dtype=complex, format="csr")
    anticommutator = sp.kron(K_sparse, identity, format="csr") + sp.kron(identity, K_sparse.T, format="csr")
    dissipator = (jump_terms - 0.5 * anticommutator).tocsr()
    dissipator.eliminate_zeros()

    if dissipator.nnz > SUPEROPERATOR_NNZ_WARNING:
        logger.warning(f"Dissipator has {dissipator.nnz} nonzeros; memory use will be large")

    nu = eset.eig.eigenvalues[:, None] - eset.eig.eigenvalues[None, :]
    coherent = (-1j * nu).reshape(-1)

    validity = validity_check(eset, resolved, validity_threshold) if validity_threshold is not None else None
    logger.info(
        f"Assembled secular generator: d={d}, {eset.n_jumps} jumps, {channels} channels, nnz={dissipator.nnz}"
    )
    return RedfieldGenerator(
        eset=eset,
        rates=rates,
        dissipator=dissipator,
        coherent=coherent,
        spectra=tuple(resolved),
        validity=validity,
        drop_zero_frequency=drop_zero_frequency,
        channels=channels,
    )


def dense_superoperator(gen: RedfieldGenerator, basis: str = "eigen") -> OperatorMatrix:
    """Explicit d²×d² generator matrix on row-major vec(ρ), for small systems only."""
    d = gen.dim
    if d > DENSE_SUPEROPERATOR_MAX_DIM:
        raise GeneratorError(f"dense superoperator limited to d <= {DENSE_SUPEROPERATOR_MAX_DIM}, got {d}")
    matrix = np.diag(gen.coherent) + gen.dissipator.toarray()
    if basis == "computational":
        U = gen.eig.eigenvectors
        rotation = np.kron(U, U.conj())
        matrix = rotation @ matrix @ rotation.conj().T
    elif basis != "eigen":
        raise GeneratorError(f"unknown basis {basis!r}")
    return OperatorMatrix(matrix)
