import numpy as np
import pytest
import scipy.linalg

from src.hilbert import SIGMA_X, SIGMA_Z, OperatorMatrix, embed_local
from src.models import U1Params, build_model
from src.noise import PowerLawSpectrum, RtnSpectrum
from src.redfield import (
    GeneratorError,
    assemble_generator,
    decompose_eigenoperators,
    dense_superoperator,
    validity_check,
)


@pytest.fixture
def qubit():
    H = OperatorMatrix(np.diag([0.0, 1.0]), hermitian_hint=True)
    return decompose_eigenoperators(H, [OperatorMatrix(SIGMA_X, hermitian_hint=True)], labels=["x"])


def _random_hermitian(d, seed):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return OperatorMatrix((a + a.conj().T) / 2, hermitian_hint=True)


def test_frequency_bins_are_antisymmetric(qubit):
    assert qubit.frequencies == pytest.approx([-1.0, 0.0, 1.0])
    # Element (0, 1) lowers the energy and carries ω = +1.
    assert qubit.frequency_matrix()[0, 1] == pytest.approx(1.0)
    assert qubit.frequency_matrix()[1, 0] == pytest.approx(-1.0)
    assert qubit.mirror_bin(0) == 2


def test_components_sum_to_operator(qubit):
    total = sum(block for _, block in qubit.components(0))
    assert np.allclose(total, qubit.jump_matrices[0])


def test_degenerate_levels_share_a_bin():
    H = embed_local((2, 2), 0, SIGMA_Z) + embed_local((2, 2), 1, SIGMA_Z)
    eset = decompose_eigenoperators(H.as_hermitian(), [embed_local((2, 2), 0, SIGMA_X)])
    assert eset.level_energies == pytest.approx([-2.0, 0.0, 2.0])
    assert eset.frequencies == pytest.approx([-4.0, -2.0, 0.0, 2.0, 4.0])


def test_two_level_rates(qubit):
    gen = assemble_generator(qubit, PowerLawSpectrum(gamma=0.2, beta=1.0))
    L = dense_superoperator(gen).entries
    # vec index 0 = ρ00, 3 = ρ11; both directions run at S(±1) = γ.
    assert L[0, 3] == pytest.approx(0.2)
    assert L[3, 0] == pytest.approx(0.2)
    assert L[0, 0] == pytest.approx(-0.2)
    # Coherence decays at γ and rotates at ε0 − ε1.
    assert L[1, 1] == pytest.approx(-0.2 + 1j)
    assert gen.channels == 2


def test_zero_rate_generator_is_coherent_only(qubit):
    gen = assemble_generator(qubit, PowerLawSpectrum(gamma=0.0, beta=1.0))
    assert gen.dissipator.nnz == 0
    L = dense_superoperator(gen).entries
    assert np.allclose(L, np.diag([0.0, 1j, -1j, 0.0]))
    assert gen.channels == 0


def test_generator_preserves_trace_and_hermiticity():
    H = _random_hermitian(6, 3)
    jumps = [_random_hermitian(6, 4), _random_hermitian(6, 5)]
    eset = decompose_eigenoperators(H, jumps)
    gen = assemble_generator(eset, PowerLawSpectrum(gamma=0.05, beta=1.0), validity_threshold=None)
    rng = np.random.default_rng(9)
    a = rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6))
    rho = a @ a.conj().T
    rho /= np.trace(rho)
    out = gen.apply(rho)
    assert abs(np.trace(out)) < 1e-12
    assert np.allclose(out, out.conj().T)


def test_generator_spectrum_is_physical():
    H = _random_hermitian(5, 11)
    eset = decompose_eigenoperators(H, [_random_hermitian(5, 12)])
    gen = assemble_generator(eset, RtnSpectrum(r=1.0, scale=0.1), validity_threshold=None)
    eigenvalues = np.linalg.eigvals(dense_superoperator(gen).entries)
    assert np.max(eigenvalues.real) < 1e-10
    assert np.min(np.abs(eigenvalues)) < 1e-10


def test_computational_basis_superoperator(qubit):
    gen = assemble_generator(qubit, PowerLawSpectrum(gamma=0.2, beta=1.0))
    eigen = dense_superoperator(gen).entries
    computational = dense_superoperator(gen, basis="computational").entries
    a, b = np.linalg.eigvals(eigen), np.linalg.eigvals(computational)
    assert np.allclose(np.sort(a.real), np.sort(b.real))
    assert np.allclose(np.sort(a.imag), np.sort(b.imag))


def test_spectra_by_label(qubit):
    gen = assemble_generator(qubit, {"x": PowerLawSpectrum(gamma=0.1, beta=1.0)})
    assert gen.rates[0][2] == pytest.approx(0.1)
    with pytest.raises(GeneratorError):
        assemble_generator(qubit, {"y": PowerLawSpectrum(gamma=0.1, beta=1.0)})


def test_drop_zero_frequency():
    H = OperatorMatrix(np.diag([0.0, 1.0]), hermitian_hint=True)
    eset = decompose_eigenoperators(H, [OperatorMatrix(SIGMA_Z, hermitian_hint=True)])
    kept = assemble_generator(eset, PowerLawSpectrum(gamma=0.1, beta=1.0))
    dropped = assemble_generator(eset, PowerLawSpectrum(gamma=0.1, beta=1.0), drop_zero_frequency=True)
    assert kept.dissipator.nnz > 0
    assert dropped.dissipator.nnz == 0


def test_only_secular_generator():
    H = OperatorMatrix(np.diag([0.0, 1.0]), hermitian_hint=True)
    eset = decompose_eigenoperators(H, [OperatorMatrix(SIGMA_X, hermitian_hint=True)])
    with pytest.raises(GeneratorError):
        assemble_generator(eset, PowerLawSpectrum(gamma=0.1, beta=1.0), secular=False)


def test_validity_check(qubit):
    assert validity_check(qubit, PowerLawSpectrum(gamma=0.01, beta=1.0)).passed
    report = validity_check(qubit, PowerLawSpectrum(gamma=0.5, beta=1.0))
    assert not report.passed
    assert report.max_ratio == pytest.approx(0.5)
    assert report.to_dict()["passed"] is False


def test_dense_superoperator_size_guard():
    bundle = build_model(U1Params(L=4))
    eset = decompose_eigenoperators(bundle.h0, [j.operator for j in bundle.jump_ops])
    gen = assemble_generator(eset, PowerLawSpectrum(gamma=0.01, beta=1.0), validity_threshold=None)
    with pytest.raises(GeneratorError):
        dense_superoperator(gen)


def test_decompose_rejects_mismatched_jump():
    H = OperatorMatrix(np.diag([0.0, 1.0]), hermitian_hint=True)
    with pytest.raises(GeneratorError):
        decompose_eigenoperators(H, [OperatorMatrix(np.eye(4), hermitian_hint=True)])


def test_mirrored_components_are_adjoint():
    eset = decompose_eigenoperators(_random_hermitian(5, 31), [_random_hermitian(5, 32)])
    for k in range(len(eset.frequencies)):
        assert eset.frequencies[eset.mirror_bin(k)] == pytest.approx(-eset.frequencies[k])
        assert np.allclose(eset.block(0, eset.mirror_bin(k)), eset.block(0, k).conj().T)


def test_generator_is_linear():
    eset = decompose_eigenoperators(_random_hermitian(4, 41), [_random_hermitian(4, 42)])
    gen = assemble_generator(eset, PowerLawSpectrum(gamma=0.1, beta=1.0), validity_threshold=None)
    rng = np.random.default_rng(43)
    a, b = (rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4)) for _ in range(2))
    assert np.allclose(gen.apply(0.3 * a - 2.0j * b), 0.3 * gen.apply(a) - 2.0j * gen.apply(b))


def test_noiseless_superoperator_is_commutator():
    H = _random_hermitian(4, 51)
    eset = decompose_eigenoperators(H, [_random_hermitian(4, 52)])
    gen = assemble_generator(eset, PowerLawSpectrum(gamma=0.0, beta=1.0))
    L = dense_superoperator(gen, basis="computational").entries
    identity = np.eye(4)
    # Row-major vec: vec(Hρ) = (H⊗I)vec(ρ), vec(ρH) = (I⊗Hᵀ)vec(ρ).
    expected = -1j * (np.kron(H.entries, identity) - np.kron(identity, H.entries.T))
    assert np.allclose(L, expected, atol=1e-10)


def test_two_level_stationary_state_is_maximally_mixed(qubit):
    gen = assemble_generator(qubit, PowerLawSpectrum(gamma=0.2, beta=1.0))
    kernel = scipy.linalg.null_space(dense_superoperator(gen).entries)
    assert kernel.shape[1] == 1
    rho = kernel[:, 0].reshape(2, 2)
    rho = rho / np.trace(rho)
    assert np.allclose(rho, np.eye(2) / 2)
