"""Test suite for Schmidt analysis"""

import numpy as np
import pytest

from .circuit import Circuit, LocalBlock, PartitionSpec, PureState, apply_circuit
from .errors import InvalidInputError
from .schmidt import (
    active_qubits, compress_support, entanglement_entropy, is_schmidt_decomposable, iterated_decompose,
    level_ranks, rebuild_iterated, reduced_density_matrix, schmidt_decompose,
)
from .stateprep import state_library


def _binary_entropy(x: float) -> float:
    return float(-x * np.log2(x) - (1 - x) * np.log2(1 - x))


def test_bell_decomposition():
    """Test weights, rank and reconstruction of a Bell pair"""
    bell = state_library("bell")
    dec = schmidt_decompose(bell, PartitionSpec.singletons(2))
    assert dec.rank == 2
    np.testing.assert_allclose(dec.weights, [1 / np.sqrt(2)] * 2, atol=1e-12)
    np.testing.assert_allclose(dec.reconstruct(), bell.amplitudes, atol=1e-12)


@pytest.mark.parametrize("seed", range(10))
def test_random_decomposition(seed):
    """Test orthonormal bases, descending weights and reconstruction on random cuts"""
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 8))
    qubits = rng.permutation(n)
    k = int(rng.integers(1, n))
    cut = PartitionSpec.of([sorted(qubits[:k]), sorted(qubits[k:])])
    s = state_library("random", n=n, seed=seed)
    dec = schmidt_decompose(s, cut)
    assert np.all(np.diff(dec.weights) <= 1e-12)
    np.testing.assert_allclose(np.sum(dec.weights ** 2), 1.0, atol=1e-12)
    np.testing.assert_allclose(dec.left_basis.conj().T @ dec.left_basis, np.eye(dec.rank), atol=1e-10)
    np.testing.assert_allclose(dec.right_basis.conj().T @ dec.right_basis, np.eye(dec.rank), atol=1e-10)
    np.testing.assert_allclose(dec.reconstruct(), s.amplitudes, atol=1e-12)
    assert dec.rank == 2 ** min(k, n - k)


def test_random_rank_state():
    """Test that the random-rank family hits the requested rank"""
    cut = PartitionSpec.of([[0, 2], [1, 3, 4]])
    s = state_library("random-rank", partition=cut, rank=3, seed=2)
    assert schmidt_decompose(s, cut).rank == 3
    with pytest.raises(InvalidInputError) as info:
        state_library("random-rank", partition=cut, rank=5)
    assert info.value.check == "rank"


def test_decompose_needs_two_parties():
    """Test that schmidt_decompose refuses other partitions"""
    with pytest.raises(InvalidInputError):
        schmidt_decompose(state_library("ghz", n=3), PartitionSpec.singletons(3))
    with pytest.raises(InvalidInputError):
        schmidt_decompose(state_library("ghz", n=3), PartitionSpec.singletons(2))


@pytest.mark.parametrize("eps", [0.1, 0.25, 0.4])
def test_epsilon_entropy(eps):
    """Test the entropy of sqrt(1-eps)|00> + sqrt(eps)|11>"""
    s = state_library("epsilon", epsilon=eps)
    assert entanglement_entropy(s, PartitionSpec.singletons(2)) == pytest.approx(_binary_entropy(eps), abs=1e-12)


def test_ghz_and_w_entropies():
    """Test single-party entropies of GHZ and W"""
    ghz, w = state_library("ghz", n=3), state_library("w", n=3)
    cut = PartitionSpec.of([[0], [1, 2]])
    assert entanglement_entropy(ghz, cut) == pytest.approx(1.0, abs=1e-12)
    assert entanglement_entropy(w, cut) == pytest.approx(_binary_entropy(1 / 3), abs=1e-12)
    assert entanglement_entropy(state_library("product", n=3, seed=1), cut) == pytest.approx(0.0, abs=1e-12)


def test_iterated_ranks_and_rebuild():
    """Test level ranks for GHZ and W, and reassembly of a random state"""
    p = PartitionSpec.singletons(3)
    assert level_ranks(iterated_decompose(state_library("ghz", n=3), p)) == (2, 2)
    assert level_ranks(iterated_decompose(state_library("w", n=3), p)) == (2, 3)

    parties = PartitionSpec.of([[0, 3], [1], [2, 4]])
    s = state_library("random", n=5, seed=4)
    decomps = iterated_decompose(s, parties)
    assert [d.level for d in decomps] == sorted(d.level for d in decomps)
    np.testing.assert_allclose(rebuild_iterated(decomps), s.amplitudes, atol=1e-12)


def test_decomposability_verdicts():
    """Test yes for GHZ, product and constructed states; no for W"""
    p3 = PartitionSpec.singletons(3)
    ghz = is_schmidt_decomposable(state_library("ghz", n=3), p3)
    assert ghz.verdict == "yes" and ghz.form.rank == 2
    np.testing.assert_allclose(ghz.form.reconstruct(), state_library("ghz", n=3).amplitudes, atol=1e-10)

    w = is_schmidt_decomposable(state_library("w", n=3), p3)
    assert w.verdict == "no" and w.check

    product = is_schmidt_decomposable(state_library("product", n=3, seed=5), p3)
    assert product.verdict == "yes" and product.form.rank == 1

    parties = PartitionSpec.of([[0, 1], [2, 3], [4, 5]])
    for seed in range(3):
        s = state_library("decomposable", partition=parties, rank=3, seed=seed)
        result = is_schmidt_decomposable(s, parties)
        assert result.verdict == "yes", result.reason
        assert result.form.rank == 3


def test_decomposability_needs_parties():
    """Test that one party is not enough"""
    with pytest.raises(InvalidInputError):
        is_schmidt_decomposable(state_library("ghz", n=2), PartitionSpec.of([[0, 1]]))


def test_reduced_density_matrix():
    """Test the one-qubit marginal of a Bell pair"""
    rho = reduced_density_matrix(state_library("bell"), [1])
    np.testing.assert_allclose(rho, np.eye(2) / 2, atol=1e-12)
    with pytest.raises(InvalidInputError):
        reduced_density_matrix(state_library("bell"), [2])


@pytest.mark.parametrize("rank,expected", [(1, 0), (2, 1), (3, 2), (4, 2), (5, 3), (8, 3), (9, 4)])
def test_active_qubits(rank, expected):
    """Test the register width for a given Schmidt rank"""
    assert active_qubits(rank) == expected


def test_compress_support():
    """Test that compression leaves only the first active qubits of the side populated"""
    cut = PartitionSpec.of([[0, 1], [2, 3, 4]])
    s = state_library("random-rank", partition=cut, rank=2, seed=6)
    block, out = compress_support(s, cut, "B")
    assert block.party == 1 and block.qubits == (2, 3, 4)
    idx = np.arange(2 ** 5)
    idle = ((idx >> 3) & 1) | ((idx >> 4) & 1)
    np.testing.assert_allclose(np.asarray(out.amplitudes)[idle == 1], 0.0, atol=1e-12)
    assert schmidt_decompose(out, cut).rank == 2
    with pytest.raises(InvalidInputError):
        compress_support(s, cut, "C")


def test_states_are_pure_state_models():
    """Test that library states validate as normalised PureState"""
    for name in ("ghz", "w", "product", "random", "bell", "epsilon"):
        s = state_library(name, n=3)
        assert isinstance(s, PureState)
        assert np.linalg.norm(s.amplitudes) == pytest.approx(1.0, abs=1e-12)


def test_compress_support_targets_lowest_qubits():
    """Test that the support lands on the lowest-indexed qubits whatever the listed order"""
    cut = PartitionSpec.of([[0, 1], [4, 3, 2]])
    s = state_library("random-rank", partition=cut, rank=2, seed=6)
    block, out = compress_support(s, cut, 1)
    assert block.qubits == (2, 3, 4)
    amps = np.asarray(out.amplitudes)
    idx = np.arange(2 ** 5)
    idle = ((idx >> 3) & 1) | ((idx >> 4) & 1)
    np.testing.assert_allclose(amps[idle == 1], 0.0, atol=1e-12)
    assert np.sum(np.abs(amps[((idx >> 2) & 1) == 1]) ** 2) > 1e-3
    np.testing.assert_allclose(schmidt_decompose(out, cut).weights, schmidt_decompose(s, cut).weights, atol=1e-12)


@pytest.mark.parametrize("seed", range(20))
def test_weights_invariant_under_local_unitaries(seed):
    """Test that local blocks on either side leave the Schmidt spectrum unchanged"""
    rng = np.random.default_rng(seed)
    cut = PartitionSpec.of([[0, 3], [1, 2, 4]])
    s = state_library("random", n=5, seed=seed)
    gates = []
    for j, party in enumerate(cut.parties):
        dim = 2 ** len(party)
        Q, _ = np.linalg.qr(rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim)))
        gates.append(LocalBlock(party=j, qubits=party, matrix=Q))
    moved = apply_circuit(Circuit.of(5, gates), s)
    np.testing.assert_allclose(schmidt_decompose(moved, cut).weights, schmidt_decompose(s, cut).weights, atol=1e-9)


@pytest.mark.parametrize("seed", range(20))
def test_entropy_bounded_by_log_rank(seed):
    """Test entropy <= log2(rank) with equality for flat spectra"""
    cut = PartitionSpec.of([[0, 1], [2, 3, 4]])
    s = state_library("random-rank", partition=cut, rank=1 + seed % 4, seed=seed)
    rank = schmidt_decompose(s, cut).rank
    assert entanglement_entropy(s, cut) <= np.log2(rank) + 1e-12
    ghz = state_library("ghz", n=4)
    half = PartitionSpec.of([[0, 1], [2, 3]])
    assert entanglement_entropy(ghz, half) == pytest.approx(np.log2(schmidt_decompose(ghz, half).rank), abs=1e-12)
