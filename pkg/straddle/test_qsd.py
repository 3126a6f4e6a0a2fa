"""Test suite for the partition-aware Shannon decomposition"""

import numpy as np
import pytest
from scipy.stats import unitary_group

from .circuit import Circuit, PartitionSpec, circuit_unitary, lower
from .config import Settings
from .errors import InvalidInputError, ResourceLimitError
from .linalg import operator_distance
from .qsd import (
    QsdConfig, cost_model_qsd, cost_model_qsd_sequence, param_lower_bound, recurrence_closed_form,
    shannon_gates, split_order, synth_unitary_qsd,
)

BIPARTITIONS = [
    [[0], [1]],
    [[0], [1, 2]],
    [[0, 1], [2]],
    [[1], [0, 2]],
    [[0, 1], [2, 3]],
    [[0, 3], [1, 2]],
    [[0], [1, 2, 3]],
    [[2, 3, 4], [0, 1]],
]


@pytest.mark.parametrize("p,q,expected", [
    (1, 1, 1), (1, 2, 12), (2, 1, 12), (1, 3, 24), (2, 2, 60), (3, 3, 504), (4, 4, 4080),
])
def test_cost_model_smaller_first(p, q, expected):
    """Test the predicted straddle counts of the default split order"""
    assert cost_model_qsd(p, q) == expected


def test_cost_model_larger_first():
    """Test that peeling the larger party first can be cheaper"""
    assert cost_model_qsd(1, 2, QsdConfig(strategy="larger-first")) == 10
    assert cost_model_qsd(0, 3) == 0


def test_cost_model_sequence():
    """Test explicit label sequences and a truncated sequence"""
    assert cost_model_qsd_sequence([0, 1, 1], (1, 2)) == 12
    assert cost_model_qsd_sequence([1, 1, 0], (1, 2)) == 10
    with pytest.raises(InvalidInputError):
        cost_model_qsd_sequence([0], (2, 2))


def test_cost_model_scaling():
    """Test that each added qubit pair multiplies the cost by less than nine"""
    for k in (2, 3):
        ratio = cost_model_qsd(k + 1, k + 1) / cost_model_qsd(k, k)
        assert 4 < ratio < 9


@pytest.mark.parametrize("p,q,expected", [(1, 1, 1), (2, 2, 5), (1, 2, 2), (0, 3, 0)])
def test_param_lower_bound(p, q, expected):
    """Test the parameter-count bound"""
    assert param_lower_bound(p, q) == expected


def test_recurrence_closed_form():
    """Test the closed form against its defining expression"""
    assert recurrence_closed_form(2, 2, 1) == 4 * (12 + 6) - 12 == cost_model_qsd(2, 2)
    assert recurrence_closed_form(3, 3, 1) == 16 * (24 + 12) - 24


def test_split_order():
    """Test default and user-supplied peel orders"""
    p = PartitionSpec.of([[0, 1, 2], [3]])
    assert split_order(p, QsdConfig()) == [3, 0, 1, 2]
    assert split_order(p, QsdConfig(strategy="larger-first")) == [0, 1, 2, 3]
    assert split_order(p, QsdConfig(split_order=(2, 3))) == [2, 3, 0, 1]
    with pytest.raises(InvalidInputError):
        split_order(p, QsdConfig(split_order=(2, 2)))


@pytest.mark.parametrize("parties", BIPARTITIONS)
@pytest.mark.parametrize("strategy", ["smaller-first", "larger-first"])
def test_synth_unitary_qsd(parties, strategy):
    """Test reconstruction, exact cost model and the parameter bound"""
    p = PartitionSpec.of(parties)
    U = unitary_group.rvs(2 ** p.n, random_state=p.n * 10 + len(parties[0]))
    cfg = QsdConfig(strategy=strategy)
    circuit, report = synth_unitary_qsd(U, p, cfg)
    assert report.operator_distance <= 1e-8
    assert operator_distance(U, circuit_unitary(circuit)) <= 1e-8
    assert report.straddling_total == report.predicted == cost_model_qsd(*p.sizes, cfg)
    assert report.straddling_total >= param_lower_bound(*p.sizes)


@pytest.mark.slow
@pytest.mark.parametrize("seed", range(50))
def test_synth_unitary_qsd_random_seeds(seed):
    """Test reconstruction and the exact cost model on random unitaries and cuts up to six qubits"""
    rng = np.random.default_rng(500 + seed)
    n = int(rng.integers(2, 7))
    qubits = rng.permutation(n)
    k = int(rng.integers(1, n))
    p = PartitionSpec.of([[int(q) for q in qubits[:k]], [int(q) for q in qubits[k:]]])
    cfg = QsdConfig(strategy=("smaller-first", "larger-first")[seed % 2])
    U = unitary_group.rvs(2 ** n, random_state=seed)
    circuit, report = synth_unitary_qsd(U, p, cfg)
    assert operator_distance(U, circuit_unitary(circuit)) <= 1e-8
    assert report.straddling_total == report.predicted == cost_model_qsd(*p.sizes, cfg)
    assert report.straddling_total >= param_lower_bound(*sorted(p.sizes))


@pytest.mark.slow
@pytest.mark.parametrize("seed", range(3))
def test_synth_unitary_qsd_six_qubits(seed):
    """Test the largest bipartitions used in practice"""
    rng = np.random.default_rng(seed)
    qubits = rng.permutation(6)
    k = int(rng.integers(1, 6))
    p = PartitionSpec.of([sorted(int(q) for q in qubits[:k]), sorted(int(q) for q in qubits[k:])])
    U = unitary_group.rvs(64, random_state=seed)
    _, report = synth_unitary_qsd(U, p)
    assert report.operator_distance <= 1e-8
    assert report.straddling_total == cost_model_qsd(*p.sizes)


def test_product_unitary_costs_nothing():
    """Test that U_A ⊗ U_B needs no straddling gate"""
    p = PartitionSpec.of([[0], [1, 2]])
    UA, UB = unitary_group.rvs(2, random_state=1), unitary_group.rvs(4, random_state=2)
    U = np.kron(UB, UA)
    circuit, report = synth_unitary_qsd(U, p)
    assert report.straddling_total == report.predicted == 0
    assert operator_distance(U, circuit_unitary(circuit)) <= 1e-8


def test_synth_unitary_qsd_validation():
    """Test non-unitary input, party count and the size cap"""
    p = PartitionSpec.singletons(2)
    with pytest.raises(InvalidInputError):
        synth_unitary_qsd(np.ones((4, 4)), p)
    with pytest.raises(InvalidInputError):
        synth_unitary_qsd(np.eye(8), PartitionSpec.singletons(3))
    with pytest.raises(InvalidInputError):
        synth_unitary_qsd(np.eye(8), p)
    with pytest.raises(ResourceLimitError):
        synth_unitary_qsd(np.eye(8), PartitionSpec.of([[0], [1, 2]]), settings=Settings(max_qsd_qubits=2))


def test_shannon_gates_lower_to_small_gates():
    """Test the macro decomposition of a three-qubit unitary on singleton parties"""
    p = PartitionSpec.singletons(3)
    U = unitary_group.rvs(8, random_state=3)
    macro = Circuit.of(3, shannon_gates(U, (0, 1, 2), p))
    lowered = lower(macro, p, full=True)
    assert all(len(g.qubits) <= 2 for g in lowered.gates)
    assert operator_distance(U, circuit_unitary(lowered)) <= 1e-10
