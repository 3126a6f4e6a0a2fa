"""Test suite for the numerical straddle-budget certifier"""

import pytest

from .certifier import Template, certify_min_straddle, enumerate_templates, party_symmetries
from .circuit import PartitionSpec, PureState, apply_circuit, count_straddling, fidelity
from .config import Settings
from .errors import InvalidInputError, ResourceLimitError
from .schmidt import schmidt_decompose
from .stateprep import state_library


def test_party_symmetries():
    """Test that symmetric states keep every permutation and random ones only the identity"""
    p = PartitionSpec.singletons(3)
    assert len(party_symmetries(state_library("ghz", n=3), p)) == 6
    assert len(party_symmetries(state_library("w", n=3), p)) == 6
    assert party_symmetries(state_library("random", n=3, seed=2), p) == [(0, 1, 2)]


def test_template_enumeration():
    """Test symmetry reduction of slot sequences"""
    p = PartitionSpec.singletons(3)
    templates = enumerate_templates(state_library("w", n=3), p, 2)
    assert [t.slots for t in templates] == [((0, 1), (0, 1)), ((0, 1), (0, 2))]
    assert len(enumerate_templates(state_library("random", n=3, seed=2), p, 2)) == 9
    assert enumerate_templates(state_library("w", n=3), p, 0) == [Template(slots=())]


def test_budget_zero_product_state():
    """Test that a product state needs no straddling slot"""
    s = state_library("product", n=2, seed=4)
    result = certify_min_straddle(s, PartitionSpec.singletons(2), 0, restarts=3, seed=1)
    assert result.verdict == "achievable"
    assert result.best_fidelity >= 1 - 1e-6


def test_bell_needs_one_slot():
    """Test not_found at budget 0 and achievable at budget 1 for a Bell pair"""
    bell, p = state_library("bell"), PartitionSpec.singletons(2)
    zero = certify_min_straddle(bell, p, 0, restarts=3, seed=1)
    assert zero.verdict == "not_found"
    assert zero.best_fidelity == pytest.approx(0.5, abs=1e-6)
    assert zero.notes

    one = certify_min_straddle(bell, p, 1, restarts=5, seed=1)
    assert one.verdict == "achievable"
    prepared = apply_circuit(one.circuit, PureState.zero(2))
    assert fidelity(bell, prepared) >= 1 - 1e-6
    assert count_straddling(one.circuit, p)[0] == 1


def test_su4_slots():
    """Test the canonical two-qubit interaction slot"""
    result = certify_min_straddle(state_library("bell"), PartitionSpec.singletons(2), 1,
                                  restarts=5, seed=3, slot_gate="su4")
    assert result.verdict == "achievable"


def test_ghz3_budget_two():
    """Test that GHZ_3 is reachable with two straddling gates"""
    result = certify_min_straddle(state_library("ghz", n=3), PartitionSpec.singletons(3), 2,
                                  restarts=10, seed=7)
    assert result.verdict == "achievable"
    assert result.best_fidelity >= 1 - 1e-6
    assert result.best_template.slots == ((0, 1), (0, 2))


def test_search_is_seeded():
    """Test that identical seeds give identical outcomes"""
    args = (state_library("random", n=2, seed=9), PartitionSpec.singletons(2), 0)
    a = certify_min_straddle(*args, restarts=2, seed=5)
    b = certify_min_straddle(*args, restarts=2, seed=5)
    assert a.best_fidelity == b.best_fidelity
    assert a.restarts_used == b.restarts_used == 2


@pytest.mark.slow
def test_w3_budget_three():
    """Test that W_3 is reachable with three straddling gates"""
    result = certify_min_straddle(state_library("w", n=3), PartitionSpec.singletons(3), 3,
                                  restarts=20, seed=7)
    assert result.verdict == "achievable"


@pytest.mark.slow
def test_w3_budget_two_not_found():
    """Test that W_3 stays out of reach with two straddling gates"""
    result = certify_min_straddle(state_library("w", n=3), PartitionSpec.singletons(3), 2,
                                  restarts=50, seed=7)
    assert result.verdict == "not_found"
    assert result.best_fidelity < 1 - 1e-4
    assert result.restarts_used == 100


def test_certifier_limits():
    """Test size caps and argument validation"""
    with pytest.raises(ResourceLimitError):
        certify_min_straddle(state_library("ghz", n=6), PartitionSpec.singletons(6), 1)
    with pytest.raises(ResourceLimitError):
        certify_min_straddle(state_library("ghz", n=4), PartitionSpec.of([[0, 1, 2], [3]]), 1)
    with pytest.raises(ResourceLimitError):
        certify_min_straddle(state_library("ghz", n=3), PartitionSpec.singletons(3), 1,
                             settings=Settings(certifier_max_qubits=2))
    with pytest.raises(InvalidInputError):
        certify_min_straddle(state_library("bell"), PartitionSpec.singletons(2), -1)
    with pytest.raises(InvalidInputError):
        certify_min_straddle(state_library("bell"), PartitionSpec.singletons(2), 1, slot_gate="iswap")
    with pytest.raises(InvalidInputError):
        certify_min_straddle(state_library("bell"), PartitionSpec.of([[0, 1]]), 1)


def _is_full_product(s: PureState, p: PartitionSpec) -> bool:
    for party in p.parties:
        rest = [q for q in range(p.n) if q not in party]
        if schmidt_decompose(s, PartitionSpec.of([party, rest])).rank != 1:
            return False
    return True


@pytest.mark.parametrize("name,parties", [
    ("product", [[0], [1], [2]]),
    ("bell", [[0, 1], [2]]),
    ("bell", [[0], [1], [2]]),
    ("ghz", [[0], [1, 2]]),
    ("random", [[0], [1]]),
])
def test_budget_zero_exactly_for_product_states(name, parties):
    """Test that budget 0 is achievable exactly when no party is entangled with the rest"""
    p = PartitionSpec.of(parties)
    s = state_library(name, n=p.n, seed=3)
    result = certify_min_straddle(s, p, 0, restarts=5, seed=2)
    expected = "achievable" if _is_full_product(s, p) else "not_found"
    assert result.verdict == expected


def test_budget_monotone_for_bell():
    """Test that an achievable budget stays achievable with one more slot"""
    bell, p = state_library("bell"), PartitionSpec.singletons(2)
    assert certify_min_straddle(bell, p, 1, restarts=5, seed=1).verdict == "achievable"
    assert certify_min_straddle(bell, p, 2, restarts=5, seed=1).verdict == "achievable"


@pytest.mark.slow
def test_budget_monotone_for_ghz3():
    """Test that GHZ_3 stays reachable at budget three"""
    ghz, p = state_library("ghz", n=3), PartitionSpec.singletons(3)
    assert certify_min_straddle(ghz, p, 2, restarts=10, seed=7).verdict == "achievable"
    assert certify_min_straddle(ghz, p, 3, restarts=10, seed=7).verdict == "achievable"
