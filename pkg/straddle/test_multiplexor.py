"""Test suite for multiplexed rotations across a cut"""

import numpy as np
import pytest

from .circuit import Circuit, MuxRot, PartitionSpec, circuit_unitary, count_straddling
from .errors import InvalidInputError
from .linalg import operator_distance
from .multiplexor import (
    MuxCostQuery, cost_model_T, exact_mux_cost, flip_bits, gray, mux_angles_graycode,
    synth_controlled_rotation_cross, synth_mux_rotation,
)


def _layout(num_remote: int, num_local: int):
    """Target 0 with local controls 1..q in party 0, remote controls in party 1"""
    n = 1 + num_local + num_remote
    local = list(range(1, num_local + 1))
    remote = list(range(num_local + 1, n))
    parties = [range(0, num_local + 1)] + ([range(num_local + 1, n)] if num_remote else [])
    return n, remote, local, PartitionSpec.of(parties)


def test_gray_code_sequence():
    """Test Gray codes and the wrap-around flip schedule"""
    assert [gray(k) for k in range(8)] == [0, 1, 3, 2, 6, 7, 5, 4]
    assert flip_bits(1) == [0, 0]
    assert flip_bits(2) == [0, 1, 0, 1]
    assert flip_bits(3) == [0, 1, 0, 2, 0, 1, 0, 2]


def test_graycode_angles_single_remote():
    """Test the angle transform for one remote control"""
    alpha = mux_angles_graycode([0.4, 1.0], 1)
    np.testing.assert_allclose(alpha[:, 0], [0.7, -0.3])


def test_graycode_angles_reject_bad_lengths():
    """Test angle-count validation"""
    with pytest.raises(InvalidInputError):
        mux_angles_graycode([0.1, 0.2, 0.3], 1)
    with pytest.raises(InvalidInputError):
        mux_angles_graycode([0.1, 0.2], 2)


@pytest.mark.parametrize("num_remote,num_local", [
    (0, 0), (0, 2), (1, 0), (1, 1), (1, 2), (2, 0), (2, 1), (2, 2), (3, 0), (3, 1), (4, 0),
])
@pytest.mark.parametrize("axis", ["y", "z"])
def test_synth_mux_rotation(num_remote, num_local, axis):
    """Test unitary equivalence and the exact straddle count"""
    n, remote, local, p = _layout(num_remote, num_local)
    angles = np.random.default_rng(7 * n + num_local).uniform(-np.pi, np.pi, size=2 ** (n - 1))
    reference = MuxRot(axis=axis, target=0, controls=tuple(remote + local), angles=angles)
    lowered = synth_mux_rotation(axis, 0, remote, local, angles, p)
    assert lowered.is_lowered
    assert operator_distance(circuit_unitary(Circuit.of(n, [reference])), circuit_unitary(lowered)) < 1e-10
    assert count_straddling(lowered, p)[0] == exact_mux_cost(num_remote, num_local)


def test_exact_mux_cost_table():
    """Test the emitted-construction cost"""
    assert [exact_mux_cost(0, q) for q in range(3)] == [0, 0, 0]
    assert exact_mux_cost(1, 0) == 1
    assert exact_mux_cost(1, 3) == 2
    assert [exact_mux_cost(p, 1) for p in range(2, 6)] == [4, 8, 16, 32]


def test_synth_mux_rotation_validation():
    """Test misplaced controls and bad arguments"""
    n, remote, local, p = _layout(1, 1)
    angles = np.zeros(4)
    with pytest.raises(InvalidInputError):
        synth_mux_rotation("y", 0, local, remote, angles, p)
    with pytest.raises(InvalidInputError):
        synth_mux_rotation("x", 0, remote, local, angles, p)
    with pytest.raises(InvalidInputError):
        synth_mux_rotation("y", 0, remote, local, np.zeros(2), p)
    with pytest.raises(InvalidInputError):
        synth_mux_rotation("y", 0, remote + [0], local, np.zeros(8), p)


@pytest.mark.parametrize("num_controls", [1, 2, 3, 4])
@pytest.mark.parametrize("axis", ["y", "z"])
def test_controlled_rotation_cross(num_controls, axis):
    """Test multi-controlled rotations cost 2p - 1 straddling gates"""
    n = num_controls + 1
    p = PartitionSpec.of([range(num_controls), [num_controls]])
    angles = np.zeros(2 ** num_controls)
    angles[-1] = 1.234
    reference = MuxRot(axis=axis, target=num_controls, controls=tuple(range(num_controls)), angles=angles)
    circuit = synth_controlled_rotation_cross(range(num_controls), num_controls, axis, 1.234, p)
    assert operator_distance(circuit_unitary(Circuit.of(n, [reference])), circuit_unitary(circuit)) < 1e-10
    assert count_straddling(circuit, p)[0] == 2 * num_controls - 1


def test_controlled_rotation_cross_validation():
    """Test that controls must share a party distinct from the target's"""
    p = PartitionSpec.of([[0, 1], [2]])
    with pytest.raises(InvalidInputError):
        synth_controlled_rotation_cross([0, 2], 1, "y", 0.3, p)
    with pytest.raises(InvalidInputError):
        synth_controlled_rotation_cross([0], 1, "y", 0.3, p)
    with pytest.raises(InvalidInputError):
        synth_controlled_rotation_cross([], 2, "y", 0.3, p)


@pytest.mark.parametrize("strategy,p,q,expected", [
    ("recursion-D1", 3, 0, 5),
    ("recursion-D1", 2, 2, 12),
    ("recursion-D2", 3, 1, 14),
    ("graycode", 3, 2, 8),
    ("graycode", 0, 3, 0),
    ("barenco-controlled", 4, 0, 7),
])
def test_cost_model_T(strategy, p, q, expected):
    """Test the closed-form strategy costs"""
    assert cost_model_T(MuxCostQuery(p=p, q=q, strategy=strategy)) == expected


def test_cost_model_T_barenco_needs_no_local_controls():
    """Test that the controlled-rotation strategy refuses local controls"""
    with pytest.raises(InvalidInputError):
        cost_model_T(MuxCostQuery(p=2, q=1, strategy="barenco-controlled"))
