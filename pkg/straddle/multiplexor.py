"""Multiplexed and multi-controlled rotations across a cut, plus their straddle cost models"""

import logging
from typing import List, Literal, Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from .circuit import Circuit, LocalBlock, MuxRot, PartitionSpec, TwoQubit, Cnot, build
from .config import Settings, resolve
from .errors import InvalidInputError

logger = logging.getLogger(__name__)

Strategy = Literal["recursion-D1", "recursion-D2", "graycode", "barenco-controlled"]


class MuxCostQuery(BaseModel):
    model_config = ConfigDict(frozen=True)

    p: int = Field(ge=0, description="Remote controls")
    q: int = Field(ge=0, description="Local controls")
    strategy: Strategy = "graycode"


def gray(k: int) -> int:
    return k ^ (k >> 1)


def _trailing_zeros(k: int) -> int:
    return (k & -k).bit_length() - 1


def flip_bits(p: int) -> List[int]:
    """Gray-code bit toggled after each of the 2^p segments (wrapping back to zero)"""
    size = 2 ** p
    return [_trailing_zeros(j + 1) if j < size - 1 else p - 1 for j in range(size)]


def mux_angles_graycode(angles: Sequence[float], num_remote: int) -> np.ndarray:
    """Solve M·alpha = theta over the remote-control dimension

    Args:
        angles: 2^(p+q) multiplexor angles, remote controls as the high index bits
        num_remote: p

    Returns:
        (2^p, 2^q) array; row k holds the local angles of Gray-code segment k
    """
    theta = np.asarray(angles, dtype=float).ravel()
    size = 2 ** num_remote
    if num_remote < 0 or len(theta) % size or len(theta) < size:
        raise InvalidInputError(
            f"{len(theta)} angles cannot be split over {num_remote} remote controls"
        )
    local = len(theta) // size
    if local & (local - 1):
        raise InvalidInputError(f"Angle count {len(theta)} is not a power of two")
    x = np.arange(size)
    codes = np.array([gray(k) for k in range(size)])
    parity = np.array([[bin(int(xi) & int(g)).count("1") & 1 for g in codes] for xi in x])
    M = np.where(parity == 1, -1.0, 1.0)
    return M.T @ theta.reshape(size, local) / size


def exact_mux_cost(p: int, q: int) -> int:
    """Straddling gates emitted by synth_mux_rotation for p remote, q local controls"""
    if p == 0:
        return 0
    if p == 1:
        return 1 if q == 0 else 2
    return 2 ** p


def _segment(axis: str, target: int, local: Sequence[int], alpha: Sequence[float], party: int) -> LocalBlock:
    rot = MuxRot(axis=axis, target=target, controls=tuple(local), angles=alpha)
    return LocalBlock(party=party, qubits=rot.qubits, matrix=rot.local_matrix())


def synth_mux_rotation(axis: str, target: int, remote_controls: Sequence[int],
                       local_controls: Sequence[int], angles: Sequence[float],
                       p: PartitionSpec, settings: Optional[Settings] = None) -> Circuit:
    """Gray-code lowering of a multiplexed rotation over its remote controls

    Angles are indexed by the control assignment of remote_controls + local_controls,
    first listed control most significant. Local controls stay inside free
    LocalBlock segments.

    Returns:
        Lowered circuit on p.n qubits with exact_mux_cost(p, q) straddling gates
    """
    resolve(settings)
    remote, local = list(remote_controls), list(local_controls)
    qubits = remote + local + [target]
    if len(set(qubits)) != len(qubits):
        raise InvalidInputError(f"Multiplexor qubits collide: target {target}, controls {remote + local}")
    if any(q < 0 or q >= p.n for q in qubits):
        raise InvalidInputError(f"Multiplexor qubits {qubits} fall outside the {p.n}-qubit partition")
    party = p.party_of(target)
    if any(p.party_of(c) == party for c in remote):
        raise InvalidInputError("A remote control shares the target's party")
    if any(p.party_of(c) != party for c in local):
        raise InvalidInputError("A local control sits outside the target's party")
    if axis not in ("y", "z"):
        raise InvalidInputError(f"Unknown rotation axis: {axis!r}")

    theta = np.asarray(angles, dtype=float).ravel()
    if len(theta) != 2 ** len(qubits[:-1]):
        raise InvalidInputError(f"Expected {2 ** (len(qubits) - 1)} angles, got {len(theta)}")

    P, Q = len(remote), len(local)
    gates: List = []
    if P == 0:
        gates.append(_segment(axis, target, local, theta, party))
    elif P == 1 and Q == 0:
        rot = MuxRot(axis=axis, target=target, controls=(remote[0],), angles=theta)
        gates.append(TwoQubit(q1=target, q2=remote[0], matrix=rot.local_matrix()))
    else:
        alpha = mux_angles_graycode(theta, P)
        for k, bit in enumerate(flip_bits(P)):
            gates.append(_segment(axis, target, local, alpha[k], party))
            gates.append(Cnot(control=remote[P - 1 - bit], target=target))

    logger.debug(f"Multiplexed R{axis} on {target}: p={P}, q={Q}, straddling={exact_mux_cost(P, Q)}")
    return build(Circuit, n=p.n, gates=tuple(gates))


def _controlled_not_local(controls: Sequence[int], target: int, party: int) -> LocalBlock:
    """C^k X inside one party; qubits ordered (target, controls...)"""
    dim = 2 ** (len(controls) + 1)
    perm = np.arange(dim)
    perm[[dim - 2, dim - 1]] = perm[[dim - 1, dim - 2]]
    return LocalBlock(party=party, qubits=(target,) + tuple(controls), matrix=np.eye(dim)[perm])


def _controlled_rotation(controls: List[int], target: int, axis: str, angle: float, party: int) -> List:
    last = controls[-1]
    if len(controls) == 1:
        rot = MuxRot(axis=axis, target=target, controls=(last,), angles=(0.0, angle))
        return [TwoQubit(q1=target, q2=last, matrix=rot.local_matrix())]
    rest = controls[:-1]
    flip = _controlled_not_local(rest, last, party)
    return (
        _controlled_rotation([last], target, axis, angle / 2, party)
        + [flip]
        + _controlled_rotation([last], target, axis, -angle / 2, party)
        + [flip]
        + _controlled_rotation(rest, target, axis, angle / 2, party)
    )


def synth_controlled_rotation_cross(controls: Sequence[int], target: int, axis: str, angle: float,
                                    p: PartitionSpec, settings: Optional[Settings] = None) -> Circuit:
    """Multi-controlled rotation with all controls in one party and the target in another

    Uses C^pR(θ) = C¹R(θ/2) · C^(p-1)X · C¹R(-θ/2) · C^(p-1)X · C^(p-1)R(θ/2),
    where the Toffoli-type flips are free; straddling count is 2p - 1.
    """
    resolve(settings)
    controls = list(controls)
    if not controls:
        raise InvalidInputError("Controlled rotation needs at least one control; use a LocalBlock")
    if target in controls or len(set(controls)) != len(controls):
        raise InvalidInputError("Control and target qubits must be distinct")
    parties = {p.party_of(c) for c in controls}
    if len(parties) != 1:
        raise InvalidInputError("All controls must sit in one party")
    party = parties.pop()
    if p.party_of(target) == party:
        raise InvalidInputError("Target must sit outside the controls' party")
    if axis not in ("y", "z"):
        raise InvalidInputError(f"Unknown rotation axis: {axis!r}")
    gates = _controlled_rotation(controls, target, axis, float(angle), party)
    return build(Circuit, n=p.n, gates=tuple(gates))


def cost_model_T(query: MuxCostQuery) -> int:
    """Closed-form straddling count of a multiplexor under the chosen strategy"""
    p, q = query.p, query.q
    if query.strategy == "barenco-controlled" and q > 0:
        raise InvalidInputError("barenco-controlled applies to rotations without local controls")
    if p == 0:
        return 0
    if query.strategy == "recursion-D1":
        return (2 * p - 1) * 2 ** q
    if query.strategy == "recursion-D2":
        return 2 ** (p + 1) - 2
    if query.strategy == "graycode":
        return 2 ** p
    return 2 * p - 1
