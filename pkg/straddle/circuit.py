"""Partition-aware gate-list circuits, statevector simulator, lowering, fusion and straddle counting"""

import logging
from typing import Annotated, Dict, List, Literal, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, ValidationInfo, field_validator, model_validator

from .config import Settings, resolve
from .errors import InvalidInputError, ResourceLimitError, VerificationError
from .linalg import is_unitary, operator_distance, rotation

logger = logging.getLogger(__name__)

_MODEL_CONFIG = ConfigDict(arbitrary_types_allowed=True, frozen=True)


def _frozen_array(value, dtype=np.complex128) -> np.ndarray:
    arr = np.array(value, dtype=dtype)
    if not np.all(np.isfinite(arr)):
        raise ValueError("array has non-finite entries")
    arr.setflags(write=False)
    return arr


def build(model_cls, settings: Optional[Settings] = None, **fields):
    """Construct a model, reporting validation failures as InvalidInputError

    `settings` reaches validators through the validation context.
    """
    try:
        return model_cls.model_validate(fields, context={"settings": settings})
    except ValidationError as e:
        raise InvalidInputError(f"Invalid {model_cls.__name__}: {e}") from e


class PartitionSpec(BaseModel):
    """Disjoint assignment of qubits 0..n-1 to parties"""

    model_config = _MODEL_CONFIG

    parties: Tuple[Tuple[int, ...], ...]

    @model_validator(mode="after")
    def _check_cover(self):
        if not self.parties:
            raise ValueError("partition needs at least one party")
        flat = [q for party in self.parties for q in party]
        if any(len(party) == 0 for party in self.parties):
            raise ValueError("every party must be nonempty")
        if len(set(flat)) != len(flat):
            raise ValueError("parties overlap")
        if sorted(flat) != list(range(len(flat))):
            raise ValueError(f"parties must cover 0..{len(flat) - 1} exactly")
        return self

    @classmethod
    def of(cls, parties: Sequence[Sequence[int]]) -> "PartitionSpec":
        return build(cls, parties=tuple(tuple(int(q) for q in party) for party in parties))

    @classmethod
    def singletons(cls, n: int) -> "PartitionSpec":
        return cls.of([[q] for q in range(n)])

    @property
    def n(self) -> int:
        return sum(len(party) for party in self.parties)

    @property
    def m(self) -> int:
        return len(self.parties)

    @property
    def sizes(self) -> Tuple[int, ...]:
        return tuple(len(party) for party in self.parties)

    @property
    def sorted_sizes(self) -> Tuple[int, ...]:
        """k_1 <= k_2 <= ... <= k_m"""
        return tuple(sorted(self.sizes))

    def party_of(self, qubit: int) -> int:
        for index, party in enumerate(self.parties):
            if qubit in party:
                return index
        raise InvalidInputError(f"Qubit {qubit} is not in the partition")

    def crosses(self, a: int, b: int) -> bool:
        return self.party_of(a) != self.party_of(b)

    def relabel(self, mapping: Dict[int, int]) -> "PartitionSpec":
        return PartitionSpec.of([[mapping[q] for q in party] for party in self.parties])

    def label(self) -> str:
        return "|".join(",".join(str(q) for q in party) for party in self.parties)


# ---------------------------------------------------------------------------
# Gates
# ---------------------------------------------------------------------------

class _MatrixGate(BaseModel):
    model_config = _MODEL_CONFIG

    matrix: np.ndarray

    @field_validator("matrix", mode="before")
    @classmethod
    def _freeze(cls, v):
        return _frozen_array(v)

    def _check_dim(self, width: int):
        dim = 2 ** width
        if self.matrix.shape != (dim, dim):
            raise ValueError(f"matrix must be {dim}x{dim}, got {self.matrix.shape}")

    def local_matrix(self) -> np.ndarray:
        return self.matrix


class SingleQubit(_MatrixGate):
    kind: Literal["u1"] = "u1"
    qubit: int = Field(ge=0)

    @model_validator(mode="after")
    def _check(self):
        self._check_dim(1)
        return self

    @property
    def qubits(self) -> Tuple[int, ...]:
        return (self.qubit,)

    def inverse(self) -> "SingleQubit":
        return SingleQubit(qubit=self.qubit, matrix=self.matrix.conj().T)

    def relabel(self, mapping: Dict[int, int]) -> "SingleQubit":
        return SingleQubit(qubit=mapping[self.qubit], matrix=self.matrix)


class TwoQubit(_MatrixGate):
    """Arbitrary 4x4 unitary; q1 is bit 0 of the local index"""

    kind: Literal["u2"] = "u2"
    q1: int = Field(ge=0)
    q2: int = Field(ge=0)

    @model_validator(mode="after")
    def _check(self):
        if self.q1 == self.q2:
            raise ValueError("TwoQubit needs two distinct qubits")
        self._check_dim(2)
        return self

    @property
    def qubits(self) -> Tuple[int, ...]:
        return (self.q1, self.q2)

    def inverse(self) -> "TwoQubit":
        return TwoQubit(q1=self.q1, q2=self.q2, matrix=self.matrix.conj().T)

    def relabel(self, mapping: Dict[int, int]) -> "TwoQubit":
        return TwoQubit(q1=mapping[self.q1], q2=mapping[self.q2], matrix=self.matrix)


class Cnot(BaseModel):
    model_config = _MODEL_CONFIG

    kind: Literal["cnot"] = "cnot"
    control: int = Field(ge=0)
    target: int = Field(ge=0)

    @model_validator(mode="after")
    def _check(self):
        if self.control == self.target:
            raise ValueError("Cnot control and target coincide")
        return self

    @property
    def qubits(self) -> Tuple[int, ...]:
        return (self.control, self.target)

    def local_matrix(self) -> np.ndarray:
        m = np.eye(4, dtype=complex)
        m[[1, 3]] = m[[3, 1]]
        return m

    def inverse(self) -> "Cnot":
        return self

    def relabel(self, mapping: Dict[int, int]) -> "Cnot":
        return Cnot(control=mapping[self.control], target=mapping[self.target])


class MuxRot(BaseModel):
    """Multiplexed rotation: R_axis(angles[b]) on target for control assignment b

    The first listed control is the most significant bit of b.
    """

    model_config = _MODEL_CONFIG

    kind: Literal["mux"] = "mux"
    axis: Literal["y", "z"]
    target: int = Field(ge=0)
    controls: Tuple[int, ...] = ()
    angles: Tuple[float, ...]

    @field_validator("angles", mode="before")
    @classmethod
    def _flatten_angles(cls, v):
        arr = np.ravel(np.asarray(v, dtype=float))
        if not np.all(np.isfinite(arr)):
            raise ValueError("angles must be finite")
        return tuple(float(a) for a in arr)

    @model_validator(mode="after")
    def _check(self):
        if len(set(self.controls) | {self.target}) != len(self.controls) + 1:
            raise ValueError("MuxRot qubits must be distinct")
        if len(self.angles) != 2 ** len(self.controls):
            raise ValueError(
                f"MuxRot with {len(self.controls)} controls needs {2 ** len(self.controls)} angles, "
                f"got {len(self.angles)}"
            )
        return self

    @property
    def qubits(self) -> Tuple[int, ...]:
        return (self.target,) + tuple(reversed(self.controls))

    def local_matrix(self) -> np.ndarray:
        blocks = [rotation(self.axis, a) for a in self.angles]
        dim = 2 * len(blocks)
        m = np.zeros((dim, dim), dtype=complex)
        for b, block in enumerate(blocks):
            m[2 * b:2 * b + 2, 2 * b:2 * b + 2] = block
        return m

    def inverse(self) -> "MuxRot":
        return MuxRot(axis=self.axis, target=self.target, controls=self.controls,
                      angles=tuple(-a for a in self.angles))

    def relabel(self, mapping: Dict[int, int]) -> "MuxRot":
        return MuxRot(axis=self.axis, target=mapping[self.target],
                      controls=tuple(mapping[c] for c in self.controls), angles=self.angles)


class LocalBlock(_MatrixGate):
    """Unitary acting inside one party; qubits[0] is bit 0 of the local index"""

    kind: Literal["local"] = "local"
    party: int = Field(ge=0)
    qubits: Tuple[int, ...]

    @model_validator(mode="after")
    def _check(self):
        if not self.qubits:
            raise ValueError("LocalBlock needs at least one qubit")
        if len(set(self.qubits)) != len(self.qubits):
            raise ValueError("LocalBlock qubits must be distinct")
        self._check_dim(len(self.qubits))
        return self

    def inverse(self) -> "LocalBlock":
        return LocalBlock(party=self.party, qubits=self.qubits, matrix=self.matrix.conj().T)

    def relabel(self, mapping: Dict[int, int]) -> "LocalBlock":
        return LocalBlock(party=self.party, qubits=tuple(mapping[q] for q in self.qubits),
                          matrix=self.matrix)


Gate = Annotated[Union[SingleQubit, TwoQubit, Cnot, MuxRot, LocalBlock], Field(discriminator="kind")]
LOWERED_KINDS = (SingleQubit, TwoQubit, Cnot, LocalBlock)


class Circuit(BaseModel):
    """Ordered gate list on n qubits"""

    model_config = _MODEL_CONFIG

    n: int = Field(ge=1)
    gates: Tuple[Gate, ...] = ()

    @model_validator(mode="after")
    def _check_indices(self):
        for position, gate in enumerate(self.gates):
            if max(gate.qubits) >= self.n:
                raise ValueError(f"gate {position} ({gate.kind}) touches a qubit >= n={self.n}")
        return self

    @classmethod
    def of(cls, n: int, gates: Sequence) -> "Circuit":
        return build(cls, n=n, gates=tuple(gates))

    def __len__(self) -> int:
        return len(self.gates)

    @property
    def is_lowered(self) -> bool:
        return all(isinstance(g, LOWERED_KINDS) for g in self.gates)

    def inverse(self) -> "Circuit":
        return Circuit(n=self.n, gates=tuple(g.inverse() for g in reversed(self.gates)))

    def then(self, other: "Circuit") -> "Circuit":
        if other.n != self.n:
            raise InvalidInputError(f"Cannot join circuits on {self.n} and {other.n} qubits")
        return Circuit(n=self.n, gates=self.gates + other.gates)

    def relabel(self, mapping: Dict[int, int]) -> "Circuit":
        return Circuit(n=self.n, gates=tuple(g.relabel(mapping) for g in self.gates))


class PureState(BaseModel):
    """Normalised amplitude vector; index bit q is qubit q"""

    model_config = _MODEL_CONFIG

    n: int = Field(ge=1)
    amplitudes: np.ndarray

    @field_validator("amplitudes", mode="before")
    @classmethod
    def _freeze(cls, v):
        return _frozen_array(np.ravel(np.asarray(v)))

    @model_validator(mode="after")
    def _check(self, info: ValidationInfo):
        if self.amplitudes.shape != (2 ** self.n,):
            raise ValueError(f"expected {2 ** self.n} amplitudes, got {self.amplitudes.shape[0]}")
        settings = (info.context or {}).get("settings")
        norm = float(np.linalg.norm(self.amplitudes))
        if abs(norm - 1.0) > resolve(settings).norm_tol:
            raise ValueError(f"state norm {norm:.12f} is not 1")
        return self

    @classmethod
    def of(cls, amplitudes, normalize: bool = False, settings: Optional[Settings] = None) -> "PureState":
        amps = np.ravel(np.asarray(amplitudes, dtype=np.complex128))
        n = int(round(np.log2(max(len(amps), 1))))
        if len(amps) < 2 or 2 ** n != len(amps):
            raise InvalidInputError(f"Amplitude count {len(amps)} is not a power of two >= 2")
        if normalize:
            norm = np.linalg.norm(amps)
            if norm == 0 or not np.isfinite(norm):
                raise InvalidInputError("Cannot normalise a zero or non-finite vector")
            amps = amps / norm
        return build(cls, settings=settings, n=n, amplitudes=amps)

    @classmethod
    def zero(cls, n: int) -> "PureState":
        amps = np.zeros(2 ** n, dtype=complex)
        amps[0] = 1.0
        return cls(n=n, amplitudes=amps)


# ---------------------------------------------------------------------------
# Simulator
# ---------------------------------------------------------------------------

def apply_matrix(flat: np.ndarray, mat: np.ndarray, qubits: Sequence[int], n: int) -> np.ndarray:
    k = len(qubits)
    batch = flat.shape[1]
    psi = flat.reshape([2] * n + [batch])
    axes = [n - 1 - q for q in reversed(qubits)]
    res = np.tensordot(mat.reshape([2] * (2 * k)), psi, axes=(list(range(k, 2 * k)), axes))
    res = np.moveaxis(res, list(range(k)), axes)
    return np.ascontiguousarray(res).reshape(2 ** n, batch)


def _apply_mux(flat: np.ndarray, gate: MuxRot, n: int) -> np.ndarray:
    idx = np.arange(2 ** n)
    base = idx[((idx >> gate.target) & 1) == 0]
    partner = base | (1 << gate.target)
    b = np.zeros_like(base)
    for c in gate.controls:
        b = (b << 1) | ((base >> c) & 1)
    R = np.array([rotation(gate.axis, a) for a in gate.angles])[b]
    x0, x1 = flat[base], flat[partner]
    out = flat.copy()
    out[base] = R[:, 0, 0, None] * x0 + R[:, 0, 1, None] * x1
    out[partner] = R[:, 1, 0, None] * x0 + R[:, 1, 1, None] * x1
    return out


def _apply_cnot(flat: np.ndarray, gate: Cnot, n: int) -> np.ndarray:
    idx = np.arange(2 ** n)
    perm = idx ^ (((idx >> gate.control) & 1) << gate.target)
    return flat[perm]


def _run(c: Circuit, flat: np.ndarray, cfg: Settings) -> np.ndarray:
    for position, gate in enumerate(c.gates):
        if isinstance(gate, Cnot):
            flat = _apply_cnot(flat, gate, c.n)
        elif isinstance(gate, MuxRot):
            flat = _apply_mux(flat, gate, c.n)
        else:
            if not is_unitary(gate.matrix, cfg.unitarity_tol):
                raise InvalidInputError(f"Gate {position} ({gate.kind}) is not unitary")
            flat = apply_matrix(flat, gate.matrix, gate.qubits, c.n)
    return flat


def apply_circuit(c: Circuit, s: PureState, settings: Optional[Settings] = None) -> PureState:
    """Apply the gates of c to s in list order

    Raises:
        InvalidInputError: on qubit-count mismatch or a non-unitary gate
        VerificationError: if the norm drifts by more than norm_tol
    """
    cfg = resolve(settings)
    if c.n != s.n:
        raise InvalidInputError(f"Circuit has {c.n} qubits but state has {s.n}")
    out = _run(c, np.array(s.amplitudes).reshape(-1, 1), cfg)[:, 0]
    drift = abs(float(np.linalg.norm(out)) - float(np.linalg.norm(s.amplitudes)))
    if drift > cfg.norm_tol:
        logger.error(f"Norm drifted by {drift:.3e} over {len(c)} gates")
        raise VerificationError(f"Circuit changed the state norm by {drift:.3e}")
    return build(PureState, settings=cfg, n=s.n, amplitudes=out)


def circuit_unitary(c: Circuit, settings: Optional[Settings] = None) -> np.ndarray:
    """Full 2^n x 2^n matrix of the ordered gate product"""
    cfg = resolve(settings)
    if c.n > cfg.max_unitary_qubits:
        raise ResourceLimitError(
            f"circuit_unitary is capped at {cfg.max_unitary_qubits} qubits, circuit has {c.n}"
        )
    return _run(c, np.eye(2 ** c.n, dtype=complex), cfg)


def fidelity(a: PureState, b: PureState) -> float:
    """|<a|b>|^2"""
    if a.n != b.n:
        raise InvalidInputError(f"States have {a.n} and {b.n} qubits")
    return float(abs(np.vdot(a.amplitudes, b.amplitudes)) ** 2)


# ---------------------------------------------------------------------------
# Passes
# ---------------------------------------------------------------------------

def _check_partition(c: Circuit, p: PartitionSpec):
    if p.n != c.n:
        raise InvalidInputError(f"Partition covers {p.n} qubits, circuit has {c.n}")


def lower(c: Circuit, p: PartitionSpec, full: bool = False,
          settings: Optional[Settings] = None) -> Circuit:
    """Expand macro gates so only SingleQubit, TwoQubit, Cnot and LocalBlock remain

    Args:
        c: Circuit, possibly with MuxRot gates
        p: Partition deciding which multiplexor controls are remote
        full: Also break LocalBlocks wider than two qubits into one/two-qubit gates

    Returns:
        Lowered circuit, unitarily equivalent to c up to global phase
    """
    from .multiplexor import synth_mux_rotation
    from .qsd import shannon_gates

    cfg = resolve(settings)
    _check_partition(c, p)
    gates: List = []
    for gate in c.gates:
        if isinstance(gate, MuxRot):
            party = p.party_of(gate.target)
            remote = [q for q in gate.controls if p.party_of(q) != party]
            local = [q for q in gate.controls if p.party_of(q) == party]
            # Remote controls become the most significant angle-index bits
            angles = np.asarray(gate.angles)
            if gate.controls:
                perm = [gate.controls.index(q) for q in remote + local]
                angles = np.transpose(angles.reshape([2] * len(gate.controls)), perm).ravel()
            sub = synth_mux_rotation(gate.axis, gate.target, remote, local, angles, p, settings=cfg)
            gates.extend(sub.gates)
        else:
            gates.append(gate)

    if full:
        expanded = []
        for gate in gates:
            if isinstance(gate, LocalBlock) and len(gate.qubits) == 1:
                expanded.append(SingleQubit(qubit=gate.qubits[0], matrix=gate.matrix))
            elif isinstance(gate, LocalBlock) and len(gate.qubits) == 2:
                expanded.append(TwoQubit(q1=gate.qubits[0], q2=gate.qubits[1], matrix=gate.matrix))
            elif isinstance(gate, LocalBlock):
                singles = PartitionSpec.singletons(c.n)
                inner = Circuit(n=c.n, gates=tuple(shannon_gates(gate.matrix, gate.qubits, singles, cfg)))
                expanded.extend(lower(inner, singles, full=True, settings=cfg).gates)
            else:
                expanded.append(gate)
        gates = expanded

    out = Circuit(n=c.n, gates=tuple(gates))
    logger.debug(f"Lowered {len(c)} gates into {len(out)} (full={full})")
    return out


def _pair_matrix(gate, a: int, b: int) -> np.ndarray:
    """4x4 matrix of a gate supported inside {a, b}, with a as bit 0"""
    qubits = gate.qubits
    mat = gate.local_matrix()
    if len(qubits) == 1:
        eye = np.eye(2, dtype=complex)
        return np.kron(eye, mat) if qubits[0] == a else np.kron(mat, eye)
    if tuple(qubits) == (a, b):
        return mat
    swap = np.eye(4, dtype=complex)[[0, 2, 1, 3]]
    return swap @ mat @ swap


def _fuse_pass(gates: List, cfg: Settings) -> Tuple[List, bool]:
    out: List = []
    changed = False
    for gate in gates:
        if not isinstance(gate, (Cnot, TwoQubit)):
            out.append(gate)
            continue
        a, b = sorted(gate.qubits)
        pair = {a, b}
        absorbed: List[int] = []
        partner = None
        j = len(out) - 1
        while j >= 0:
            support = set(out[j].qubits)
            if not support & pair:
                j -= 1
                continue
            if not support <= pair:
                break
            if isinstance(out[j], (Cnot, TwoQubit)) and support == pair:
                partner = j
                break
            absorbed.append(j)
            j -= 1
        if partner is None:
            out.append(gate)
            continue

        changed = True
        merged = _pair_matrix(out[partner], a, b)
        for k in reversed(absorbed):
            merged = _pair_matrix(out[k], a, b) @ merged
        merged = _pair_matrix(gate, a, b) @ merged
        drop = set(absorbed) | {partner}
        out = [g for i, g in enumerate(out) if i not in drop]
        if operator_distance(np.eye(4), merged) > cfg.identity_tol:
            out.append(TwoQubit(q1=a, q2=b, matrix=merged))
    return out, changed


def fuse_straddling(c: Circuit, p: PartitionSpec, settings: Optional[Settings] = None) -> Circuit:
    """Merge two-qubit gates on the same pair, with the one-qubit gates between them

    Runs passes until nothing changes; merged identities are removed.
    """
    cfg = resolve(settings)
    _check_partition(c, p)
    gates = list(c.gates)
    changed = True
    while changed:
        gates, changed = _fuse_pass(gates, cfg)
    logger.debug(f"Fusion: {len(c)} gates -> {len(gates)}")
    return Circuit(n=c.n, gates=tuple(gates))


def count_straddling(c: Circuit, p: PartitionSpec) -> Tuple[int, Dict[Tuple[int, int], int]]:
    """Count two-qubit gates whose qubits sit in different parties

    Returns:
        (total, per_pair) with per_pair keyed by (party_i, party_j), i < j
    """
    _check_partition(c, p)
    per_pair: Dict[Tuple[int, int], int] = {}
    for gate in c.gates:
        if isinstance(gate, MuxRot):
            raise InvalidInputError(
                "Circuit contains multiplexed rotations; lower first", check="lowered"
            )
        if isinstance(gate, (Cnot, TwoQubit)):
            i, j = (p.party_of(q) for q in gate.qubits)
            if i != j:
                key = (min(i, j), max(i, j))
                per_pair[key] = per_pair.get(key, 0) + 1
        elif isinstance(gate, LocalBlock):
            parties = {p.party_of(q) for q in gate.qubits}
            if len(parties) != 1:
                raise InvalidInputError(
                    f"LocalBlock on {gate.qubits} spans parties {sorted(parties)}", check="local"
                )
    return sum(per_pair.values()), dict(sorted(per_pair.items()))
