"""Reading and writing circuit (.sqc), state, unitary and partition files"""

import hashlib
import json
import logging
import math
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel

from .circuit import Circuit, Cnot, LocalBlock, MuxRot, PartitionSpec, PureState, SingleQubit, TwoQubit, build
from .errors import InvalidInputError

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

SQC_VERSION = 1


# ---------------------------------------------------------------------------
# Numbers
# ---------------------------------------------------------------------------

def format_float(x: float) -> str:
    """17 significant digits, enough to round-trip any double"""
    x = float(x)
    if not math.isfinite(x):
        raise InvalidInputError(f"Cannot serialize non-finite value {x}")
    return "%.17g" % x


def format_complex(z: complex) -> str:
    z = complex(z)
    return f"({format_float(z.real)},{format_float(z.imag)})"


def parse_complex(token: str) -> complex:
    text = token.strip()
    if not (text.startswith("(") and text.endswith(")")):
        raise InvalidInputError(f"Complex literal must look like (re,im), got {token!r}")
    try:
        re_part, im_part = text[1:-1].split(",")
        value = complex(float(re_part), float(im_part))
    except ValueError as e:
        raise InvalidInputError(f"Malformed complex literal {token!r}") from e
    if not (math.isfinite(value.real) and math.isfinite(value.imag)):
        raise InvalidInputError(f"Non-finite complex literal {token!r}")
    return value


def _int_list(text: str, what: str) -> Tuple[int, ...]:
    if text == "":
        return ()
    try:
        return tuple(int(v) for v in text.split(","))
    except ValueError as e:
        raise InvalidInputError(f"Malformed {what} list {text!r}") from e


def _float_list(text: str, what: str) -> Tuple[float, ...]:
    try:
        return tuple(float(v) for v in text.split(",")) if text else ()
    except ValueError as e:
        raise InvalidInputError(f"Malformed {what} list {text!r}") from e


# ---------------------------------------------------------------------------
# Canonical JSON
# ---------------------------------------------------------------------------

def _plain(obj: Any) -> Any:
    if isinstance(obj, BaseModel):
        return _plain(obj.model_dump())
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, np.generic):
        return _plain(obj.item())
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def _encode(obj: Any, indent: int) -> str:
    pad, inner = "  " * indent, "  " * (indent + 1)
    if obj is None:
        return "null"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        return format_float(obj)
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, list):
        if not obj:
            return "[]"
        if all(not isinstance(v, (list, dict)) for v in obj):
            return "[" + ", ".join(_encode(v, 0) for v in obj) + "]"
        return "[\n" + ",\n".join(inner + _encode(v, indent + 1) for v in obj) + "\n" + pad + "]"
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{inner}{json.dumps(k)}: {_encode(obj[k], indent + 1)}" for k in sorted(obj)]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    raise InvalidInputError(f"Cannot serialize {type(obj).__name__}")


def canonical_json(obj: Any) -> str:
    """Deterministic JSON: sorted keys, floats with 17 significant digits, trailing newline"""
    return _encode(_plain(obj), 0) + "\n"


def _complex_pairs(values: np.ndarray) -> List[List[float]]:
    return [[float(z.real), float(z.imag)] for z in np.ravel(values)]


def _complex_array(raw: Any, what: str) -> np.ndarray:
    try:
        arr = np.asarray(raw, dtype=float)
    except (TypeError, ValueError) as e:
        raise InvalidInputError(f"{what} must be nested [re, im] pairs") from e
    if arr.ndim == 0 or arr.shape[-1] != 2:
        raise InvalidInputError(f"{what} entries must be [re, im] pairs")
    return arr[..., 0] + 1j * arr[..., 1]


# ---------------------------------------------------------------------------
# File helpers
# ---------------------------------------------------------------------------

def read_text(path: PathLike) -> str:
    try:
        return Path(path).read_text()
    except OSError as e:
        logger.error(f"Cannot read {path}: {e}")
        raise InvalidInputError(f"Cannot read {path}: {e}") from e


def write_text(path: PathLike, text: str):
    try:
        Path(path).write_text(text)
        logger.debug(f"Wrote {len(text)} characters to {path}")
    except OSError as e:
        logger.error(f"Cannot write {path}: {e}")
        raise InvalidInputError(f"Cannot write {path}: {e}") from e


def _read_json(path: PathLike) -> Dict[str, Any]:
    try:
        data = json.loads(read_text(path))
    except json.JSONDecodeError as e:
        logger.error(f"Invalid JSON in {path}: {e}")
        raise InvalidInputError(f"Invalid JSON in {path}: {e}") from e
    if not isinstance(data, dict):
        raise InvalidInputError(f"{path} must contain a JSON object")
    return data


def _require(data: Dict[str, Any], key: str, path: PathLike) -> Any:
    if key not in data:
        raise InvalidInputError(f"{path} is missing the {key!r} field")
    return data[key]


def inputs_digest(paths: Dict[str, Optional[PathLike]]) -> str:
    """sha256 over the named input files, in name order"""
    h = hashlib.sha256()
    for name in sorted(paths):
        if paths[name] is None:
            continue
        h.update(name.encode() + b"\0")
        try:
            h.update(Path(paths[name]).read_bytes())
        except OSError as e:
            raise InvalidInputError(f"Cannot read {paths[name]}: {e}") from e
        h.update(b"\0")
    return h.hexdigest()


# ---------------------------------------------------------------------------
# States, unitaries, partitions
# ---------------------------------------------------------------------------

def state_to_json(s: PureState) -> str:
    return canonical_json({"n": s.n, "amplitudes": _complex_pairs(s.amplitudes)})


def state_from_json(data: Dict[str, Any], path: PathLike = "<state>") -> PureState:
    n = _require(data, "n", path)
    amps = _complex_array(_require(data, "amplitudes", path), "amplitudes")
    if not isinstance(n, int) or n < 1:
        raise InvalidInputError(f"{path}: n must be a positive integer")
    if amps.shape != (2 ** n,):
        raise InvalidInputError(f"{path}: expected {2 ** n} amplitudes, got {amps.shape[0] if amps.ndim else 0}")
    return build(PureState, n=n, amplitudes=amps)


def load_state(path: PathLike) -> PureState:
    return state_from_json(_read_json(path), path)


def save_state(path: PathLike, s: PureState):
    write_text(path, state_to_json(s))


def unitary_to_json(U: np.ndarray) -> str:
    n = int(round(np.log2(U.shape[0])))
    return canonical_json({"n": n, "matrix": [_complex_pairs(row) for row in U]})


def load_unitary(path: PathLike) -> np.ndarray:
    """Square complex matrix; unitarity is checked by the consumer"""
    data = _read_json(path)
    n = _require(data, "n", path)
    U = _complex_array(_require(data, "matrix", path), "matrix")
    if not isinstance(n, int) or n < 1:
        raise InvalidInputError(f"{path}: n must be a positive integer")
    if U.shape != (2 ** n, 2 ** n):
        raise InvalidInputError(f"{path}: expected a {2 ** n}x{2 ** n} matrix, got {U.shape}")
    return U


def save_unitary(path: PathLike, U: np.ndarray):
    write_text(path, unitary_to_json(np.asarray(U)))


def partition_to_json(p: PartitionSpec) -> str:
    return canonical_json({"parties": [list(party) for party in p.parties]})


def parse_partition_label(label: str) -> PartitionSpec:
    """'0,1|2,3' -> PartitionSpec"""
    return PartitionSpec.of([_int_list(part.strip(), "party") for part in label.strip().split("|")])


def load_partition(path: PathLike) -> PartitionSpec:
    parties = _require(_read_json(path), "parties", path)
    if not isinstance(parties, list) or not all(isinstance(party, list) for party in parties):
        raise InvalidInputError(f"{path}: parties must be a list of qubit lists")
    if any(not isinstance(q, int) or isinstance(q, bool) for party in parties for q in party):
        raise InvalidInputError(f"{path}: qubit indices must be integers")
    return PartitionSpec.of(parties)


def save_partition(path: PathLike, p: PartitionSpec):
    write_text(path, partition_to_json(p))


# ---------------------------------------------------------------------------
# Circuit text format
# ---------------------------------------------------------------------------

def _ints(values: Sequence[int]) -> str:
    return ",".join(str(v) for v in values)


def _gate_line(gate) -> str:
    if isinstance(gate, Cnot):
        return f"cnot {gate.control} {gate.target}"
    if isinstance(gate, SingleQubit):
        return f"u1 {gate.qubit} " + " ".join(format_complex(z) for z in gate.matrix.ravel())
    if isinstance(gate, TwoQubit):
        return f"u2 {gate.q1} {gate.q2} " + " ".join(format_complex(z) for z in gate.matrix.ravel())
    if isinstance(gate, MuxRot):
        angles = ",".join(format_float(a) for a in gate.angles)
        return f"muxr{gate.axis} {gate.target} ctrls={_ints(gate.controls)} angles={angles}"
    if isinstance(gate, LocalBlock):
        entries = " ".join(format_complex(z) for z in gate.matrix.ravel())
        return f"local party={gate.party} qubits={_ints(gate.qubits)} {entries}"
    raise InvalidInputError(f"Unknown gate type {type(gate).__name__}")


def dumps_circuit(c: Circuit, partition: Optional[PartitionSpec] = None) -> str:
    lines = [f"sqc {SQC_VERSION}", f"qubits {c.n}"]
    if partition is not None:
        lines.append(f"partition {partition.label()}")
    lines.extend(_gate_line(g) for g in c.gates)
    return "\n".join(lines) + "\n"


def _matrix(tokens: List[str], width: int) -> np.ndarray:
    dim = 2 ** width
    if len(tokens) != dim * dim:
        raise InvalidInputError(f"expected {dim * dim} matrix entries, got {len(tokens)}")
    return np.array([parse_complex(t) for t in tokens]).reshape(dim, dim)


def _keyed(token: str, key: str) -> str:
    prefix = f"{key}="
    if not token.startswith(prefix):
        raise InvalidInputError(f"expected {prefix}..., got {token!r}")
    return token[len(prefix):]


def _parse_gate(tokens: List[str], lineno: int):
    op, args = tokens[0], tokens[1:]
    try:
        if op == "cnot" and len(args) == 2:
            return build(Cnot, control=int(args[0]), target=int(args[1]))
        if op == "u1" and args:
            return build(SingleQubit, qubit=int(args[0]), matrix=_matrix(args[1:], 1))
        if op == "u2" and len(args) >= 2:
            return build(TwoQubit, q1=int(args[0]), q2=int(args[1]), matrix=_matrix(args[2:], 2))
        if op in ("muxry", "muxrz") and len(args) == 3:
            return build(
                MuxRot, axis=op[-1], target=int(args[0]),
                controls=_int_list(_keyed(args[1], "ctrls"), "control"),
                angles=_float_list(_keyed(args[2], "angles"), "angle"),
            )
        if op == "local" and len(args) >= 2:
            qubits = _int_list(_keyed(args[1], "qubits"), "qubit")
            return build(
                LocalBlock, party=int(_keyed(args[0], "party")), qubits=qubits,
                matrix=_matrix(args[2:], len(qubits)),
            )
    except ValueError as e:
        raise InvalidInputError(f"line {lineno}: {e}") from e
    except InvalidInputError as e:
        raise InvalidInputError(f"line {lineno}: {e}", check=e.check) from e
    raise InvalidInputError(f"line {lineno}: cannot parse gate {' '.join(tokens[:3])!r}")


def loads_circuit(text: str) -> Tuple[Circuit, Optional[PartitionSpec]]:
    """Parse .sqc text into a circuit and the optional partition header"""
    n: Optional[int] = None
    partition: Optional[PartitionSpec] = None
    gates = []
    seen_version = False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        if not seen_version:
            if tokens != ["sqc", str(SQC_VERSION)]:
                raise InvalidInputError(f"line {lineno}: expected header 'sqc {SQC_VERSION}'")
            seen_version = True
        elif n is None:
            if len(tokens) != 2 or tokens[0] != "qubits" or not tokens[1].isdigit():
                raise InvalidInputError(f"line {lineno}: expected 'qubits <n>'")
            n = int(tokens[1])
        elif tokens[0] == "partition" and not gates and partition is None:
            if len(tokens) != 2:
                raise InvalidInputError(f"line {lineno}: expected 'partition <label>'")
            partition = parse_partition_label(tokens[1])
        else:
            gates.append(_parse_gate(tokens, lineno))
    if n is None:
        raise InvalidInputError("Circuit file has no 'qubits' header")
    if partition is not None and partition.n != n:
        raise InvalidInputError(f"Partition header covers {partition.n} qubits, circuit has {n}")
    return Circuit.of(n, gates), partition


def load_circuit(path: PathLike) -> Tuple[Circuit, Optional[PartitionSpec]]:
    circuit, partition = loads_circuit(read_text(path))
    logger.info(f"Loaded {len(circuit)} gates on {circuit.n} qubits from {path}")
    return circuit, partition


def save_circuit(path: PathLike, c: Circuit, partition: Optional[PartitionSpec] = None):
    write_text(path, dumps_circuit(c, partition))
