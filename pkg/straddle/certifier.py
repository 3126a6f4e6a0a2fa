"""Numerical search for the fewest straddling gates that reach a target state

Every placement of `budget` straddling slots between parties is enumerated
(up to party symmetries of the target) and the free local layers around them
are optimised for fidelity. A `not_found` verdict is heuristic, not a proof.
"""

import itertools
import logging
from typing import Dict, List, Literal, Optional, Tuple

import numpy as np
import scipy.linalg
import scipy.optimize
from pydantic import BaseModel, ConfigDict, Field

from .circuit import Circuit, Cnot, LocalBlock, PartitionSpec, PureState, TwoQubit, apply_matrix
from .config import Settings, resolve
from .errors import InvalidInputError, ResourceLimitError
from .linalg import pauli_basis

logger = logging.getLogger(__name__)

Slot = Tuple[int, int]

_PAULI = pauli_basis(1)
_INTERACTION = np.array([np.kron(P, P) for P in _PAULI])
_CNOT = Cnot(control=0, target=1).local_matrix()


class Template(BaseModel):
    """Straddling slots between local layers; slot (i, j) couples parties i < j"""

    model_config = ConfigDict(frozen=True)

    slots: Tuple[Slot, ...]

    @property
    def budget(self) -> int:
        return len(self.slots)


class CertificateResult(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    verdict: Literal["achievable", "not_found"]
    best_fidelity: float
    circuit: Optional[Circuit] = None
    restarts_used: int
    seed: int
    templates_tried: int
    best_template: Optional[Template] = None
    notes: List[str] = Field(default_factory=list)


def _permute_state(amps: np.ndarray, mapping: Dict[int, int]) -> np.ndarray:
    idx = np.arange(len(amps))
    target = np.zeros_like(idx)
    for q, image in mapping.items():
        target |= ((idx >> q) & 1) << image
    out = np.zeros_like(amps)
    out[target] = amps
    return out


def party_symmetries(target: PureState, p: PartitionSpec, tol: float = 1e-12) -> List[Tuple[int, ...]]:
    """Permutations of same-size parties that leave the target state unchanged"""
    found = []
    for sigma in itertools.permutations(range(p.m)):
        if any(p.sizes[j] != p.sizes[sigma[j]] for j in range(p.m)):
            continue
        mapping = {q: p.parties[sigma[j]][k] for j in range(p.m) for k, q in enumerate(p.parties[j])}
        moved = _permute_state(np.asarray(target.amplitudes), mapping)
        if abs(np.vdot(target.amplitudes, moved)) ** 2 >= 1 - tol:
            found.append(sigma)
    return found


def enumerate_templates(target: PureState, p: PartitionSpec, budget: int) -> List[Template]:
    """All slot sequences of length `budget`, one representative per symmetry class"""
    pairs = list(itertools.combinations(range(p.m), 2))
    symmetries = party_symmetries(target, p)
    seen, out = set(), []
    for slots in itertools.product(pairs, repeat=budget):
        images = [
            tuple(tuple(sorted((sigma[i], sigma[j]))) for i, j in slots)
            for sigma in symmetries
        ]
        canonical = min(images) if images else slots
        if canonical not in seen:
            seen.add(canonical)
            out.append(Template(slots=canonical))
    return out


def _local_unitary(params: np.ndarray, generators: np.ndarray) -> np.ndarray:
    if len(generators) == 3:
        norm = float(np.linalg.norm(params))
        H = np.tensordot(params, generators, axes=1)
        if norm < 1e-15:
            return np.eye(2, dtype=complex) + 1j * H
        return np.cos(norm) * np.eye(2) + 1j * np.sin(norm) / norm * H
    return scipy.linalg.expm(1j * np.tensordot(params, generators, axes=1))


def _slot_matrix(params: np.ndarray, gate: str) -> np.ndarray:
    if gate == "cnot":
        return _CNOT
    return scipy.linalg.expm(1j * np.tensordot(params, _INTERACTION, axes=1))


class _Ansatz:
    """Parameter layout and simulation of one template"""

    def __init__(self, template: Template, p: PartitionSpec, slot_gate: str):
        self.template = template
        self.p = p
        self.slot_gate = slot_gate
        self.generators = [pauli_basis(k) for k in p.sizes]
        self.layer_size = sum(len(g) for g in self.generators)
        self.slot_size = 0 if slot_gate == "cnot" else 3
        self.size = (template.budget + 1) * self.layer_size + template.budget * self.slot_size

    def _slot_qubits(self, slot: Slot) -> Tuple[int, int]:
        i, j = slot
        return self.p.parties[i][0], self.p.parties[j][0]

    def gates(self, x: np.ndarray) -> List:
        out, offset = [], 0
        for layer in range(self.template.budget + 1):
            for j, gens in enumerate(self.generators):
                U = _local_unitary(x[offset:offset + len(gens)], gens)
                out.append(LocalBlock(party=j, qubits=self.p.parties[j], matrix=U))
                offset += len(gens)
            if layer < self.template.budget:
                a, b = self._slot_qubits(self.template.slots[layer])
                if self.slot_gate == "cnot":
                    out.append(Cnot(control=a, target=b))
                else:
                    out.append(TwoQubit(q1=a, q2=b, matrix=_slot_matrix(x[offset:offset + 3], "su4")))
                    offset += 3
        return out

    def state(self, x: np.ndarray) -> np.ndarray:
        n = self.p.n
        psi = np.zeros((2 ** n, 1), dtype=complex)
        psi[0, 0] = 1.0
        offset = 0
        for layer in range(self.template.budget + 1):
            for j, gens in enumerate(self.generators):
                U = _local_unitary(x[offset:offset + len(gens)], gens)
                psi = apply_matrix(psi, U, self.p.parties[j], n)
                offset += len(gens)
            if layer < self.template.budget:
                slot_params = x[offset:offset + self.slot_size]
                offset += self.slot_size
                psi = apply_matrix(psi, _slot_matrix(slot_params, self.slot_gate),
                                   self._slot_qubits(self.template.slots[layer]), n)
        return psi[:, 0]


def certify_min_straddle(target: PureState, p: PartitionSpec, budget: int, restarts: int = 20,
                         seed: Optional[int] = None, slot_gate: Literal["cnot", "su4"] = "cnot",
                         settings: Optional[Settings] = None) -> CertificateResult:
    """Search for a `budget`-slot circuit preparing the target from |0...0>

    Args:
        target: State to reach
        p: Partition; at most certifier_max_party_qubits qubits per party
        budget: Number of straddling slots
        restarts: Random restarts per template
        seed: Base seed; each (template, restart) pair gets its own stream
        slot_gate: "cnot" slots, or "su4" canonical two-qubit interactions

    Returns:
        CertificateResult, achievable on the first template reaching the threshold
    """
    cfg = resolve(settings)
    seed = cfg.default_seed if seed is None else int(seed)
    if target.n != p.n:
        raise InvalidInputError(f"Partition covers {p.n} qubits, state has {target.n}")
    if p.n > cfg.certifier_max_qubits:
        raise ResourceLimitError(f"Certifier is capped at {cfg.certifier_max_qubits} qubits, got {p.n}")
    if max(p.sizes) > cfg.certifier_max_party_qubits:
        raise ResourceLimitError(
            f"Certifier parties are capped at {cfg.certifier_max_party_qubits} qubits, got {max(p.sizes)}"
        )
    if budget < 0 or restarts < 1:
        raise InvalidInputError("budget must be >= 0 and restarts >= 1")
    if slot_gate not in ("cnot", "su4"):
        raise InvalidInputError(f"Unknown slot gate {slot_gate!r}")
    if budget > 0 and p.m < 2:
        raise InvalidInputError("Straddling slots need at least two parties")

    templates = enumerate_templates(target, p, budget)
    goal = np.asarray(target.amplitudes)
    best_fid, best_template, used = 0.0, None, 0

    for t_index, template in enumerate(templates):
        ansatz = _Ansatz(template, p, slot_gate)

        def loss(x: np.ndarray) -> float:
            return 1.0 - abs(np.vdot(goal, ansatz.state(x))) ** 2

        for restart in range(restarts):
            rng = np.random.default_rng([seed, t_index, restart])
            x0 = rng.uniform(-np.pi, np.pi, size=ansatz.size)
            result = scipy.optimize.minimize(
                loss, x0, method="L-BFGS-B",
                options={"maxiter": cfg.certifier_max_iterations, "ftol": 1e-15, "gtol": 1e-12},
            )
            used += 1
            fid = 1.0 - float(result.fun)
            if fid > best_fid:
                best_fid, best_template = fid, template
            if fid >= 1 - cfg.certifier_achievable:
                circuit = Circuit(n=p.n, gates=tuple(ansatz.gates(result.x)))
                logger.info(f"Budget {budget} achievable with slots {template.slots} (fidelity {fid:.10f})")
                return CertificateResult(
                    verdict="achievable", best_fidelity=fid, circuit=circuit, restarts_used=used,
                    seed=seed, templates_tried=t_index + 1, best_template=template,
                )
        logger.info(f"Template {template.slots}: best fidelity so far {best_fid:.10f}")

    notes = ["not_found is a numerical search outcome, not a proof"]
    if best_fid >= 1 - cfg.certifier_not_found:
        notes.append(f"best fidelity within {cfg.certifier_not_found:g} of 1; increase restarts")
    logger.info(f"Budget {budget}: no template reached 1 - {cfg.certifier_achievable:g} (best {best_fid:.10f})")
    return CertificateResult(
        verdict="not_found", best_fidelity=best_fid, restarts_used=used, seed=seed,
        templates_tried=len(templates), best_template=best_template, notes=notes,
    )
