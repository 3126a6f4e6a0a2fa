"""Schmidt analysis: bipartite and iterated decompositions, decomposability, entropy, support compression"""

import logging
from collections import deque
from typing import List, Literal, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict

from .circuit import Circuit, LocalBlock, PartitionSpec, PureState, apply_circuit, apply_matrix
from .config import Settings, resolve
from .errors import InvalidInputError
from .linalg import complete_basis, svd

logger = logging.getLogger(__name__)

_MODEL_CONFIG = ConfigDict(arbitrary_types_allowed=True, frozen=True)


def _readonly(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr)
    arr.setflags(write=False)
    return arr


def split_amplitudes(vec: np.ndarray, qubits: Sequence[int], a: Sequence[int], b: Sequence[int]) -> np.ndarray:
    """Reshape a vector over `qubits` into a 2^|a| x 2^|b| matrix"""
    k = len(qubits)
    pos = {q: i for i, q in enumerate(qubits)}
    axes = [k - 1 - pos[q] for q in reversed(a)] + [k - 1 - pos[q] for q in reversed(b)]
    return np.transpose(np.asarray(vec).reshape([2] * k), axes).reshape(2 ** len(a), 2 ** len(b))


def join_amplitudes(mat: np.ndarray, qubits: Sequence[int], a: Sequence[int], b: Sequence[int]) -> np.ndarray:
    """Inverse of split_amplitudes: matrix back to a vector over `qubits`"""
    k = len(qubits)
    pos = {q: i for i, q in enumerate(qubits)}
    axes = [k - 1 - pos[q] for q in reversed(a)] + [k - 1 - pos[q] for q in reversed(b)]
    return np.transpose(np.asarray(mat).reshape([2] * k), np.argsort(axes)).reshape(-1)


class SchmidtDecomposition(BaseModel):
    """Σ_i w_i |left_i> ⊗ |right_i> over the qubit lists side_a | side_b

    Basis vectors are stored as columns; qubit lists give the local index order.
    """

    model_config = _MODEL_CONFIG

    weights: np.ndarray
    left_basis: np.ndarray
    right_basis: np.ndarray
    rank: int
    tolerance: float
    side_a: Tuple[int, ...]
    side_b: Tuple[int, ...]
    qubits: Tuple[int, ...]
    level: int = 0
    branch: Tuple[int, ...] = ()

    def reconstruct(self) -> np.ndarray:
        """Amplitudes over `qubits`, the index order of the decomposed vector"""
        mat = (self.left_basis * self.weights) @ self.right_basis.T
        return join_amplitudes(mat, self.qubits, self.side_a, self.side_b)


def _decompose_vector(vec: np.ndarray, qubits: Sequence[int], a: Sequence[int], b: Sequence[int],
                      cfg: Settings, level: int = 0, branch: Tuple[int, ...] = ()) -> SchmidtDecomposition:
    U, s, Vdag = svd(split_amplitudes(vec, qubits, a, b), cfg)
    rank = int(np.sum(s > cfg.rank_cutoff))
    return SchmidtDecomposition(
        weights=_readonly(s[:rank]),
        left_basis=_readonly(U[:, :rank]),
        right_basis=_readonly(Vdag[:rank, :].T),
        rank=rank,
        tolerance=cfg.rank_cutoff,
        side_a=tuple(a),
        side_b=tuple(b),
        qubits=tuple(qubits),
        level=level,
        branch=branch,
    )


def _check_cut(s: PureState, cut: PartitionSpec, parties: Optional[int] = 2):
    if cut.n != s.n:
        raise InvalidInputError(f"Partition covers {cut.n} qubits, state has {s.n}")
    if parties is not None and cut.m != parties:
        raise InvalidInputError(f"Expected a {parties}-party cut, got {cut.m} parties")


def schmidt_decompose(s: PureState, cut: PartitionSpec,
                      settings: Optional[Settings] = None) -> SchmidtDecomposition:
    """Schmidt decomposition of s across a two-party cut

    Args:
        s: Normalised state
        cut: Partition with exactly two parties (A = parties[0], B = parties[1])

    Returns:
        SchmidtDecomposition with weights above the rank cutoff
    """
    cfg = resolve(settings)
    _check_cut(s, cut)
    a, b = cut.parties
    return _decompose_vector(s.amplitudes, range(s.n), a, b, cfg)


def iterated_decompose(s: PureState, p: PartitionSpec,
                       settings: Optional[Settings] = None) -> List[SchmidtDecomposition]:
    """Nested decompositions: party 1 | rest, then party 2 | rest inside every branch, ...

    Returns:
        Breadth-first list; each entry carries its level and branch path
    """
    cfg = resolve(settings)
    _check_cut(s, p, parties=None)
    if p.m < 2:
        raise InvalidInputError("Iterated decomposition needs at least two parties")

    out: List[SchmidtDecomposition] = []
    queue = deque([(np.asarray(s.amplitudes), tuple(range(s.n)), 0, ())])
    while queue:
        vec, qubits, level, branch = queue.popleft()
        a = p.parties[level]
        b = tuple(q for party in p.parties[level + 1:] for q in party)
        dec = _decompose_vector(vec, qubits, a, b, cfg, level, branch)
        out.append(dec)
        if level + 2 < p.m:
            for i in range(dec.rank):
                queue.append((dec.right_basis[:, i], b, level + 1, branch + (i,)))
    logger.debug(f"Iterated decomposition over {p.label()}: level ranks {level_ranks(out)}")
    return out


def level_ranks(decomps: Sequence[SchmidtDecomposition]) -> Tuple[int, ...]:
    """Total number of Schmidt terms at each level"""
    if not decomps:
        return ()
    totals = [0] * (max(d.level for d in decomps) + 1)
    for d in decomps:
        totals[d.level] += d.rank
    return tuple(totals)


def rebuild_iterated(decomps: Sequence[SchmidtDecomposition]) -> np.ndarray:
    """Reassemble the amplitudes described by an iterated decomposition"""
    by_branch = {d.branch: d for d in decomps}

    def vector(d: SchmidtDecomposition) -> np.ndarray:
        right = np.array(d.right_basis)
        for i in range(d.rank):
            child = by_branch.get(d.branch + (i,))
            if child is not None:
                right[:, i] = vector(child)
        mat = (d.left_basis * d.weights) @ right.T
        return join_amplitudes(mat, d.qubits, d.side_a, d.side_b)

    return vector(by_branch[()])


class SchmidtDecomposableForm(BaseModel):
    """Σ_i w_i ⊗_j |basis_j[:, i]> with one orthonormal family per party"""

    model_config = _MODEL_CONFIG

    weights: np.ndarray
    bases: Tuple[np.ndarray, ...]
    parties: Tuple[Tuple[int, ...], ...]

    @property
    def rank(self) -> int:
        return len(self.weights)

    def reconstruct(self) -> np.ndarray:
        """Amplitudes in the global index order"""
        qubits = tuple(q for party in self.parties for q in party)
        total = np.zeros(2 ** len(qubits), dtype=complex)
        for i, w in enumerate(self.weights):
            term = np.ones(1, dtype=complex)
            for basis in reversed(self.bases):
                term = np.kron(term, basis[:, i])
            total += w * term
        return split_amplitudes(total, qubits, range(len(qubits)), ()).reshape(-1)


class DecomposabilityResult(BaseModel):
    model_config = _MODEL_CONFIG

    verdict: Literal["yes", "no", "indeterminate"]
    form: Optional[SchmidtDecomposableForm] = None
    check: Optional[str] = None
    reason: str = ""


def _product_factors(vec: np.ndarray, qubits: Tuple[int, ...], parties: Sequence[Tuple[int, ...]],
                     tol: float, cfg: Settings) -> Optional[List[np.ndarray]]:
    """Split a vector into one factor per party, or None if it is not a product"""
    factors = []
    rest_vec, rest_qubits = vec, qubits
    for j, party in enumerate(parties[:-1]):
        remaining = tuple(q for p in parties[j + 1:] for q in p)
        U, s, Vdag = svd(split_amplitudes(rest_vec, rest_qubits, party, remaining), cfg)
        if len(s) > 1 and s[1] > tol:
            return None
        factors.append(U[:, 0])
        rest_vec, rest_qubits = s[0] * Vdag[0, :], remaining
    factors.append(rest_vec)
    return factors


def _try_form(weights: np.ndarray, left: np.ndarray, right: np.ndarray, p: PartitionSpec,
              tol: float, cfg: Settings) -> Tuple[Optional[SchmidtDecomposableForm], str, str]:
    rest_parties = p.parties[1:]
    rest_qubits = tuple(q for party in rest_parties for q in party)
    per_party: List[List[np.ndarray]] = [[] for _ in rest_parties]
    for i in range(len(weights)):
        factors = _product_factors(right[:, i], rest_qubits, rest_parties, tol, cfg)
        if factors is None:
            return None, "product", f"term {i} does not factor across the remaining parties"
        for j, f in enumerate(factors):
            per_party[j].append(f)

    bases = [left]
    for j, vectors in enumerate(per_party):
        B = np.column_stack(vectors)
        err = np.max(np.abs(B.conj().T @ B - np.eye(B.shape[1])))
        if err > tol:
            return None, "orthonormal", f"party {j + 1} vectors are not orthonormal (error {err:.3e})"
        bases.append(B)

    form = SchmidtDecomposableForm(
        weights=_readonly(weights),
        bases=tuple(_readonly(b) for b in bases),
        parties=p.parties,
    )
    return form, "", ""


def _degenerate_clusters(weights: np.ndarray, tol: float) -> List[List[int]]:
    clusters, current = [], [0]
    for i in range(1, len(weights)):
        if weights[i - 1] - weights[i] <= tol:
            current.append(i)
        else:
            clusters.append(current)
            current = [i]
    clusters.append(current)
    return [c for c in clusters if len(c) > 1]


def _realign(weights, left, right, p: PartitionSpec, clusters, cfg: Settings):
    """Rotate each degenerate cluster into the eigenbasis of a fixed observable on party 2"""
    rest_qubits = tuple(q for party in p.parties[1:] for q in party)
    probe = p.parties[1]
    rng = np.random.default_rng(cfg.default_seed)
    dim = 2 ** len(probe)
    A = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    H = A + A.conj().T
    positions = [rest_qubits.index(q) for q in probe]
    applied = apply_matrix(right, H, positions, len(rest_qubits))

    left, right = np.array(left), np.array(right)
    for cluster in clusters:
        G = right[:, cluster].conj().T @ applied[:, cluster]
        _, R = np.linalg.eigh((G + G.conj().T) / 2)
        right[:, cluster] = right[:, cluster] @ R
        left[:, cluster] = left[:, cluster] @ R.conj()
    return left, right


def is_schmidt_decomposable(s: PureState, p: PartitionSpec, tol: Optional[float] = None,
                            settings: Optional[Settings] = None) -> DecomposabilityResult:
    """Decide whether s = Σ_i w_i ⊗_j |φ_j^i> with orthonormal families on every party

    Degenerate spectra get one re-alignment attempt inside each degenerate
    cluster; if that fails too the verdict is indeterminate.
    """
    cfg = resolve(settings)
    tol = cfg.orthonormality_tol if tol is None else tol
    _check_cut(s, p, parties=None)
    if p.m < 2:
        raise InvalidInputError("Decomposability needs at least two parties")

    rest = tuple(q for party in p.parties[1:] for q in party)
    top = _decompose_vector(s.amplitudes, range(s.n), p.parties[0], rest, cfg)
    weights, left, right = np.array(top.weights), np.array(top.left_basis), np.array(top.right_basis)

    form, check, reason = _try_form(weights, left, right, p, tol, cfg)
    clusters = _degenerate_clusters(weights, tol)
    if form is None and clusters:
        logger.debug(f"Re-aligning {len(clusters)} degenerate weight cluster(s)")
        left, right = _realign(weights, left, right, p, clusters, cfg)
        form, check, reason = _try_form(weights, left, right, p, tol, cfg)
        if form is None:
            logger.warning(f"Decomposability indeterminate: {reason}")
            return DecomposabilityResult(
                verdict="indeterminate", check=check,
                reason=f"degenerate Schmidt weights; {reason}",
            )
    if form is None:
        return DecomposabilityResult(verdict="no", check=check, reason=reason)

    err = float(np.max(np.abs(form.reconstruct() - s.amplitudes)))
    if err > tol:
        return DecomposabilityResult(
            verdict="no", check="reconstruction", reason=f"reconstruction error {err:.3e}"
        )
    return DecomposabilityResult(verdict="yes", form=form)


def reduced_density_matrix(s: PureState, qubits: Sequence[int]) -> np.ndarray:
    """Density matrix of the listed qubits (qubits[0] is bit 0)"""
    keep = list(qubits)
    if not keep or len(set(keep)) != len(keep) or any(q < 0 or q >= s.n for q in keep):
        raise InvalidInputError(f"Invalid qubit list {keep} for a {s.n}-qubit state")
    traced = [q for q in range(s.n) if q not in keep]
    M = split_amplitudes(s.amplitudes, range(s.n), keep, traced)
    return M @ M.conj().T


def entanglement_entropy(s: PureState, cut: PartitionSpec, settings: Optional[Settings] = None) -> float:
    """Von Neumann entropy of either side, in bits"""
    cfg = resolve(settings)
    _check_cut(s, cut)
    a, b = cut.parties
    probs = np.linalg.svd(split_amplitudes(s.amplitudes, range(s.n), a, b), compute_uv=False) ** 2
    probs = probs[probs > 0]
    logger.debug(f"Entropy over {cut.label()} from {len(probs)} nonzero weights (cutoff {cfg.rank_cutoff:g})")
    return float(-np.sum(probs * np.log2(probs)))


def active_qubits(rank: int) -> int:
    """⌈log2 rank⌉, the register width needed for `rank` Schmidt terms"""
    return max(int(rank) - 1, 0).bit_length()


def _reindex_rows(M: np.ndarray, src: Sequence[int], dst: Sequence[int]) -> np.ndarray:
    """Rows indexed over `src` (src[0] is bit 0) re-indexed over `dst`"""
    pos = {q: i for i, q in enumerate(src)}
    idx = np.arange(M.shape[0])
    old = np.zeros_like(idx)
    for i, q in enumerate(dst):
        old |= ((idx >> i) & 1) << pos[q]
    return M[old]


def compress_support(s: PureState, cut: PartitionSpec, side: Union[int, str],
                     settings: Optional[Settings] = None) -> Tuple[LocalBlock, PureState]:
    """Rotate one side's Schmidt support onto its ⌈log2 rank⌉ lowest-indexed qubits

    Args:
        side: 0/"A" for parties[0], 1/"B" for parties[1]

    Returns:
        (LocalBlock on that side, transformed state)
    """
    cfg = resolve(settings)
    index = {"A": 0, "B": 1, 0: 0, 1: 1}.get(side)
    if index is None:
        raise InvalidInputError(f"Side must be 0/'A' or 1/'B', got {side!r}")
    dec = schmidt_decompose(s, cut, cfg)
    basis = dec.left_basis if index == 0 else dec.right_basis
    qubits = tuple(sorted(cut.parties[index]))
    basis = _reindex_rows(basis, cut.parties[index], qubits)
    V = complete_basis(basis, 2 ** len(qubits), cfg)
    block = LocalBlock(party=index, qubits=qubits, matrix=V.conj().T)
    out = apply_circuit(Circuit(n=s.n, gates=(block,)), s, cfg)
    logger.debug(f"Compressed side {index} of {cut.label()} to {active_qubits(dec.rank)} active qubit(s)")
    return block, out
