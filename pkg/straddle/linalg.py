"""Dense complex linear algebra kernels: SVD, CS decomposition, demultiplexing, basis completion"""

import logging
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.linalg

from .config import Settings, resolve
from .errors import InvalidInputError

logger = logging.getLogger(__name__)

_PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
_PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)


def as_matrix(M, name: str = "matrix") -> np.ndarray:
    """Coerce input to a finite complex128 2-D array

    Raises:
        InvalidInputError: if the input is not 2-D or has NaN/Inf entries
    """
    try:
        arr = np.array(M, dtype=np.complex128)
    except (TypeError, ValueError) as e:
        raise InvalidInputError(f"{name} is not numeric: {e}") from e
    if arr.ndim != 2:
        raise InvalidInputError(f"{name} must be 2-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} has non-finite entries")
    return arr


def is_unitary(U: np.ndarray, tol: float = 1e-10) -> bool:
    """Max-norm check of U†U − I"""
    if U.ndim != 2 or U.shape[0] != U.shape[1]:
        return False
    err = np.max(np.abs(U.conj().T @ U - np.eye(U.shape[0])), initial=0.0)
    return bool(err <= tol)


def require_unitary(U, name: str = "matrix", settings: Optional[Settings] = None) -> np.ndarray:
    """Validate and return U as a unitary complex matrix"""
    cfg = resolve(settings)
    arr = as_matrix(U, name)
    if not is_unitary(arr, cfg.unitarity_tol):
        raise InvalidInputError(f"{name} is not unitary within {cfg.unitarity_tol:g}")
    return arr


def rotation(axis: str, theta: float) -> np.ndarray:
    """R_axis(theta) = exp(-i theta P / 2) for P in {Y, Z}"""
    if axis == "y":
        c, s = np.cos(theta / 2), np.sin(theta / 2)
        return np.array([[c, -s], [s, c]], dtype=complex)
    if axis == "z":
        return np.diag([np.exp(-0.5j * theta), np.exp(0.5j * theta)])
    raise InvalidInputError(f"Unknown rotation axis: {axis!r}")


def dominant_index(vec: np.ndarray) -> int:
    """Row index of the largest-magnitude entry (lowest index on ties)"""
    return int(np.argmax(np.abs(vec)))


def _tie_order(values: np.ndarray, keys: np.ndarray, tol: float) -> np.ndarray:
    """Stable order that keeps `values` groups (equal within tol) sorted by `keys`"""
    order = np.arange(len(values))
    start = 0
    while start < len(values):
        stop = start + 1
        while stop < len(values) and abs(values[stop] - values[start]) <= tol:
            stop += 1
        if stop - start > 1:
            block = order[start:stop]
            order[start:stop] = block[np.argsort(keys[block], kind="stable")]
        start = stop
    return order


def svd(M, settings: Optional[Settings] = None) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Full singular value decomposition with reproducible column phases

    Args:
        M: Finite complex matrix

    Returns:
        (U, s, Vdag) with U, Vdag square unitaries, s descending and
        M = U[:, :k] @ diag(s) @ Vdag[:k, :]
    """
    cfg = resolve(settings)
    A = as_matrix(M)
    U, s, Vdag = np.linalg.svd(A, full_matrices=True)
    k = len(s)

    keys = np.array([dominant_index(U[:, i]) for i in range(k)])
    order = _tie_order(s, keys, cfg.rank_cutoff)
    U[:, :k] = U[:, order]
    Vdag[:k, :] = Vdag[order, :]
    s = s[order]

    # Dominant component of each left vector made real positive; partner row absorbs the phase
    for i in range(U.shape[1]):
        j = dominant_index(U[:, i])
        if abs(U[j, i]) == 0:
            continue
        phase = U[j, i] / abs(U[j, i])
        U[:, i] *= np.conj(phase)
        if i < k:
            Vdag[i, :] *= phase
    for i in range(k, Vdag.shape[0]):
        j = dominant_index(Vdag[i, :])
        if abs(Vdag[i, j]) > 0:
            Vdag[i, :] *= np.conj(Vdag[i, j] / abs(Vdag[i, j]))
    return U, s, Vdag


def cs_matrix(theta: Sequence[float]) -> np.ndarray:
    """Block cosine-sine core [[C, -S], [S, C]]"""
    theta = np.asarray(theta, dtype=float)
    C, S = np.diag(np.cos(theta)), np.diag(np.sin(theta))
    return np.block([[C, -S], [S, C]]).astype(complex)


def cs_decompose(U, settings: Optional[Settings] = None):
    """Cosine-sine decomposition of an even-dimension unitary

    U = (L1 ⊕ L2) · CS(theta) · (R1 ⊕ R2), theta in [0, π/2].

    Returns:
        (L1, L2, theta, R1, R2)
    """
    cfg = resolve(settings)
    A = require_unitary(U, "cs_decompose input", cfg)
    dim = A.shape[0]
    if dim % 2:
        raise InvalidInputError(f"cs_decompose needs an even dimension, got {dim}")
    half = dim // 2
    (L1, L2), theta, (R1, R2) = scipy.linalg.cossin(A, p=half, q=half, separate=True)
    theta = np.clip(np.asarray(theta, dtype=float), 0.0, np.pi / 2)
    return L1, L2, theta, R1, R2


def demultiplex(U1, U2, settings: Optional[Settings] = None):
    """Rewrite U1 ⊕ U2 as (I ⊗ V)(D ⊕ D*)(I ⊗ W)

    Uses the complex Schur form of U1·U2† (normal, so the form is diagonal).
    Eigenphases are sorted ascending in (-π, π]; ties fall back to the lowest
    dominant row index of the eigenvector.

    Returns:
        (V, d, W) with U1 = V diag(d) W and U2 = V diag(d*) W
    """
    cfg = resolve(settings)
    A = require_unitary(U1, "first block", cfg)
    B = require_unitary(U2, "second block", cfg)
    if A.shape != B.shape:
        raise InvalidInputError(f"Block sizes differ: {A.shape} vs {B.shape}")

    T, V = scipy.linalg.schur(A @ B.conj().T, output="complex")
    angles = np.angle(np.diag(T))
    angles[angles <= -np.pi + 1e-12] = np.pi

    keys = np.array([dominant_index(V[:, i]) for i in range(V.shape[1])])
    order = np.lexsort((keys, np.round(angles, 9)))
    V, angles = V[:, order], angles[order]

    d = np.exp(0.5j * angles)
    W = np.diag(d) @ V.conj().T @ B
    return V, d, W


def complete_basis(cols: Union[np.ndarray, List[np.ndarray]], dim: int,
                   settings: Optional[Settings] = None) -> np.ndarray:
    """Extend orthonormal columns to a dim×dim unitary

    The inputs are re-orthonormalised (polar factor) and the remaining columns
    come from a Householder QR of the input block, so the output is fixed by
    the input alone.

    Args:
        cols: Orthonormal vectors of length dim (list or dim×k array)
        dim: Target dimension

    Returns:
        Unitary whose first k columns are the inputs
    """
    cfg = resolve(settings)
    if isinstance(cols, np.ndarray) and cols.ndim == 2:
        Q = cols.astype(np.complex128)
    elif len(cols) == 0:
        return np.eye(dim, dtype=complex)
    else:
        Q = np.column_stack([np.asarray(c, dtype=np.complex128) for c in cols])
    if Q.shape[0] != dim:
        raise InvalidInputError(f"Vectors have length {Q.shape[0]}, expected {dim}")
    k = Q.shape[1]
    if k > dim:
        raise InvalidInputError(f"{k} vectors cannot fit in dimension {dim}")
    if k == 0:
        return np.eye(dim, dtype=complex)
    if not np.all(np.isfinite(Q)):
        raise InvalidInputError("Basis vectors have non-finite entries")

    gram_err = np.max(np.abs(Q.conj().T @ Q - np.eye(k)))
    if gram_err > cfg.orthonormality_tol:
        raise InvalidInputError(
            f"Vectors are not orthonormal (error {gram_err:.3e} > {cfg.orthonormality_tol:g})"
        )

    u, _, vh = np.linalg.svd(Q, full_matrices=False)
    Q = u @ vh
    if k == dim:
        return Q
    full, _ = np.linalg.qr(Q, mode="complete")
    return np.hstack([Q, full[:, k:]])


def operator_distance(A: np.ndarray, B: np.ndarray) -> float:
    """Max-norm distance between A and B after removing the best global phase"""
    overlap = np.vdot(A, B)
    phase = overlap / abs(overlap) if abs(overlap) > 1e-300 else 1.0
    return float(np.max(np.abs(B - phase * A), initial=0.0))


def pauli_basis(num_qubits: int) -> np.ndarray:
    """Traceless Hermitian generators: all non-identity Pauli strings"""
    singles = [np.eye(2, dtype=complex), np.array([[0, 1], [1, 0]], dtype=complex), _PAULI_Y, _PAULI_Z]
    mats = [np.eye(1, dtype=complex)]
    for _ in range(num_qubits):
        mats = [np.kron(m, p) for m in mats for p in singles]
    return np.array(mats[1:])
