"""straddle: circuit synthesis that counts gates crossing a qubit partition"""

__version__ = "1.0.0"

from .circuit import Circuit, PartitionSpec, PureState, apply_circuit, circuit_unitary, count_straddling
from .errors import InvalidInputError, ResourceLimitError, StraddleError, VerificationError

__all__ = [
    "__version__",
    "Circuit",
    "PartitionSpec",
    "PureState",
    "apply_circuit",
    "circuit_unitary",
    "count_straddling",
    "InvalidInputError",
    "ResourceLimitError",
    "StraddleError",
    "VerificationError",
]
