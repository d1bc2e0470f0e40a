"""Statevectors, density matrices and basis-index helpers.

Basis index bit q holds qubit q, so the rightmost character of a label or
bitstring is qubit 0.
"""

import logging
from dataclasses import dataclass
from typing import Literal

import numpy as np

from mrem.errors import ContractError, DimensionError

log = logging.getLogger(__name__)

NORM_TOLERANCE = 1e-10
PSD_TOLERANCE = 1e-8


def bitstring_to_int(bits: str) -> int:
    """Convert a bitstring such as `"00001"` to its basis index.

    Args:
        bits (str): Characters `0`/`1`, rightmost is qubit 0.

    Returns:
        int: The basis index.

    Raises:
        ValueError: If the string is empty or contains other characters.
    """
    if not bits or set(bits) - {"0", "1"}:
        raise ValueError(f"Invalid bitstring: {bits!r}")
    return int(bits, 2)


def int_to_bitstring(value: int, n_qubits: int) -> str:
    """Inverse of `bitstring_to_int` for a register of `n_qubits`."""
    if value < 0 or value >= 1 << n_qubits:
        raise DimensionError(1 << n_qubits, value, "basis index")
    return format(value, f"0{n_qubits}b") if n_qubits else ""


@dataclass(frozen=True, eq=False)
class QuantumState:
    """A pure statevector or a density matrix over `n_qubits`.

    Attributes:
        n_qubits (int): Register width.
        data (np.ndarray): Length 2**n vector (pure) or 2**n x 2**n matrix (mixed).
    """

    n_qubits: int
    data: np.ndarray

    def __post_init__(self) -> None:
        dim = 1 << self.n_qubits
        if self.data.shape not in {(dim,), (dim, dim)}:
            raise DimensionError(dim, self.data.shape[0], "state dimension")

    @property
    def form(self) -> Literal["pure", "mixed"]:
        return "pure" if self.data.ndim == 1 else "mixed"

    @property
    def dim(self) -> int:
        return 1 << self.n_qubits

    @classmethod
    def basis(cls, n_qubits: int, index: int) -> "QuantumState":
        """Computational basis state |index>."""
        if index < 0 or index >= 1 << n_qubits:
            raise DimensionError(1 << n_qubits, index, "basis index")
        vector = np.zeros(1 << n_qubits, dtype=complex)
        vector[index] = 1.0
        return cls(n_qubits, vector)

    @classmethod
    def from_vector(cls, vector: np.ndarray) -> "QuantumState":
        vector = np.asarray(vector, dtype=complex)
        n_qubits = int(vector.shape[0]).bit_length() - 1
        return cls(n_qubits, vector)

    def density_matrix(self) -> np.ndarray:
        if self.form == "mixed":
            return self.data
        return np.outer(self.data, self.data.conj())

    def probabilities(self) -> np.ndarray:
        if self.form == "pure":
            return np.abs(self.data) ** 2
        return np.real(np.diag(self.data))

    def amplitude(self, index: int) -> complex:
        if self.form == "mixed":
            raise ContractError("Amplitudes are only defined for pure states")
        return complex(self.data[index])

    def validate(self) -> None:
        """Check normalisation, and Hermiticity and positivity for mixed states.

        Raises:
            ContractError: If any invariant is violated.
        """
        if self.form == "pure":
            norm = float(np.vdot(self.data, self.data).real)
            if abs(norm - 1.0) > NORM_TOLERANCE:
                raise ContractError(f"Statevector norm {norm} is not 1")
            return
        rho = self.data
        trace = complex(np.trace(rho))
        if abs(trace - 1.0) > NORM_TOLERANCE:
            raise ContractError(f"Density matrix trace {trace} is not 1")
        if np.max(np.abs(rho - rho.conj().T)) > NORM_TOLERANCE:
            raise ContractError("Density matrix is not Hermitian")
        smallest = float(np.linalg.eigvalsh(rho)[0])
        if smallest < -PSD_TOLERANCE:
            raise ContractError(f"Density matrix has eigenvalue {smallest}")
