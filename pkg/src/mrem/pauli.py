"""Pauli strings in symplectic form and coefficient-weighted Pauli sums.

A `PauliTerm` stores an x bitmask and a z bitmask; a qubit with both bits
set carries Y. Labels are written with qubit 0 as the rightmost character,
and basis indices use qubit 0 as the least-significant bit.
"""

import logging
from collections.abc import Iterable, Iterator
from dataclasses import dataclass
from pathlib import Path
from typing import TextIO

import numpy as np
import scipy.linalg

from mrem.errors import (
    CapacityError,
    ContractError,
    DimensionError,
    NumericalContractError,
    ParseError,
)
from mrem.states import QuantumState

log = logging.getLogger(__name__)

MAX_DENSE_QUBITS = 12
ZERO_TOLERANCE = 1e-14
HERMITIAN_TOLERANCE = 1e-10
IMAGINARY_TOLERANCE = 1e-10

_CHAR_TO_BITS = {"I": (0, 0), "X": (1, 0), "Z": (0, 1), "Y": (1, 1)}
_BITS_TO_CHAR = {bits: char for char, bits in _CHAR_TO_BITS.items()}
_I_POWERS = (1, 1j, -1, -1j)


@dataclass(frozen=True, slots=True)
class PauliTerm:
    """A single N-qubit Pauli string with a complex coefficient.

    Attributes:
        n_qubits (int): Register width.
        x_mask (int): Bit q set when qubit q carries X or Y.
        z_mask (int): Bit q set when qubit q carries Z or Y.
        coeff (complex): Coefficient of the string.
    """

    n_qubits: int
    x_mask: int
    z_mask: int
    coeff: complex = 1.0

    def __post_init__(self) -> None:
        if self.n_qubits < 0:
            raise DimensionError(0, self.n_qubits)
        limit = 1 << self.n_qubits
        if not (0 <= self.x_mask < limit and 0 <= self.z_mask < limit):
            raise DimensionError(self.n_qubits, max(self.x_mask, self.z_mask).bit_length())

    @classmethod
    def from_label(cls, label: str, coeff: complex = 1.0) -> "PauliTerm":
        """Build a term from a label such as `"XIZY"` (rightmost is qubit 0)."""
        x_mask = z_mask = 0
        for q, char in enumerate(reversed(label)):
            try:
                x, z = _CHAR_TO_BITS[char]
            except KeyError:
                raise ValueError(f"Invalid Pauli character {char!r}") from None
            x_mask |= x << q
            z_mask |= z << q
        return cls(len(label), x_mask, z_mask, coeff)

    @classmethod
    def single(cls, n_qubits: int, qubit: int, char: str, coeff: complex = 1.0) -> "PauliTerm":
        """Single-qubit Pauli `char` on `qubit` of an `n_qubits` register."""
        if not 0 <= qubit < n_qubits:
            raise DimensionError(n_qubits, qubit, "qubit index")
        x, z = _CHAR_TO_BITS[char]
        return cls(n_qubits, x << qubit, z << qubit, coeff)

    @property
    def key(self) -> tuple[int, int]:
        return self.x_mask, self.z_mask

    @property
    def label(self) -> str:
        return "".join(self.char_at(q) for q in reversed(range(self.n_qubits)))

    @property
    def weight(self) -> int:
        return (self.x_mask | self.z_mask).bit_count()

    @property
    def is_identity(self) -> bool:
        return not (self.x_mask or self.z_mask)

    def char_at(self, qubit: int) -> str:
        return _BITS_TO_CHAR[((self.x_mask >> qubit) & 1, (self.z_mask >> qubit) & 1)]

    def with_coeff(self, coeff: complex) -> "PauliTerm":
        return PauliTerm(self.n_qubits, self.x_mask, self.z_mask, coeff)

    def __str__(self) -> str:
        return f"{self.coeff} {self.label}"


def symplectic_product(a: PauliTerm, b: PauliTerm) -> int:
    """Symplectic form of two strings: 0 if they commute, 1 if they anticommute."""
    return ((a.x_mask & b.z_mask).bit_count() + (a.z_mask & b.x_mask).bit_count()) & 1


def commutes(a: PauliTerm, b: PauliTerm) -> bool:
    return symplectic_product(a, b) == 0


def multiply(a: PauliTerm, b: PauliTerm) -> PauliTerm:
    """Product `a @ b` with the phase tracked exactly.

    Each string is read as i^(x.z) X^x Z^z; moving Z^z(a) past X^x(b)
    contributes (-1)^(z_a . x_b).

    Raises:
        DimensionError: If the widths differ.
    """
    if a.n_qubits != b.n_qubits:
        raise DimensionError(a.n_qubits, b.n_qubits)
    x_mask = a.x_mask ^ b.x_mask
    z_mask = a.z_mask ^ b.z_mask
    k = (
        (a.x_mask & a.z_mask).bit_count()
        + (b.x_mask & b.z_mask).bit_count()
        - (x_mask & z_mask).bit_count()
        + 2 * (a.z_mask & b.x_mask).bit_count()
    )
    return PauliTerm(a.n_qubits, x_mask, z_mask, a.coeff * b.coeff * _I_POWERS[k % 4])


class PauliSum:
    """Normalised sum of Pauli terms over a fixed register.

    Duplicate strings are merged on construction and coefficients smaller
    than `ZERO_TOLERANCE` are dropped. Instances are treated as immutable.
    """

    __slots__ = ("_terms", "n_qubits")

    def __init__(self, n_qubits: int, terms: Iterable[PauliTerm] = ()) -> None:
        merged: dict[tuple[int, int], complex] = {}
        for term in terms:
            if term.n_qubits != n_qubits:
                raise DimensionError(n_qubits, term.n_qubits)
            merged[term.key] = merged.get(term.key, 0.0) + term.coeff
        self.n_qubits: int = n_qubits
        self._terms: dict[tuple[int, int], complex] = {
            key: complex(c) for key, c in merged.items() if abs(c) >= ZERO_TOLERANCE
        }

    @classmethod
    def identity(cls, n_qubits: int, coeff: complex = 1.0) -> "PauliSum":
        return cls(n_qubits, [PauliTerm(n_qubits, 0, 0, coeff)])

    @classmethod
    def from_labels(cls, pairs: Iterable[tuple[complex, str]]) -> "PauliSum":
        """Build a sum from `(coeff, label)` pairs; all labels share one width."""
        terms = [PauliTerm.from_label(label, coeff) for coeff, label in pairs]
        if not terms:
            raise ContractError("from_labels needs at least one term")
        return cls(terms[0].n_qubits, terms)

    @property
    def terms(self) -> tuple[PauliTerm, ...]:
        return tuple(
            PauliTerm(self.n_qubits, x, z, c) for (x, z), c in self._terms.items()
        )

    def coefficient(self, label: str) -> complex:
        key = PauliTerm.from_label(label).key
        return self._terms.get(key, 0.0)

    def __len__(self) -> int:
        return len(self._terms)

    def __iter__(self) -> Iterator[PauliTerm]:
        return iter(self.terms)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PauliSum):
            return NotImplemented
        return self.n_qubits == other.n_qubits and self._terms == other._terms

    def __hash__(self) -> int:
        return hash((self.n_qubits, frozenset(self._terms.items())))

    def isclose(self, other: "PauliSum", atol: float = 1e-12) -> bool:
        if self.n_qubits != other.n_qubits:
            return False
        keys = self._terms.keys() | other._terms.keys()
        return all(
            abs(self._terms.get(k, 0.0) - other._terms.get(k, 0.0)) <= atol for k in keys
        )

    def _check_width(self, other: "PauliSum") -> None:
        if self.n_qubits != other.n_qubits:
            raise DimensionError(self.n_qubits, other.n_qubits)

    def __add__(self, other: "PauliSum") -> "PauliSum":
        self._check_width(other)
        return PauliSum(self.n_qubits, [*self.terms, *other.terms])

    def __sub__(self, other: "PauliSum") -> "PauliSum":
        return self + (-other)

    def __neg__(self) -> "PauliSum":
        return self.scale(-1.0)

    def scale(self, factor: complex) -> "PauliSum":
        return PauliSum(self.n_qubits, [t.with_coeff(t.coeff * factor) for t in self])

    def __mul__(self, other: "PauliSum | PauliTerm | complex | float") -> "PauliSum":
        if isinstance(other, PauliTerm):
            other = PauliSum(other.n_qubits, [other])
        if isinstance(other, PauliSum):
            self._check_width(other)
            return PauliSum(
                self.n_qubits, [multiply(a, b) for a in self for b in other]
            )
        return self.scale(other)

    def __rmul__(self, other: complex | float) -> "PauliSum":
        return self.scale(other)

    def adjoint(self) -> "PauliSum":
        return PauliSum(self.n_qubits, [t.with_coeff(t.coeff.conjugate()) for t in self])

    def is_hermitian(self, tol: float = HERMITIAN_TOLERANCE) -> bool:
        # Pauli strings are self-adjoint, so only the coefficients matter.
        return all(abs(c.imag) <= tol for c in self._terms.values())

    def one_norm(self) -> float:
        return float(sum(abs(c) for c in self._terms.values()))

    def real(self) -> "PauliSum":
        """Drop imaginary parts of the coefficients (for near-Hermitian sums)."""
        return PauliSum(self.n_qubits, [t.with_coeff(t.coeff.real) for t in self])

    def __repr__(self) -> str:
        return f"PauliSum(n_qubits={self.n_qubits}, terms={len(self)})"


def commutator(a: PauliSum, b: PauliSum) -> PauliSum:
    return a * b - b * a


def _check_dense_capacity(n_qubits: int) -> None:
    if n_qubits > MAX_DENSE_QUBITS:
        raise CapacityError(n_qubits, MAX_DENSE_QUBITS)


def _term_action(term: PauliTerm, indices: np.ndarray) -> np.ndarray:
    """Phases of P|j> = phase_j |j ^ x_mask> for every basis index j."""
    parity = np.bitwise_count(indices & term.z_mask) & 1
    return term.coeff * _I_POWERS[(term.x_mask & term.z_mask).bit_count() % 4] * (
        1 - 2 * parity.astype(np.int8)
    )


def to_dense(h: PauliSum) -> np.ndarray:
    """Dense 2**n x 2**n matrix of `h` with qubit 0 as the least-significant slot.

    Raises:
        CapacityError: Above `MAX_DENSE_QUBITS`.
    """
    _check_dense_capacity(h.n_qubits)
    dim = 1 << h.n_qubits
    indices = np.arange(dim)
    matrix = np.zeros((dim, dim), dtype=complex)
    for term in h:
        matrix[indices ^ term.x_mask, indices] += _term_action(term, indices)
    return matrix


def apply(h: PauliSum, vector: np.ndarray) -> np.ndarray:
    """Matrix-free product `h @ vector`."""
    dim = 1 << h.n_qubits
    if vector.shape != (dim,):
        raise DimensionError(dim, vector.shape[0], "vector length")
    indices = np.arange(dim)
    out = np.zeros(dim, dtype=complex)
    for term in h:
        out[indices ^ term.x_mask] += _term_action(term, indices) * vector
    return out


def expectation(h: PauliSum, psi: QuantumState) -> float:
    """Expectation value <psi|h|psi> or tr(rho h), evaluated term by term.

    Args:
        h (PauliSum): Hermitian observable.
        psi (QuantumState): Normalised pure or mixed state.

    Returns:
        float: The real expectation value.

    Raises:
        ContractError: If `h` is not Hermitian.
        DimensionError: If the widths differ.
        NumericalContractError: If the imaginary residue is too large.
    """
    if h.n_qubits != psi.n_qubits:
        raise DimensionError(h.n_qubits, psi.n_qubits)
    if not h.is_hermitian():
        raise ContractError("expectation requires a Hermitian operator")
    indices = np.arange(psi.dim)
    total = 0j
    for term in h:
        action = _term_action(term, indices)
        if psi.form == "pure":
            total += np.sum(psi.data[indices ^ term.x_mask].conj() * action * psi.data)
        else:
            total += np.sum(psi.data[indices, indices ^ term.x_mask] * action)
    if abs(total.imag) > IMAGINARY_TOLERANCE * max(1.0, h.one_norm()):
        raise NumericalContractError(f"Imaginary residue {total.imag:.3e} in expectation")
    return float(total.real)


def eigenvalues(h: PauliSum) -> np.ndarray:
    """Full sorted spectrum of a Hermitian sum."""
    return scipy.linalg.eigvalsh(to_dense(h))


def exact_ground_state(h: PauliSum) -> tuple[float, QuantumState]:
    """Lowest eigenpair by dense diagonalisation.

    The eigenvector is fixed up to phase so that its largest-magnitude
    amplitude is real and positive.

    Raises:
        ContractError: If `h` is not Hermitian.
        CapacityError: Above `MAX_DENSE_QUBITS`.
    """
    if not h.is_hermitian():
        raise ContractError("exact_ground_state requires a Hermitian operator")
    matrix = to_dense(h)
    values, vectors = scipy.linalg.eigh(matrix, subset_by_index=[0, 0])
    vector = vectors[:, 0]
    pivot = vector[np.argmax(np.abs(vector))]
    vector = vector * (abs(pivot) / pivot)
    log.debug(f"Ground energy {values[0]:.10f} for {h.n_qubits} qubits")
    return float(values[0]), QuantumState(h.n_qubits, vector)


def parse_pauli_sum(text: str | TextIO) -> PauliSum:
    """Parse the Hamiltonian text format.

    One term per line as `<real> [<imag>] <label>`; `#` starts a comment.
    The label length fixes the register width. Duplicate labels are merged.

    Raises:
        ParseError: For a malformed line, carrying its 1-based line number.
    """
    lines = text.splitlines() if isinstance(text, str) else text.read().splitlines()
    terms: list[PauliTerm] = []
    width: int | None = None
    for line_number, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        if len(tokens) not in (2, 3):
            raise ParseError(line_number, f"expected 2 or 3 fields, got {len(tokens)}")
        *numbers, label = tokens
        try:
            values = [float(n) for n in numbers]
        except ValueError:
            raise ParseError(line_number, f"non-numeric coefficient in {line!r}") from None
        try:
            term = PauliTerm.from_label(label, complex(*values))
        except ValueError as e:
            raise ParseError(line_number, str(e)) from None
        if width is None:
            width = term.n_qubits
        elif term.n_qubits != width:
            raise ParseError(
                line_number, f"label length {term.n_qubits} differs from {width}"
            )
        terms.append(term)
    if width is None:
        log.warning("Parsed a Pauli sum with zero terms")
        return PauliSum(0)
    return PauliSum(width, terms)


def serialize_pauli_sum(h: PauliSum) -> str:
    """Text form of `h`, sorted by (z_mask, x_mask), 17 significant digits."""
    lines = []
    for term in sorted(h, key=lambda t: (t.z_mask, t.x_mask)):
        c = term.coeff
        if c.imag:
            lines.append(f"{c.real:.17g} {c.imag:.17g} {term.label}")
        else:
            lines.append(f"{c.real:.17g} {term.label}")
    return "\n".join(lines) + ("\n" if lines else "")


def load_pauli_sum(path: Path) -> PauliSum:
    log.info(f"Reading Hamiltonian from '{path}'")
    with path.open(encoding="utf8") as f:
        return parse_pauli_sum(f)


def save_pauli_sum(h: PauliSum, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(serialize_pauli_sum(h), encoding="utf8")
    log.info(f"Wrote {len(h)} terms to '{path}'")
