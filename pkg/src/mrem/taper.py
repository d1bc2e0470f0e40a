"""Z2 symmetry tapering.

Symmetries are found as the GF(2) kernel of the Hamiltonian check matrix
under the symplectic form. Each generator tau_i is paired with a
single-qubit Pauli sigma_i on its tapered qubit; the Clifford
U_i = (sigma_i + tau_i)/sqrt(2) maps tau_i onto sigma_i, after which sigma_i
is replaced by its sector eigenvalue and the qubit is dropped. Remaining
qubits keep their relative order.
"""

import logging
from dataclasses import dataclass
from math import sqrt

import numpy as np

from mrem.errors import DimensionError, SectorError, TaperingError
from mrem.pauli import PauliSum, PauliTerm, apply, commutes, multiply, symplectic_product
from mrem.states import QuantumState

log = logging.getLogger(__name__)

MAX_TAPER_QUBITS = 24


@dataclass(frozen=True)
class SymmetrySet:
    """Commuting Z2 generators with their tapered qubits and sector.

    Attributes:
        n_qubits (int): Width of the full register.
        generators (tuple[PauliTerm, ...]): Coefficient-1 Pauli strings.
        tapered_qubits (tuple[int, ...]): One distinct qubit per generator.
        sector (tuple[int, ...]): The +1/-1 eigenvalue chosen for each generator.
        pivot_chars (tuple[str, ...]): Pauli of sigma_i on its tapered qubit,
            `X` or `Z`.
    """

    n_qubits: int
    generators: tuple[PauliTerm, ...]
    tapered_qubits: tuple[int, ...]
    sector: tuple[int, ...]
    pivot_chars: tuple[str, ...]

    def pivot(self, i: int) -> PauliTerm:
        """The single-qubit partner sigma_i of generator i."""
        return PauliTerm.single(self.n_qubits, self.tapered_qubits[i], self.pivot_chars[i])

    def to_json(self) -> dict:
        return {
            "generators": [g.label for g in self.generators],
            "tapered_qubits": list(self.tapered_qubits),
            "sector": list(self.sector),
            "pivots": list(self.pivot_chars),
        }


def _to_vector(term: PauliTerm) -> np.ndarray:
    n = term.n_qubits
    bits = [(term.x_mask >> q) & 1 for q in range(n)] + [(term.z_mask >> q) & 1 for q in range(n)]
    return np.array(bits, dtype=np.uint8)


def _from_vector(vector: np.ndarray, n: int) -> PauliTerm:
    x_mask = sum(int(b) << q for q, b in enumerate(vector[:n]))
    z_mask = sum(int(b) << q for q, b in enumerate(vector[n:]))
    return PauliTerm(n, x_mask, z_mask)


def _gf2_null_space(matrix: np.ndarray) -> np.ndarray:
    """Basis of {v : matrix @ v = 0 mod 2} from reduced row echelon form.

    Pivots are taken at the lowest available column, and each basis vector
    has a single free variable set.
    """
    m = matrix.copy() % 2
    rows, cols = m.shape
    pivots: list[int] = []
    r = 0
    for c in range(cols):
        if r == rows:
            break
        hits = np.nonzero(m[r:, c])[0]
        if hits.size == 0:
            continue
        swap = r + hits[0]
        m[[r, swap]] = m[[swap, r]]
        for other in np.nonzero(m[:, c])[0]:
            if other != r:
                m[other] ^= m[r]
        pivots.append(c)
        r += 1
    free = [c for c in range(cols) if c not in pivots]
    basis = np.zeros((len(free), cols), dtype=np.uint8)
    for i, f in enumerate(free):
        basis[i, f] = 1
        for row, p in enumerate(pivots):
            basis[i, p] = m[row, f]
    return basis


def find_symmetries(h: PauliSum) -> list[PauliTerm]:
    """GF(2) basis of Pauli strings commuting with every term of `h`.

    The identity is never returned; the count equals the kernel dimension.
    """
    n = h.n_qubits
    if n > MAX_TAPER_QUBITS:
        raise DimensionError(MAX_TAPER_QUBITS, n)
    if not len(h):
        return [PauliTerm.single(n, q, c) for q in range(n) for c in "XZ"]
    # A string (a|b) commutes with term (x|z) iff x.b + z.a = 0, so each row
    # is the term with its halves swapped.
    check = np.array([np.roll(_to_vector(t), n) for t in h], dtype=np.uint8)
    generators = [_from_vector(v, n) for v in _gf2_null_space(check)]
    log.info(f"Found {len(generators)} Z2 symmetries on {n} qubits")
    return generators


def _commuting_part(generators: list[PauliTerm]) -> list[PauliTerm]:
    """Elements of the span that commute with the whole span."""
    if not generators:
        return []
    k = len(generators)
    gram = np.array(
        [[symplectic_product(a, b) for b in generators] for a in generators], dtype=np.uint8
    )
    if not gram.any():
        return list(generators)
    combos = _gf2_null_space(gram)
    centre = []
    for combo in combos:
        term = PauliTerm(generators[0].n_qubits, 0, 0)
        for i in range(k):
            if combo[i]:
                term = multiply(term, generators[i])
        centre.append(term.with_coeff(1.0))
    log.warning(
        f"Symmetry span is not abelian; keeping {len(centre)} of {k} generators"
    )
    return centre


def _assign_pivots(
    generators: list[PauliTerm],
) -> tuple[list[PauliTerm], list[int], list[str]]:
    """Pick a distinct qubit for every generator, lowest qubit first.

    After generator i is paired with sigma_i on qubit q_i, every other
    generator anticommuting with sigma_i is multiplied by generator i, so
    each sigma_i anticommutes with exactly one generator.
    """
    gens = [g.with_coeff(1.0) for g in generators]
    n = gens[0].n_qubits if gens else 0
    assigned: dict[int, int] = {}
    chars: dict[int, str] = {}
    for q in range(n):
        if len(assigned) == len(gens):
            break
        candidates = [
            i for i in range(len(gens)) if i not in assigned and gens[i].char_at(q) != "I"
        ]
        if not candidates:
            continue
        i = candidates[0]
        chars[i] = "Z" if gens[i].char_at(q) == "X" else "X"
        sigma = PauliTerm.single(n, q, chars[i])
        for j in range(len(gens)):
            if j != i and not commutes(gens[j], sigma):
                product = multiply(gens[j], gens[i])
                gens[j] = product.with_coeff(1.0)
        assigned[i] = q
    if len(assigned) != len(gens):
        raise TaperingError("Could not assign a distinct tapered qubit to every generator")
    order = sorted(range(len(gens)), key=lambda i: assigned[i])
    return [gens[i] for i in order], [assigned[i] for i in order], [chars[i] for i in order]


def sector_of_determinant(
    det: int, generators: list[PauliTerm] | tuple[PauliTerm, ...]
) -> list[int]:
    """Eigenvalue of every Z-type generator on the basis state |det>.

    Raises:
        SectorError: If |det> is not an eigenstate of some generator.
    """
    sector = []
    for g in generators:
        if det >= 1 << g.n_qubits:
            raise DimensionError(1 << g.n_qubits, det, "determinant")
        if g.x_mask:
            raise SectorError(det, f"not an eigenstate of {g.label}")
        parity = (g.z_mask & det).bit_count() & 1
        sign = -1 if parity else 1
        sector.append(sign if complex(g.coeff).real > 0 else -sign)
    return sector


def symmetry_set(
    h: PauliSum,
    generators: list[PauliTerm] | None = None,
    sector: list[int] | None = None,
    reference: int | None = None,
) -> SymmetrySet:
    """Assemble a `SymmetrySet` for `h`.

    Args:
        h (PauliSum): Source Hamiltonian.
        generators (list[PauliTerm] | None): Defaults to `find_symmetries(h)`.
        sector (list[int] | None): Explicit eigenvalues, in final generator order.
        reference (int | None): Determinant fixing the sector when `sector` is None.

    Raises:
        SectorError: If neither a sector nor a suitable reference is given.
        TaperingError: If a generator does not commute with `h`.
    """
    gens = find_symmetries(h) if generators is None else list(generators)
    for g in gens:
        for t in h:
            if not commutes(g, t):
                raise TaperingError(f"{g.label} does not commute with {t.label}")
    gens, qubits, chars = _assign_pivots(_commuting_part(gens))
    if sector is None and not gens:
        sector = []
    if sector is None:
        if reference is None:
            raise SectorError(0, "a sector or reference determinant is required")
        sector = sector_of_determinant(reference, gens)
    if len(sector) != len(gens) or any(s not in (1, -1) for s in sector):
        raise SectorError(reference or 0, f"invalid sector {sector} for {len(gens)} generators")
    sym = SymmetrySet(h.n_qubits, tuple(gens), tuple(qubits), tuple(sector), tuple(chars))
    log.info(f"Tapering qubits {sym.tapered_qubits} in sector {sym.sector}")
    return sym


def _conjugate(term: PauliTerm, sigma: PauliTerm, tau: PauliTerm) -> PauliTerm:
    """U P U with U = (sigma + tau)/sqrt(2), for sigma and tau anticommuting."""
    with_sigma, with_tau = commutes(term, sigma), commutes(term, tau)
    if with_sigma and with_tau:
        return term
    if not with_sigma and not with_tau:
        return term.with_coeff(-term.coeff)
    if with_sigma:
        return multiply(multiply(term, sigma), tau)
    return multiply(multiply(term, tau), sigma)


def _drop_qubits(mask: int, dropped: tuple[int, ...], n: int) -> int:
    out, position = 0, 0
    for q in range(n):
        if q in dropped:
            continue
        out |= ((mask >> q) & 1) << position
        position += 1
    return out


def clifford(sym: SymmetrySet) -> PauliSum:
    """The tapering Clifford prod_i (sigma_i + tau_i)/sqrt(2) as a Pauli sum."""
    n = sym.n_qubits
    total = PauliSum.identity(n)
    for i, tau in enumerate(sym.generators):
        factor = PauliSum(n, [sym.pivot(i).with_coeff(1 / sqrt(2)), tau.with_coeff(1 / sqrt(2))])
        total = total * factor
    return total


def taper_operator(h: PauliSum, sym: SymmetrySet) -> PauliSum:
    """Reduced operator on n - len(generators) qubits.

    Raises:
        TaperingError: If a term does not reduce to I or sigma_i on a tapered qubit.
    """
    n = h.n_qubits
    if n != sym.n_qubits:
        raise DimensionError(sym.n_qubits, n)
    if not sym.generators:
        return h
    dropped = sym.tapered_qubits
    reduced = []
    for term in h:
        for i, tau in enumerate(sym.generators):
            term = _conjugate(term, sym.pivot(i), tau)
        coeff = term.coeff
        for i, q in enumerate(dropped):
            char = term.char_at(q)
            if char == "I":
                continue
            if char != sym.pivot(i).char_at(q):
                raise TaperingError(f"Term {term.label} has {char} on tapered qubit {q}")
            coeff *= sym.sector[i]
        reduced.append(
            PauliTerm(
                n - len(dropped),
                _drop_qubits(term.x_mask, dropped, n),
                _drop_qubits(term.z_mask, dropped, n),
                coeff,
            )
        )
    result = PauliSum(n - len(dropped), reduced)
    log.info(f"Tapered {n} -> {result.n_qubits} qubits, {len(h)} -> {len(result)} terms")
    return result


def _check_sector(det: int, sym: SymmetrySet) -> None:
    if det >= 1 << sym.n_qubits:
        raise DimensionError(1 << sym.n_qubits, det, "determinant")
    if tuple(sector_of_determinant(det, sym.generators)) != sym.sector:
        raise SectorError(det, f"outside sector {sym.sector}")


def project_determinant(det: int, sym: SymmetrySet) -> int:
    """Reduced-register bitstring of |det> after the tapering Clifford.

    Only meaningful for Z-type generators, whose pivots are X; the tapered
    bits are dropped and the remaining bits keep their order.

    Raises:
        SectorError: If |det> is not in `sym.sector`.
    """
    _check_sector(det, sym)
    return _drop_qubits(det, sym.tapered_qubits, sym.n_qubits)


def projection_sign(det: int, sym: SymmetrySet) -> int:
    """Sign acquired by |det> under the Clifford.

    A tapered qubit that is 0 in `det` contributes its sector eigenvalue.
    """
    _check_sector(det, sym)
    sign = 1
    for s, q in zip(sym.sector, sym.tapered_qubits, strict=True):
        if not (det >> q) & 1:
            sign *= s
    return sign


def lift_state(reduced: QuantumState, sym: SymmetrySet) -> QuantumState:
    """Map a reduced-register statevector back to the full register.

    Each tapered qubit is set to the sigma_i eigenstate with eigenvalue
    s_i and the Clifford (its own inverse) is applied.
    """
    n = sym.n_qubits
    full = np.zeros(1 << n, dtype=complex)
    kept = [q for q in range(n) if q not in sym.tapered_qubits]
    for index, amp in enumerate(reduced.data):
        base = 0
        for position, q in enumerate(kept):
            base |= ((index >> position) & 1) << q
        branches = {base: amp}
        for i, q in enumerate(sym.tapered_qubits):
            s = sym.sector[i]
            pivot_is_x = sym.pivot(i).char_at(q) == "X"
            nxt: dict[int, complex] = {}
            for idx, a in branches.items():
                if pivot_is_x:
                    nxt[idx] = nxt.get(idx, 0) + a / sqrt(2)
                    nxt[idx | 1 << q] = nxt.get(idx | 1 << q, 0) + s * a / sqrt(2)
                else:
                    target = idx if s == 1 else idx | 1 << q
                    nxt[target] = nxt.get(target, 0) + a
            branches = nxt
        for idx, a in branches.items():
            full[idx] += a
    return QuantumState(n, apply(clifford(sym), full))
