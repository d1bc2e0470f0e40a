"""Jordan-Wigner images of fermionic operators with interleaved spin ordering.

Spin-orbital 2p is spatial orbital p with spin alpha and 2p+1 is the same
orbital with spin beta.
"""

import logging
from functools import reduce
from operator import add

from pydantic import BaseModel, ConfigDict, Field, PositiveInt, model_validator

from mrem.errors import DimensionError
from mrem.pauli import PauliSum, PauliTerm

log = logging.getLogger(__name__)


class OrbitalLayout(BaseModel):
    """Active-space layout: spatial orbitals and electrons per spin."""

    model_config = ConfigDict(frozen=True)

    n_spatial: PositiveInt
    n_alpha: int = Field(default=0, ge=0)
    n_beta: int = Field(default=0, ge=0)

    @model_validator(mode="after")
    def check_occupations(self) -> "OrbitalLayout":
        if self.n_alpha + self.n_beta > 2 * self.n_spatial:
            raise ValueError("n_alpha + n_beta exceeds 2 * n_spatial")
        if max(self.n_alpha, self.n_beta) > self.n_spatial:
            raise ValueError("more electrons of one spin than spatial orbitals")
        return self

    @property
    def n_qubits(self) -> int:
        return 2 * self.n_spatial

    @property
    def n_electrons(self) -> int:
        return self.n_alpha + self.n_beta


class SpinPenaltyConfig(BaseModel):
    """Weight of the spin penalty, in Hartree per unit of S^2."""

    model_config = ConfigDict(frozen=True, populate_by_name=True)

    lambda_: float = Field(default=0.0, ge=0.0, alias="lambda")


def _check_index(p: int, n: int) -> None:
    if not 0 <= p < n:
        raise DimensionError(n, p, "spin-orbital index")


def creation(p: int, n: int) -> PauliSum:
    """a_p^dagger = Z_0 ... Z_(p-1) (X_p - i Y_p) / 2."""
    _check_index(p, n)
    parity = (1 << p) - 1
    return PauliSum(
        n,
        [
            PauliTerm(n, 1 << p, parity, 0.5),
            PauliTerm(n, 1 << p, parity | 1 << p, -0.5j),
        ],
    )


def annihilation(p: int, n: int) -> PauliSum:
    return creation(p, n).adjoint()


def jw_excitation(p: int, q: int, n: int) -> PauliSum:
    """Qubit image of a_p^dagger a_q.

    For p == q this is the number operator (I - Z_p)/2. Otherwise the
    product carries the Z string between the two indices; the Hermitian
    part a_p^dagger a_q + h.c. is the real two-string combination
    (X Z..Z X + Y Z..Z Y)/2.

    Raises:
        DimensionError: If an index is outside the register.
    """
    _check_index(q, n)
    return creation(p, n) * annihilation(q, n)


def number_operator(n: int) -> PauliSum:
    return reduce(add, (jw_excitation(p, p, n) for p in range(n)), PauliSum(n))


def hf_bitstring(layout: OrbitalLayout) -> int:
    """Hartree-Fock determinant under the interleaved ordering.

    Alpha electrons fill even spin-orbitals and beta electrons odd ones, so
    a closed shell occupies the lowest n_e bits.
    """
    det = 0
    for p in range(layout.n_alpha):
        det |= 1 << (2 * p)
    for p in range(layout.n_beta):
        det |= 1 << (2 * p + 1)
    return det


def s_plus(layout: OrbitalLayout) -> PauliSum:
    n = layout.n_qubits
    return reduce(
        add,
        (jw_excitation(2 * p, 2 * p + 1, n) for p in range(layout.n_spatial)),
        PauliSum(n),
    )


def s_minus(layout: OrbitalLayout) -> PauliSum:
    return s_plus(layout).adjoint()


def s_z(layout: OrbitalLayout) -> PauliSum:
    n = layout.n_qubits
    terms = PauliSum(n)
    for p in range(layout.n_spatial):
        terms = terms + jw_excitation(2 * p, 2 * p, n) - jw_excitation(2 * p + 1, 2 * p + 1, n)
    return terms.scale(0.5)


def s_squared_operator(layout: OrbitalLayout) -> PauliSum:
    """S^2 = S_- S_+ + S_z (S_z + 1) as a Pauli sum."""
    sz = s_z(layout)
    total = s_minus(layout) * s_plus(layout) + sz * sz + sz
    log.debug(f"S^2 for {layout.n_spatial} spatial orbitals has {len(total)} terms")
    return total.real()


def add_spin_penalty(
    h: PauliSum, layout: OrbitalLayout, cfg: SpinPenaltyConfig
) -> PauliSum:
    """Return H + lambda S^2 on the untapered register.

    Raises:
        DimensionError: If `h` does not act on 2 * n_spatial qubits.
    """
    if h.n_qubits != layout.n_qubits:
        raise DimensionError(layout.n_qubits, h.n_qubits)
    if cfg.lambda_ == 0:
        return PauliSum(h.n_qubits, h.terms)
    log.info(f"Adding spin penalty with lambda={cfg.lambda_}")
    return h + s_squared_operator(layout).scale(cfg.lambda_)
