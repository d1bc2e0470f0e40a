"""Statevector and density-matrix simulation with gate-attached noise."""

import itertools
import json
import logging
from functools import cache
from math import exp, inf, sqrt
from pathlib import Path
from typing_extensions import Self

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from mrem.circuit import ARITY, Circuit, apply_matrix, decompose_circuit, gate_unitary
from mrem.errors import CapacityError, ContractError, DimensionError, NumericalContractError
from mrem.pauli import PauliSum, expectation
from mrem.states import QuantumState

log = logging.getLogger(__name__)

MAX_STATEVECTOR_QUBITS = 24
MAX_DENSITY_QUBITS = 10
CPTP_TOLERANCE = 1e-12
VARIANCE_TOLERANCE = 1e-10

_PAULIS = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.diag([1, -1]).astype(complex),
}


class NoiseModel(BaseModel):
    """Gate noise: depolarizing per gate class plus thermal relaxation.

    Times share one arbitrary unit; the defaults are in microseconds.
    """

    model_config = ConfigDict(frozen=True)

    depol_1q: float = Field(default=3e-4, ge=0.0, le=1.0)
    depol_2q: float = Field(default=1e-2, ge=0.0, le=1.0)
    t1: float = Field(default=100.0, gt=0.0)
    t2: float = Field(default=100.0, gt=0.0)
    dur_1q: float = Field(default=0.035, ge=0.0)
    dur_2q: float = Field(default=0.3, ge=0.0)
    seed: int = Field(default=0, ge=0, lt=2**64)

    @model_validator(mode="after")
    def check_t2(self) -> Self:
        if self.t2 > 2 * self.t1:
            raise ValueError(f"t2={self.t2} exceeds 2 * t1={2 * self.t1}")
        return self

    @classmethod
    def noiseless(cls, seed: int = 0) -> "NoiseModel":
        return cls(depol_1q=0.0, depol_2q=0.0, t1=inf, t2=inf, dur_1q=0.0, dur_2q=0.0, seed=seed)

    @classmethod
    def load(cls, path: Path) -> "NoiseModel":
        log.debug(f"Loading noise model from {path}")
        return cls.model_validate(json.loads(Path(path).read_text(encoding="utf8")))

    @property
    def is_noiseless(self) -> bool:
        return (
            self.depol_1q == 0
            and self.depol_2q == 0
            and relaxation_probabilities(self.t1, self.t2, self.dur_1q) == (0.0, 0.0)
            and relaxation_probabilities(self.t1, self.t2, self.dur_2q) == (0.0, 0.0)
        )


class ShotModel(BaseModel):
    """Finite-sampling model: `shots` measurements per energy estimate."""

    model_config = ConfigDict(frozen=True)

    shots: int = Field(default=10**7, ge=1)
    enabled: bool = True

    @classmethod
    def off(cls) -> "ShotModel":
        return cls(enabled=False)


class ShotNoise:
    """Counter-based standard normal stream.

    Draw k of stream s is a pure function of (seed, s, k), so independent
    streams can be consumed from different threads without changing results.
    """

    def __init__(self, seed: int, stream: int = 0) -> None:
        self.seed: int = seed
        self.stream: int = stream
        self._counter = itertools.count()

    def draw(self) -> float:
        k = next(self._counter)
        return float(np.random.default_rng([self.seed, self.stream, k]).standard_normal())


def relaxation_probabilities(t1: float, t2: float, duration: float) -> tuple[float, float]:
    """(gamma, lambda) for amplitude damping then pure dephasing over `duration`.

    Amplitude damping alone decays coherences by exp(-t/2T1); the dephasing
    supplies the rest of exp(-t/T2).
    """
    if duration == 0:
        return 0.0, 0.0
    gamma = 0.0 if t1 == inf else 1 - exp(-duration / t1)
    rate = (0.0 if t2 == inf else 1 / t2) - (0.0 if t1 == inf else 1 / (2 * t1))
    lam = 1 - exp(-duration * max(rate, 0.0))
    return gamma, lam


def amplitude_damping(gamma: float) -> list[np.ndarray]:
    return [
        np.array([[1, 0], [0, sqrt(1 - gamma)]], dtype=complex),
        np.array([[0, sqrt(gamma)], [0, 0]], dtype=complex),
    ]


def phase_damping(lam: float) -> list[np.ndarray]:
    return [
        sqrt(1 - lam) * np.eye(2, dtype=complex),
        sqrt(lam) * np.diag([1, 0]).astype(complex),
        sqrt(lam) * np.diag([0, 1]).astype(complex),
    ]


def thermal_relaxation(t1: float, t2: float, duration: float) -> list[np.ndarray]:
    """Kraus operators of amplitude damping followed by dephasing, cold bath."""
    gamma, lam = relaxation_probabilities(t1, t2, duration)
    return [p @ a for p in phase_damping(lam) for a in amplitude_damping(gamma)]


def depolarizing_kraus(p: float, n_qubits: int = 1) -> list[np.ndarray]:
    """Kraus form of rho -> (1 - p) rho + p I/d, d = 2**n_qubits."""
    d2 = 4**n_qubits
    kraus = []
    for chars in itertools.product("IXYZ", repeat=n_qubits):
        matrix = np.eye(1, dtype=complex)
        for char in chars:
            matrix = np.kron(matrix, _PAULIS[char])
        weight = 1 - p * (d2 - 1) / d2 if set(chars) == {"I"} else p / d2
        kraus.append(sqrt(weight) * matrix)
    return kraus


def is_cptp(kraus: list[np.ndarray], tol: float = CPTP_TOLERANCE) -> bool:
    total = sum(k.conj().T @ k for k in kraus)
    return bool(np.max(np.abs(total - np.eye(kraus[0].shape[0]))) <= tol)


def apply_unitary(
    rho: np.ndarray, u: np.ndarray, qubits: tuple[int, ...], n_qubits: int
) -> np.ndarray:
    """U rho U^dagger with U acting on `qubits`."""
    left = apply_matrix(rho, u, qubits, n_qubits)
    return apply_matrix(left.conj().T, u, qubits, n_qubits).conj().T


def apply_kraus(
    rho: np.ndarray, kraus: list[np.ndarray], qubits: tuple[int, ...], n_qubits: int
) -> np.ndarray:
    return sum(apply_unitary(rho, k, qubits, n_qubits) for k in kraus)


def depolarize(rho: np.ndarray, p: float, qubits: tuple[int, ...], n_qubits: int) -> np.ndarray:
    """(1 - p) rho + p (I/d on `qubits`) tensor the partial trace over them."""
    if p == 0:
        return rho
    tensor = rho.reshape((2,) * (2 * n_qubits))
    rows = [n_qubits - 1 - q for q in qubits]
    for i, axis in enumerate(sorted(rows, reverse=True)):
        remaining = 2 * n_qubits - 2 * i
        tensor = np.trace(tensor, axis1=axis, axis2=axis + remaining // 2)
    # Remaining axes are the kept rows then the kept columns; rebuild with I/d.
    kept = [a for a in range(n_qubits) if a not in rows]
    traced = tensor.reshape(1 << len(kept), 1 << len(kept))
    d = 1 << len(qubits)
    full = np.kron(traced, np.eye(d, dtype=complex) / d)
    order = kept + sorted(rows)
    mixed = full.reshape((2,) * (2 * n_qubits))
    inverse = np.argsort(order)
    mixed = mixed.transpose(list(inverse) + [n_qubits + i for i in inverse])
    return (1 - p) * rho + p * mixed.reshape(rho.shape)


@cache
def _relaxation_kraus(t1: float, t2: float, duration: float) -> tuple[np.ndarray, ...]:
    gamma, lam = relaxation_probabilities(t1, t2, duration)
    if gamma == 0 and lam == 0:
        return ()
    kraus = thermal_relaxation(t1, t2, duration)
    if not is_cptp(kraus):
        raise NumericalContractError("Thermal relaxation channel is not trace preserving")
    return tuple(kraus)


def _check_initial(c: Circuit, initial: int, limit: int) -> None:
    if not c.is_bound:
        raise ContractError("Circuit has unbound parameters")
    if c.n_qubits > limit:
        raise CapacityError(c.n_qubits, limit)
    if initial < 0 or initial >= 1 << c.n_qubits:
        raise DimensionError(1 << c.n_qubits, initial, "initial basis state")


def run_pure(c: Circuit, initial: int = 0) -> QuantumState:
    """U_c |initial> by statevector simulation.

    Raises:
        ContractError: If the circuit has unbound parameters.
    """
    _check_initial(c, initial, MAX_STATEVECTOR_QUBITS)
    n = c.n_qubits
    vector = QuantumState.basis(n, initial).data
    for op in c.ops:
        vector = apply_matrix(vector, gate_unitary(op), op.qubits, n)
    return QuantumState(n, vector)


def run_noisy(c: Circuit, initial: int, nm: NoiseModel) -> QuantumState:
    """Density-matrix simulation with noise after every primitive gate.

    The circuit is fully decomposed first. Each gate is followed by thermal
    relaxation on each of its qubits and then depolarizing noise of its class
    on all of its qubits.
    """
    _check_initial(c, initial, MAX_DENSITY_QUBITS)
    n = c.n_qubits
    rho = QuantumState.basis(n, initial).density_matrix()
    for op in decompose_circuit(c, full=True).ops:
        rho = apply_unitary(rho, gate_unitary(op), op.qubits, n)
        single = ARITY[op.kind] == 1
        duration = nm.dur_1q if single else nm.dur_2q
        relaxation = _relaxation_kraus(nm.t1, nm.t2, duration)
        if relaxation:
            for q in op.qubits:
                rho = apply_kraus(rho, list(relaxation), (q,), n)
        rho = depolarize(rho, nm.depol_1q if single else nm.depol_2q, op.qubits, n)
    drift = abs(complex(np.trace(rho)) - 1)
    if drift > 1e-10:
        raise NumericalContractError(f"Trace drifted by {drift:.3e} during noisy simulation")
    return QuantumState(n, rho)


def energy_with_shots(
    h: PauliSum,
    s: QuantumState,
    sm: ShotModel,
    noise: ShotNoise | int,
    h_squared: PauliSum | None = None,
) -> float:
    """Exact energy perturbed by a normal draw of width sigma / sqrt(shots).

    Args:
        h (PauliSum): Hermitian observable.
        s (QuantumState): State to measure.
        sm (ShotModel): Shot count, or disabled for the exact value.
        noise (ShotNoise | int): Normal stream, or a seed for a fresh stream.
        h_squared (PauliSum | None): Precomputed h * h.

    Raises:
        NumericalContractError: If the variance is negative beyond tolerance.
    """
    energy = expectation(h, s)
    if not sm.enabled:
        return energy
    square = h_squared if h_squared is not None else (h * h).real()
    variance = expectation(square, s) - energy**2
    if variance < -VARIANCE_TOLERANCE * max(1.0, h.one_norm() ** 2):
        raise NumericalContractError(f"Negative energy variance {variance:.3e}")
    stream = noise if isinstance(noise, ShotNoise) else ShotNoise(noise)
    g = stream.draw()
    return energy + g * sqrt(max(variance, 0.0) / sm.shots)
