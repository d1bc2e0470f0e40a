"""Multireference state preparation from Givens-rotation templates.

A template is a circuit over {X, CX, G, CG, G2, CG2} with symbolic angle
slots, applied to the reference determinant. Angles are solved so that the
prepared amplitudes match a short list of determinant coefficients.
"""

import itertools
import json
import logging
from dataclasses import dataclass, field
from math import asin, atan2, sqrt
from pathlib import Path

import numpy as np
from pydantic import BaseModel, Field

from mrem.circuit import Circuit, GateKind, apply_matrix, gate_derivative, gate_unitary, x_layer
from mrem.errors import ContractError, SolverError, TemplateMismatchError
from mrem.sim import run_pure
from mrem.states import QuantumState, bitstring_to_int, int_to_bitstring
from mrem.taper import SymmetrySet, project_determinant, projection_sign

log = logging.getLogger(__name__)

MAX_COMPONENTS = 4
NORMALISATION_TOLERANCE = 1e-3
AMPLITUDE_TOLERANCE = 1e-8
MAX_ITERATIONS = 200
TEMPLATE_KINDS = frozenset(
    {GateKind.X, GateKind.CX, GateKind.G, GateKind.CG, GateKind.G2, GateKind.CG2}
)


class ComponentSpec(BaseModel):
    det: str
    coeff: float


class MRTargetFile(BaseModel):
    """JSON schema of an MR target file; the reference is the first component."""

    n_qubits: int = Field(ge=1)
    reference: str
    components: list[ComponentSpec] = Field(min_length=1)
    tapered: bool = False


@dataclass(frozen=True)
class MRTarget:
    """Truncated multireference state: determinants and real coefficients.

    Attributes:
        n_qubits (int): Register width, possibly after tapering.
        reference (int): Reference determinant, always the first component.
        components (tuple[tuple[int, float], ...]): Determinants with their
            renormalised coefficients; the reference coefficient is non-negative.
        tapered (bool): Whether the register has been tapered, in which case
            Hamming weight need not be conserved.
    """

    n_qubits: int
    reference: int
    components: tuple[tuple[int, float], ...]
    tapered: bool = False

    def __post_init__(self) -> None:
        dets = [det for det, _ in self.components]
        if not 1 <= len(dets) <= MAX_COMPONENTS:
            raise ContractError(
                f"MR target needs 1 to {MAX_COMPONENTS} components, got {len(dets)}"
            )
        if len(set(dets)) != len(dets):
            raise ContractError("MR target determinants must be distinct")
        if dets[0] != self.reference:
            raise ContractError("The reference must be the first MR component")
        for det in dets:
            int_to_bitstring(det, self.n_qubits)
        coeffs = np.array([c for _, c in self.components], dtype=float)
        norm = float(np.sum(coeffs**2))
        if abs(norm - 1) > NORMALISATION_TOLERANCE:
            raise ContractError(f"MR coefficients have squared norm {norm:.6f}, expected 1")
        coeffs /= sqrt(norm)
        if coeffs[0] < 0:
            coeffs = -coeffs
        object.__setattr__(
            self, "components", tuple(zip(dets, (float(c) for c in coeffs), strict=True))
        )

    @property
    def determinants(self) -> list[int]:
        return [det for det, _ in self.components]

    @property
    def coefficients(self) -> np.ndarray:
        return np.array([c for _, c in self.components])

    def truncate(self, k: int) -> "MRTarget":
        """Keep the reference and the k - 1 largest other components."""
        if k < 1:
            raise ContractError(f"Cannot truncate to {k} components")
        ranked = sorted(self.components[1:], key=lambda item: -abs(item[1]))
        kept = (self.components[0], *ranked[: k - 1])
        norm = sqrt(sum(c * c for _, c in kept))
        return MRTarget(
            self.n_qubits, self.reference, tuple((d, c / norm) for d, c in kept), self.tapered
        )

    def statevector(self) -> QuantumState:
        vector = np.zeros(1 << self.n_qubits, dtype=complex)
        for det, coeff in self.components:
            vector[det] = coeff
        return QuantumState(self.n_qubits, vector)

    def to_json(self) -> dict:
        return {
            "n_qubits": self.n_qubits,
            "reference": int_to_bitstring(self.reference, self.n_qubits),
            "components": [
                {"det": int_to_bitstring(d, self.n_qubits), "coeff": c} for d, c in self.components
            ],
            "tapered": self.tapered,
        }

    @classmethod
    def from_json(cls, data: dict) -> "MRTarget":
        spec = MRTargetFile.model_validate(data)
        components = tuple((bitstring_to_int(c.det), c.coeff) for c in spec.components)
        return cls(spec.n_qubits, bitstring_to_int(spec.reference), components, spec.tapered)

    @classmethod
    def load(cls, path: Path) -> "MRTarget":
        log.debug(f"Loading MR target from {path}")
        return cls.from_json(json.loads(Path(path).read_text(encoding="utf8")))


@dataclass(frozen=True)
class PrepTemplate:
    """Preparation circuit with symbolic angle slots, applied to the reference."""

    circuit: Circuit
    name: str = ""

    def __post_init__(self) -> None:
        if bad := sorted({str(op.kind) for op in self.circuit.ops} - set(TEMPLATE_KINDS)):
            raise ContractError(f"Template contains unsupported gate(s): {', '.join(bad)}")

    @property
    def slot_count(self) -> int:
        return self.circuit.n_params

    @classmethod
    def load(cls, path: Path) -> "PrepTemplate":
        return cls(Circuit.load(path), Path(path).stem)


@dataclass
class PreparationReport:
    """Outcome of comparing a prepared state with an MR target."""

    amplitude_errors: dict[str, float]
    leakage: float
    overlap: float
    weights: list[int]
    number_conserved: bool | None
    tolerance: float = 5e-4
    notices: list[str] = field(default_factory=list)

    @property
    def max_amplitude_error(self) -> float:
        return max(self.amplitude_errors.values(), default=0.0)

    @property
    def ok(self) -> bool:
        return self.max_amplitude_error <= self.tolerance and self.leakage <= self.tolerance

    def to_json(self) -> dict:
        return {
            "amplitude_errors": self.amplitude_errors,
            "max_amplitude_error": self.max_amplitude_error,
            "leakage": self.leakage,
            "overlap": self.overlap,
            "weights": self.weights,
            "number_conserved": self.number_conserved,
            "ok": self.ok,
            "notices": self.notices,
        }


def reachable_support(template: PrepTemplate, reference: int) -> set[int]:
    """Determinants reachable from `reference` for generic angles."""
    support = {reference}
    for op in template.circuit.ops:
        q = op.qubits
        step: set[int] = set()
        for det in support:
            bit = {qubit: (det >> qubit) & 1 for qubit in q}
            match op.kind:
                case GateKind.X:
                    step.add(det ^ 1 << q[0])
                case GateKind.CX:
                    step.add(det ^ 1 << q[1] if bit[q[0]] else det)
                case GateKind.G | GateKind.CG:
                    a, b = q[-2:]
                    active = op.kind == GateKind.G or bit[q[0]]
                    step.add(det)
                    if active and bit[a] != bit[b]:
                        step.add(det ^ (1 << a | 1 << b))
                case GateKind.G2 | GateKind.CG2:
                    w = q[-4:]
                    pattern = tuple(bit[x] for x in w)
                    active = op.kind == GateKind.G2 or bit[q[0]]
                    step.add(det)
                    if active and pattern in {(0, 0, 1, 1), (1, 1, 0, 0)}:
                        step.add(det ^ sum(1 << x for x in w))
        support = step
    return support


def _forward(template: PrepTemplate, theta: np.ndarray, reference: int) -> list[np.ndarray]:
    """States before every gate, and the final state, from |reference>."""
    c = template.circuit.bind(theta)
    states = [QuantumState.basis(c.n_qubits, reference).data]
    for op in c.ops:
        states.append(apply_matrix(states[-1], gate_unitary(op), op.qubits, c.n_qubits))
    return states


def _jacobian(
    template: PrepTemplate, theta: np.ndarray, reference: int, indices: list[int]
) -> tuple[np.ndarray, np.ndarray]:
    """Amplitudes on `indices` and their derivatives by slot."""
    bound = template.circuit.bind(theta)
    n = bound.n_qubits
    states = _forward(template, theta, reference)
    jac = np.zeros((len(indices), template.slot_count))
    for i, (symbolic, op) in enumerate(zip(template.circuit.ops, bound.ops, strict=True)):
        if symbolic.param is None:
            continue
        vector = apply_matrix(states[i], gate_derivative(op), op.qubits, n)
        for later in bound.ops[i + 1 :]:
            vector = apply_matrix(vector, gate_unitary(later), later.qubits, n)
        jac[:, symbolic.param.slot] += float(symbolic.param.mult) * vector[indices].real
    return states[-1][indices].real, jac


def cascade_angles(a: float, b: float, c: float) -> tuple[float, float]:
    """Closed form for the state c1 c2 |ref> + s1 |B> + c1 s2 |C>.

    Here c_k = cos(theta_k / 2) and s_k = sin(theta_k / 2), for a
    normalised (a, b, c).
    """
    theta1 = 2 * asin(max(-1.0, min(1.0, b)))
    theta2 = 2 * atan2(c, a)
    return theta1, theta2


def _cascade_candidates(target: MRTarget, slots: int) -> list[np.ndarray]:
    coeffs = target.coefficients
    if slots == 1 and len(coeffs) == 2:
        return [np.array([2 * atan2(coeffs[1], coeffs[0])])]
    if slots == 2 and len(coeffs) == 3:
        candidates = []
        for first, second in itertools.permutations((1, 2)):
            angles = cascade_angles(coeffs[0], coeffs[first], coeffs[second])
            candidates.append(np.array(angles))
            candidates.append(np.array(angles[::-1]))
        return candidates
    return []


def _residual_indices(target: MRTarget, template: PrepTemplate) -> tuple[list[int], np.ndarray]:
    reachable = reachable_support(template, target.reference)
    if missing := [d for d in target.determinants if d not in reachable]:
        raise TemplateMismatchError([int_to_bitstring(d, target.n_qubits) for d in missing])
    extra = sorted(reachable - set(target.determinants))
    indices = target.determinants + extra
    wanted = np.concatenate([target.coefficients, np.zeros(len(extra))])
    return indices, wanted


def solve_parameters(target: MRTarget, template: PrepTemplate) -> np.ndarray:
    """Angles reproducing the target amplitudes with the template.

    Damped Gauss-Newton on the amplitude residual, starting from zero with
    an analytic Jacobian. Determinants reachable by the template but absent
    from the target are driven to zero amplitude.

    Raises:
        ContractError: If the template has more slots than free coefficients
            or a different width.
        TemplateMismatchError: If a target determinant is unreachable.
        SolverError: If no solution within 1e-8 is found in 200 iterations.
    """
    if template.circuit.n_qubits != target.n_qubits:
        raise ContractError(
            f"Template acts on {template.circuit.n_qubits} qubits, target on {target.n_qubits}"
        )
    if template.slot_count > len(target.components) - 1:
        raise ContractError(
            f"Template has {template.slot_count} angles for {len(target.components)} components"
        )
    indices, wanted = _residual_indices(target, template)
    theta = np.zeros(template.slot_count)
    if not template.slot_count:
        residual = _forward(template, theta, target.reference)[-1][indices].real - wanted
        if np.max(np.abs(residual)) > AMPLITUDE_TOLERANCE:
            raise SolverError(float(np.linalg.norm(residual)), 0)
        return theta

    damping = 0.0
    amplitudes, jac = _jacobian(template, theta, target.reference, indices)
    residual = amplitudes - wanted
    iteration = 0
    for iteration in range(1, MAX_ITERATIONS + 1):
        if np.max(np.abs(residual)) <= AMPLITUDE_TOLERANCE * 1e-2:
            break
        lhs = jac.T @ jac + damping * np.eye(len(theta))
        step = np.linalg.lstsq(lhs, -jac.T @ residual, rcond=None)[0]
        candidate = theta + step
        amps, cand_jac = _jacobian(template, candidate, target.reference, indices)
        cand_residual = amps - wanted
        if np.linalg.norm(cand_residual) < np.linalg.norm(residual):
            theta, jac, residual = candidate, cand_jac, cand_residual
            damping = damping / 10 if damping > 1e-12 else 0.0
        else:
            damping = max(damping * 10, 1e-6)
            if damping > 1e8:
                break
    worst = float(np.max(np.abs(residual)))
    log.debug(f"Newton finished after {iteration} iterations with residual {worst:.3e}")
    if worst <= AMPLITUDE_TOLERANCE:
        return theta

    for candidate in _cascade_candidates(target, template.slot_count):
        amps = _forward(template, candidate, target.reference)[-1][indices].real
        if np.max(np.abs(amps - wanted)) <= AMPLITUDE_TOLERANCE:
            log.info("Newton did not converge, using the closed-form cascade angles")
            return candidate
    raise SolverError(float(np.linalg.norm(residual)), iteration)


def compile_state(target: MRTarget, template: PrepTemplate) -> tuple[Circuit, np.ndarray]:
    """X layer for the reference followed by the template at solved angles."""
    theta = solve_parameters(target, template)
    circuit = x_layer(target.reference, target.n_qubits).concat(template.circuit.bind(theta))
    log.info(
        f"Compiled {len(target.components)}-component state with {template.name or 'template'}: "
        f"angles {np.round(theta, 4).tolist()}"
    )
    return circuit, theta


def compile_with_angles(
    target: MRTarget, template: PrepTemplate, theta: np.ndarray | list[float]
) -> Circuit:
    """Preparation circuit at given angles, without solving."""
    return x_layer(target.reference, target.n_qubits).concat(template.circuit.bind(theta))


def verify_preparation(c: Circuit, target: MRTarget, tolerance: float = 5e-4) -> PreparationReport:
    """Compare the noiseless output of `c` on |0...0> with `target`.

    The global phase is fixed so that the reference amplitude is real and
    non-negative. Never raises on a mismatch; the report carries it.
    """
    psi = run_pure(c, 0).data
    ref_amp = psi[target.reference]
    if abs(ref_amp) > 0:
        psi = psi * (abs(ref_amp) / ref_amp)
    errors = {
        int_to_bitstring(det, target.n_qubits): float(abs(psi[det] - coeff))
        for det, coeff in target.components
    }
    support_prob = float(sum(abs(psi[det]) ** 2 for det in target.determinants))
    overlap = float(abs(np.vdot(target.statevector().data, psi)))
    weights = sorted({det.bit_count() for det in target.determinants})
    notices = []
    conserved: bool | None
    if target.tapered:
        conserved = None
        notices.append("particle-number check skipped on a tapered register")
    else:
        conserved = len(weights) == 1
    return PreparationReport(
        amplitude_errors=errors,
        leakage=max(0.0, 1.0 - support_prob),
        overlap=overlap,
        weights=weights,
        number_conserved=conserved,
        tolerance=tolerance,
        notices=notices,
    )


def taper_target(target: MRTarget, sym: SymmetrySet) -> MRTarget:
    """The MR target as seen on the tapered register."""
    n_reduced = target.n_qubits - len(sym.tapered_qubits)
    components = tuple(
        (project_determinant(det, sym), projection_sign(det, sym) * coeff)
        for det, coeff in target.components
    )
    return MRTarget(n_reduced, components[0][0], components, tapered=True)
