"""Circuit representation, gate unitaries and Givens-rotation decompositions.

Gate qubit lists are ordered with `qubits[0]` as the most significant bit of
the gate's local index, so `CX` on `[control, target]` has the usual 4x4
matrix. Composite gates list controls first: `CG` is `[control, a, b]` and
`CG2` is `[control, w0, w1, w2, w3]`.
"""

import json
import logging
from collections.abc import Iterator, Sequence
from dataclasses import dataclass, field, replace
try:
    from enum import StrEnum
except ImportError:  # Python < 3.11
    from enum import Enum

    class StrEnum(str, Enum):  # type: ignore[no-redef]
        __str__ = str.__str__
        __format__ = str.__format__
from fractions import Fraction
from math import cos, pi, sin
from pathlib import Path

import numpy as np
from pydantic import BaseModel, Field

from mrem.errors import CapacityError, ContractError, DimensionError
from mrem.pauli import MAX_DENSE_QUBITS

log = logging.getLogger(__name__)


class GateKind(StrEnum):
    X = "X"
    H = "H"
    RY = "RY"
    CX = "CX"
    CRY = "CRY"
    G = "G"
    CG = "CG"
    G2 = "G2"
    CG2 = "CG2"


ARITY: dict[GateKind, int] = {
    GateKind.X: 1,
    GateKind.H: 1,
    GateKind.RY: 1,
    GateKind.CX: 2,
    GateKind.CRY: 2,
    GateKind.G: 2,
    GateKind.CG: 3,
    GateKind.G2: 4,
    GateKind.CG2: 5,
}
PARAMETRIC = frozenset(
    {GateKind.RY, GateKind.CRY, GateKind.G, GateKind.CG, GateKind.G2, GateKind.CG2}
)
COMPOSITE = frozenset({GateKind.G, GateKind.CG, GateKind.G2, GateKind.CG2})


@dataclass(frozen=True)
class ParamRef:
    """A symbolic angle `mult * theta[slot]`."""

    slot: int
    mult: Fraction = Fraction(1)

    def __post_init__(self) -> None:
        if self.slot < 0:
            raise ContractError(f"Parameter slot must be non-negative, got {self.slot}")

    def scaled(self, factor: Fraction) -> "ParamRef":
        return ParamRef(self.slot, self.mult * factor)


@dataclass(frozen=True)
class GateOp:
    """One gate application.

    Attributes:
        kind (GateKind): Gate type.
        qubits (tuple[int, ...]): Distinct qubit indices, controls first.
        angle (float | None): Bound rotation angle in radians.
        param (ParamRef | None): Symbolic angle, mutually exclusive with `angle`.
    """

    kind: GateKind
    qubits: tuple[int, ...]
    angle: float | None = None
    param: ParamRef | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", GateKind(self.kind))
        object.__setattr__(self, "qubits", tuple(int(q) for q in self.qubits))
        if len(self.qubits) != ARITY[self.kind]:
            raise ContractError(
                f"{self.kind} acts on {ARITY[self.kind]} qubit(s), got {len(self.qubits)}"
            )
        if len(set(self.qubits)) != len(self.qubits) or min(self.qubits) < 0:
            raise ContractError(f"Invalid qubit list {self.qubits} for {self.kind}")
        if self.kind in PARAMETRIC:
            if (self.angle is None) == (self.param is None):
                raise ContractError(f"{self.kind} needs exactly one of angle or param")
        elif self.angle is not None or self.param is not None:
            raise ContractError(f"{self.kind} takes no angle")

    @property
    def is_bound(self) -> bool:
        return self.param is None

    def bound(self, theta: Sequence[float]) -> "GateOp":
        if self.param is None:
            return self
        angle = float(self.param.mult) * float(theta[self.param.slot])
        return GateOp(self.kind, self.qubits, angle=angle)

    def _with_factor(self, factor: Fraction) -> dict:
        if self.param is not None:
            return {"param": self.param.scaled(factor)}
        assert self.angle is not None
        return {"angle": float(factor) * self.angle}

    def to_json(self) -> dict:
        data: dict = {"kind": str(self.kind), "qubits": list(self.qubits)}
        if self.angle is not None:
            data["angle"] = self.angle
        if self.param is not None:
            data["param"] = {"slot": self.param.slot, "mult": str(self.param.mult)}
        return data


class ParamSpec(BaseModel):
    slot: int = Field(ge=0)
    mult: str | float | int = 1


class OpSpec(BaseModel):
    kind: GateKind
    qubits: list[int]
    angle: float | None = None
    param: ParamSpec | None = None


class CircuitFile(BaseModel):
    """JSON schema of a circuit file."""

    n_qubits: int = Field(ge=1)
    n_params: int | None = Field(default=None, ge=0)
    ops: list[OpSpec] = []


@dataclass(frozen=True)
class Circuit:
    """Immutable ordered gate list on `n_qubits`.

    Attributes:
        n_qubits (int): Register width.
        ops (tuple[GateOp, ...]): Gates in application order.
        n_params (int): Number of symbolic parameter slots.
    """

    n_qubits: int
    ops: tuple[GateOp, ...] = field(default_factory=tuple)
    n_params: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "ops", tuple(self.ops))
        if self.n_qubits < 1:
            raise ContractError(f"Circuit width must be positive, got {self.n_qubits}")
        for op in self.ops:
            if max(op.qubits) >= self.n_qubits:
                raise DimensionError(self.n_qubits, max(op.qubits) + 1)
            if op.param is not None and op.param.slot >= self.n_params:
                raise ContractError(
                    f"Parameter slot {op.param.slot} exceeds n_params={self.n_params}"
                )

    def __len__(self) -> int:
        return len(self.ops)

    def __iter__(self) -> Iterator[GateOp]:
        return iter(self.ops)

    @property
    def is_bound(self) -> bool:
        return all(op.is_bound for op in self.ops)

    def bind(self, theta: Sequence[float] | np.ndarray) -> "Circuit":
        """Substitute `theta` into every symbolic slot.

        Raises:
            ContractError: If `theta` does not have `n_params` entries.
        """
        if len(theta) != self.n_params:
            raise ContractError(f"Expected {self.n_params} parameters, got {len(theta)}")
        return Circuit(self.n_qubits, tuple(op.bound(theta) for op in self.ops), 0)

    def concat(self, other: "Circuit") -> "Circuit":
        """Apply `self` then `other`; the slots of `other` follow those of `self`."""
        if other.n_qubits != self.n_qubits:
            raise DimensionError(self.n_qubits, other.n_qubits)
        shifted = tuple(
            op
            if op.param is None
            else replace(op, param=ParamRef(op.param.slot + self.n_params, op.param.mult))
            for op in other.ops
        )
        return Circuit(self.n_qubits, self.ops + shifted, self.n_params + other.n_params)

    def to_json(self) -> dict:
        return {
            "n_qubits": self.n_qubits,
            "n_params": self.n_params,
            "ops": [op.to_json() for op in self.ops],
        }

    @classmethod
    def from_json(cls, data: dict) -> "Circuit":
        spec = CircuitFile.model_validate(data)
        ops = []
        for op in spec.ops:
            param = None
            if op.param is not None:
                param = ParamRef(op.param.slot, Fraction(str(op.param.mult)))
            ops.append(GateOp(op.kind, tuple(op.qubits), op.angle, param))
        slots = [op.param.slot for op in ops if op.param is not None]
        n_params = spec.n_params if spec.n_params is not None else max(slots, default=-1) + 1
        return cls(spec.n_qubits, tuple(ops), n_params)

    @classmethod
    def load(cls, path: Path) -> "Circuit":
        log.debug(f"Loading circuit from {path}")
        return cls.from_json(json.loads(Path(path).read_text(encoding="utf8")))

    def save(self, path: Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2) + "\n", encoding="utf8")


_X = np.array([[0, 1], [1, 0]], dtype=complex)
_H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
_CX = np.array(
    [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex
)


def _ry(angle: float) -> np.ndarray:
    c, s = cos(angle / 2), sin(angle / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def _plane_rotation(dim: int, lower: int, upper: int, angle: float) -> np.ndarray:
    """Identity except for a rotation of |lower> towards |upper>."""
    c, s = cos(angle / 2), sin(angle / 2)
    u = np.eye(dim, dtype=complex)
    u[lower, lower], u[upper, lower] = c, s
    u[lower, upper], u[upper, upper] = -s, c
    return u


def _controlled(u: np.ndarray) -> np.ndarray:
    dim = u.shape[0]
    out = np.eye(2 * dim, dtype=complex)
    out[dim:, dim:] = u
    return out


def gate_unitary(op: GateOp) -> np.ndarray:
    """Exact unitary of `op` on its own qubits, `qubits[0]` most significant.

    Raises:
        ContractError: If the angle is still symbolic.
    """
    if not op.is_bound:
        raise ContractError(f"Unbound parameter slot {op.param.slot if op.param else '?'}")
    angle = op.angle if op.angle is not None else 0.0
    match op.kind:
        case GateKind.X:
            return _X.copy()
        case GateKind.H:
            return _H.copy()
        case GateKind.RY:
            return _ry(angle)
        case GateKind.CX:
            return _CX.copy()
        case GateKind.CRY:
            return _controlled(_ry(angle))
        case GateKind.G:
            return _plane_rotation(4, 0b01, 0b10, angle)
        case GateKind.CG:
            return _controlled(_plane_rotation(4, 0b01, 0b10, angle))
        case GateKind.G2:
            return _plane_rotation(16, 0b0011, 0b1100, angle)
        case GateKind.CG2:
            return _controlled(_plane_rotation(16, 0b0011, 0b1100, angle))
    raise ContractError(f"Unsupported gate kind {op.kind}")


def gate_derivative(op: GateOp) -> np.ndarray:
    """d U / d angle for a bound rotation gate.

    Every parametric gate here is exp(-i angle K / 2) with K^2 = 1 on its
    rotating block, so the derivative is (U(a + pi) - U(a - pi)) / 4.
    """
    if op.kind not in PARAMETRIC or op.angle is None:
        raise ContractError(f"{op.kind} has no bound angle to differentiate")
    plus = gate_unitary(replace(op, angle=op.angle + pi))
    minus = gate_unitary(replace(op, angle=op.angle - pi))
    return (plus - minus) / 4


def apply_matrix(
    data: np.ndarray, u: np.ndarray, qubits: Sequence[int], n_qubits: int
) -> np.ndarray:
    """Left-multiply the row index of `data` by `u` acting on `qubits`.

    `data` has shape (2**n, ...). Qubit q lives on tensor axis n - 1 - q.
    """
    k = len(qubits)
    tensor = data.reshape((2,) * n_qubits + data.shape[1:])
    axes = [n_qubits - 1 - q for q in qubits]
    gate = u.reshape((2,) * (2 * k))
    moved = np.tensordot(gate, tensor, axes=(list(range(k, 2 * k)), axes))
    return np.moveaxis(moved, list(range(k)), axes).reshape(data.shape)


def _op(kind: GateKind, *qubits: int, **angle) -> GateOp:
    return GateOp(kind, tuple(qubits), **angle)


def _givens_ops(op: GateOp, control: int | None) -> list[GateOp]:
    a, b = op.qubits[-2:]
    half = op._with_factor(Fraction(1, 2))

    def ry(q: int) -> GateOp:
        if control is None:
            return _op(GateKind.RY, q, **half)
        return _op(GateKind.CRY, control, q, **half)

    return [
        _op(GateKind.H, b),
        _op(GateKind.CX, b, a),
        ry(a),
        ry(b),
        _op(GateKind.CX, b, a),
        _op(GateKind.H, b),
    ]


def _double_givens_ops(op: GateOp, control: int | None) -> list[GateOp]:
    w0, w1, w2, w3 = op.qubits[-4:]
    plus = op._with_factor(Fraction(1, 8))
    minus = op._with_factor(Fraction(-1, 8))

    def ry(q: int, angle: dict) -> GateOp:
        if control is None:
            return _op(GateKind.RY, q, **angle)
        return _op(GateKind.CRY, control, q, **angle)

    def rotations(first: dict, second: dict) -> list[GateOp]:
        return [ry(w1, first), ry(w0, second)]

    cx, h = GateKind.CX, GateKind.H
    return [
        _op(cx, w2, w3),
        _op(cx, w0, w2),
        _op(h, w0),
        _op(h, w3),
        _op(cx, w2, w3),
        _op(cx, w0, w1),
        *rotations(plus, minus),
        _op(cx, w0, w3),
        _op(h, w3),
        _op(cx, w3, w1),
        *rotations(plus, minus),
        _op(cx, w2, w1),
        _op(cx, w2, w0),
        *rotations(minus, plus),
        _op(cx, w3, w1),
        _op(h, w3),
        _op(cx, w0, w3),
        *rotations(minus, plus),
        _op(cx, w0, w1),
        _op(cx, w2, w0),
        _op(h, w0),
        _op(h, w3),
        _op(cx, w0, w2),
        _op(cx, w2, w3),
    ]


def _cry_ops(op: GateOp) -> list[GateOp]:
    control, target = op.qubits
    return [
        _op(GateKind.RY, target, **op._with_factor(Fraction(1, 2))),
        _op(GateKind.CX, control, target),
        _op(GateKind.RY, target, **op._with_factor(Fraction(-1, 2))),
        _op(GateKind.CX, control, target),
    ]


def _decomposed_ops(op: GateOp) -> list[GateOp]:
    match op.kind:
        case GateKind.G:
            return _givens_ops(op, None)
        case GateKind.CG:
            return _givens_ops(op, op.qubits[0])
        case GateKind.G2:
            return _double_givens_ops(op, None)
        case GateKind.CG2:
            return _double_givens_ops(op, op.qubits[0])
    raise ContractError(f"No decomposition for {op.kind}")


def decompose(op: GateOp, n_qubits: int | None = None) -> Circuit:
    """Expand a Givens-type gate into X, H, RY, CX and CRY gates.

    Symbolic angles stay symbolic with scaled multipliers. The result equals
    `gate_unitary(op)` up to a global sign.

    Raises:
        ContractError: If `op` is not one of G, CG, G2, CG2.
    """
    ops = _decomposed_ops(op)
    width = n_qubits if n_qubits is not None else max(op.qubits) + 1
    n_params = op.param.slot + 1 if op.param is not None else 0
    return Circuit(width, tuple(ops), n_params)


def decompose_circuit(c: Circuit, full: bool = False) -> Circuit:
    """Expand every composite gate; with `full`, CRY becomes 2 RY + 2 CX too."""
    ops: list[GateOp] = []
    for op in c.ops:
        expanded = _decomposed_ops(op) if op.kind in COMPOSITE else [op]
        for inner in expanded:
            if full and inner.kind == GateKind.CRY:
                ops.extend(_cry_ops(inner))
            else:
                ops.append(inner)
    return Circuit(c.n_qubits, tuple(ops), c.n_params)


def count_resources(c: Circuit, decompose_composites: bool = True) -> tuple[int, int]:
    """Return (single-qubit gate count, two-qubit gate count).

    With `decompose_composites`, composites are counted through their
    decompositions and CRY counts as 2 CX + 2 RY. Without it every gate of
    arity above one counts once as a multi-qubit gate.
    """
    if decompose_composites:
        c = decompose_circuit(c, full=True)
    n1 = sum(1 for op in c.ops if ARITY[op.kind] == 1)
    return n1, len(c.ops) - n1


def build_ry_linear(n_qubits: int, layers: int) -> Circuit:
    """RY-linear hardware-efficient ansatz.

    Each of the `layers` blocks is a full RY column followed by a CX chain
    (control q, target q + 1, ascending); a final RY column closes the
    circuit. Slot `l * n_qubits + q` drives the RY on qubit q of column l.

    Raises:
        ContractError: If `n_qubits < 2` or `layers < 1`.
    """
    if n_qubits < 2 or layers < 1:
        raise ContractError(f"RY-linear ansatz needs n >= 2 and L >= 1, got ({n_qubits}, {layers})")
    ops: list[GateOp] = []
    for layer in range(layers + 1):
        ops.extend(
            GateOp(GateKind.RY, (q,), param=ParamRef(layer * n_qubits + q))
            for q in range(n_qubits)
        )
        if layer < layers:
            ops.extend(GateOp(GateKind.CX, (q, q + 1)) for q in range(n_qubits - 1))
    return Circuit(n_qubits, tuple(ops), (layers + 1) * n_qubits)


def compose_init_after_ansatz(ansatz: Circuit, init: Circuit) -> Circuit:
    """The circuit U_init U_ansatz, with the ansatz acting on |0...0> first.

    Raises:
        DimensionError: If the widths differ.
    """
    if ansatz.n_qubits != init.n_qubits:
        raise DimensionError(ansatz.n_qubits, init.n_qubits)
    return ansatz.concat(init)


def x_layer(bits: int | str, n_qubits: int) -> Circuit:
    """X on every set bit of `bits`, lowest qubit first."""
    value = int(bits, 2) if isinstance(bits, str) else bits
    if value < 0 or value >= 1 << n_qubits:
        raise DimensionError(1 << n_qubits, value, "basis index")
    ops = tuple(GateOp(GateKind.X, (q,)) for q in range(n_qubits) if (value >> q) & 1)
    return Circuit(n_qubits, ops)


def circuit_unitary(c: Circuit) -> np.ndarray:
    """Dense unitary of a bound circuit."""
    if c.n_qubits > MAX_DENSE_QUBITS:
        raise CapacityError(c.n_qubits, MAX_DENSE_QUBITS)
    u = np.eye(1 << c.n_qubits, dtype=complex)
    for op in c.ops:
        u = apply_matrix(u, gate_unitary(op), op.qubits, c.n_qubits)
    return u


def equal_up_to_global_phase(u: np.ndarray, v: np.ndarray, atol: float = 1e-10) -> bool:
    """Compare `u` with e^{i phi} v, phi taken at the largest entry of `v`."""
    if u.shape != v.shape:
        return False
    index = np.unravel_index(np.argmax(np.abs(v)), v.shape)
    if abs(v[index]) == 0:
        return bool(np.max(np.abs(u)) <= atol)
    ratio = u[index] / v[index]
    if abs(ratio) == 0:
        return False
    phase = ratio / abs(ratio)
    return bool(np.max(np.abs(u - phase * v)) <= atol)
