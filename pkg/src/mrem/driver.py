"""VQE objective, implicit filtering, and the REM/MREM correction pipeline."""

import csv
import logging
from collections.abc import Callable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property
from math import pi
from pathlib import Path
from typing import Literal

from typing_extensions import Self

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from mrem.circuit import Circuit, build_ry_linear, compose_init_after_ansatz, x_layer
from mrem.errors import ContractError, DimensionError, MremError
from mrem.fermion import OrbitalLayout, SpinPenaltyConfig, hf_bitstring, s_squared_operator
from mrem.pauli import PauliSum, exact_ground_state, expectation, load_pauli_sum
from mrem.sim import NoiseModel, ShotModel, ShotNoise, energy_with_shots, run_noisy, run_pure
from mrem.stateprep import MRTarget, PrepTemplate, compile_state
from mrem.states import QuantumState

log = logging.getLogger(__name__)

Variant = Literal["hf", "mr"]

RESULT_COLUMNS = [
    "label",
    "R",
    "e_exact_diag",
    "e_exact_ref_hf",
    "e_exact_ref_mr",
    "e_noisy_ref_hf",
    "e_noisy_ref_mr",
    "e_vqe_hf",
    "e_vqe_mr",
    "e_rem",
    "e_mrem",
    "err_vqe_hf",
    "err_vqe_mr",
    "err_rem",
    "err_mrem",
    "iters_hf",
    "iters_mr",
    "evals_hf",
    "evals_mr",
    "error",
]


class ImFilConfig(BaseModel):
    """Implicit-filtering settings.

    Attributes:
        budget (int | None): Maximum objective evaluations; None means
            10 * dim * (2 * dim + 1).
        scales (tuple[float, ...]): Strictly decreasing stencil sizes.
        stencil_failures (int): Failed stencils tolerated at one scale.
        tolerance (float): Move to the next scale once the stencil gradient
            norm drops below tolerance * scale.
        max_backtracks (int): Step halvings tried by the line search.
    """

    model_config = ConfigDict(frozen=True)

    budget: int | None = Field(default=None, ge=1)
    scales: tuple[float, ...] = tuple(pi * 2.0**-k for k in range(1, 9))
    stencil_failures: int = Field(default=1, ge=1)
    tolerance: float = Field(default=1e-3, gt=0.0)
    max_backtracks: int = Field(default=8, ge=0)

    @model_validator(mode="after")
    def check_scales(self) -> Self:
        if not self.scales or any(s <= 0 for s in self.scales):
            raise ValueError("scales must be positive")
        if any(b >= a for a, b in zip(self.scales, self.scales[1:], strict=False)):
            raise ValueError("scales must be strictly decreasing")
        return self

    def budget_for(self, dim: int) -> int:
        return self.budget if self.budget is not None else 10 * dim * (2 * dim + 1)


@dataclass
class ImFilResult:
    theta: np.ndarray
    value: float
    trace: list[tuple[int, int, float]]
    evaluations: int
    iterations: int
    truncated: bool


class _BudgetExhausted(Exception):
    pass


class _CountedObjective:
    """Wraps `f`, enforcing the budget and remembering the best point."""

    def __init__(self, f: Callable[[np.ndarray], float], budget: int) -> None:
        self.f = f
        self.budget = budget
        self.evaluations = 0
        self.best_x: np.ndarray | None = None
        self.best_value = np.inf

    def __call__(self, x: np.ndarray) -> float:
        if self.evaluations >= self.budget:
            raise _BudgetExhausted
        self.evaluations += 1
        value = float(self.f(x))
        if value < self.best_value:
            self.best_value, self.best_x = value, x.copy()
        return value


def imfil_minimize(
    f: Callable[[np.ndarray], float], theta0: Sequence[float] | np.ndarray, cfg: ImFilConfig
) -> ImFilResult:
    """Minimise `f` by implicit filtering.

    At each scale h the central stencil x +/- h e_i is sampled and its
    difference gradient drives a quasi-Newton direction with backtracking.
    If the line search fails the best stencil point is taken; if the centre
    beats the whole stencil too, that is a stencil failure. The scale
    shrinks after `stencil_failures` failures or once the stencil gradient
    is below tolerance * h.

    Raises:
        ContractError: If the budget cannot cover one stencil.
    """
    x = np.array(theta0, dtype=float)
    dim = len(x)
    budget = cfg.budget_for(dim)
    if budget < 2 * dim + 1:
        raise ContractError(f"Budget {budget} is smaller than one stencil of {2 * dim + 1}")
    fn = _CountedObjective(f, budget)
    trace: list[tuple[int, int, float]] = []
    iterations = 0
    truncated = False
    inverse_hessian = np.eye(dim)
    last: tuple[np.ndarray, np.ndarray] | None = None
    try:
        fx = fn(x)
        for h in cfg.scales:
            failures = 0
            while True:
                iterations += 1
                basis = np.eye(dim) * h
                plus = np.array([fn(x + e) for e in basis])
                minus = np.array([fn(x - e) for e in basis])
                gradient = (plus - minus) / (2 * h)
                best_stencil = min(plus.min(initial=np.inf), minus.min(initial=np.inf))
                trace.append((iterations, fn.evaluations, fn.best_value))
                if np.linalg.norm(gradient) < cfg.tolerance * h:
                    break
                if last is not None:
                    step, grad_change = x - last[0], gradient - last[1]
                    curvature = float(step @ grad_change)
                    if curvature > 1e-12:
                        rho = 1.0 / curvature
                        left = np.eye(dim) - rho * np.outer(step, grad_change)
                        inverse_hessian = (
                            left @ inverse_hessian @ left.T + rho * np.outer(step, step)
                        )
                last = (x.copy(), gradient)
                direction = -inverse_hessian @ gradient
                if direction @ gradient >= 0:
                    inverse_hessian = np.eye(dim)
                    direction = -gradient
                moved = False
                length = 1.0
                for _ in range(cfg.max_backtracks + 1):
                    trial = x + length * direction
                    value = fn(trial)
                    if value < fx:
                        x, fx, moved = trial, value, True
                        break
                    length /= 2
                if not moved:
                    if best_stencil >= fx:
                        failures += 1
                        if failures >= cfg.stencil_failures:
                            break
                        fx = fn(x)
                        continue
                    candidates = np.vstack([x + basis, x - basis])
                    values = np.concatenate([plus, minus])
                    x, fx = candidates[int(np.argmin(values))], float(values.min())
                    inverse_hessian = np.eye(dim)
                    last = None
            log.debug(
                f"Scale {h:.4g} done after {fn.evaluations} evaluations, "
                f"best {fn.best_value:.8f}"
            )
    except _BudgetExhausted:
        truncated = True
        log.info(f"ImFil budget of {budget} evaluations exhausted")
    best_x = fn.best_x if fn.best_x is not None else x
    trace.append((iterations, fn.evaluations, fn.best_value))
    return ImFilResult(
        theta=best_x,
        value=fn.best_value,
        trace=trace,
        evaluations=fn.evaluations,
        iterations=iterations,
        truncated=truncated,
    )


@dataclass(frozen=True)
class VqeProblem:
    """A VQE instance: the state is U_init U_ansatz(theta) |0...0>.

    Attributes:
        hamiltonian (PauliSum): Unpenalised Hamiltonian used for reported energies.
        ansatz (Circuit): Parametrised circuit acting first.
        init_circuit (Circuit): Bound reference preparation acting second.
        noise (NoiseModel): Gate noise; also supplies the shot-noise seed.
        shots (ShotModel): Sampling model.
        penalty (PauliSum | None): Extra term added to the optimised objective.
        stream (int): Shot-noise stream index.
    """

    hamiltonian: PauliSum
    ansatz: Circuit
    init_circuit: Circuit
    noise: NoiseModel = field(default_factory=NoiseModel)
    shots: ShotModel = field(default_factory=ShotModel)
    penalty: PauliSum | None = None
    stream: int = 0

    def __post_init__(self) -> None:
        n = self.hamiltonian.n_qubits
        for width in (self.ansatz.n_qubits, self.init_circuit.n_qubits):
            if width != n:
                raise DimensionError(n, width)
        if self.penalty is not None and self.penalty.n_qubits != n:
            raise DimensionError(n, self.penalty.n_qubits)
        if not self.init_circuit.is_bound:
            raise ContractError("The initial-state circuit must be bound")

    @cached_property
    def penalized_hamiltonian(self) -> PauliSum:
        return self.hamiltonian if self.penalty is None else self.hamiltonian + self.penalty

    @cached_property
    def hamiltonian_squared(self) -> PauliSum:
        return (self.hamiltonian * self.hamiltonian).real()

    @cached_property
    def penalized_squared(self) -> PauliSum:
        return (self.penalized_hamiltonian * self.penalized_hamiltonian).real()

    def state(self, theta: Sequence[float] | np.ndarray) -> QuantumState:
        if len(theta) != self.ansatz.n_params:
            raise ContractError(f"Expected {self.ansatz.n_params} parameters, got {len(theta)}")
        circuit = compose_init_after_ansatz(self.ansatz.bind(theta), self.init_circuit)
        if self.noise.is_noiseless:
            return run_pure(circuit, 0)
        return run_noisy(circuit, 0, self.noise)


def objective(
    problem: VqeProblem,
    theta: Sequence[float] | np.ndarray,
    penalized: bool = True,
    shot_noise: ShotNoise | None = None,
) -> float:
    """Measured energy of the composed circuit at `theta`.

    Raises:
        ContractError: If `theta` has the wrong length.
    """
    h = problem.penalized_hamiltonian if penalized else problem.hamiltonian
    stream = shot_noise or ShotNoise(problem.noise.seed, problem.stream)
    square = None
    if problem.shots.enabled:
        square = problem.penalized_squared if penalized else problem.hamiltonian_squared
    return energy_with_shots(h, problem.state(theta), problem.shots, stream, square)


def run_vqe(problem: VqeProblem, cfg: ImFilConfig) -> tuple[float, ImFilResult]:
    """Unmitigated VQE from theta = 0; returns the unpenalised final energy."""
    shot_noise = ShotNoise(problem.noise.seed, problem.stream)
    result = imfil_minimize(
        lambda t: objective(problem, t, penalized=True, shot_noise=shot_noise),
        np.zeros(problem.ansatz.n_params),
        cfg,
    )
    energy = objective(problem, result.theta, penalized=False, shot_noise=shot_noise)
    log.info(f"VQE energy {energy:.8f} after {result.evaluations} evaluations")
    return energy, result


@dataclass
class MitigationRecord:
    """Energies of one REM/MREM run, in Hartree.

    `e_mitigated = e_vqe_raw - delta` with `delta = e_noisy_ref - e_exact_ref`.
    """

    e_exact_ref: float
    e_noisy_ref: float
    e_vqe_raw: float
    iterations: int
    evaluations: int
    label: str = ""
    variant: Variant = "mr"
    truncated: bool = False
    overlap: float | None = None
    theta: list[float] = field(default_factory=list)
    trace: list[tuple[int, int, float]] = field(default_factory=list)

    @property
    def delta(self) -> float:
        return self.e_noisy_ref - self.e_exact_ref

    @property
    def e_mitigated(self) -> float:
        return self.e_vqe_raw - self.delta

    def to_json(self) -> dict:
        return {
            "label": self.label,
            "variant": self.variant,
            "e_exact_ref": self.e_exact_ref,
            "e_noisy_ref": self.e_noisy_ref,
            "delta": self.delta,
            "e_vqe_raw": self.e_vqe_raw,
            "e_mitigated": self.e_mitigated,
            "iterations": self.iterations,
            "evaluations": self.evaluations,
            "truncated": self.truncated,
            "overlap": self.overlap,
            "theta": self.theta,
        }


def run_mrem(
    problem: VqeProblem,
    reference: MRTarget | int,
    cfg: ImFilConfig,
    ground_state: QuantumState | None = None,
    label: str = "",
) -> MitigationRecord:
    """Run VQE from `problem` and correct it with the reference energy shift.

    The exact reference energy is the unpenalised expectation on the
    noiseless output of the preparation circuit; the noisy reference energy
    is the objective at theta = 0. Only the optimisation sees the penalty.

    Raises:
        ContractError: If the preparation circuit does not prepare `reference`.
    """
    n = problem.hamiltonian.n_qubits
    target_state = (
        QuantumState.basis(n, reference) if isinstance(reference, int) else reference.statevector()
    )
    prepared = run_pure(problem.init_circuit, 0)
    fidelity = abs(np.vdot(target_state.data, prepared.data)) ** 2
    if fidelity < 1 - 1e-6:
        raise ContractError(f"Initial circuit prepares the reference with fidelity {fidelity:.8f}")
    variant: Variant = "hf" if isinstance(reference, int) else "mr"

    shot_noise = ShotNoise(problem.noise.seed, problem.stream)
    theta0 = np.zeros(problem.ansatz.n_params)
    e_exact_ref = expectation(problem.hamiltonian, prepared)
    e_noisy_ref = objective(problem, theta0, penalized=False, shot_noise=shot_noise)
    result = imfil_minimize(
        lambda t: objective(problem, t, penalized=True, shot_noise=shot_noise), theta0, cfg
    )
    e_vqe_raw = objective(problem, result.theta, penalized=False, shot_noise=shot_noise)
    overlap = None
    if ground_state is not None:
        overlap = float(abs(np.vdot(ground_state.data, target_state.data)) ** 2)
    record = MitigationRecord(
        e_exact_ref=e_exact_ref,
        e_noisy_ref=e_noisy_ref,
        e_vqe_raw=e_vqe_raw,
        iterations=result.iterations,
        evaluations=result.evaluations,
        label=label,
        variant=variant,
        truncated=result.truncated,
        overlap=overlap,
        theta=[float(t) for t in result.theta],
        trace=result.trace,
    )
    log.info(
        f"{label or 'run'} [{variant}]: raw {record.e_vqe_raw:.6f}, delta {record.delta:.6f}, "
        f"mitigated {record.e_mitigated:.6f} after {record.evaluations} evaluations"
    )
    return record


class SweepPoint(BaseModel):
    """One geometry of a potential-energy-surface sweep."""

    label: str
    r: float | None = None
    hamiltonian: Path
    target: Path | None = None
    template: Path | None = None


class SweepSettings(BaseModel):
    """Settings shared by every point of a sweep."""

    layers: int = Field(default=1, ge=1)
    noise: NoiseModel = NoiseModel()
    shots: ShotModel = ShotModel()
    optimizer: ImFilConfig = ImFilConfig()
    layout: OrbitalLayout | None = None
    spin_penalty: SpinPenaltyConfig = SpinPenaltyConfig()
    variants: tuple[Variant, ...] = ("hf", "mr")
    workers: int = Field(default=1, ge=1)


@dataclass
class PointResult:
    point: SweepPoint
    e_exact_diag: float | None = None
    records: dict[str, MitigationRecord] = field(default_factory=dict)
    error: str = ""

    def row(self) -> dict[str, str]:
        values: dict[str, float | int | str | None] = {
            "label": self.point.label,
            "R": self.point.r,
            "e_exact_diag": self.e_exact_diag,
            "error": self.error,
        }
        names = {"hf": "rem", "mr": "mrem"}
        for variant, record in self.records.items():
            values[f"e_exact_ref_{variant}"] = record.e_exact_ref
            values[f"e_noisy_ref_{variant}"] = record.e_noisy_ref
            values[f"e_vqe_{variant}"] = record.e_vqe_raw
            values[f"e_{names[variant]}"] = record.e_mitigated
            values[f"iters_{variant}"] = record.iterations
            values[f"evals_{variant}"] = record.evaluations
            if self.e_exact_diag is not None:
                values[f"err_vqe_{variant}"] = abs(record.e_vqe_raw - self.e_exact_diag)
                values[f"err_{names[variant]}"] = abs(record.e_mitigated - self.e_exact_diag)
        return {column: _format(values.get(column)) for column in RESULT_COLUMNS}


def _format(value: float | int | str | None) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.12g}"
    return str(value)


def spin_penalty_term(settings: SweepSettings, n_qubits: int) -> PauliSum | None:
    """lambda * S^2 for the configured layout, or None when there is no penalty."""
    if settings.layout is None or settings.spin_penalty.lambda_ == 0:
        return None
    if settings.layout.n_qubits != n_qubits:
        raise DimensionError(settings.layout.n_qubits, n_qubits)
    return s_squared_operator(settings.layout).scale(settings.spin_penalty.lambda_)


def variant_problem(
    h: PauliSum,
    variant: Variant,
    settings: SweepSettings,
    target: MRTarget | None = None,
    template: PrepTemplate | None = None,
    stream: int = 0,
    penalty: PauliSum | None = None,
    hf_reference: int | None = None,
) -> tuple[VqeProblem, MRTarget | int]:
    """The VQE problem and reference for the HF or MR variant.

    The HF determinant is `hf_reference` when given, else it comes from the
    orbital layout, falling back to the MR target's reference.

    Raises:
        ContractError: If the variant's reference cannot be built.
    """
    n = h.n_qubits
    reference: MRTarget | int
    if variant == "hf":
        if hf_reference is not None:
            reference = hf_reference
        elif settings.layout is not None and settings.layout.n_qubits == n:
            reference = hf_bitstring(settings.layout)
        elif target is not None:
            reference = target.reference
        else:
            raise ContractError("An orbital layout or MR target is needed for the HF reference")
        init = x_layer(reference, n)
    else:
        if target is None or template is None:
            raise ContractError("The MR variant needs a target and a template")
        init, _ = compile_state(target, template)
        reference = target
    problem = VqeProblem(
        hamiltonian=h,
        ansatz=build_ry_linear(n, settings.layers),
        init_circuit=init,
        noise=settings.noise,
        shots=settings.shots,
        penalty=penalty,
        stream=stream,
    )
    return problem, reference


def _run_point(index: int, point: SweepPoint, settings: SweepSettings) -> PointResult:
    result = PointResult(point)
    try:
        h = load_pauli_sum(point.hamiltonian)
        e_ground, ground = exact_ground_state(h)
        result.e_exact_diag = e_ground
        penalty = spin_penalty_term(settings, h.n_qubits)
        target = MRTarget.load(point.target) if point.target else None
        template = PrepTemplate.load(point.template) if point.template else None
        for offset, variant in enumerate(("hf", "mr")):
            if variant not in settings.variants:
                continue
            problem, reference = variant_problem(
                h, variant, settings, target, template, 2 * index + offset, penalty
            )
            result.records[variant] = run_mrem(
                problem, reference, settings.optimizer, ground_state=ground, label=point.label
            )
    except (MremError, ValidationError, OSError) as e:
        log.exception(e)
        result.error = f"{type(e).__name__}: {e}".replace("\n", " ")
    return result


def _write_csv(path: Path, header: list[str], rows: list[list[str]] | list[dict[str, str]]) -> None:
    with path.open("w", newline="", encoding="utf8") as handle:
        if rows and isinstance(rows[0], dict):
            writer = csv.DictWriter(handle, fieldnames=header, lineterminator="\n")
            writer.writeheader()
            writer.writerows(rows)  # type: ignore[arg-type]
        else:
            plain = csv.writer(handle, lineterminator="\n")
            plain.writerow(header)
            plain.writerows(rows)  # type: ignore[arg-type]


def write_convergence(
    path: Path, traces: dict[str, list[tuple[int, int, float]]], point: str = ""
) -> None:
    """convergence.csv for one point: a trace per series."""
    rows = [
        [point, series, str(iteration), str(evaluations), _format(best)]
        for series, trace in traces.items()
        for iteration, evaluations, best in trace
    ]
    _write_csv(path, ["point", "series", "iteration", "evaluations", "best_energy"], rows)


def write_sweep_outputs(results: list[PointResult], out: Path) -> None:
    """Write results.csv, series.csv (long format) and convergence.csv."""
    out.mkdir(parents=True, exist_ok=True)
    rows = [r.row() for r in results]
    _write_csv(out / "results.csv", RESULT_COLUMNS, rows)
    series: list[list[str]] = []
    convergence: list[list[str]] = []
    for result, row in zip(results, rows, strict=True):
        for column in RESULT_COLUMNS[2:-1]:
            if row[column]:
                series.append([result.point.label, column, row[column]])
        for variant, record in result.records.items():
            if record.overlap is not None:
                series.append([result.point.label, f"overlap_{variant}", _format(record.overlap)])
            for iteration, evaluations, best in record.trace:
                convergence.append(
                    [result.point.label, variant, str(iteration), str(evaluations), _format(best)]
                )
    _write_csv(out / "series.csv", ["point", "series", "value"], series)
    _write_csv(
        out / "convergence.csv",
        ["point", "series", "iteration", "evaluations", "best_energy"],
        convergence,
    )
    log.info(f"Wrote sweep outputs for {len(results)} point(s) to {out}")


def run_pes_sweep(
    points: list[SweepPoint], settings: SweepSettings, out: Path | None = None
) -> list[PointResult]:
    """Run REM and MREM at every point, merging results in point order.

    Failures are recorded per point in the `error` column.
    """
    log.info(f"Starting sweep of {len(points)} point(s) with {settings.workers} worker(s)")
    if settings.workers > 1:
        with ThreadPoolExecutor(max_workers=settings.workers) as executor:
            results = list(
                executor.map(lambda item: _run_point(*item, settings), enumerate(points))
            )
    else:
        results = [_run_point(i, p, settings) for i, p in enumerate(points)]
    if out is not None:
        write_sweep_outputs(results, out)
    return results
