"""Loaders and consistency checks for the shipped table fixtures.

The `tables/` tree holds three published tables (MR states with their
preparation angles, gate resources, energies). They are validation data
and never act as defaults for a run.
"""

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path

from pydantic import BaseModel

from mrem.circuit import (
    GateKind,
    GateOp,
    ParamRef,
    build_ry_linear,
    count_resources,
    decompose,
    x_layer,
)
from mrem.errors import MremError
from mrem.stateprep import (
    MRTarget,
    PrepTemplate,
    compile_state,
    compile_with_angles,
    verify_preparation,
)
from mrem.states import bitstring_to_int

log = logging.getLogger(__name__)

DEFAULT_ROOT = Path(__file__).resolve().parents[2] / "fixtures"
ENERGY_SLACK = 1.5e-4
AMPLITUDE_SLACK = 5e-4
ENERGY_METHODS = ("vqe_mr", "vqe_hf", "mrem", "rem")


class MRStateRow(BaseModel):
    molecule: str
    R: float
    template: str
    reference: str
    c_ref: float
    det_b: str
    c_b: float
    det_c: str | None = None
    c_c: float | None = None
    theta1: float
    theta2: float | None = None
    source: str = ""

    @property
    def angles(self) -> list[float]:
        return [self.theta1] if self.theta2 is None else [self.theta1, self.theta2]

    def target(self) -> MRTarget:
        components = [(self.reference, self.c_ref), (self.det_b, self.c_b)]
        if self.det_c is not None and self.c_c is not None:
            components.append((self.det_c, self.c_c))
        return MRTarget(
            n_qubits=len(self.reference),
            reference=bitstring_to_int(self.reference),
            components=tuple((bitstring_to_int(d), c) for d, c in components),
            tapered=True,
        )


class EnergyRow(BaseModel):
    molecule: str
    R: float
    exact: float
    vqe_mr: float
    err_vqe_mr: float
    vqe_hf: float
    err_vqe_hf: float
    mrem: float
    err_mrem: float
    rem: float
    err_rem: float
    source: str = ""


class GateResourceRow(BaseModel):
    molecule: str
    n_qubits: int
    layers: int
    ansatz_n1: int
    ansatz_n2: int
    hf_n1: int
    mr_n1: int
    mr_n2: int
    reference: str
    template: str
    source: str = ""


def _read_rows(path: Path) -> list[dict[str, str | None]]:
    """CSV rows as dicts; `#` lines are provenance comments, empty cells are None."""
    with path.open(encoding="utf8", newline="") as f:
        lines = [line for line in f if not line.startswith("#")]
    return [
        {key: value if value != "" else None for key, value in row.items()}
        for row in csv.DictReader(lines)
    ]


def load_mr_states(root: Path = DEFAULT_ROOT) -> list[MRStateRow]:
    return [MRStateRow.model_validate(r) for r in _read_rows(root / "tables" / "mr_states.csv")]


def load_energies(root: Path = DEFAULT_ROOT) -> list[EnergyRow]:
    return [EnergyRow.model_validate(r) for r in _read_rows(root / "tables" / "energies.csv")]


def load_gate_resources(root: Path = DEFAULT_ROOT) -> list[GateResourceRow]:
    return [
        GateResourceRow.model_validate(r) for r in _read_rows(root / "tables" / "gate_resources.csv")
    ]


def load_template(name: str, root: Path = DEFAULT_ROOT) -> PrepTemplate:
    return PrepTemplate.load(root / "tables" / "templates" / f"{name}.json")


@dataclass
class Check:
    name: str
    passed: bool
    detail: str = ""


@dataclass
class ValidationReport:
    """Per-row outcome of `validate_fixtures`.

    Notices record convention-dependent mismatches and never fail the report.
    """

    checks: list[Check] = field(default_factory=list)
    notices: list[str] = field(default_factory=list)

    def add(self, name: str, passed: bool, detail: str = "") -> None:
        self.checks.append(Check(name, passed, detail))
        if not passed:
            log.warning(f"Fixture check failed: {name} {detail}")

    @property
    def failures(self) -> list[Check]:
        return [c for c in self.checks if not c.passed]

    @property
    def ok(self) -> bool:
        return not self.failures

    def to_json(self) -> dict:
        return {
            "ok": self.ok,
            "checks": len(self.checks),
            "failures": [{"name": c.name, "detail": c.detail} for c in self.failures],
            "notices": self.notices,
        }


def check_energies(rows: list[EnergyRow], report: ValidationReport) -> None:
    for row in rows:
        for method in ENERGY_METHODS:
            error = abs(getattr(row, method) - row.exact)
            tabulated = getattr(row, f"err_{method}")
            report.add(
                f"energy {row.molecule} R={row.R:.2f} {method}",
                abs(error - tabulated) <= ENERGY_SLACK,
                f"|E - exact| = {error:.4f}, tabulated {tabulated:.4f}",
            )


def check_mr_states(rows: list[MRStateRow], root: Path, report: ValidationReport) -> None:
    """Tabulated angles and solved angles must both reproduce the coefficients."""
    templates: dict[str, PrepTemplate] = {}
    for row in rows:
        name = f"mr-state {row.molecule} R={row.R:.2f}"
        try:
            template = templates.setdefault(row.template, load_template(row.template, root))
            target = row.target()
            tabulated = verify_preparation(
                compile_with_angles(target, template, row.angles), target, AMPLITUDE_SLACK
            )
            report.add(
                f"{name} tabulated angles",
                tabulated.ok,
                f"max amplitude error {tabulated.max_amplitude_error:.2e}",
            )
            circuit, theta = compile_state(target, template)
            solved = verify_preparation(circuit, target, AMPLITUDE_SLACK)
            report.add(
                f"{name} solved angles",
                solved.ok,
                f"angles {[round(float(t), 4) for t in theta]}, "
                f"max amplitude error {solved.max_amplitude_error:.2e}",
            )
        except (MremError, OSError) as e:
            report.add(name, False, f"{type(e).__name__}: {e}")


def check_gate_resources(rows: list[GateResourceRow], root: Path, report: ValidationReport) -> None:
    """Ansatz and HF counts are pinned exactly; MR counts depend on conventions."""
    givens = decompose(GateOp(GateKind.G, (1, 0), param=ParamRef(0)))
    report.add("G decomposition CNOTs", count_resources(givens)[1] == 2)
    double = decompose(GateOp(GateKind.G2, (3, 2, 1, 0), param=ParamRef(0)))
    report.add("G2 decomposition CNOTs", count_resources(double)[1] == 14)
    for row in rows:
        ansatz = count_resources(build_ry_linear(row.n_qubits, row.layers))
        report.add(
            f"resources {row.molecule} ansatz",
            ansatz == (row.ansatz_n1, row.ansatz_n2),
            f"counted {ansatz}, tabulated {(row.ansatz_n1, row.ansatz_n2)}",
        )
        hf = count_resources(x_layer(row.reference, row.n_qubits))
        report.add(
            f"resources {row.molecule} HF circuit",
            hf == (row.hf_n1, 0),
            f"counted {hf}, tabulated {(row.hf_n1, 0)}",
        )
        template = load_template(row.template, root)
        prep = x_layer(row.reference, row.n_qubits).concat(template.circuit)
        mr = count_resources(prep)
        if mr != (row.mr_n1, row.mr_n2):
            report.notices.append(
                f"{row.molecule} MR circuit counts {mr} differ from tabulated "
                f"{(row.mr_n1, row.mr_n2)}; the table's decomposition convention is not pinned"
            )


def validate_fixtures(root: Path = DEFAULT_ROOT) -> ValidationReport:
    """Run every table consistency check under `root`.

    Raises:
        FileNotFoundError: If a fixture table is missing.
    """
    log.info(f"Validating fixtures in '{root}'")
    report = ValidationReport()
    check_energies(load_energies(root), report)
    check_mr_states(load_mr_states(root), root, report)
    check_gate_resources(load_gate_resources(root), root, report)
    log.info(
        f"{len(report.checks)} fixture checks, {len(report.failures)} failed, "
        f"{len(report.notices)} notice(s)"
    )
    return report
