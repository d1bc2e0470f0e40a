"""Command-line interface: one subcommand per pipeline stage.

Exit codes are 0 for success, 1 for a failed run or validation, 2 for a
usage error and 3 for an internal error. Failures print a single
`error: <ErrorName>: <message>` line on stderr.
"""

import argparse
import logging
import sys
from collections.abc import Callable, Sequence
from pathlib import Path
from typing import Any

import numpy as np
from pydantic import ValidationError

from mrem.alchemy import get_database
from mrem.driver import (
    MitigationRecord,
    Variant,
    run_mrem,
    run_pes_sweep,
    run_vqe,
    spin_penalty_term,
    variant_problem,
    write_convergence,
)
from mrem.errors import ConfigurationError, MremError
from mrem.fermion import hf_bitstring
from mrem.fixtures import DEFAULT_ROOT, validate_fixtures
from mrem.helpers import parse_shots, write_json
from mrem.pauli import (
    MAX_DENSE_QUBITS,
    PauliSum,
    exact_ground_state,
    load_pauli_sum,
    save_pauli_sum,
)
from mrem.settings import RunConfig
from mrem.sim import ShotModel
from mrem.stateprep import MRTarget, PrepTemplate, compile_state, taper_target, verify_preparation
from mrem.states import QuantumState, bitstring_to_int, int_to_bitstring
from mrem.taper import SymmetrySet, project_determinant, symmetry_set, taper_operator

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2
EXIT_INTERNAL = 3

Handler = Callable[[RunConfig, argparse.Namespace], int]


def _shots(value: str) -> ShotModel:
    try:
        shots = parse_shots(value)
    except ValueError as e:
        raise argparse.ArgumentTypeError(str(e)) from None
    return ShotModel.off() if shots is None else ShotModel(shots=shots)


def _sector(value: str) -> list[int]:
    try:
        sector = [int(s) for s in value.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid sector {value!r}") from None
    if any(s not in (1, -1) for s in sector):
        raise argparse.ArgumentTypeError("sector entries must be 1 or -1")
    return sector


def _bits(value: str) -> str:
    if not value or set(value) - {"0", "1"}:
        raise argparse.ArgumentTypeError(f"invalid bitstring {value!r}")
    return value


def _common_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    group = common.add_argument_group("global options")
    group.add_argument("--config", type=Path, help="JSON run configuration file")
    group.add_argument("--seed", type=int, help="seed of the shot-noise stream (u64)")
    group.add_argument("--out", type=Path, help="output directory (default: out)")
    group.add_argument(
        "--noiseless", action="store_true", default=None, help="disable gate noise"
    )
    group.add_argument(
        "--shots", type=_shots, help="shots per energy estimate, or 'off' for exact energies"
    )
    group.add_argument("--database", type=Path, help="SQLite file to append records to")
    return common


def _add_hamiltonian(p: argparse.ArgumentParser) -> None:
    p.add_argument("--hamiltonian", type=Path, help="Pauli-sum text file")


def _add_run_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--layers", type=int, help="RY-linear ansatz depth L")
    p.add_argument("--spin-penalty", type=float, help="spin penalty weight lambda >= 0")
    p.add_argument("--budget", type=int, help="maximum objective evaluations")
    p.add_argument("--reference", type=_bits, help="HF determinant, qubit 0 rightmost")
    p.add_argument("--taper", action="store_true", default=None, help="taper Z2 symmetries first")
    p.add_argument("--sector", type=_sector, help="explicit sector, e.g. 1,-1,1")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mrem", description="Multireference-state error mitigation for VQE."
    )
    common = _common_parser()
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("parse", parents=[common], help="parse and normalise a Hamiltonian")
    _add_hamiltonian(p)
    p.set_defaults(handler=cmd_parse)

    p = sub.add_parser("exact", parents=[common], help="exact ground energy by diagonalisation")
    _add_hamiltonian(p)
    p.set_defaults(handler=cmd_exact)

    p = sub.add_parser("taper", parents=[common], help="remove qubits using Z2 symmetries")
    _add_hamiltonian(p)
    p.add_argument("--reference", type=_bits, help="determinant fixing the sector")
    p.add_argument("--sector", type=_sector, help="explicit sector, e.g. 1,-1,1")
    p.add_argument("--target", type=Path, help="MR target to map onto the tapered register")
    p.set_defaults(handler=cmd_taper)

    p = sub.add_parser("prep", parents=[common], help="compile an MR state preparation circuit")
    p.add_argument("--target", type=Path, help="MR target JSON file")
    p.add_argument("--template", type=Path, help="preparation template JSON file")
    p.add_argument("--max-components", type=int, help="truncate the target to k components")
    p.set_defaults(handler=cmd_prep)

    p = sub.add_parser("vqe", parents=[common], help="plain VQE without mitigation")
    _add_hamiltonian(p)
    _add_run_options(p)
    p.add_argument("--target", type=Path, help="MR target JSON file, for an MR start")
    p.add_argument("--template", type=Path, help="preparation template JSON file")
    p.add_argument("--mr-only", action="store_true", default=None, help="start from the MR state")
    p.set_defaults(handler=cmd_vqe)

    p = sub.add_parser("mrem", parents=[common], help="VQE with REM/MREM correction")
    _add_hamiltonian(p)
    _add_run_options(p)
    p.add_argument("--target", type=Path, help="MR target JSON file")
    p.add_argument("--template", type=Path, help="preparation template JSON file")
    p.add_argument("--max-components", type=int, help="truncate the target to k components")
    p.add_argument("--hf-only", action="store_true", default=None, help="run the HF reference only")
    p.add_argument("--mr-only", action="store_true", default=None, help="run the MR reference only")
    p.add_argument("--label", default="", help="label stored with the records")
    p.set_defaults(handler=cmd_mrem)

    p = sub.add_parser("pes", parents=[common], help="sweep the points of a configuration")
    p.add_argument("--workers", type=int, help="points run in parallel")
    p.add_argument("--hf-only", action="store_true", default=None, help="run the HF reference only")
    p.add_argument("--mr-only", action="store_true", default=None, help="run the MR reference only")
    p.set_defaults(handler=cmd_pes)

    p = sub.add_parser(
        "validate-fixtures", parents=[common], help="check the shipped table fixtures"
    )
    p.add_argument("--fixtures", type=Path, default=DEFAULT_ROOT, help="fixture root directory")
    p.set_defaults(handler=cmd_validate_fixtures)
    return parser


CONFIG_ARGS = (
    "seed",
    "out",
    "noiseless",
    "shots",
    "hamiltonian",
    "target",
    "template",
    "layers",
    "spin_penalty",
    "taper",
    "sector",
    "max_components",
    "hf_only",
    "mr_only",
    "workers",
)


def load_config(args: argparse.Namespace) -> RunConfig:
    """RunConfig from `--config`, env vars and the flags that were given."""
    overrides: dict[str, Any] = {name: getattr(args, name, None) for name in CONFIG_ARGS}
    config = RunConfig.from_file(args.config, **overrides)
    if (budget := getattr(args, "budget", None)) is not None:
        config = config.model_copy(
            update={"optimizer": config.optimizer.model_copy(update={"budget": budget})}
        )
    return config


def _require(value: Path | None, name: str) -> Path:
    if value is None:
        raise ConfigurationError(name)
    return value


def _dominant_components(psi: QuantumState, cutoff: float = 1e-3) -> list[dict]:
    data = psi.data
    largest = data[int(np.argmax(np.abs(data)))]
    data = data * (abs(largest) / largest)
    order = np.argsort(-np.abs(data), kind="stable")
    return [
        {"det": int_to_bitstring(int(i), psi.n_qubits), "amplitude": float(data[i].real)}
        for i in order
        if abs(data[i]) > cutoff
    ]


def cmd_parse(config: RunConfig, args: argparse.Namespace) -> int:
    h = load_pauli_sum(_require(config.hamiltonian, "hamiltonian"))
    print(
        f"{h.n_qubits} qubits, {len(h)} terms, hermitian {h.is_hermitian()}, "
        f"one-norm {h.one_norm():.12g}"
    )
    save_pauli_sum(h, config.out / "hamiltonian.txt")
    return EXIT_OK


def cmd_exact(config: RunConfig, args: argparse.Namespace) -> int:
    h = load_pauli_sum(_require(config.hamiltonian, "hamiltonian"))
    energy, psi = exact_ground_state(h)
    print(f"{energy:.12g}")
    write_json(
        config.out / "exact.json",
        {"n_qubits": h.n_qubits, "energy": energy, "components": _dominant_components(psi)},
    )
    return EXIT_OK


def _reference(config: RunConfig, args: argparse.Namespace) -> int | None:
    if (bits := getattr(args, "reference", None)) is not None:
        return bitstring_to_int(bits)
    if config.layout is not None:
        return hf_bitstring(config.layout)
    return None


def cmd_taper(config: RunConfig, args: argparse.Namespace) -> int:
    h = load_pauli_sum(_require(config.hamiltonian, "hamiltonian"))
    sym = symmetry_set(h, sector=config.sector, reference=_reference(config, args))
    tapered = taper_operator(h, sym)
    save_pauli_sum(tapered, config.out / "tapered.txt")
    write_json(config.out / "symmetries.json", sym.to_json())
    if config.target is not None:
        target = taper_target(MRTarget.load(config.target), sym)
        write_json(config.out / "tapered_target.json", target.to_json())
    print(f"{h.n_qubits} -> {tapered.n_qubits} qubits, sector {list(sym.sector)}")
    return EXIT_OK


def _load_target(config: RunConfig) -> MRTarget | None:
    if config.target is None:
        return None
    target = MRTarget.load(config.target)
    if config.max_components is not None:
        target = target.truncate(config.max_components)
    return target


def cmd_prep(config: RunConfig, args: argparse.Namespace) -> int:
    _require(config.target, "target")
    target = _load_target(config)
    assert target is not None
    template = PrepTemplate.load(_require(config.template, "template"))
    circuit, theta = compile_state(target, template)
    report = verify_preparation(circuit, target)
    config.out.mkdir(parents=True, exist_ok=True)
    circuit.save(config.out / "circuit.json")
    write_json(config.out / "angles.json", {"template": template.name, "angles": theta})
    write_json(config.out / "report.json", report.to_json())
    print(" ".join(f"{t:.6f}" for t in theta))
    if not report.ok:
        print(
            f"error: PreparationReport: max amplitude error {report.max_amplitude_error:.3e}",
            file=sys.stderr,
        )
        return EXIT_FAILURE
    return EXIT_OK


class _Inputs:
    """Hamiltonian, penalty and references of a run, tapered when asked."""

    def __init__(self, config: RunConfig, args: argparse.Namespace) -> None:
        self.hamiltonian: PauliSum = load_pauli_sum(_require(config.hamiltonian, "hamiltonian"))
        self.settings = config.sweep_settings()
        self.penalty = spin_penalty_term(self.settings, self.hamiltonian.n_qubits)
        self.target = _load_target(config)
        self.template = PrepTemplate.load(config.template) if config.template else None
        self.hf_reference = _reference(config, args)
        self.symmetries: SymmetrySet | None = None
        if config.taper:
            self._taper(config)

    def _taper(self, config: RunConfig) -> None:
        reference = self.hf_reference
        if reference is None and self.target is not None:
            reference = self.target.reference
        sym = symmetry_set(self.hamiltonian, sector=config.sector, reference=reference)
        self.hamiltonian = taper_operator(self.hamiltonian, sym)
        if self.penalty is not None:
            self.penalty = taper_operator(self.penalty, sym)
        if self.target is not None:
            self.target = taper_target(self.target, sym)
        if reference is not None:
            self.hf_reference = project_determinant(reference, sym)
        self.symmetries = sym

    def ground_state(self) -> tuple[float | None, QuantumState | None]:
        if self.hamiltonian.n_qubits > MAX_DENSE_QUBITS:
            log.warning("Register too wide for the exact ground state; overlaps are skipped")
            return None, None
        return exact_ground_state(self.hamiltonian)


def cmd_vqe(config: RunConfig, args: argparse.Namespace) -> int:
    inputs = _Inputs(config, args)
    variant: Variant = "mr" if config.mr_only else "hf"
    hf_reference = inputs.hf_reference
    if variant == "hf" and hf_reference is None and inputs.target is None:
        hf_reference = 0
    problem, _ = variant_problem(
        inputs.hamiltonian,
        variant,
        inputs.settings,
        inputs.target,
        inputs.template,
        penalty=inputs.penalty,
        hf_reference=hf_reference,
    )
    energy, result = run_vqe(problem, config.optimizer)
    print(f"{energy:.12g}")
    write_json(
        config.out / "result.json",
        {
            "variant": variant,
            "energy": energy,
            "theta": result.theta,
            "iterations": result.iterations,
            "evaluations": result.evaluations,
            "truncated": result.truncated,
        },
    )
    write_convergence(config.out / "convergence.csv", {variant: result.trace})
    return EXIT_OK


def _store(records: list[MitigationRecord], database: Path | None) -> None:
    if (db := get_database(database)) is None:
        return
    for record in records:
        db.write_record(record)


def cmd_mrem(config: RunConfig, args: argparse.Namespace) -> int:
    inputs = _Inputs(config, args)
    e_exact, ground = inputs.ground_state()
    records: list[MitigationRecord] = []
    for offset, variant in enumerate(config.variants()):
        problem, reference = variant_problem(
            inputs.hamiltonian,
            variant,
            inputs.settings,
            inputs.target,
            inputs.template,
            stream=offset,
            penalty=inputs.penalty,
            hf_reference=inputs.hf_reference,
        )
        records.append(
            run_mrem(problem, reference, config.optimizer, ground_state=ground, label=args.label)
        )
    for record in records:
        print(
            f"{record.variant}: raw {record.e_vqe_raw:.8f} delta {record.delta:.8f} "
            f"mitigated {record.e_mitigated:.8f}"
        )
    write_json(
        config.out / "record.json",
        {
            "e_exact_diag": e_exact,
            "symmetries": inputs.symmetries.to_json() if inputs.symmetries else None,
            "records": [r.to_json() for r in records],
        },
    )
    write_convergence(
        config.out / "convergence.csv", {r.variant: r.trace for r in records}, args.label
    )
    _store(records, args.database)
    return EXIT_OK


def cmd_pes(config: RunConfig, args: argparse.Namespace) -> int:
    if not config.points:
        raise ConfigurationError("points")
    results = run_pes_sweep(config.points, config.sweep_settings(), config.out)
    _store([r for result in results for r in result.records.values()], args.database)
    if failed := [r.point.label for r in results if r.error]:
        print(f"error: SweepError: failed point(s) {', '.join(failed)}", file=sys.stderr)
        return EXIT_FAILURE
    print(f"{len(results)} point(s) written to {config.out}")
    return EXIT_OK


def cmd_validate_fixtures(config: RunConfig, args: argparse.Namespace) -> int:
    report = validate_fixtures(args.fixtures)
    write_json(config.out / "validation.json", report.to_json())
    for notice in report.notices:
        print(f"notice: {notice}")
    for check in report.failures:
        print(f"FAILED {check.name}: {check.detail}")
    print(f"{len(report.checks) - len(report.failures)}/{len(report.checks)} checks passed")
    return EXIT_OK if report.ok else EXIT_FAILURE


def _error_line(e: BaseException) -> str:
    message = " ".join(str(e).split())
    return f"error: {type(e).__name__}: {message}"


def run(argv: Sequence[str] | None = None) -> int:
    """Parse `argv`, dispatch to a subcommand and map errors to exit codes."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else EXIT_USAGE
    handler: Handler = args.handler
    try:
        config = load_config(args)
        log.debug(f"Running '{args.command}' with {config.model_dump(exclude={'points'})}")
        return handler(config, args)
    except (MremError, ValidationError, ConfigurationError, OSError) as e:
        log.debug(f"'{args.command}' failed", exc_info=True)
        print(_error_line(e), file=sys.stderr)
        return EXIT_FAILURE
    except Exception as e:
        log.exception(e)
        print(_error_line(e), file=sys.stderr)
        return EXIT_INTERNAL
