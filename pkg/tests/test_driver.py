import csv
from collections.abc import Callable
from pathlib import Path

import numpy as np
import pytest
from conftest import DERIVED, h2_form_energy, h2_form_path
from hypothesis import given
from hypothesis import strategies as st
from pydantic import ValidationError

from mrem.circuit import Circuit, GateKind, GateOp, ParamRef, build_ry_linear, x_layer
from mrem.driver import (
    RESULT_COLUMNS,
    ImFilConfig,
    MitigationRecord,
    SweepPoint,
    SweepSettings,
    VqeProblem,
    imfil_minimize,
    objective,
    run_mrem,
    run_pes_sweep,
    run_vqe,
    spin_penalty_term,
    variant_problem,
    write_convergence,
)
from mrem.errors import ContractError, DimensionError
from mrem.fermion import OrbitalLayout, SpinPenaltyConfig, s_squared_operator
from mrem.pauli import PauliSum, exact_ground_state
from mrem.sim import NoiseModel, ShotModel
from mrem.stateprep import MRTarget, PrepTemplate

EXACT = dict(noise=NoiseModel.noiseless(), shots=ShotModel.off())


def rosenbrock(x: np.ndarray) -> float:
    return float((1 - x[0]) ** 2 + 100 * (x[1] - x[0] ** 2) ** 2)


def noisy_quadratic(seed: int, sigma: float = 1e-3) -> Callable[[np.ndarray], float]:
    """Quadratic centred on (1, ..., 1) with seeded additive Gaussian noise."""
    rng = np.random.default_rng(seed)
    return lambda x: float(np.sum((x - 1) ** 2) + sigma * rng.standard_normal())


def sweep_points(*couplings: float) -> list[SweepPoint]:
    return [
        SweepPoint(
            label=f"K{k}",
            r=k,
            hamiltonian=h2_form_path(k),
            target=DERIVED / f"mr_K{k}.json",
            template=DERIVED / "g2_template.json",
        )
        for k in couplings
    ]


def sweep_settings(**overrides) -> SweepSettings:
    values = dict(
        layout=OrbitalLayout(n_spatial=2, n_alpha=1, n_beta=1),
        optimizer=ImFilConfig(budget=40),
        shots=ShotModel(shots=10**6),
        noise=NoiseModel(seed=7),
    )
    values.update(overrides)
    return SweepSettings(**values)


class TestImFilConfig:
    @pytest.mark.parametrize("scales", [(), (1.0, 1.0), (0.5, 1.0), (1.0, -0.5)])
    def test_invalid_scales(self, scales):
        with pytest.raises(ValidationError):
            ImFilConfig(scales=scales)

    def test_default_budget(self):
        assert ImFilConfig().budget_for(4) == 360
        assert ImFilConfig(budget=50).budget_for(4) == 50


class TestImFil:
    @given(st.lists(st.floats(-2, 2), min_size=1, max_size=4))
    def test_quadratic(self, centre: list[float]):
        a = np.array(centre)
        result = imfil_minimize(
            lambda x: float(np.sum((x - a) ** 2)), np.zeros(len(a)), ImFilConfig()
        )
        assert result.value < 1e-4
        assert result.evaluations <= ImFilConfig().budget_for(len(a))

    def test_rosenbrock(self):
        result = imfil_minimize(rosenbrock, [-1.2, 1.0], ImFilConfig(budget=2000))
        assert result.value < 1e-2
        assert result.evaluations <= 2000
        assert rosenbrock(result.theta) == result.value

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_noisy_quadratic(self, seed: int):
        first = imfil_minimize(noisy_quadratic(seed), [0.0, 0.0], ImFilConfig())
        assert np.max(np.abs(first.theta - 1)) < 5e-2
        second = imfil_minimize(noisy_quadratic(seed), [0.0, 0.0], ImFilConfig())
        np.testing.assert_array_equal(first.theta, second.theta)

    def test_budget_truncates(self):
        calls = []
        result = imfil_minimize(
            lambda x: calls.append(1) or rosenbrock(x), [0.0, 0.0], ImFilConfig(budget=7)
        )
        assert result.truncated
        assert result.evaluations == len(calls) == 7

    def test_budget_below_one_stencil(self):
        with pytest.raises(ContractError):
            imfil_minimize(rosenbrock, [0.0, 0.0], ImFilConfig(budget=4))

    def test_trace_is_monotone(self):
        result = imfil_minimize(rosenbrock, [-1.0, 1.0], ImFilConfig(budget=500))
        best = [value for _, _, value in result.trace]
        assert best == sorted(best, reverse=True)
        evaluations = [count for _, count, _ in result.trace]
        assert evaluations == sorted(evaluations)

    def test_deterministic(self):
        first = imfil_minimize(rosenbrock, [0.3, -0.2], ImFilConfig(budget=200))
        second = imfil_minimize(rosenbrock, [0.3, -0.2], ImFilConfig(budget=200))
        np.testing.assert_array_equal(first.theta, second.theta)
        assert first.trace == second.trace


class TestVqeProblem:
    def test_width_checks(self, h2_form_04: PauliSum):
        with pytest.raises(DimensionError):
            VqeProblem(h2_form_04, build_ry_linear(3, 1), x_layer(3, 4))
        with pytest.raises(DimensionError):
            VqeProblem(
                h2_form_04, build_ry_linear(4, 1), x_layer(3, 4), penalty=PauliSum.identity(2)
            )

    def test_init_must_be_bound(self, h2_form_04: PauliSum):
        init = Circuit(4, (GateOp(GateKind.G2, (3, 2, 1, 0), param=ParamRef(0)),), 1)
        with pytest.raises(ContractError):
            VqeProblem(h2_form_04, build_ry_linear(4, 1), init)

    def test_objective_at_zero_is_reference_energy(self, h2_form_04: PauliSum):
        problem = VqeProblem(h2_form_04, build_ry_linear(4, 1), x_layer("0011", 4), **EXACT)
        assert objective(problem, np.zeros(8)) == pytest.approx(-1.4)
        with pytest.raises(ContractError):
            objective(problem, np.zeros(3))

    def test_penalty_only_changes_penalized_objective(
        self, h2_form_04: PauliSum, closed_shell_layout: OrbitalLayout
    ):
        penalty = s_squared_operator(closed_shell_layout).scale(0.5)
        problem = VqeProblem(
            h2_form_04, build_ry_linear(4, 1), x_layer("0101", 4), penalty=penalty, **EXACT
        )
        theta = np.zeros(8)
        assert objective(problem, theta, penalized=False) == pytest.approx(-0.75)
        assert objective(problem, theta) == pytest.approx(0.25)

    def test_shot_noise_is_reproducible(self, h2_form_04: PauliSum):
        problem = VqeProblem(
            h2_form_04, build_ry_linear(4, 1), x_layer("0011", 4),
            noise=NoiseModel(seed=3), shots=ShotModel(shots=1000),
        )
        theta = np.full(8, 0.1)
        assert objective(problem, theta) == objective(problem, theta)


class TestRunMrem:
    def test_record_identity(self):
        record = MitigationRecord(
            e_exact_ref=-1.0, e_noisy_ref=-0.9, e_vqe_raw=-1.05, iterations=3, evaluations=20
        )
        assert record.delta == pytest.approx(0.1)
        assert record.e_mitigated == pytest.approx(-1.15)
        assert record.to_json()["e_mitigated"] == record.e_mitigated

    def test_noiseless_hf_has_no_shift(self, h2_form_04: PauliSum):
        problem = VqeProblem(h2_form_04, build_ry_linear(4, 1), x_layer("0011", 4), **EXACT)
        record = run_mrem(problem, 0b0011, ImFilConfig(budget=200))
        assert record.variant == "hf"
        assert record.delta == pytest.approx(0.0, abs=1e-12)
        assert record.e_exact_ref == pytest.approx(-1.4)
        assert record.e_mitigated == pytest.approx(record.e_vqe_raw, abs=1e-12)
        assert record.e_vqe_raw <= -1.4 + 1e-12

    def test_noiseless_mr_starts_at_the_ground_state(
        self, h2_form_04: PauliSum, mr_target_04: MRTarget, g2_template: PrepTemplate
    ):
        problem, reference = variant_problem(
            h2_form_04, "mr", SweepSettings(**EXACT), mr_target_04, g2_template
        )
        _, ground = exact_ground_state(h2_form_04)
        record = run_mrem(
            problem, reference, ImFilConfig(budget=60), ground_state=ground, label="K0.4"
        )
        assert record.variant == "mr"
        assert record.e_exact_ref == pytest.approx(h2_form_energy(0.4), abs=1e-8)
        assert record.e_vqe_raw == pytest.approx(h2_form_energy(0.4), abs=1e-8)
        assert record.overlap == pytest.approx(1.0, abs=1e-8)
        assert record.label == "K0.4"

    def test_rejects_wrong_preparation(self, h2_form_04: PauliSum):
        problem = VqeProblem(h2_form_04, build_ry_linear(4, 1), x_layer("0101", 4), **EXACT)
        with pytest.raises(ContractError):
            run_mrem(problem, 0b0011, ImFilConfig(budget=20))

    def test_noise_raises_reference_energies(
        self, h2_form_04: PauliSum, mr_target_04: MRTarget, g2_template: PrepTemplate
    ):
        layout = OrbitalLayout(n_spatial=2, n_alpha=1, n_beta=1)
        settings = SweepSettings(noise=NoiseModel(), shots=ShotModel.off(), layout=layout)
        for variant in ("hf", "mr"):
            problem, reference = variant_problem(
                h2_form_04, variant, settings, mr_target_04, g2_template
            )
            record = run_mrem(problem, reference, ImFilConfig(budget=17))
            assert record.delta > 0

    @pytest.mark.slow
    def test_mitigation_improves_on_raw_vqe(
        self, h2_form: PauliSum, coupling: float, g2_template: PrepTemplate
    ):
        target = MRTarget.load(DERIVED / f"mr_K{coupling}.json")
        exact = h2_form_energy(coupling)
        layout = OrbitalLayout(n_spatial=2, n_alpha=1, n_beta=1)
        for seed in range(5):
            settings = SweepSettings(
                noise=NoiseModel(seed=seed), shots=ShotModel(shots=10**6), layout=layout
            )
            errors = {}
            for offset, variant in enumerate(("hf", "mr")):
                problem, reference = variant_problem(
                    h2_form, variant, settings, target, g2_template, stream=2 * seed + offset
                )
                record = run_mrem(problem, reference, ImFilConfig(budget=80))
                assert record.e_mitigated == record.e_vqe_raw - record.delta
                errors[variant] = abs(record.e_mitigated - exact)
                assert errors[variant] < abs(record.e_vqe_raw - exact)
            assert errors["mr"] <= errors["hf"]

    def test_noiseless_three_layers_is_exact(
        self, h2_form_04: PauliSum, mr_target_04: MRTarget, g2_template: PrepTemplate
    ):
        settings = SweepSettings(layers=3, **EXACT)
        problem, reference = variant_problem(
            h2_form_04, "mr", settings, mr_target_04, g2_template
        )
        record = run_mrem(problem, reference, ImFilConfig(budget=200))
        assert record.delta == pytest.approx(0.0, abs=1e-12)
        assert abs(record.e_vqe_raw - h2_form_energy(0.4)) < 1.6e-3


class TestRunVqe:
    def test_two_qubit_ground_state(self, two_qubit: PauliSum):
        problem = VqeProblem(two_qubit, build_ry_linear(2, 1), x_layer(0, 2), **EXACT)
        energy, result = run_vqe(problem, ImFilConfig(budget=400))
        assert energy == pytest.approx(exact_ground_state(two_qubit)[0], abs=1e-3)
        assert result.evaluations <= 400


class TestVariants:
    def test_hf_reference_sources(self, h2_form_04: PauliSum, mr_target_04: MRTarget):
        layout = OrbitalLayout(n_spatial=2, n_alpha=1, n_beta=1)
        with_layout = SweepSettings(layout=layout, **EXACT)
        assert variant_problem(h2_form_04, "hf", with_layout)[1] == 0b0011
        assert variant_problem(h2_form_04, "hf", with_layout, hf_reference=0b0101)[1] == 0b0101
        bare = SweepSettings(**EXACT)
        assert variant_problem(h2_form_04, "hf", bare, target=mr_target_04)[1] == 0b0011
        with pytest.raises(ContractError):
            variant_problem(h2_form_04, "hf", bare)

    def test_mr_needs_target_and_template(self, h2_form_04: PauliSum, mr_target_04: MRTarget):
        with pytest.raises(ContractError):
            variant_problem(h2_form_04, "mr", SweepSettings(), target=mr_target_04)

    def test_spin_penalty_term(self, closed_shell_layout: OrbitalLayout):
        assert spin_penalty_term(SweepSettings(layout=closed_shell_layout), 4) is None
        settings = SweepSettings(
            layout=closed_shell_layout, spin_penalty=SpinPenaltyConfig(lambda_=0.5)
        )
        expected = s_squared_operator(closed_shell_layout).scale(0.5)
        assert spin_penalty_term(settings, 4).isclose(expected)
        with pytest.raises(DimensionError):
            spin_penalty_term(settings, 6)


class TestSweep:
    def test_outputs(self, out_dir: Path):
        results = run_pes_sweep(sweep_points(0.2, 0.8), sweep_settings(), out_dir)
        assert [r.point.label for r in results] == ["K0.2", "K0.8"]
        assert all(not r.error for r in results)
        assert set(results[0].records) == {"hf", "mr"}
        with (out_dir / "results.csv").open(encoding="utf8") as f:
            rows = list(csv.DictReader(f))
        assert list(rows[0]) == RESULT_COLUMNS
        assert float(rows[1]["e_exact_diag"]) == pytest.approx(h2_form_energy(0.8))
        assert float(rows[0]["err_mrem"]) == pytest.approx(
            abs(float(rows[0]["e_mrem"]) - float(rows[0]["e_exact_diag"])), abs=1e-9
        )
        series = (out_dir / "series.csv").read_text(encoding="utf8")
        assert "overlap_mr" in series
        assert (out_dir / "convergence.csv").read_text(encoding="utf8").startswith("point,series,")

    def test_repeated_sweeps_are_byte_identical(self, tmp_path: Path):
        points = sweep_points(0.4, 0.8)
        for run in ("first", "second"):
            run_pes_sweep(points, sweep_settings(), tmp_path / run)
        for name in ("results.csv", "series.csv", "convergence.csv"):
            first = (tmp_path / "first" / name).read_bytes()
            assert first == (tmp_path / "second" / name).read_bytes()

    def test_workers_do_not_change_results(self):
        points = sweep_points(0.2, 0.4, 0.8)
        serial = run_pes_sweep(points, sweep_settings(variants=("mr",)))
        threaded = run_pes_sweep(points, sweep_settings(variants=("mr",), workers=3))
        assert [r.row() for r in serial] == [r.row() for r in threaded]

    def test_failed_point_is_recorded(self):
        missing = SweepPoint(label="missing", hamiltonian=Path("no/such/file.txt"))
        points = [missing, *sweep_points(0.4)]
        results = run_pes_sweep(points, sweep_settings(variants=("hf",)))
        assert results[0].error.startswith("FileNotFoundError")
        assert not results[1].error
        assert results[0].row()["e_exact_diag"] == ""

    def test_write_convergence(self, out_dir: Path):
        path = out_dir / "convergence.csv"
        write_convergence(path, {"hf": [(1, 5, -1.25)], "mr": [(1, 5, -1.5), (2, 9, -1.5)]}, "K0.4")
        lines = path.read_text(encoding="utf8").splitlines()
        assert lines[0] == "point,series,iteration,evaluations,best_energy"
        assert lines[1:] == ["K0.4,hf,1,5,-1.25", "K0.4,mr,1,5,-1.5", "K0.4,mr,2,9,-1.5"]
