from math import atan2, cos, sin

import numpy as np
import pytest
from conftest import FIXTURES
from hypothesis import given
from hypothesis import strategies as st

from mrem.circuit import Circuit, GateKind, GateOp, ParamRef, count_resources, x_layer
from mrem.errors import ContractError, DimensionError, SolverError, TemplateMismatchError
from mrem.fixtures import load_mr_states, load_template
from mrem.pauli import PauliSum, exact_ground_state, expectation
from mrem.stateprep import (
    MRTarget,
    PrepTemplate,
    cascade_angles,
    compile_state,
    compile_with_angles,
    reachable_support,
    solve_parameters,
    taper_target,
    verify_preparation,
)
from mrem.taper import symmetry_set, taper_operator

MR_ROWS = load_mr_states(FIXTURES)


def two_component(first: float, second: float) -> MRTarget:
    return MRTarget(4, 0b0011, ((0b0011, first), (0b1100, second)))


def chained_givens() -> PrepTemplate:
    """Two G gates sharing one angle, so 001 -> 010 -> 100 cannot stop halfway."""
    ops = (
        GateOp(GateKind.G, (1, 0), param=ParamRef(0)),
        GateOp(GateKind.G, (2, 1), param=ParamRef(0)),
    )
    return PrepTemplate(Circuit(3, ops, 1), "chained")


def independent_excitations() -> PrepTemplate:
    """Alpha 0 -> 2 and beta 1 -> 3 single excitations with their own angles."""
    ops = (
        GateOp(GateKind.G, (2, 0), param=ParamRef(0)),
        GateOp(GateKind.G, (3, 1), param=ParamRef(1)),
    )
    return PrepTemplate(Circuit(4, ops, 2), "independent")


class TestMRTarget:
    def test_renormalises_and_fixes_sign(self):
        target = two_component(-0.8002, 0.6)
        assert target.coefficients[0] > 0
        assert np.sum(target.coefficients**2) == pytest.approx(1.0)
        assert target.coefficients[1] < 0

    @pytest.mark.parametrize(
        "components",
        [
            (),
            ((0b0011, 0.5),) * 2,
            ((0b1100, 0.8), (0b0011, 0.6)),
            ((0b0011, 0.9), (0b1100, 0.1)),
            tuple((d, 0.5) for d in (0b0011, 0b0101, 0b0110, 0b1001, 0b1010)),
        ],
    )
    def test_invalid(self, components):
        with pytest.raises(ContractError):
            MRTarget(4, 0b0011, components)

    def test_determinant_too_wide(self):
        with pytest.raises(DimensionError):
            MRTarget(2, 0b0011, ((0b0011, 0.6), (0b1100, 0.8)))

    def test_truncate_keeps_largest(self):
        target = MRTarget(
            4, 0b0011, ((0b0011, 0.9), (0b0101, 0.1), (0b1100, -0.4), (0b1010, 0.1414))
        )
        truncated = target.truncate(2)
        assert truncated.determinants == [0b0011, 0b1100]
        assert np.sum(truncated.coefficients**2) == pytest.approx(1.0)
        assert target.truncate(1).coefficients == pytest.approx([1.0])
        with pytest.raises(ContractError):
            target.truncate(0)

    def test_json_round_trip(self, mr_target_04: MRTarget):
        loaded = MRTarget.from_json(mr_target_04.to_json())
        assert loaded.determinants == mr_target_04.determinants
        np.testing.assert_allclose(loaded.coefficients, mr_target_04.coefficients, atol=1e-15)

    def test_statevector(self, mr_target_04: MRTarget):
        psi = mr_target_04.statevector()
        assert np.count_nonzero(psi.data) == 2
        assert psi.data[0b0011] == pytest.approx(4 / np.sqrt(17))


class TestTemplate:
    def test_rejects_unsupported_gates(self):
        with pytest.raises(ContractError):
            PrepTemplate(Circuit(1, (GateOp(GateKind.RY, (0,), angle=0.1),)))

    def test_load_names_template(self, g2_template: PrepTemplate):
        assert g2_template.name == "g2_template"
        assert g2_template.slot_count == 1

    @pytest.mark.parametrize(
        "reference, support",
        [(0b0011, {0b0011, 0b1100}), (0b1100, {0b0011, 0b1100}), (0b0101, {0b0101})],
    )
    def test_reachable_support(self, g2_template: PrepTemplate, reference: int, support: set[int]):
        assert reachable_support(g2_template, reference) == support

    def test_published_templates_reach_their_determinants(self):
        for row in MR_ROWS:
            target = row.target()
            reachable = reachable_support(load_template(row.template, FIXTURES), target.reference)
            assert set(target.determinants) <= reachable, row.source

    def test_h2o_preparation_cost(self):
        prep = x_layer("00001", 5).concat(load_template("h2o_a", FIXTURES).circuit)
        assert count_resources(prep) == (9, 7)


class TestCascade:
    @given(st.floats(-3.0, 3.0), st.floats(-3.0, 3.0))
    def test_angles_reproduce_coefficients(self, theta1: float, theta2: float):
        c1, s1 = cos(theta1 / 2), sin(theta1 / 2)
        c2, s2 = cos(theta2 / 2), sin(theta2 / 2)
        a, b, c = c1 * c2, s1, c1 * s2
        t1, t2 = cascade_angles(a, b, c)
        rebuilt = (cos(t1 / 2) * cos(t2 / 2), sin(t1 / 2), cos(t1 / 2) * sin(t2 / 2))
        np.testing.assert_allclose(rebuilt, (a, b, c), atol=1e-9)


class TestSolve:
    def test_double_givens_angle(self, mr_target_04: MRTarget, g2_template: PrepTemplate):
        theta = solve_parameters(mr_target_04, g2_template)
        assert theta[0] == pytest.approx(2 * atan2(-1, 4), abs=1e-7)

    def test_compiled_state_verifies(self, mr_target_04: MRTarget, g2_template: PrepTemplate):
        circuit, _ = compile_state(mr_target_04, g2_template)
        report = verify_preparation(circuit, mr_target_04)
        assert report.ok
        assert report.max_amplitude_error < 1e-8
        assert report.number_conserved
        assert report.weights == [2]
        assert report.overlap == pytest.approx(1.0)

    @pytest.mark.parametrize("theta1, theta2", [(0.7, -0.4), (-1.1, 0.9), (0.3, 0.0)])
    def test_product_of_two_excitations(self, theta1: float, theta2: float):
        c1, s1 = cos(theta1 / 2), sin(theta1 / 2)
        c2, s2 = cos(theta2 / 2), sin(theta2 / 2)
        target = MRTarget(
            4,
            0b0011,
            ((0b0011, c1 * c2), (0b0110, s1 * c2), (0b1001, c1 * s2), (0b1100, s1 * s2)),
        )
        a, b, c, d = target.coefficients
        assert a * d == pytest.approx(b * c)
        circuit, theta = compile_state(target, independent_excitations())
        np.testing.assert_allclose(theta, [theta1, theta2], atol=1e-6)
        report = verify_preparation(circuit, target)
        assert report.max_amplitude_error < 1e-8
        assert report.leakage < 1e-8
        assert report.weights == [2]
        assert report.number_conserved

    def test_f2_single_rotation(self):
        row = next(r for r in MR_ROWS if r.molecule == "F2" and r.R == 1.05)
        _, theta = compile_state(row.target(), load_template(row.template, FIXTURES))
        assert theta[0] == pytest.approx(-0.1652, abs=5e-4)

    @pytest.mark.parametrize("row", MR_ROWS, ids=lambda r: f"{r.molecule}-{r.R:.2f}")
    def test_published_rows(self, row):
        target = row.target()
        template = load_template(row.template, FIXTURES)
        tabulated = verify_preparation(compile_with_angles(target, template, row.angles), target)
        assert tabulated.ok
        circuit, _ = compile_state(target, template)
        solved = verify_preparation(circuit, target)
        assert solved.max_amplitude_error < 1e-6
        assert solved.number_conserved is None

    def test_unreachable_determinant(self, g2_template: PrepTemplate):
        target = MRTarget(4, 0b0011, ((0b0011, 0.8), (0b0101, 0.6)))
        with pytest.raises(TemplateMismatchError) as info:
            solve_parameters(target, g2_template)
        assert info.value.bitstrings == ["0101"]

    def test_too_many_angles(self, g2_template: PrepTemplate):
        with pytest.raises(ContractError):
            solve_parameters(MRTarget(4, 0b0011, ((0b0011, 1.0),)), g2_template)

    def test_width_mismatch(self, g2_template: PrepTemplate):
        target = MRTarget(5, 0b00011, ((0b00011, 0.8), (0b01100, 0.6)))
        with pytest.raises(ContractError):
            solve_parameters(target, g2_template)

    def test_unsolvable_amplitudes(self):
        target = MRTarget(3, 0b001, ((0b001, 0.8), (0b010, 0.6)))
        with pytest.raises(SolverError):
            solve_parameters(target, chained_givens())


class TestVerify:
    def test_wrong_angle_is_reported(self, mr_target_04: MRTarget, g2_template: PrepTemplate):
        circuit = compile_with_angles(mr_target_04, g2_template, [0.0])
        report = verify_preparation(circuit, mr_target_04)
        assert not report.ok
        assert report.amplitude_errors["1100"] == pytest.approx(1 / np.sqrt(17))
        assert report.leakage == pytest.approx(0.0, abs=1e-12)
        assert report.to_json()["ok"] is False

    def test_leakage(self):
        target = MRTarget(3, 0b001, ((0b001, 0.8), (0b010, 0.6)))
        report = verify_preparation(compile_with_angles(target, chained_givens(), [1.0]), target)
        assert report.leakage == pytest.approx(sin(0.5) ** 4)


class TestTaperTarget:
    def test_tapered_target_is_the_tapered_ground_state(
        self, h2_form_04: PauliSum, mr_target_04: MRTarget
    ):
        sym = symmetry_set(h2_form_04, reference=mr_target_04.reference)
        tapered_h = taper_operator(h2_form_04, sym)
        tapered = taper_target(mr_target_04, sym)
        assert tapered.n_qubits == 1
        assert tapered.tapered
        energy, _ = exact_ground_state(tapered_h)
        assert expectation(tapered_h, tapered.statevector()) == pytest.approx(energy, abs=1e-8)
