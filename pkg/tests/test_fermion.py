import numpy as np
import pytest
from conftest import h2_form_energy
from hypothesis import given
from hypothesis import strategies as st
from pydantic import ValidationError

from mrem.errors import DimensionError
from mrem.fermion import (
    OrbitalLayout,
    SpinPenaltyConfig,
    add_spin_penalty,
    annihilation,
    creation,
    hf_bitstring,
    jw_excitation,
    number_operator,
    s_squared_operator,
    s_z,
)
from mrem.pauli import PauliSum, apply, commutator, eigenvalues, exact_ground_state


def basis_vector(index: int, n_qubits: int) -> np.ndarray:
    v = np.zeros(1 << n_qubits, dtype=complex)
    v[index] = 1
    return v


class TestOrbitalLayout:
    def test_qubits_and_electrons(self, closed_shell_layout: OrbitalLayout):
        assert closed_shell_layout.n_qubits == 4
        assert closed_shell_layout.n_electrons == 2

    @pytest.mark.parametrize("n_alpha, n_beta", [(3, 0), (2, 3), (-1, 0)])
    def test_invalid_occupations(self, n_alpha: int, n_beta: int):
        with pytest.raises(ValidationError):
            OrbitalLayout(n_spatial=2, n_alpha=n_alpha, n_beta=n_beta)

    @pytest.mark.parametrize(
        "layout, expected",
        [
            (OrbitalLayout(n_spatial=2, n_alpha=1, n_beta=1), 0b0011),
            (OrbitalLayout(n_spatial=4, n_alpha=2, n_beta=2), 0b00001111),
            (OrbitalLayout(n_spatial=3, n_alpha=2, n_beta=1), 0b000111),
            (OrbitalLayout(n_spatial=3, n_alpha=2, n_beta=0), 0b000101),
        ],
    )
    def test_hf_bitstring(self, layout: OrbitalLayout, expected: int):
        assert hf_bitstring(layout) == expected


class TestJordanWigner:
    @given(st.integers(0, 3), st.integers(0, 3))
    def test_anticommutation(self, p: int, q: int):
        n = 4
        anti = creation(p, n) * annihilation(q, n) + annihilation(q, n) * creation(p, n)
        expected = PauliSum.identity(n) if p == q else PauliSum(n)
        assert anti.isclose(expected)

    def test_creation_squares_to_zero(self):
        assert (creation(1, 3) * creation(1, 3)).isclose(PauliSum(3))

    def test_number_operator_is_diagonal_count(self):
        n = 4
        number = number_operator(n)
        for index in range(1 << n):
            out = apply(number, basis_vector(index, n))
            np.testing.assert_allclose(out, index.bit_count() * basis_vector(index, n), atol=1e-12)

    def test_excitation_moves_an_electron(self):
        n = 4
        out = apply(jw_excitation(2, 0, n), basis_vector(0b0001, n))
        assert np.isclose(abs(out[0b0100]), 1.0)
        assert np.isclose(np.linalg.norm(out), 1.0)

    def test_index_out_of_range(self):
        with pytest.raises(DimensionError):
            creation(4, 4)


class TestSpin:
    def test_commutes_with_number_and_sz(self, closed_shell_layout: OrbitalLayout):
        s2 = s_squared_operator(closed_shell_layout)
        n = closed_shell_layout.n_qubits
        assert commutator(s2, number_operator(n)).isclose(PauliSum(n))
        assert commutator(s2, s_z(closed_shell_layout)).isclose(PauliSum(n))

    @pytest.mark.parametrize("n_spatial", [1, 2, 3])
    def test_eigenvalues_are_s_times_s_plus_one(self, n_spatial: int):
        s2 = s_squared_operator(OrbitalLayout(n_spatial=n_spatial))
        allowed = np.array([s * (s + 1) for s in np.arange(0, n_spatial + 0.5, 0.5)])
        for value in eigenvalues(s2):
            assert np.min(np.abs(allowed - value)) < 1e-10

    @pytest.mark.parametrize(
        "det, value",
        [(0b0011, 0.0), (0b1100, 0.0), (0b0101, 2.0), (0b1010, 2.0), (0b0001, 0.75)],
    )
    def test_determinant_eigenstates(
        self, closed_shell_layout: OrbitalLayout, det: int, value: float
    ):
        s2 = s_squared_operator(closed_shell_layout)
        v = basis_vector(det, 4)
        np.testing.assert_allclose(apply(s2, v), value * v, atol=1e-12)

    def test_open_shell_pair_is_not_an_eigenstate(self, closed_shell_layout: OrbitalLayout):
        s2 = s_squared_operator(closed_shell_layout)
        v = basis_vector(0b1001, 4)
        out = apply(s2, v)
        assert np.vdot(v, out).real == pytest.approx(1.0)
        assert not np.allclose(out, v)


class TestSpinPenalty:
    def test_lambda_alias(self):
        assert SpinPenaltyConfig.model_validate({"lambda": 0.5}).lambda_ == 0.5
        assert SpinPenaltyConfig(lambda_=0.25).lambda_ == 0.25

    def test_negative_lambda(self):
        with pytest.raises(ValidationError):
            SpinPenaltyConfig(lambda_=-1.0)

    def test_zero_lambda_is_identity(
        self, h2_form_04: PauliSum, closed_shell_layout: OrbitalLayout
    ):
        assert add_spin_penalty(h2_form_04, closed_shell_layout, SpinPenaltyConfig()) == h2_form_04

    def test_singlet_ground_energy_unchanged(
        self, h2_form: PauliSum, coupling: float, closed_shell_layout: OrbitalLayout
    ):
        penalized = add_spin_penalty(h2_form, closed_shell_layout, SpinPenaltyConfig(lambda_=0.5))
        energy, _ = exact_ground_state(penalized)
        assert energy == pytest.approx(h2_form_energy(coupling), abs=1e-10)

    def test_triplet_is_lifted(self, h2_form_04: PauliSum, closed_shell_layout: OrbitalLayout):
        config = SpinPenaltyConfig(lambda_=0.5)
        penalized = add_spin_penalty(h2_form_04, closed_shell_layout, config)
        v = basis_vector(0b0101, 4)
        shift = np.vdot(v, apply(penalized, v)).real - np.vdot(v, apply(h2_form_04, v)).real
        assert shift == pytest.approx(1.0)

    def test_width_mismatch(self, two_qubit: PauliSum, closed_shell_layout: OrbitalLayout):
        with pytest.raises(DimensionError):
            add_spin_penalty(two_qubit, closed_shell_layout, SpinPenaltyConfig(lambda_=0.5))
