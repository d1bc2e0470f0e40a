import shutil
from pathlib import Path

import pytest
from conftest import FIXTURES

from mrem.fixtures import (
    ENERGY_METHODS,
    ValidationReport,
    check_energies,
    load_energies,
    load_gate_resources,
    load_mr_states,
    validate_fixtures,
)


@pytest.fixture
def fixture_copy(tmp_path: Path) -> Path:
    shutil.copytree(FIXTURES / "tables", tmp_path / "tables")
    return tmp_path


class TestLoaders:
    def test_row_counts(self):
        assert len(load_mr_states(FIXTURES)) == 37
        assert len(load_energies(FIXTURES)) == 37
        assert [r.molecule for r in load_gate_resources(FIXTURES)] == ["H2O", "F2", "N2"]

    def test_mr_state_rows(self):
        rows = load_mr_states(FIXTURES)
        assert {r.molecule for r in rows} == {"H2O", "F2", "N2"}
        for row in rows:
            assert len(row.angles) == (1 if row.theta2 is None else 2)
            target = row.target()
            assert target.tapered
            assert target.n_qubits == len(row.reference)

    def test_empty_cells_are_none(self):
        single = [r for r in load_mr_states(FIXTURES) if r.det_c is None]
        assert single
        assert all(r.c_c is None for r in single)


class TestValidateFixtures:
    def test_shipped_tables_pass(self):
        report = validate_fixtures(FIXTURES)
        assert report.ok, report.failures
        assert len(report.checks) == 37 * len(ENERGY_METHODS) + 37 * 2 + 2 + 3 * 2
        assert len(report.notices) == 1
        assert report.notices[0].startswith("N2 MR circuit counts")
        assert report.to_json()["ok"] is True

    def test_edited_energy_fails(self, fixture_copy: Path):
        path = fixture_copy / "tables" / "energies.csv"
        lines = path.read_text(encoding="utf8").splitlines()
        header = next(i for i, line in enumerate(lines) if line.startswith("molecule,"))
        cells = lines[header + 1].split(",")
        cells[3] = f"{float(cells[3]) + 0.01:.4f}"
        lines[header + 1] = ",".join(cells)
        path.write_text("\n".join(lines) + "\n", encoding="utf8")
        report = validate_fixtures(fixture_copy)
        assert not report.ok
        assert [c.name for c in report.failures] == [
            f"energy {cells[0]} R={float(cells[1]):.2f} vqe_mr"
        ]

    def test_missing_template_is_a_failure(self, fixture_copy: Path):
        (fixture_copy / "tables" / "templates" / "f2_d.json").unlink()
        report = validate_fixtures(fixture_copy)
        failures = [c for c in report.failures if c.name.startswith("mr-state F2")]
        assert failures
        assert all("FileNotFoundError" in c.detail for c in failures)

    def test_missing_table(self, tmp_path: Path):
        with pytest.raises(FileNotFoundError):
            validate_fixtures(tmp_path)

    def test_report_collects_failures(self):
        report = ValidationReport()
        check_energies(load_energies(FIXTURES)[:1], report)
        report.add("forced", False, "detail")
        assert len(report.checks) == len(ENERGY_METHODS) + 1
        assert report.to_json()["failures"] == [{"name": "forced", "detail": "detail"}]
