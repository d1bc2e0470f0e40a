from math import sqrt
from pathlib import Path

import pytest
from dotenv import load_dotenv

from mrem.alchemy import ResultsDB
from mrem.fermion import OrbitalLayout
from mrem.pauli import PauliSum, load_pauli_sum
from mrem.settings import ResultsDatabaseSettings
from mrem.stateprep import MRTarget, PrepTemplate

load_dotenv(".env.test", verbose=True, override=True)

FIXTURES = Path(__file__).resolve().parents[1] / "fixtures"
DERIVED = FIXTURES / "derived"
COUPLINGS = (0.2, 0.4, 0.8)


def h2_form_energy(k: float) -> float:
    """Closed-form ground energy of the derived four-qubit Hamiltonian."""
    return -0.65 - sqrt(0.5625 + k * k)


def h2_form_path(k: float) -> Path:
    return DERIVED / f"h2_form_K{k}.txt"


@pytest.fixture(params=COUPLINGS, ids=lambda k: f"K{k}")
def coupling(request) -> float:
    return request.param


@pytest.fixture
def h2_form(coupling: float) -> PauliSum:
    return load_pauli_sum(h2_form_path(coupling))


@pytest.fixture
def h2_form_04() -> PauliSum:
    return load_pauli_sum(h2_form_path(0.4))


@pytest.fixture
def mr_target_04() -> MRTarget:
    return MRTarget.load(DERIVED / "mr_K0.4.json")


@pytest.fixture
def g2_template() -> PrepTemplate:
    return PrepTemplate.load(DERIVED / "g2_template.json")


@pytest.fixture
def two_qubit() -> PauliSum:
    return load_pauli_sum(DERIVED / "two_qubit.txt")


@pytest.fixture
def closed_shell_layout() -> OrbitalLayout:
    return OrbitalLayout(n_spatial=2, n_alpha=1, n_beta=1)


@pytest.fixture
def sqlite_in_memory() -> ResultsDB:
    return ResultsDB(ResultsDatabaseSettings(database_file_path=Path(":memory:")))


@pytest.fixture
def out_dir(tmp_path: Path) -> Path:
    path = tmp_path / "out"
    path.mkdir()
    return path
