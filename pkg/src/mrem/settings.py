import json
import logging
from pathlib import Path
from typing import Any, Literal

from typing_extensions import Self

from pydantic import Field, field_validator, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from mrem.driver import ImFilConfig, SweepPoint, SweepSettings
from mrem.environment import (
    LAYERS_ENV,
    LOG_FILE_PATH,
    LOG_LEVEL_ENV,
    OUTPUT_DIR_ENV,
    SEED_ENV,
    SPIN_PENALTY_ENV,
    SQLITE_DATABASE_PATH_ENV,
    WORKERS_ENV,
)
from mrem.errors import ConfigurationError
from mrem.fermion import OrbitalLayout, SpinPenaltyConfig
from mrem.sim import NoiseModel, ShotModel

log = logging.getLogger(__name__)

LOG_LEVELS = Literal["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"]


class ConfiguredBaseSettings(BaseSettings):
    """Common configuration used by all `BaseSettings` derived classes."""

    model_config = SettingsConfigDict(
        env_prefix="MREM_",
        populate_by_name=True,
    )


class LoggerSettings(ConfiguredBaseSettings):
    """Settings used by python logging."""

    level: LOG_LEVELS = Field(
        default="INFO",
        serialization_alias=LOG_LEVEL_ENV,
        validation_alias=LOG_LEVEL_ENV,
    )
    file_path: Path = Field(
        default=Path("logs"),
        serialization_alias=LOG_FILE_PATH,
        validation_alias=LOG_FILE_PATH,
    )

    @field_validator("level", mode="before")
    @classmethod
    def convert_to_upper(cls, v):
        return v.upper() if isinstance(v, str) else v


class ResultsDatabaseSettings(ConfiguredBaseSettings):
    """Settings for the optional SQLite results store; no path disables it."""

    database_file_path: Path | None = Field(
        default=None,
        serialization_alias=SQLITE_DATABASE_PATH_ENV,
        validation_alias=SQLITE_DATABASE_PATH_ENV,
    )

    @property
    def enabled(self) -> bool:
        return self.database_file_path is not None


class RunConfig(ConfiguredBaseSettings):
    """Everything a CLI run needs, from a JSON file, env vars and flags.

    Attributes:
        hamiltonian (Path | None): Pauli-sum text file.
        target (Path | None): MR target JSON file.
        template (Path | None): Preparation template JSON file.
        noise (Path | None): Noise model JSON file; the default profile if unset.
        layers (int): RY-linear ansatz depth L.
        seed (int | None): Seed for the shot-noise stream; when set it overrides
            the seed in the noise file.
    """

    hamiltonian: Path | None = None
    target: Path | None = None
    template: Path | None = None
    noise: Path | None = None
    layout: OrbitalLayout | None = None
    spin_penalty: float = Field(
        default=0.0,
        ge=0.0,
        serialization_alias=SPIN_PENALTY_ENV,
        validation_alias=SPIN_PENALTY_ENV,
    )
    layers: int = Field(
        default=1,
        ge=1,
        serialization_alias=LAYERS_ENV,
        validation_alias=LAYERS_ENV,
    )
    optimizer: ImFilConfig = ImFilConfig()
    shots: ShotModel = ShotModel()
    seed: int | None = Field(
        default=None,
        ge=0,
        lt=2**64,
        serialization_alias=SEED_ENV,
        validation_alias=SEED_ENV,
    )
    out: Path = Field(
        default=Path("out"),
        serialization_alias=OUTPUT_DIR_ENV,
        validation_alias=OUTPUT_DIR_ENV,
    )
    noiseless: bool = False
    hf_only: bool = False
    mr_only: bool = False
    taper: bool = False
    sector: list[int] | None = None
    max_components: int | None = Field(default=None, ge=1, le=4)
    points: list[SweepPoint] = []
    workers: int = Field(
        default=1,
        ge=1,
        serialization_alias=WORKERS_ENV,
        validation_alias=WORKERS_ENV,
    )

    @field_validator("hamiltonian", "target", "template", "noise")
    @classmethod
    def check_exists(cls, v: Path | None) -> Path | None:
        if v is not None and not v.is_file():
            raise ValueError(f"File not found: {v}")
        return v

    @field_validator("sector")
    @classmethod
    def check_sector(cls, v: list[int] | None) -> list[int] | None:
        if v is not None and any(s not in (1, -1) for s in v):
            raise ValueError("sector entries must be +1 or -1")
        return v

    @model_validator(mode="after")
    def check_modes(self) -> Self:
        if self.hf_only and self.mr_only:
            raise ValueError("hf_only and mr_only are mutually exclusive")
        return self

    @classmethod
    def from_file(cls, path: Path | None, **overrides: Any) -> "RunConfig":
        """Load `path` (JSON) if given; non-None `overrides` take precedence.

        Relative paths inside the file resolve against the file's directory.
        """
        data: dict[str, Any] = {}
        if path is not None:
            if not path.is_file():
                raise ConfigurationError(str(path))
            log.debug(f"Loading run configuration from {path}")
            data = json.loads(path.read_text(encoding="utf8"))
            base = path.parent
            for key in ("hamiltonian", "target", "template", "noise"):
                if data.get(key):
                    data[key] = str(base / data[key])
            for point in data.get("points", []):
                for key in ("hamiltonian", "target", "template"):
                    if point.get(key):
                        point[key] = str(base / point[key])
        data.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**data)

    def noise_model(self) -> NoiseModel:
        model = NoiseModel.load(self.noise) if self.noise else NoiseModel()
        if self.noiseless:
            model = NoiseModel.noiseless(model.seed)
        if self.seed is not None:
            model = model.model_copy(update={"seed": self.seed})
        return model

    def penalty_config(self) -> SpinPenaltyConfig:
        return SpinPenaltyConfig(lambda_=self.spin_penalty)

    def variants(self) -> tuple[Literal["hf", "mr"], ...]:
        if self.hf_only:
            return ("hf",)
        if self.mr_only:
            return ("mr",)
        return ("hf", "mr")

    def sweep_settings(self) -> SweepSettings:
        return SweepSettings(
            layers=self.layers,
            noise=self.noise_model(),
            shots=self.shots,
            optimizer=self.optimizer,
            layout=self.layout,
            spin_penalty=self.penalty_config(),
            variants=self.variants(),
            workers=self.workers,
        )
