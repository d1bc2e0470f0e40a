import logging
from datetime import datetime, timezone
from pathlib import Path

import sqlalchemy as db
from sqlalchemy import URL, String
from sqlalchemy.orm import Mapped, Session, declarative_base, mapped_column

from mrem.driver import MitigationRecord
from mrem.errors import ConfigurationError
from mrem.settings import ResultsDatabaseSettings

log = logging.getLogger(__name__)

Base = declarative_base()

TABLE_NAME = "mitigation_records"


class MitigationRow(Base):  # type: ignore
    """One stored MitigationRecord."""

    __tablename__ = TABLE_NAME

    ID: Mapped[int] = mapped_column(
        primary_key=True, nullable=False, autoincrement=True
    )
    time: Mapped[datetime] = mapped_column(nullable=False)
    label: Mapped[str] = mapped_column(String(80), nullable=False)
    variant: Mapped[str] = mapped_column(String(8), nullable=False)
    e_exact_ref: Mapped[float] = mapped_column(nullable=False)
    e_noisy_ref: Mapped[float] = mapped_column(nullable=False)
    delta: Mapped[float] = mapped_column(nullable=False)
    e_vqe_raw: Mapped[float] = mapped_column(nullable=False)
    e_mitigated: Mapped[float] = mapped_column(nullable=False)
    iterations: Mapped[int] = mapped_column(nullable=False)
    evaluations: Mapped[int] = mapped_column(nullable=False)


class ResultsDB:
    """SQLite store of mitigation records, written through the SQLAlchemy ORM."""

    def __init__(self, settings: ResultsDatabaseSettings | None = None) -> None:
        self.dialect: str = "sqlite"
        if not settings:
            settings = ResultsDatabaseSettings()
        if settings.database_file_path is None:
            raise ConfigurationError("MREM_DATABASE")
        self.database_path: Path = settings.database_file_path
        self.table_name: str = TABLE_NAME
        self.created_new_table: bool = False
        self.engine: db.Engine = self.create_engine()
        self.create_table()

    def create_engine(self) -> db.Engine:
        log.debug("Creating database engine")
        url = URL.create(drivername=self.dialect, database=str(self.database_path))
        log.debug(f"SQLAlchemy {url=}")
        return db.create_engine(url)

    def create_table(self) -> None:
        """Create the records table, if it does not exist."""
        if not db.inspect(self.engine).has_table(self.table_name):
            log.info(f"Table '{self.table_name}' does not exist, creating")
            self.created_new_table = True
            Base.metadata.create_all(self.engine)

    def write_record(self, record: MitigationRecord, time: datetime | None = None) -> int:
        """Store `record` and return the new row ID."""
        values = MitigationRow(
            time=time or datetime.now(timezone.utc),
            label=record.label,
            variant=record.variant,
            e_exact_ref=record.e_exact_ref,
            e_noisy_ref=record.e_noisy_ref,
            delta=record.delta,
            e_vqe_raw=record.e_vqe_raw,
            e_mitigated=record.e_mitigated,
            iterations=record.iterations,
            evaluations=record.evaluations,
        )
        log.info(f"Adding row to table '{self.table_name}' in '{self}'")
        return self.commit_row(values)

    def commit_row(self, values: MitigationRow) -> int:
        with Session(self.engine) as session:
            with session.begin():
                session.add(values)
            session.refresh(values)
            new_row_ID = values.ID
            log.info(f"Committed new row to database with ID {new_row_ID}")
        return new_row_ID

    def get_records(self, label: str | None = None) -> list[MitigationRecord]:
        """Stored records in insertion order, optionally for one label only."""
        with Session(self.engine) as session:
            q = db.select(MitigationRow).order_by(MitigationRow.ID)
            if label is not None:
                q = q.where(MitigationRow.label == label)
            return [
                MitigationRecord(
                    e_exact_ref=row.e_exact_ref,
                    e_noisy_ref=row.e_noisy_ref,
                    e_vqe_raw=row.e_vqe_raw,
                    iterations=row.iterations,
                    evaluations=row.evaluations,
                    label=row.label,
                    variant="hf" if row.variant == "hf" else "mr",
                )
                for row in session.scalars(q)
            ]

    def __str__(self) -> str:
        return f"{self.table_name} in {self.database_path}"


def get_database(path: Path | None = None) -> ResultsDB | None:
    """The configured results store, or None when no database is set."""
    settings = (
        ResultsDatabaseSettings(database_file_path=path) if path else ResultsDatabaseSettings()
    )
    if not settings.enabled:
        log.debug("No results database configured")
        return None
    return ResultsDB(settings)
