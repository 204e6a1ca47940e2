import enum
from pathlib import Path
from typing import List

from sqlalchemy import Column, DateTime
from sqlalchemy import Enum as SQLAlchemyEnum
from sqlalchemy import Float, ForeignKey, Integer, String, Text, create_engine, inspect
from sqlalchemy.engine import make_url
from sqlalchemy.orm import Session, declarative_base, relationship, sessionmaker
from sqlalchemy.sql import func  # For server_default=func.now()

from src.config import settings
from src.utils.logger import logger

Base = declarative_base()


# --- Enums --- #
class BellModelEnum(str, enum.Enum):
    QUANTUM = "quantum"
    NO_SIGNALLING = "nosignalling"


class ExpansionStatusEnum(str, enum.Enum):
    COMPLETED = "completed"
    CERTIFICATION_FAILED = "certification_failed"


# --- Models --- #


class CertificateRecord(Base):
    __tablename__ = "certificate_records"

    id = Column(Integer, primary_key=True, index=True, autoincrement=True)
    source = Column(String(255), nullable=True)  # CSV/JSON path or pipeline label
    model = Column(
        SQLAlchemyEnum(BellModelEnum, name="bell_model_enum"), nullable=False, index=True
    )
    n = Column(Integer, nullable=False)
    i_hat = Column(Float, nullable=False)
    q = Column(Float, nullable=False)
    delta = Column(Float, nullable=False)
    epsilon = Column(Float, nullable=False)
    f_value = Column(Float, nullable=False)
    min_entropy_bits = Column(Float, nullable=False)
    certificate_json = Column(Text, nullable=False)

    created_at = Column(DateTime, server_default=func.now(), nullable=False)

    expansion_runs = relationship("ExpansionRun", back_populates="certificate")

    def __repr__(self):
        return f"<CertificateRecord(id={self.id}, model='{self.model.value}', bits={self.min_entropy_bits:.2f})>"


class ExpansionRun(Base):
    __tablename__ = "expansion_runs"

    id = Column(Integer, primary_key=True, index=True, autoincrement=True)
    status = Column(
        SQLAlchemyEnum(ExpansionStatusEnum, name="expansion_status_enum"),
        nullable=False,
        index=True,
    )
    n = Column(Integer, nullable=False)
    t1_bits = Column(Integer, nullable=False)
    t2_bits = Column(Integer, nullable=False)
    output_bits = Column(Integer, nullable=False)
    net_bits = Column(Integer, nullable=False)
    raw_log_path = Column(String(1024), nullable=True)  # only kept for aborted runs
    abort_reason = Column(Text, nullable=True)
    certificate_id = Column(
        Integer, ForeignKey("certificate_records.id"), nullable=True, index=True
    )

    created_at = Column(DateTime, server_default=func.now(), nullable=False)

    certificate = relationship("CertificateRecord", back_populates="expansion_runs")

    def __repr__(self):
        return f"<ExpansionRun(id={self.id}, status='{self.status.value}', output_bits={self.output_bits})>"


# --- Database Setup --- #
AUDIT_TABLES = (CertificateRecord.__tablename__, ExpansionRun.__tablename__)

engine = None
SessionLocal = None


def get_db_engine():
    global engine
    if engine is None:
        url = make_url(settings.database_url)
        connect_args = {}
        if url.get_backend_name() == "sqlite":
            connect_args = {"check_same_thread": False}
            if url.database and url.database != ":memory:":
                Path(url.database).parent.mkdir(parents=True, exist_ok=True)
        logger.info(f"Opening audit ledger at {url.render_as_string(hide_password=True)}")
        engine = create_engine(url, connect_args=connect_args, echo=settings.db_echo_log)
    return engine


def get_db_session() -> Session:
    global SessionLocal
    if SessionLocal is None:
        # Recorded rows stay readable after the CLI commits and closes
        SessionLocal = sessionmaker(autoflush=False, expire_on_commit=False, bind=get_db_engine())
    return SessionLocal()


def create_tables() -> List[str]:
    """Create the audit tables if missing and return the ones now present."""
    db_engine = get_db_engine()
    try:
        Base.metadata.create_all(db_engine, tables=[Base.metadata.tables[name] for name in AUDIT_TABLES])
    except Exception as e:
        logger.error(f"Error creating audit tables: {e}", exc_info=True)
        raise
    present = [name for name in AUDIT_TABLES if name in inspect(db_engine).get_table_names()]
    logger.info(f"Audit tables ready: {', '.join(present)}")
    return present


if __name__ == "__main__":
    create_tables()
