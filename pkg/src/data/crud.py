from typing import List, Optional

from sqlalchemy.orm import Session

from src.data.models import (
    BellModelEnum,
    CertificateRecord,
    ExpansionRun,
    ExpansionStatusEnum,
)
from src.utils.logger import logger


def record_certificate(
    db: Session, certificate, source: Optional[str] = None
) -> Optional[CertificateRecord]:
    """Stores an issued Certificate together with its JSON rendering."""
    try:
        from src.analysis.certifier import certificate_to_json

        db_record = CertificateRecord(
            source=source,
            model=BellModelEnum(certificate.model.value),
            n=certificate.n,
            i_hat=certificate.i_hat,
            q=certificate.q,
            delta=certificate.delta,
            epsilon=certificate.epsilon,
            f_value=certificate.f_value,
            min_entropy_bits=certificate.min_entropy_bits,
            certificate_json=certificate_to_json(certificate),
        )
        db.add(db_record)
        db.commit()
        db.refresh(db_record)
        logger.info(
            f"Recorded certificate {db_record.id} ({db_record.model.value}, "
            f"{db_record.min_entropy_bits:.2f} bits) from {source or 'unknown source'}"
        )
        return db_record
    except Exception as e:
        db.rollback()
        logger.error(f"Error recording certificate: {e}", exc_info=True)
        return None


def record_expansion_run(
    db: Session, report, raw_log_path: Optional[str] = None
) -> Optional[ExpansionRun]:
    """Stores an expansion run, aborted or not, linked to its certificate."""
    try:
        cert_record = record_certificate(db, report.certificate, source="expansion")
        budget = report.budget
        db_run = ExpansionRun(
            status=ExpansionStatusEnum(report.status.value),
            n=report.certificate.n,
            t1_bits=budget.t1_bits,
            t2_bits=budget.t2_bits,
            output_bits=budget.output_bits,
            net_bits=budget.net_bits,
            raw_log_path=raw_log_path,
            abort_reason=report.abort_reason,
            certificate_id=cert_record.id if cert_record else None,
        )
        db.add(db_run)
        db.commit()
        db.refresh(db_run)
        logger.info(f"Recorded expansion run {db_run.id} with status {db_run.status.value}")
        return db_run
    except Exception as e:
        db.rollback()
        logger.error(f"Error recording expansion run: {e}", exc_info=True)
        return None


def get_expansion_runs(
    db: Session, status: Optional[ExpansionStatusEnum] = None, skip: int = 0, limit: int = 100
) -> List[ExpansionRun]:
    query = db.query(ExpansionRun)
    if status is not None:
        query = query.filter(ExpansionRun.status == ExpansionStatusEnum(status))
    return query.order_by(ExpansionRun.id).offset(skip).limit(limit).all()


def get_certificate_records(
    db: Session, model: Optional[BellModelEnum] = None, skip: int = 0, limit: int = 100
) -> List[CertificateRecord]:
    query = db.query(CertificateRecord)
    if model is not None:
        query = query.filter(CertificateRecord.model == BellModelEnum(model))
    return query.order_by(CertificateRecord.id).offset(skip).limit(limit).all()
