"""Four-step private randomness expansion with explicit seed accounting.

1. the private seed t = (t1, t2) is read from a SeedStream;
2. t1 drives the settings sampler and the devices are used n times;
3. the trial log is certified;
4. t2 seeds the Toeplitz extractor applied to the raw outputs.

Runs whose certificate carries no min-entropy are aborted; their raw log is
kept under the forensics directory.
"""

import enum
import json
import math
from pathlib import Path
from typing import Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from src.analysis.certifier import (
    LOCAL_BOUND,
    BellModel,
    Certificate,
    bound_per_trial,
    certify,
    i_max_for,
)
from src.config import settings
from src.data.schemas import SettingsDistribution, TrialLog
from src.data.trial_log import aggregate, write_trial_csv
from src.devices.base_device import BaseDevice
from src.devices.simulator import run_with_settings
from src.expansion.sampler import SeedStream, sample_settings_accounted
from src.extraction.toeplitz import (
    ExtractorParams,
    output_length,
    raw_bits_from_log,
    seed_length,
    toeplitz_extract,
)
from src.utils.errors import CertificationFailedError, DomainError
from src.utils.logger import logger


class ExpansionStatus(str, enum.Enum):
    COMPLETED = "completed"
    CERTIFICATION_FAILED = "certification_failed"


class SeedBudget(BaseModel):
    t1_bits: int = Field(ge=0)
    t2_bits: int = Field(ge=0)
    output_bits: int = Field(ge=0)
    net_bits: int

    model_config = ConfigDict(frozen=True)

    @model_validator(mode="after")
    def _check_net(self):
        if self.net_bits != self.output_bits - self.t1_bits:
            raise ValueError("net_bits must equal output_bits - t1_bits")
        return self


class ExpansionReport(BaseModel):
    status: ExpansionStatus
    certificate: Certificate
    budget: SeedBudget
    extracted: np.ndarray
    trial_log: TrialLog
    delta: float
    eps_ext: float
    raw_log_path: Optional[str] = None
    abort_reason: Optional[str] = None

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    def model_post_init(self, __context) -> None:
        expected = (
            output_length(self.certificate.min_entropy_bits, self.eps_ext)
            if self.status == ExpansionStatus.COMPLETED
            else 0
        )
        if self.extracted.size != expected:
            raise ValueError(f"extracted string has {self.extracted.size} bits, expected {expected}")

    @property
    def succeeded(self) -> bool:
        return self.status == ExpansionStatus.COMPLETED

    def raise_for_status(self) -> None:
        if not self.succeeded:
            raise CertificationFailedError(self.abort_reason or "certification failed")


def net_entropy(
    n: int,
    i_target: float,
    dist: SettingsDistribution,
    delta: float,
    model: BellModel = BellModel.QUANTUM,
) -> float:
    """Certified output entropy minus the entropy spent choosing the inputs."""
    if not LOCAL_BOUND < i_target <= i_max_for(model) + 1e-9:
        raise DomainError(f"target CHSH value must lie in (2, {i_max_for(model):.4f}], got {i_target}")
    _, f_value = bound_per_trial(int(n), i_target, dist.q, delta, model)
    return n * f_value - n * dist.entropy_bits


def seed_scaling_check(
    n: int, alpha: float = 11.0, q: Optional[float] = None
) -> Tuple[float, float]:
    """Expected t1 length and its ratio to sqrt(n) * log2(sqrt(n)).

    With q=None the catalysis law q = alpha / sqrt(n) is used; a fixed q makes
    t1 grow linearly in n.
    """
    if n < 10**4:
        raise DomainError(f"seed scaling is only meaningful for n >= 1e4, got {n}")
    dist = SettingsDistribution.catalysis(n, alpha) if q is None else SettingsDistribution.biased(q)
    t1_bits = n * dist.entropy_bits
    root = math.sqrt(n)
    return t1_bits, t1_bits / (root * math.log2(root))


def _persist_failed_log(log, n: int, device_seed: int, forensics_dir: Optional[Union[str, Path]]) -> str:
    directory = Path(forensics_dir or settings.forensics_dir)
    path = write_trial_csv(log, directory / f"failed_expansion_n{n}_seed{device_seed}.csv")
    return str(path)


def run_expansion(
    device: BaseDevice,
    n: int,
    dist: SettingsDistribution,
    delta: float,
    eps_ext: float,
    seed: SeedStream,
    device_seed: int = 0,
    model: BellModel = BellModel.QUANTUM,
    block_size: Optional[int] = None,
    forensics_dir: Optional[Union[str, Path]] = None,
    audit_session=None,
) -> ExpansionReport:
    """Run the protocol once; a failed certification yields an aborted report, not an exception."""
    logger.info(f"Starting expansion run: n={n}, device={device.get_kind_name()}, delta={delta}")

    settings_xy, t1_bits = sample_settings_accounted(n, dist, seed, block_size=block_size)
    log = run_with_settings(device, settings_xy, device_seed)
    certificate = certify(aggregate(log), dist, delta, model)

    if not certificate.certified:
        raw_log_path = _persist_failed_log(log, n, device_seed, forensics_dir)
        reason = (
            f"I_hat - eps = {certificate.i_hat - certificate.epsilon:.4f} <= 2: no min-entropy certified"
        )
        logger.warning(f"Expansion aborted ({reason}); raw log kept at {raw_log_path}")
        report = ExpansionReport(
            status=ExpansionStatus.CERTIFICATION_FAILED,
            certificate=certificate,
            budget=SeedBudget(t1_bits=t1_bits, t2_bits=0, output_bits=0, net_bits=-t1_bits),
            extracted=np.zeros(0, dtype=np.uint8),
            trial_log=log,
            delta=delta,
            eps_ext=eps_ext,
            raw_log_path=raw_log_path,
            abort_reason=reason,
        )
    else:
        raw = raw_bits_from_log(log)
        m_out = output_length(certificate.min_entropy_bits, eps_ext)
        if m_out == 0:
            logger.warning(
                f"{certificate.min_entropy_bits:.2f} certified bits do not cover the extractor "
                f"margin 2*log2(1/eps_ext); nothing extracted"
            )
            extracted, t2_bits = np.zeros(0, dtype=np.uint8), 0
        else:
            t2_bits = seed_length(raw.size, m_out)
            params = ExtractorParams(
                n_in=raw.size, m_out=m_out, eps_ext=eps_ext, seed=seed.read_bits(t2_bits)
            )
            extracted = toeplitz_extract(raw, params)
        report = ExpansionReport(
            status=ExpansionStatus.COMPLETED,
            certificate=certificate,
            budget=SeedBudget(
                t1_bits=t1_bits, t2_bits=t2_bits, output_bits=m_out, net_bits=m_out - t1_bits
            ),
            extracted=extracted,
            trial_log=log,
            delta=delta,
            eps_ext=eps_ext,
        )
        logger.info(
            f"Expansion completed: {m_out} bits out, t1={t1_bits}, t2={t2_bits}, net={m_out - t1_bits}"
        )

    if audit_session is not None:
        from src.data.crud import record_expansion_run

        record_expansion_run(audit_session, report, report.raw_log_path)
    return report


def report_to_json(report: ExpansionReport) -> str:
    payload = {
        "status": report.status.value,
        "certificate": report.certificate.model_dump(mode="json"),
        "budget": report.budget.model_dump(),
        "extracted_bits": int(report.extracted.size),
        "delta": report.delta,
        "eps_ext": report.eps_ext,
        "raw_log_path": report.raw_log_path,
        "abort_reason": report.abort_reason,
    }
    return json.dumps(payload, indent=2) + "\n"
