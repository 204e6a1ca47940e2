"""Finite-statistics min-entropy certificates and the local-model p-value.

With probability at least 1 - delta the min-entropy of the outputs is bounded by
n * f(I_hat - epsilon), where epsilon comes from the Azuma-Hoeffding inequality
applied to the martingale of estimator increments.
"""

import enum
import json
import math
from typing import Dict, Iterable, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, model_validator

from src.analysis.estimator import chsh_from_counts
from src.data.schemas import CountsTable, SettingsDistribution
from src.utils.errors import AboveTsirelsonError, DomainError, NonUniformSettingsError
from src.utils.logger import logger

LOCAL_BOUND = 2.0
TSIRELSON_BOUND = 2.0 * math.sqrt(2.0)
NS_BOUND = 4.0
ABOVE_BOUND_TOL = 1e-9

# The 72 in the local p-value assumes P(xy) = 1/4 for all four pairs.
LOCAL_PVALUE_DENOMINATOR = 72.0


class BellModel(str, enum.Enum):
    QUANTUM = "quantum"
    NO_SIGNALLING = "nosignalling"


def i_max_for(model: BellModel) -> float:
    """Largest CHSH value the model allows."""
    return TSIRELSON_BOUND if BellModel(model) == BellModel.QUANTUM else NS_BOUND


class Certificate(BaseModel):
    i_hat: float
    n: int = Field(ge=1)
    q: float = Field(gt=0, le=0.25 + 1e-12)
    delta: float = Field(gt=0, lt=1)
    epsilon: float = Field(gt=0)
    model: BellModel
    f_value: float = Field(ge=0, le=1)
    min_entropy_bits: float = Field(ge=0)
    i_max: float
    input_distribution: Dict[str, float]
    ns_checks: Optional[Dict[str, float]] = None

    model_config = ConfigDict(frozen=True)

    @model_validator(mode="after")
    def _check_consistency(self):
        if not math.isclose(self.min_entropy_bits, self.n * self.f_value, rel_tol=1e-12, abs_tol=1e-12):
            raise ValueError("min_entropy_bits must equal n * f_value")
        if self.i_hat - self.epsilon <= LOCAL_BOUND and self.f_value != 0.0:
            raise ValueError("f_value must be 0 when i_hat - epsilon <= 2")
        return self

    @property
    def certified(self) -> bool:
        return self.min_entropy_bits > 0


def epsilon(n: int, q: float, delta: float, i_max: float) -> float:
    """Deviation epsilon such that the Azuma-Hoeffding failure probability is delta."""
    if not isinstance(n, int) or n < 1:
        raise DomainError(f"n must be a positive integer, got {n!r}")
    if not 0.0 < q <= 0.25 + 1e-12:
        raise DomainError(f"q must lie in (0, 1/4], got {q}")
    if not 0.0 < delta < 1.0:
        raise DomainError(f"delta must lie in (0, 1), got {delta}")
    if not (math.isclose(i_max, TSIRELSON_BOUND) or math.isclose(i_max, NS_BOUND)):
        raise DomainError(f"i_max must be 2*sqrt(2) or 4, got {i_max}")
    return (1.0 / q + i_max) * math.sqrt(2.0 * math.log(1.0 / delta) / n)


def f_quantum(i: float) -> float:
    """Tight analytic lower bound on the per-trial min-entropy under quantum theory."""
    if not math.isfinite(i):
        raise DomainError(f"CHSH value must be finite, got {i}")
    if i <= LOCAL_BOUND:
        return 0.0
    if i > TSIRELSON_BOUND + ABOVE_BOUND_TOL:
        raise AboveTsirelsonError(f"CHSH value {i} exceeds the quantum maximum {TSIRELSON_BOUND}")
    i = min(i, TSIRELSON_BOUND)
    return 1.0 - math.log2(1.0 + math.sqrt(max(0.0, 2.0 - i * i / 4.0)))


def f_nosignalling(i: float) -> float:
    """Per-trial min-entropy bound from no-signalling alone, -log2(3/2 - I/4)."""
    if not math.isfinite(i):
        raise DomainError(f"CHSH value must be finite, got {i}")
    if i <= LOCAL_BOUND:
        return 0.0
    if i > NS_BOUND + ABOVE_BOUND_TOL:
        raise DomainError(f"CHSH value {i} exceeds the no-signalling maximum 4")
    i = min(i, NS_BOUND)
    return -math.log2(1.5 - i / 4.0)


def f_for(model: BellModel):
    return f_quantum if BellModel(model) == BellModel.QUANTUM else f_nosignalling


def bound_per_trial(n: int, i_hat: float, q: float, delta: float, model: BellModel) -> Tuple[float, float]:
    """Return (epsilon, f) for an observed violation, clamping the argument of f to [2, i_max]."""
    i_max = i_max_for(model)
    eps = epsilon(n, q, delta, i_max)
    argument = max(LOCAL_BOUND, min(i_hat - eps, i_max))
    return eps, f_for(model)(argument)


def certify(
    counts: CountsTable,
    dist: SettingsDistribution,
    delta: float,
    model: BellModel = BellModel.QUANTUM,
    ns_checks: bool = False,
) -> Certificate:
    """Certified min-entropy of the outputs summarised by ``counts``."""
    model = BellModel(model)
    if dist.q <= 0:
        raise DomainError("certification needs every input pair to have positive probability")
    estimate = chsh_from_counts(counts, dist)
    eps, f_value = bound_per_trial(estimate.n, estimate.i_hat, dist.q, delta, model)

    checks = None
    if ns_checks:
        from src.analysis.nosignalling import check_no_signalling

        checks = dict(check_no_signalling(counts))

    certificate = Certificate(
        i_hat=estimate.i_hat,
        n=estimate.n,
        q=dist.q,
        delta=delta,
        epsilon=eps,
        model=model,
        f_value=f_value,
        min_entropy_bits=estimate.n * f_value,
        i_max=i_max_for(model),
        input_distribution=dist.to_dict(),
        ns_checks=checks,
    )
    logger.info(
        f"Certificate ({model.value}): I_hat={certificate.i_hat:.4f}, eps={eps:.4f}, "
        f"H_min >= {certificate.min_entropy_bits:.2f} bits at confidence {1 - delta:.4f}"
    )
    return certificate


def local_pvalue(i_hat: float, n: int, dist: Optional[SettingsDistribution] = None) -> float:
    """Bound on the probability that a local model with memory reaches ``i_hat``."""
    if dist is not None and not dist.is_uniform:
        raise NonUniformSettingsError(
            f"the local-model bound assumes uniform inputs, got q={dist.q}"
        )
    if n < 1:
        raise DomainError(f"n must be positive, got {n}")
    if i_hat <= LOCAL_BOUND:
        return 1.0
    return min(1.0, math.exp(-n * (i_hat - LOCAL_BOUND) ** 2 / LOCAL_PVALUE_DENOMINATOR))


def minimum_trials(
    i_hat: float, dist: SettingsDistribution, delta: float, model: BellModel = BellModel.QUANTUM
) -> int:
    """Smallest n for which a sustained violation ``i_hat`` certifies positive min-entropy."""
    if i_hat <= LOCAL_BOUND:
        raise DomainError(f"no n certifies randomness for I={i_hat} <= 2")
    if dist.q <= 0:
        raise DomainError("every input pair needs positive probability")
    spread = 1.0 / dist.q + i_max_for(model)
    threshold = 2.0 * math.log(1.0 / delta) * spread * spread / (i_hat - LOCAL_BOUND) ** 2
    n = math.floor(threshold) + 1
    # Guard the floor against rounding right at the threshold.
    while epsilon(n, dist.q, delta, i_max_for(model)) >= i_hat - LOCAL_BOUND:
        n += 1
    return n


def entropy_curve(
    n_values: Iterable[int],
    i_hat: float,
    delta: float,
    model: BellModel = BellModel.QUANTUM,
    dist: Optional[SettingsDistribution] = None,
    alpha: Optional[float] = None,
) -> List[Tuple[int, float]]:
    """The bound n * f(I_hat - epsilon) over a grid of n.

    With ``alpha`` the inputs follow the catalysis law q = alpha / sqrt(n);
    otherwise ``dist`` (uniform by default) is used for every n.
    """
    curve = []
    for n in n_values:
        law = SettingsDistribution.catalysis(n, alpha) if alpha is not None else (
            dist or SettingsDistribution.uniform()
        )
        _, f_value = bound_per_trial(int(n), i_hat, law.q, delta, model)
        curve.append((int(n), n * f_value))
    return curve


def certificate_to_json(certificate: Certificate) -> str:
    return json.dumps(certificate.model_dump(mode="json"), indent=2) + "\n"


def certificate_from_json(text: str) -> Certificate:
    return Certificate.model_validate_json(text)


if __name__ == "__main__":
    from src.data.reference_data import reference_counts

    uniform = SettingsDistribution.uniform()
    for bell_model in BellModel:
        logger.info(certificate_to_json(certify(reference_counts(), uniform, 0.01, bell_model)))
