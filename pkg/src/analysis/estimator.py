"""CHSH estimator weighted by the input distribution.

Each trial contributes (-1)^(xy) * sigma / P(x, y) with sigma = +1 when a = b and
-1 otherwise; the estimator is the mean of these increments.
"""

import math
from typing import Dict, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from src.data.schemas import INPUT_PAIRS, CountsTable, SettingsDistribution, TrialLog, TrialRecord
from src.data.trial_log import aggregate
from src.utils.errors import (
    DomainError,
    EmptyLogError,
    MissingInputError,
    ZeroProbabilityInputError,
)
from src.utils.logger import logger


class ChshEstimate(BaseModel):
    i_hat: float
    n: int = Field(ge=1)
    std_error: float = Field(ge=0)
    distribution: SettingsDistribution

    model_config = ConfigDict(frozen=True)


def _sign(x: int, y: int) -> int:
    return -1 if (x and y) else 1


def chsh_from_counts(counts: CountsTable, dist: SettingsDistribution) -> ChshEstimate:
    n = counts.n
    if n < 1:
        raise EmptyLogError("cannot estimate CHSH from an empty counts table")

    terms = []
    second_moment = []
    for (x, y) in INPUT_PAIRS:
        n_xy = counts.total(x, y)
        if n_xy == 0:
            continue
        p_xy = dist.prob(x, y)
        if p_xy <= 0:
            raise ZeroProbabilityInputError(
                f"{n_xy} trials observed for inputs {(x, y)} which have probability 0"
            )
        terms.append(_sign(x, y) * (counts.agree(x, y) - counts.disagree(x, y)) / p_xy)
        second_moment.append(n_xy / (p_xy * p_xy))

    i_hat = math.fsum(terms) / n
    # Increments take the values +-1/P(xy), so the sample variance follows from counts.
    variance = max(0.0, math.fsum(second_moment) / n - i_hat * i_hat)
    std_error = math.sqrt(variance / n)
    logger.debug(f"CHSH estimate {i_hat:.6f} +- {std_error:.6f} from n={n}")
    return ChshEstimate(i_hat=i_hat, n=n, std_error=std_error, distribution=dist)


def chsh_from_log(log: TrialLog, dist: SettingsDistribution) -> ChshEstimate:
    return chsh_from_counts(aggregate(log), dist)


def trial_increment(t: TrialRecord, dist: SettingsDistribution) -> float:
    """The per-trial increment whose conditional mean is the CHSH value."""
    p_xy = dist.prob(t.x, t.y)
    if p_xy <= 0:
        raise DomainError(f"inputs {(t.x, t.y)} have probability 0")
    sigma = 1 if t.a == t.b else -1
    return _sign(t.x, t.y) * sigma / p_xy


def trial_increments(log: TrialLog, dist: SettingsDistribution) -> np.ndarray:
    """Vectorised ``trial_increment`` over a whole log."""
    probs = dist.as_array()[log.x.astype(np.int64) * 2 + log.y.astype(np.int64)]
    if np.any(probs <= 0):
        raise DomainError("log contains inputs that have probability 0")
    sign = np.where((log.x & log.y) == 1, -1.0, 1.0)
    sigma = np.where(log.a == log.b, 1.0, -1.0)
    return sign * sigma / probs


def correlators(counts: CountsTable) -> Dict[Tuple[int, int], float]:
    """E(x, y) = P(a=b|xy) - P(a!=b|xy) for every observed input pair."""
    result = {}
    for (x, y) in INPUT_PAIRS:
        n_xy = counts.total(x, y)
        if n_xy:
            result[(x, y)] = (counts.agree(x, y) - counts.disagree(x, y)) / n_xy
    return result


def chsh_from_correlators(counts: CountsTable) -> float:
    """Plug-in CHSH value E00 + E01 + E10 - E11 from per-pair frequencies.

    Unlike the estimator it ignores how often each pair occurred, so a local
    deterministic device gives exactly +-2. Needs every pair observed.
    """
    e = correlators(counts)
    missing = [pair for pair in INPUT_PAIRS if pair not in e]
    if missing:
        raise MissingInputError(f"no trials observed for input pairs {missing}")
    return math.fsum(_sign(x, y) * e[(x, y)] for (x, y) in INPUT_PAIRS)
