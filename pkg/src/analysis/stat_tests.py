"""Statistical battery for short output strings.

Six tests follow the NIST SP800-22 definitions (Frequency, Block frequency,
Runs, DFT, Serial, Approximate entropy); Two-bit and Poker follow the
Handbook of Applied Cryptography. Every test returns a p-value and the
battery never folds them into a single verdict.
"""

import enum
import json
import math
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.special import erfc, gammaincc

from src.config import settings
from src.utils.errors import TooShortError
from src.utils.logger import logger

# Parameters tuned for strings of a few thousand bits.
DEFAULT_PARAMS: Dict[str, Dict[str, int]] = {
    "BlockFrequency": {"block_size": 100},
    "Serial": {"m": 2},
    "ApproximateEntropy": {"m": 2},
    "Poker": {"m": 4},
}

DFT_PEAK_FRACTION = 0.95

BitsLike = Union[str, Sequence[int], np.ndarray]


class TestKind(str, enum.Enum):
    __test__ = False  # not a pytest class

    FREQUENCY = "Frequency"
    BLOCK_FREQUENCY = "BlockFrequency"
    RUNS = "Runs"
    DFT = "DFT"
    SERIAL = "Serial"
    APPROXIMATE_ENTROPY = "ApproximateEntropy"
    TWO_BIT = "TwoBit"
    POKER = "Poker"


class TestResult(BaseModel):
    __test__ = False

    test_name: str
    p_value: float = Field(ge=0.0, le=1.0)
    passed: bool
    alpha: float
    params: Dict[str, Any] = Field(default_factory=dict)

    model_config = ConfigDict(frozen=True)

    @model_validator(mode="after")
    def _check_verdict(self):
        if self.passed != (self.p_value >= self.alpha):
            raise ValueError("passed must equal p_value >= alpha")
        return self


def as_bits(bits: BitsLike) -> np.ndarray:
    """Normalise a '0101' string or integer sequence to a uint8 bit array."""
    if isinstance(bits, str):
        array = np.frombuffer(bits.strip().encode("ascii"), dtype=np.uint8) - ord("0")
    else:
        array = np.asarray(bits).reshape(-1)
    if array.size and (array.min() < 0 or array.max() > 1):
        raise ValueError("bit strings may only contain 0 and 1")
    return array.astype(np.uint8)


def minimum_length(kind: TestKind, **params) -> int:
    kind = TestKind(kind)
    merged = {**DEFAULT_PARAMS.get(kind.value, {}), **params}
    if kind == TestKind.FREQUENCY:
        return 10
    if kind == TestKind.BLOCK_FREQUENCY:
        return merged["block_size"]
    if kind in (TestKind.RUNS, TestKind.DFT):
        return 100
    if kind == TestKind.SERIAL:
        return 2 ** (merged["m"] + 3)
    if kind == TestKind.APPROXIMATE_ENTROPY:
        return 2 ** (merged["m"] + 6)
    if kind == TestKind.TWO_BIT:
        return 21
    m = merged["m"]
    return m * 5 * 2**m


def _clip(p: float) -> float:
    return float(min(1.0, max(0.0, p)))


# --- Individual tests --- #


def frequency(bits: np.ndarray) -> Dict[str, Any]:
    n = bits.size
    s = 2 * int(bits.sum()) - n
    p = erfc(abs(s) / math.sqrt(n) / math.sqrt(2.0))
    return {"p_value": p, "params": {"s_n": s}}


def block_frequency(bits: np.ndarray, block_size: int = 100) -> Dict[str, Any]:
    blocks = bits.size // block_size
    proportions = bits[: blocks * block_size].reshape(blocks, block_size).mean(axis=1)
    chi2 = 4.0 * block_size * float(np.sum((proportions - 0.5) ** 2))
    p = gammaincc(blocks / 2.0, chi2 / 2.0)
    return {"p_value": p, "params": {"block_size": block_size, "chi2": chi2}}


def runs(bits: np.ndarray) -> Dict[str, Any]:
    n = bits.size
    pi = float(bits.mean())
    if abs(pi - 0.5) >= 2.0 / math.sqrt(n):
        # Frequency prerequisite failed; the runs statistic is meaningless.
        return {"p_value": 0.0, "params": {"pi": pi, "prerequisite": False}}
    v_obs = int(np.count_nonzero(np.diff(bits))) + 1
    p = erfc(abs(v_obs - 2 * n * pi * (1 - pi)) / (2 * math.sqrt(2 * n) * pi * (1 - pi)))
    return {"p_value": p, "params": {"pi": pi, "runs": v_obs}}


def dft(bits: np.ndarray) -> Dict[str, Any]:
    n = bits.size
    x = 2.0 * bits.astype(float) - 1.0
    modulus = np.abs(np.fft.fft(x)[: n // 2])
    threshold = math.sqrt(math.log(1.0 / (1.0 - DFT_PEAK_FRACTION)) * n)
    expected = DFT_PEAK_FRACTION * n / 2.0
    observed = int(np.count_nonzero(modulus < threshold))
    d = (observed - expected) / math.sqrt(n * DFT_PEAK_FRACTION * (1 - DFT_PEAK_FRACTION) / 4.0)
    p = erfc(abs(d) / math.sqrt(2.0))
    return {"p_value": p, "params": {"threshold": threshold, "below_threshold": observed, "d": d}}


def _pattern_counts(bits: np.ndarray, m: int) -> np.ndarray:
    """Counts of the 2^m overlapping m-bit patterns, wrapping around the end."""
    if m == 0:
        return np.array([bits.size])
    extended = np.concatenate([bits, bits[: m - 1]]).astype(np.int64)
    codes = np.zeros(bits.size, dtype=np.int64)
    for k in range(m):
        codes = (codes << 1) | extended[k : k + bits.size]
    return np.bincount(codes, minlength=2**m)


def _psi_squared(bits: np.ndarray, m: int) -> float:
    if m <= 0:
        return 0.0
    counts = _pattern_counts(bits, m).astype(float)
    return float((2**m / bits.size) * np.sum(counts**2) - bits.size)


def serial(bits: np.ndarray, m: int = 2) -> Dict[str, Any]:
    psi_m = _psi_squared(bits, m)
    psi_m1 = _psi_squared(bits, m - 1)
    psi_m2 = _psi_squared(bits, m - 2)
    delta1 = psi_m - psi_m1
    delta2 = psi_m - 2 * psi_m1 + psi_m2
    p1 = float(gammaincc(2 ** (m - 2), max(0.0, delta1) / 2.0))
    p2 = float(gammaincc(2 ** (m - 3), max(0.0, delta2) / 2.0))
    return {"p_value": min(p1, p2), "params": {"m": m, "p_value1": p1, "p_value2": p2}}


def _phi(bits: np.ndarray, m: int) -> float:
    counts = _pattern_counts(bits, m)
    pi = counts[counts > 0] / bits.size
    return float(np.sum(pi * np.log(pi)))


def approximate_entropy(bits: np.ndarray, m: int = 2) -> Dict[str, Any]:
    n = bits.size
    ap_en = _phi(bits, m) - _phi(bits, m + 1)
    chi2 = max(0.0, 2.0 * n * (math.log(2.0) - ap_en))
    p = gammaincc(2 ** (m - 1), chi2 / 2.0)
    return {"p_value": p, "params": {"m": m, "ap_en": ap_en, "chi2": chi2}}


def two_bit(bits: np.ndarray) -> Dict[str, Any]:
    n = bits.size
    n1 = int(bits.sum())
    n0 = n - n1
    pairs = np.bincount(bits[:-1].astype(np.int64) * 2 + bits[1:], minlength=4).astype(float)
    x2 = 4.0 / (n - 1) * float(np.sum(pairs**2)) - 2.0 / n * (n0 * n0 + n1 * n1) + 1.0
    p = gammaincc(1.0, max(0.0, x2) / 2.0)
    return {"p_value": p, "params": {"x2": x2}}


def poker(bits: np.ndarray, m: int = 4) -> Dict[str, Any]:
    k = bits.size // m
    blocks = bits[: k * m].reshape(k, m).astype(np.int64)
    codes = blocks @ (1 << np.arange(m - 1, -1, -1))
    counts = np.bincount(codes, minlength=2**m).astype(float)
    x3 = (2**m / k) * float(np.sum(counts**2)) - k
    p = gammaincc((2**m - 1) / 2.0, x3 / 2.0)
    return {"p_value": p, "params": {"m": m, "x3": x3}}


_TESTS = {
    TestKind.FREQUENCY: frequency,
    TestKind.BLOCK_FREQUENCY: block_frequency,
    TestKind.RUNS: runs,
    TestKind.DFT: dft,
    TestKind.SERIAL: serial,
    TestKind.APPROXIMATE_ENTROPY: approximate_entropy,
    TestKind.TWO_BIT: two_bit,
    TestKind.POKER: poker,
}


def run_test(
    kind: TestKind, bits: BitsLike, alpha: Optional[float] = None, **params
) -> TestResult:
    kind = TestKind(kind)
    alpha = settings.stat_alpha if alpha is None else alpha
    array = as_bits(bits)
    merged = {**DEFAULT_PARAMS.get(kind.value, {}), **params}
    minimum = minimum_length(kind, **merged)
    if array.size < minimum:
        raise TooShortError(kind.value, int(array.size), minimum)

    outcome = _TESTS[kind](array, **merged)
    p_value = _clip(outcome["p_value"])
    return TestResult(
        test_name=kind.value,
        p_value=p_value,
        passed=p_value >= alpha,
        alpha=alpha,
        params={**merged, **outcome["params"], "n": int(array.size)},
    )


def run_battery(bits: BitsLike, alpha: Optional[float] = None) -> List[TestResult]:
    array = as_bits(bits)
    if array.size < 100:
        raise TooShortError("battery", int(array.size), 100)
    results = []
    for kind in TestKind:
        minimum = minimum_length(kind)
        if array.size < minimum:
            logger.warning(f"Skipping {kind.value}: needs {minimum} bits, string has {array.size}")
            continue
        results.append(run_test(kind, array, alpha))
    logger.info(
        f"Battery on {array.size} bits: "
        f"{sum(r.passed for r in results)}/{len(results)} tests at p >= alpha"
    )
    return results


def battery_table(results: List[TestResult]) -> str:
    lines = [f"{'Test':<20}{'p-value':>10}  Result", "-" * 38]
    for r in results:
        lines.append(f"{r.test_name:<20}{r.p_value:>10.4f}  {'pass' if r.passed else 'FAIL'}")
    return "\n".join(lines)


def battery_to_json(results: List[TestResult]) -> str:
    return json.dumps(
        [{"test": r.test_name, "p_value": r.p_value, "pass": r.passed} for r in results],
        indent=2,
    )
