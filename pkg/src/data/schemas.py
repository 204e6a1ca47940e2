import enum
import math
from itertools import product
from typing import Dict, Iterator, List, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

# --- Index conventions --- #

# Input pairs (x, y) in the order used for arrays and tables.
INPUT_PAIRS: List[Tuple[int, int]] = [(0, 0), (0, 1), (1, 0), (1, 1)]

# Count cells (a, b, x, y) in lexicographic order.
CELLS: List[Tuple[int, int, int, int]] = list(product((0, 1), repeat=4))

MAX_COUNT = 2**64 - 1
NORMALIZATION_TOL = 1e-12


def _pair_key(key) -> Tuple[int, ...]:
    """Accept tuples as well as the comma-joined digit strings used on disk."""
    if isinstance(key, str):
        return tuple(int(part) for part in key.split(","))
    return tuple(int(part) for part in key)


# --- Trial schemas --- #


class TrialRecord(BaseModel):
    """One round of the experiment: inputs (x, y) and outputs (a, b)."""

    round: int = Field(ge=1)
    x: int = Field(ge=0, le=1)
    y: int = Field(ge=0, le=1)
    a: int = Field(ge=0, le=1)
    b: int = Field(ge=0, le=1)

    model_config = ConfigDict(frozen=True)


class TrialLog(BaseModel):
    """Ordered trial log stored column-wise.

    Round indices are implicit: trial ``i`` of the columns is round ``i + 1``.
    Columns are copied to read-only ``uint8`` arrays on construction.
    """

    x: np.ndarray
    y: np.ndarray
    a: np.ndarray
    b: np.ndarray

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    @field_validator("x", "y", "a", "b", mode="before")
    @classmethod
    def _as_bit_column(cls, v):
        column = np.array(v, dtype=np.int64).reshape(-1)
        if column.size and (column.min() < 0 or column.max() > 1):
            raise ValueError("trial columns must only contain 0 or 1")
        column = column.astype(np.uint8)
        column.setflags(write=False)
        return column

    def model_post_init(self, __context) -> None:
        lengths = {len(self.x), len(self.y), len(self.a), len(self.b)}
        if len(lengths) != 1:
            raise ValueError(f"trial columns have different lengths: {sorted(lengths)}")
        if len(self.x) == 0:
            raise ValueError("a trial log needs at least one trial")

    @property
    def n(self) -> int:
        return int(len(self.x))

    def record(self, index: int) -> TrialRecord:
        """Return the record at 0-based ``index`` (round ``index + 1``)."""
        return TrialRecord(
            round=index + 1,
            x=int(self.x[index]),
            y=int(self.y[index]),
            a=int(self.a[index]),
            b=int(self.b[index]),
        )

    def records(self) -> Iterator[TrialRecord]:
        for i in range(self.n):
            yield self.record(i)

    def concat(self, other: "TrialLog") -> "TrialLog":
        """Append ``other`` after this log; rounds of ``other`` are renumbered."""
        return TrialLog(
            x=np.concatenate([self.x, other.x]),
            y=np.concatenate([self.y, other.y]),
            a=np.concatenate([self.a, other.a]),
            b=np.concatenate([self.b, other.b]),
        )

    @classmethod
    def from_records(cls, records: List[TrialRecord]) -> "TrialLog":
        return cls(
            x=[r.x for r in records],
            y=[r.y for r in records],
            a=[r.a for r in records],
            b=[r.b for r in records],
        )

    def settings_array(self) -> np.ndarray:
        """Inputs as an (n, 2) array of (x, y)."""
        return np.stack([self.x, self.y], axis=1)


# --- Input distribution --- #


class SettingsDistribution(BaseModel):
    """The law P(x, y) used to pick the inputs of every trial."""

    probs: Dict[Tuple[int, int], float]

    model_config = ConfigDict(frozen=True)

    @field_validator("probs", mode="before")
    @classmethod
    def _normalize_keys(cls, v):
        return {_pair_key(k): float(p) for k, p in dict(v).items()}

    @field_validator("probs")
    @classmethod
    def _check_probs(cls, v):
        if set(v) != set(INPUT_PAIRS):
            raise ValueError(f"probabilities must be given for exactly {INPUT_PAIRS}")
        if any(p < 0 or not math.isfinite(p) for p in v.values()):
            raise ValueError("probabilities must be finite and non-negative")
        total = math.fsum(v.values())
        if abs(total - 1.0) > NORMALIZATION_TOL:
            raise ValueError(f"probabilities sum to {total!r}, not 1")
        return {pair: v[pair] for pair in INPUT_PAIRS}

    @property
    def q(self) -> float:
        """Probability of the least likely input pair."""
        return min(self.probs.values())

    def prob(self, x: int, y: int) -> float:
        return self.probs[(x, y)]

    @property
    def is_uniform(self) -> bool:
        return all(abs(p - 0.25) <= NORMALIZATION_TOL for p in self.probs.values())

    @property
    def entropy_bits(self) -> float:
        """Shannon entropy of one input pair, in bits."""
        return -math.fsum(p * math.log2(p) for p in self.probs.values() if p > 0)

    def as_array(self) -> np.ndarray:
        return np.array([self.probs[pair] for pair in INPUT_PAIRS], dtype=float)

    def to_dict(self) -> Dict[str, float]:
        return {f"{x},{y}": p for (x, y), p in self.probs.items()}

    @classmethod
    def uniform(cls) -> "SettingsDistribution":
        return cls(probs={pair: 0.25 for pair in INPUT_PAIRS})

    @classmethod
    def biased(cls, q: float) -> "SettingsDistribution":
        """P(00) = 1 - 3q and q for the three other pairs."""
        if not 0.0 <= q <= 1.0 / 3.0:
            raise ValueError(f"q must lie in [0, 1/3], got {q}")
        return cls(probs={(0, 0): 1.0 - 3.0 * q, (0, 1): q, (1, 0): q, (1, 1): q})

    @classmethod
    def catalysis(cls, n: int, alpha: float = 11.0) -> "SettingsDistribution":
        """Biased inputs with q = alpha / sqrt(n)."""
        return cls.biased(alpha / math.sqrt(n))

    @classmethod
    def product_biased(cls, q: float) -> "SettingsDistribution":
        """Independent sides, each choosing input 1 with probability q."""
        if not 0.0 <= q <= 1.0:
            raise ValueError(f"q must lie in [0, 1], got {q}")
        return cls(
            probs={
                (0, 0): (1.0 - q) ** 2,
                (0, 1): q * (1.0 - q),
                (1, 0): q * (1.0 - q),
                (1, 1): q * q,
            }
        )


# --- Aggregated counts --- #


class CountsTable(BaseModel):
    """The sixteen counts N(a, b; x, y)."""

    counts: Dict[Tuple[int, int, int, int], int]

    model_config = ConfigDict(frozen=True)

    @field_validator("counts", mode="before")
    @classmethod
    def _normalize_keys(cls, v):
        return {_pair_key(k): int(c) for k, c in dict(v).items()}

    @field_validator("counts")
    @classmethod
    def _check_counts(cls, v):
        if set(v) != set(CELLS):
            raise ValueError("counts must contain exactly the 16 cells (a,b,x,y)")
        if any(c < 0 or c > MAX_COUNT for c in v.values()):
            raise ValueError("counts must be unsigned 64-bit integers")
        return {cell: v[cell] for cell in CELLS}

    @property
    def n(self) -> int:
        return sum(self.counts.values())

    def count(self, a: int, b: int, x: int, y: int) -> int:
        return self.counts[(a, b, x, y)]

    def total(self, x: int, y: int) -> int:
        """N(x, y), the number of trials with inputs (x, y)."""
        return sum(self.counts[(a, b, x, y)] for a in (0, 1) for b in (0, 1))

    @property
    def totals(self) -> Dict[Tuple[int, int], int]:
        return {pair: self.total(*pair) for pair in INPUT_PAIRS}

    def agree(self, x: int, y: int) -> int:
        """N(a=b, xy)."""
        return self.counts[(0, 0, x, y)] + self.counts[(1, 1, x, y)]

    def disagree(self, x: int, y: int) -> int:
        """N(a!=b, xy)."""
        return self.counts[(0, 1, x, y)] + self.counts[(1, 0, x, y)]

    def merge(self, other: "CountsTable") -> "CountsTable":
        return CountsTable(
            counts={cell: self.counts[cell] + other.counts[cell] for cell in CELLS}
        )

    @classmethod
    def zeros(cls) -> "CountsTable":
        return cls(counts={cell: 0 for cell in CELLS})

    def to_json_dict(self) -> dict:
        return {
            "n": self.n,
            "counts": {",".join(str(d) for d in cell): c for cell, c in self.counts.items()},
        }


# --- Simulation configs --- #


class DeviceKind(str, enum.Enum):
    HONEST = "honest"
    DETERMINISTIC = "deterministic"
    MEMORY_LHV = "memory_lhv"
    PR_BOX = "pr_box"


class DeviceModel(BaseModel):
    """Device kind and its parameters; angles are in degrees."""

    kind: DeviceKind = DeviceKind.HONEST
    visibility: float = Field(1.0, ge=0.0, le=1.0)
    chi_deg: float = 90.0
    phi_a_deg: Tuple[float, float] = (0.0, 90.0)
    phi_b_deg: Tuple[float, float] = (45.0, 135.0)
    a_table: Tuple[int, int] = (0, 0)
    b_table: Tuple[int, int] = (0, 0)
    strategy: str = "transcript_switching"

    model_config = ConfigDict(frozen=True)

    @field_validator("a_table", "b_table")
    @classmethod
    def _check_table(cls, v):
        if any(bit not in (0, 1) for bit in v):
            raise ValueError(f"output tables must hold bits, got {v}")
        return v


class RunConfig(BaseModel):
    n: int = Field(ge=1)
    dist: SettingsDistribution = Field(default_factory=SettingsDistribution.uniform)
    rng_seed: int = Field(0, ge=0, le=MAX_COUNT)
    device: DeviceModel = Field(default_factory=DeviceModel)

    model_config = ConfigDict(frozen=True)
