"""Ingestion, aggregation and file formats for CHSH trial logs."""

import json
import warnings
from pathlib import Path
from typing import Dict, Iterable, Optional, Sequence, Tuple, Union

import numpy as np

from src.data.schemas import CELLS, INPUT_PAIRS, CountsTable, TrialLog
from src.utils.errors import (
    DomainError,
    EmptyLogError,
    MalformedRowError,
    MissingInputError,
)
from src.utils.logger import logger

CSV_HEADER = "round,x,y,a,b"
OUTPUT_STREAMS = ("a", "b", "x", "y", "ab", "xy")

RawRow = Union[str, Sequence]
PathLike = Union[str, Path]


def _parse_row(row: RawRow, line_no: int) -> Tuple[int, int, int, int, int]:
    fields = row.strip().split(",") if isinstance(row, str) else list(row)
    if len(fields) != 5:
        raise MalformedRowError(
            f"row {line_no}: expected 5 fields (round,x,y,a,b), got {len(fields)}"
        )
    try:
        values = tuple(int(str(field).strip()) for field in fields)
    except ValueError as e:
        raise MalformedRowError(f"row {line_no}: {e}") from e
    return values  # type: ignore[return-value]


def _check_columns(data: np.ndarray) -> None:
    """Validate an (n, 5) integer array of round,x,y,a,b."""
    bad = np.nonzero((data[:, 1:] < 0) | (data[:, 1:] > 1))[0]
    if bad.size:
        first = int(bad[0])
        raise DomainError(
            f"row {first + 1}: inputs and outputs must be 0 or 1, got {data[first, 1:].tolist()}"
        )
    expected = np.arange(1, data.shape[0] + 1)
    mismatch = np.nonzero(data[:, 0] != expected)[0]
    if mismatch.size:
        first = int(mismatch[0])
        raise MalformedRowError(
            f"row {first + 1}: round index {int(data[first, 0])} breaks the sequence 1..n"
        )


def ingest_log(rows: Iterable[RawRow]) -> TrialLog:
    """Parse raw ``round,x,y,a,b`` records into a validated TrialLog."""
    parsed = [_parse_row(row, i + 1) for i, row in enumerate(rows)]
    if not parsed:
        raise EmptyLogError("trial log is empty")
    data = np.array(parsed, dtype=np.int64)
    _check_columns(data)
    log = TrialLog(x=data[:, 1], y=data[:, 2], a=data[:, 3], b=data[:, 4])
    logger.info(f"Ingested trial log with n={log.n}")
    return log


def read_trial_csv(path: PathLike) -> TrialLog:
    """Read a header-bearing trial CSV (``round,x,y,a,b``)."""
    path = Path(path)
    with path.open("r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != CSV_HEADER:
            raise MalformedRowError(
                f"{path}: expected header '{CSV_HEADER}', found '{header}'"
            )
        try:
            with warnings.catch_warnings():
                # loadtxt warns on an empty body; emptiness is reported below
                warnings.simplefilter("ignore", UserWarning)
                data = np.loadtxt(fh, delimiter=",", dtype=np.int64, ndmin=2)
        except ValueError as e:
            raise MalformedRowError(f"{path}: {e}") from e
    if data.size == 0:
        raise EmptyLogError(f"{path}: trial log is empty")
    if data.shape[1] != 5:
        raise MalformedRowError(
            f"{path}: expected 5 columns (round,x,y,a,b), got {data.shape[1]}"
        )
    _check_columns(data)
    log = TrialLog(x=data[:, 1], y=data[:, 2], a=data[:, 3], b=data[:, 4])
    logger.info(f"Read trial log {path} with n={log.n}")
    return log


def write_trial_csv(log: TrialLog, path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    rounds = np.arange(1, log.n + 1, dtype=np.int64)
    table = np.column_stack([rounds, log.x, log.y, log.a, log.b])
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        np.savetxt(fh, table, fmt="%d", delimiter=",", header=CSV_HEADER, comments="")
    logger.debug(f"Wrote {log.n} trials to {path}")
    return path


def aggregate(log: TrialLog, chunk_size: int = 1 << 22) -> CountsTable:
    """Count N(a,b;x,y) over the log.

    The log is reduced in chunks whose partial tables are merged, so the
    result does not depend on trial order.
    """
    totals = np.zeros(16, dtype=np.uint64)
    for start in range(0, log.n, chunk_size):
        stop = start + chunk_size
        index = (
            log.a[start:stop].astype(np.int64) * 8
            + log.b[start:stop].astype(np.int64) * 4
            + log.x[start:stop].astype(np.int64) * 2
            + log.y[start:stop].astype(np.int64)
        )
        totals += np.bincount(index, minlength=16).astype(np.uint64)
    return CountsTable(counts={cell: int(totals[i]) for i, cell in enumerate(CELLS)})


def conditional_probs(counts: CountsTable) -> Dict[Tuple[int, int, int, int], float]:
    """Empirical P(ab|xy) = N(a,b;x,y) / N(x,y)."""
    totals = counts.totals
    missing = [pair for pair, total in totals.items() if total == 0]
    if missing:
        raise MissingInputError(f"no trials observed for input pairs {missing}")
    return {
        (a, b, x, y): counts.count(a, b, x, y) / totals[(x, y)]
        for (a, b, x, y) in CELLS
    }


def counts_from_table(
    rows: Dict[Tuple[int, int], Sequence[int]]
) -> CountsTable:
    """Build counts from per-input rows ``(N00, N01, N10, N11)`` as in the published data."""
    counts = {}
    for (x, y) in INPUT_PAIRS:
        n00, n01, n10, n11 = rows[(x, y)]
        counts[(0, 0, x, y)] = n00
        counts[(0, 1, x, y)] = n01
        counts[(1, 0, x, y)] = n10
        counts[(1, 1, x, y)] = n11
    return CountsTable(counts=counts)


def log_from_counts(counts: CountsTable, shuffle_seed: Optional[int] = None) -> TrialLog:
    """Rebuild a trial log realising ``counts``, optionally in shuffled order."""
    cells = np.repeat(
        np.array(CELLS, dtype=np.uint8),
        [counts.counts[cell] for cell in CELLS],
        axis=0,
    )
    if shuffle_seed is not None:
        cells = np.random.default_rng(shuffle_seed).permutation(cells)
    return TrialLog(x=cells[:, 2], y=cells[:, 3], a=cells[:, 0], b=cells[:, 1])


def write_counts_json(counts: CountsTable, path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(counts.to_json_dict(), indent=2) + "\n", encoding="utf-8")
    return path


def read_counts_json(path: PathLike) -> CountsTable:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    raw = data.get("counts", {})
    if len(raw) != 16:
        raise DomainError(f"{path}: expected 16 count entries, found {len(raw)}")
    counts = CountsTable(counts=raw)
    if "n" in data and int(data["n"]) != counts.n:
        raise DomainError(f"{path}: n={data['n']} but the counts sum to {counts.n}")
    return counts


def output_bits(log: TrialLog, stream: str) -> np.ndarray:
    """Bit strings of one log column, or the interleaved pairs 'ab' / 'xy'."""
    if stream not in OUTPUT_STREAMS:
        raise ValueError(f"Unknown stream '{stream}'. Supported: {OUTPUT_STREAMS}")
    if stream == "ab":
        return np.stack([log.a, log.b], axis=1).reshape(-1)
    if stream == "xy":
        return np.stack([log.x, log.y], axis=1).reshape(-1)
    return np.asarray(getattr(log, stream))
