"""Seeded Toeplitz hashing of the raw output string.

The m_out x n_in binary Toeplitz matrix is T[i][j] = seed[i - j + n_in - 1],
so the product T.raw over GF(2) is a slice of the full convolution of seed and
raw, reduced mod 2. Output length follows the leftover hash lemma margin
2*log2(1/eps_ext).
"""

import math
from pathlib import Path
from typing import Iterable, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator
from scipy.signal import fftconvolve

from src.data.schemas import TrialLog
from src.data.trial_log import output_bits
from src.utils.errors import DomainError, LengthMismatchError
from src.utils.logger import logger

# Above this many multiply-adds the FFT path is used.
DIRECT_CONVOLVE_LIMIT = 1 << 22
HEADER_BYTES = 8

PathLike = Union[str, Path]


def _as_bit_array(v) -> np.ndarray:
    bits = np.array(v, dtype=np.int64).reshape(-1)
    if bits.size and (bits.min() < 0 or bits.max() > 1):
        raise ValueError("bit strings may only contain 0 and 1")
    return bits.astype(np.uint8)


class ExtractorParams(BaseModel):
    n_in: int = Field(ge=1)
    m_out: int = Field(ge=1)
    eps_ext: float = Field(gt=0.0, lt=1.0)
    seed: np.ndarray

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    @field_validator("seed", mode="before")
    @classmethod
    def _seed_bits(cls, v):
        return _as_bit_array(v)

    def __init__(self, **data) -> None:
        super().__init__(**data)
        # Checked after validation so the error is not wrapped in a ValidationError
        expected = seed_length(self.n_in, self.m_out)
        if self.seed.size != expected:
            raise LengthMismatchError(
                f"seed has {self.seed.size} bits, a {self.m_out}x{self.n_in} Toeplitz matrix needs {expected}"
            )


def seed_length(n_in: int, m_out: int) -> int:
    return n_in + m_out - 1


def output_length(min_entropy_bits: float, eps_ext: float) -> int:
    """floor(H - 2*log2(1/eps_ext)), never negative."""
    if min_entropy_bits < 0:
        raise DomainError(f"min-entropy must be non-negative, got {min_entropy_bits}")
    if not 0.0 < eps_ext < 1.0:
        raise DomainError(f"eps_ext must lie in (0, 1), got {eps_ext}")
    return max(0, math.floor(min_entropy_bits - 2.0 * math.log2(1.0 / eps_ext)))


def _toeplitz_product(seed: np.ndarray, raw: np.ndarray, m_out: int) -> np.ndarray:
    n_in = raw.size
    if n_in * m_out <= DIRECT_CONVOLVE_LIMIT:
        full = np.convolve(seed.astype(np.int64), raw.astype(np.int64))
    else:
        full = np.rint(fftconvolve(seed.astype(float), raw.astype(float))).astype(np.int64)
    return (full[n_in - 1 : n_in - 1 + m_out] & 1).astype(np.uint8)


def toeplitz_extract(raw, params: ExtractorParams) -> np.ndarray:
    raw = _as_bit_array(raw)
    if raw.size != params.n_in:
        raise LengthMismatchError(f"raw string has {raw.size} bits, params expect {params.n_in}")
    out = _toeplitz_product(params.seed, raw, params.m_out)
    logger.info(f"Toeplitz extraction: {params.n_in} -> {params.m_out} bits")
    return out


def toeplitz_extract_blocks(blocks: Iterable, params: ExtractorParams) -> np.ndarray:
    """Streaming evaluation over consecutive chunks of the raw string.

    A chunk covering raw[j0 : j0 + L] multiplies the sub-matrix whose
    generating window is seed[n_in - j0 - L : n_in - 1 - j0 + m_out].
    """
    out = np.zeros(params.m_out, dtype=np.uint8)
    j0 = 0
    for block in blocks:
        block = _as_bit_array(block)
        length = block.size
        if length == 0:
            continue
        if j0 + length > params.n_in:
            raise LengthMismatchError(f"blocks exceed the {params.n_in} input bits")
        window = params.seed[params.n_in - j0 - length : params.n_in - 1 - j0 + params.m_out]
        out ^= _toeplitz_product(window, block, params.m_out)
        j0 += length
    if j0 != params.n_in:
        raise LengthMismatchError(f"blocks hold {j0} bits, params expect {params.n_in}")
    return out


def raw_bits_from_log(log: TrialLog) -> np.ndarray:
    """The raw string a1, b1, a2, b2, ..."""
    return output_bits(log, "ab")


def write_bits(bits, path: PathLike) -> Path:
    """Store bits with an 8-byte little-endian bit count, packed MSB first."""
    bits = _as_bit_array(bits)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = np.array([bits.size], dtype="<u8").tobytes()
    path.write_bytes(header + np.packbits(bits, bitorder="big").tobytes())
    return path


def read_bits(path: PathLike) -> np.ndarray:
    data = Path(path).read_bytes()
    if len(data) < HEADER_BYTES:
        raise LengthMismatchError(f"{path}: missing the {HEADER_BYTES}-byte length header")
    n_bits = int(np.frombuffer(data[:HEADER_BYTES], dtype="<u8")[0])
    payload = np.frombuffer(data[HEADER_BYTES:], dtype=np.uint8)
    if payload.size * 8 < n_bits:
        raise LengthMismatchError(f"{path}: header announces {n_bits} bits, file holds {payload.size * 8}")
    return np.unpackbits(payload, bitorder="big")[:n_bits]
